#include "shelab/heat_kernel.hpp"

#include <cmath>
#include <numbers>

#include "shelab/common.hpp"
#include "shelab/quadrature.hpp"

namespace shelab {

void KernelConfig::validate() const {
    require(periodization_terms >= 1, "periodization_terms must be >= 1");
    require(quad_abs_tol > 0.0, "quad_abs_tol must be > 0");
    require(quad_max_subdiv >= 1, "quad_max_subdiv must be >= 1");
}

double gaussian_density(double t, double x) {
    if (!(t > 0.0)) throw DomainError("gaussian_density: t must be > 0");
    return std::exp(-x * x / (2.0 * t)) / std::sqrt(2.0 * std::numbers::pi * t);
}

int periodization_extent(double t, const KernelConfig& cfg) {
    if (!(t > 0.0)) throw DomainError("periodization_extent: t must be > 0");
    const double cutoff = cfg.quad_abs_tol / 10.0;
    int k = 1;
    while (gaussian_density(t, static_cast<double>(k - 1)) >= cutoff) ++k;
    return std::max(k, cfg.periodization_terms);
}

namespace {

double wrap_unit(double x) {
    double r = x - std::floor(x);
    return r >= 1.0 ? 0.0 : r;
}

double lattice_sum(double t, double x, int extent) {
    double sum = 0.0;
    for (int k = -extent; k <= extent; ++k) sum += gaussian_density(t, x + k);
    return sum;
}

// sum_k [2 p(t, a + k) - p(t, a + k + d) - p(t, a + k - d)], term by term so
// the sign of each convex piece survives rounding.
double lattice_second_difference(double t, double a, double d, int extent) {
    double sum = 0.0;
    for (int k = -extent; k <= extent; ++k) {
        const double c = a + k;
        sum += 2.0 * gaussian_density(t, c) - gaussian_density(t, c + d) -
               gaussian_density(t, c - d);
    }
    return sum;
}

}  // namespace

double torus_kernel(double t, double x, const KernelConfig& cfg) {
    if (!(t > 0.0)) throw DomainError("torus_kernel: t must be > 0");
    return lattice_sum(t, wrap_unit(x), periodization_extent(t, cfg));
}

double lambda_theta(double theta) {
    if (!(theta > 0.0 && theta <= 0.5)) throw DomainError("lambda_theta: theta must lie in (0, 1/2]");
    // sqrt(pi) written as Gamma(1/2) so the theta = 1/2 case is exactly 1
    return std::pow(2.0, 0.5 - theta) * std::tgamma(1.0 - theta) / std::tgamma(0.5);
}

double lambda_integral(double theta) {
    if (!(theta > 0.0 && theta <= 0.5)) throw DomainError("lambda_integral: theta must lie in (0, 1/2]");
    const double a = 0.5 - theta;
    return std::pow(2.0, a / 2.0) * std::tgamma((a + 1.0) / 2.0) / std::tgamma(0.5);
}

std::vector<double> grid_heat_weights(std::size_t n_x, double t, const KernelConfig& cfg) {
    require(n_x >= 1, "grid_heat_weights: empty grid");
    require(t >= 0.0, "grid_heat_weights: t must be >= 0");
    std::vector<double> w(n_x, 0.0);
    if (t == 0.0) {
        w[0] = 1.0;
        return w;
    }
    const double dx = 1.0 / static_cast<double>(n_x);
    const int extent = periodization_extent(t, cfg);
    double mass = 0.0;
    for (std::size_t m = 0; m < n_x; ++m) {
        w[m] = lattice_sum(t, m * dx, extent);
        mass += w[m];
    }
    for (double& v : w) v /= mass;
    return w;
}

std::vector<double> kernel_convolve(std::span<const double> u0, double t, const KernelConfig& cfg) {
    require(t >= 0.0, "kernel_convolve: t must be >= 0");
    const std::size_t n = u0.size();
    if (t == 0.0 || n == 0) return {u0.begin(), u0.end()};
    const auto w = grid_heat_weights(n, t, cfg);
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t m = 0; m < n; ++m) acc += w[m] * u0[(i + n - m) % n];
        out[i] = acc;
    }
    return out;
}

double shifted_increment_covariance(double t1, double delta, double offset, const KernelConfig& cfg) {
    require(t1 >= 0.0, "shifted_increment_covariance: t1 must be >= 0");
    cfg.validate();
    const double a = wrap_unit(offset);
    const double d = delta;
    auto integrand = [&](double s) {
        const double two_s = 2.0 * s;
        return lattice_second_difference(two_s, a, d, periodization_extent(two_s, cfg) + 1);
    };
    return quad::integrate_sqrt_singular(integrand, t1, cfg.quad_abs_tol, cfg.quad_max_subdiv);
}

double increment_variance_quadrature(IncrementKind kind, double first, double second,
                                     const KernelConfig& cfg) {
    cfg.validate();
    const double tol = cfg.quad_abs_tol;
    const int depth = cfg.quad_max_subdiv;
    auto diagonal = [&](double r) {
        // int_T G(r, y)^2 dy = G(2r, 0)
        return torus_kernel(2.0 * r, 0.0, cfg);
    };
    switch (kind) {
        case IncrementKind::spatial_shift: {
            require(first >= 0.0, "spatial_shift: t1 must be >= 0");
            if (second == 0.0 || first == 0.0) return 0.0;
            return shifted_increment_covariance(first, second, 0.0, cfg);
        }
        case IncrementKind::time_window: {
            const double s = first, t = second;
            require(s >= 0.0 && t >= s, "time_window: need 0 <= s <= t");
            if (t == s) return 0.0;
            const double upper = quad::integrate_sqrt_singular(diagonal, t, tol / 2, depth);
            const double lower = quad::integrate_sqrt_singular(diagonal, s, tol / 2, depth);
            return upper - lower;
        }
        case IncrementKind::time_cross: {
            const double s = first, t = second;
            require(s >= 0.0 && t >= s, "time_cross: need 0 <= s <= t");
            const double h = t - s;
            if (h == 0.0 || s == 0.0) return 0.0;
            // q = s - r; int_T [G(q+h) - G(q)]^2 = G(2q+2h,0) - 2 G(2q+h,0) + G(2q,0)
            auto integrand = [&](double q) {
                return torus_kernel(2.0 * (q + h), 0.0, cfg) - 2.0 * torus_kernel(2.0 * q + h, 0.0, cfg) +
                       torus_kernel(2.0 * q, 0.0, cfg);
            };
            return quad::integrate_sqrt_singular(integrand, s, tol, depth);
        }
    }
    throw DomainError("increment_variance_quadrature: unknown kind");
}

double spatial_shift_variance_direct(double t1, double delta, const KernelConfig& cfg) {
    require(t1 >= 0.0, "spatial_shift_variance_direct: t1 must be >= 0");
    cfg.validate();
    const double d = wrap_unit(delta);
    if (d == 0.0 || t1 == 0.0) return 0.0;
    const double tol = cfg.quad_abs_tol;
    const int depth = cfg.quad_max_subdiv;
    auto inner = [&](double s) {
        const int extent = periodization_extent(s, cfg);
        auto sq = [&](double y) {
            const double diff = lattice_sum(s, wrap_unit(y + d), extent) - lattice_sum(s, y, extent);
            return diff * diff;
        };
        // break at the two kernel peaks, y = 0 and y = 1 - delta
        return quad::adaptive_simpson(sq, 0.0, 1.0 - d, tol / 4, depth) +
               quad::adaptive_simpson(sq, 1.0 - d, 1.0, tol / 4, depth);
    };
    return quad::integrate_sqrt_singular(inner, t1, tol / 2, depth);
}

}  // namespace shelab
