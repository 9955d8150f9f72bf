#include "shelab/holder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "shelab/quadrature.hpp"

namespace shelab {

std::string to_string(Metric m) { return m == Metric::torus ? "torus" : "representative"; }

Metric metric_from_string(const std::string& s) {
    if (s == "representative") return Metric::representative;
    if (s == "torus") return Metric::torus;
    throw DomainError("unknown metric: " + s);
}

std::size_t default_stride(std::size_t n_t) { return n_t <= 1024 ? 1 : 4; }

namespace {

void check_theta(double theta) {
    require(theta > 0.0 && theta <= 0.5, "theta must lie in (0, 1/2]");
}

// den[g] = d(g)^{e} for index gap g
std::vector<double> spatial_denominators(std::size_t n, double theta, Metric metric, double dx) {
    const double e = 0.5 - theta;
    std::vector<double> den(n, 0.0);
    for (std::size_t g = 1; g < n; ++g) {
        double d = static_cast<double>(g) * dx;
        if (metric == Metric::torus) d = std::min(d, 1.0 - d);
        den[g] = std::pow(d, e);
    }
    return den;
}

std::vector<double> temporal_denominators(std::size_t n, double theta, double T) {
    const double e = 0.25 - 0.5 * theta;
    const double dt = T / static_cast<double>(n - 1);
    std::vector<double> den(n, 0.0);
    for (std::size_t g = 1; g < n; ++g) den[g] = std::pow(static_cast<double>(g) * dt, e);
    return den;
}

struct Best {
    double value = 0.0;
    std::size_t i = 0, j = 0;
};

Best scan_pairs(std::span<const double> f, const std::vector<double>& den, std::size_t stride) {
    Best best;
    const std::size_t n = f.size();
    for (std::size_t i = 0; i < n; i += stride)
        for (std::size_t j = i + stride; j < n; j += stride) {
            const double r = std::abs(f[i] - f[j]) / den[j - i];
            if (r > best.value) best = {r, i, j};
        }
    return best;
}

}  // namespace

SeminormResult spatial_seminorm(std::span<const double> row, double theta, Metric metric, double dx) {
    check_theta(theta);
    require(row.size() >= 2, "spatial_seminorm: need at least 2 points");
    if (dx == 0.0) dx = 1.0 / static_cast<double>(row.size());
    require(dx > 0.0, "spatial_seminorm: dx must be > 0");
    if (metric == Metric::torus)
        require(std::abs(dx * static_cast<double>(row.size()) - 1.0) < 1e-12,
                "spatial_seminorm: torus metric needs a full periodic row");
    const auto den = spatial_denominators(row.size(), theta, metric, dx);
    const Best b = scan_pairs(row, den, 1);
    return {b.value, {0, b.i, 0, b.j}, theta, metric, 1};
}

SeminormResult temporal_seminorm(std::span<const double> column, double theta, double T, std::size_t stride) {
    check_theta(theta);
    require(column.size() >= 2, "temporal_seminorm: need at least 2 points");
    require(stride >= 1, "temporal_seminorm: stride must be >= 1");
    require(T > 0.0, "temporal_seminorm: T must be > 0");
    const auto den = temporal_denominators(column.size(), theta, T);
    const Best b = scan_pairs(column, den, stride);
    return {b.value, {b.i, 0, b.j, 0}, theta, Metric::representative, stride};
}

SeminormResult sup_spatial(const Array2D& values, double theta, Metric metric) {
    check_theta(theta);
    require(values.cols() >= 2, "sup_spatial: need at least 2 columns");
    const auto den = spatial_denominators(values.cols(), theta, metric, 1.0 / static_cast<double>(values.cols()));
    SeminormResult out{0.0, {}, theta, metric, 1};
    for (std::size_t r = 0; r < values.rows(); ++r) {
        const Best b = scan_pairs(values.row(r), den, 1);
        if (b.value > out.value) {
            out.value = b.value;
            out.arg_pair = {r, b.i, r, b.j};
        }
    }
    return out;
}

SeminormResult sup_temporal(const Array2D& values, double theta, double T, std::size_t stride) {
    check_theta(theta);
    require(values.rows() >= 2, "sup_temporal: need at least 2 rows");
    require(stride >= 1, "sup_temporal: stride must be >= 1");
    const auto den = temporal_denominators(values.rows(), theta, T);
    SeminormResult out{0.0, {}, theta, Metric::representative, stride};
    for (std::size_t c = 0; c < values.cols(); ++c) {
        const auto col = values.column(c);
        const Best b = scan_pairs(col, den, stride);
        if (b.value > out.value) {
            out.value = b.value;
            out.arg_pair = {b.i, c, b.j, c};
        }
    }
    return out;
}

SeminormResult combined_seminorm(const Array2D& values, double theta, double T, std::size_t stride, Metric metric) {
    auto s = sup_spatial(values, theta, metric);
    auto t = sup_temporal(values, theta, T, stride);
    SeminormResult out = s.value >= t.value ? s : t;
    out.metric = metric;
    out.stride = stride;
    return out;
}

SeminormResult combined_seminorm(const FieldPath& path, double theta, std::size_t stride, Metric metric) {
    return combined_seminorm(path.values, theta, path.grid.T, stride, metric);
}

RatioField normalized_increments(const Array2D& values, double theta, double T, RatioKind kind, Metric metric) {
    check_theta(theta);
    const bool spatial = kind == RatioKind::spatial;
    const std::size_t len = spatial ? values.cols() : values.rows();
    const std::size_t lines = spatial ? values.rows() : values.cols();
    require(len >= 2, "normalized_increments: need at least 2 points");
    const auto den = spatial ? spatial_denominators(len, theta, metric, 1.0 / static_cast<double>(len))
                             : temporal_denominators(len, theta, T);
    RatioField out;
    for (std::size_t i = 0; i < len; ++i)
        for (std::size_t j = i + 1; j < len; ++j) out.pairs.push_back({i, j});
    out.ratios = Array2D(lines, out.pairs.size());
    for (std::size_t l = 0; l < lines; ++l) {
        std::vector<double> f = spatial ? std::vector<double>(values.row(l).begin(), values.row(l).end())
                                        : values.column(l);
        for (std::size_t p = 0; p < out.pairs.size(); ++p) {
            const auto [i, j] = out.pairs[p];
            out.ratios(l, p) = std::abs(f[i] - f[j]) / den[j - i];
        }
    }
    return out;
}

void HolderFunction::validate(std::size_t step) const {
    require(values.rows() >= 2 && values.cols() >= 2, "HolderFunction: grid too small");
    require(gamma > 0.0 && gamma <= 1.0, "HolderFunction: gamma must lie in (0, 1]");
    require(beta > 0.0 && beta <= 1.0, "HolderFunction: beta must lie in (0, 1]");
    require(step >= 1, "HolderFunction: step must be >= 1");
    const std::size_t nt = values.rows(), nx = values.cols();
    const double dt = T / static_cast<double>(nt - 1);
    const double dx = 1.0 / static_cast<double>(nx);
    double worst = std::abs(values(0, 0));
    double sup = 0.0;
    for (std::size_t a = 0; a < nt; a += step)
        for (std::size_t b = 0; b < nx; b += step)
            for (std::size_t c = a; c < nt; c += step)
                for (std::size_t d = 0; d < nx; d += step) {
                    if (c == a && d <= b) continue;
                    const double tau = static_cast<double>(c - a) * dt;
                    const double xi = std::abs(static_cast<double>(d) - static_cast<double>(b)) * dx;
                    const double ratio =
                        std::abs(values(a, b) - values(c, d)) / (std::pow(tau, gamma) + std::pow(xi, beta));
                    sup = std::max(sup, ratio);
                }
    worst += sup;
    require(worst <= norm_bound + 1e-9, "HolderFunction: sampled increments exceed the declared norm");
}

namespace {

double bump_mass() {
    static const double mass = quad::adaptive_simpson(
        [](double x) { return std::abs(x) < 1.0 ? std::exp(-1.0 / (1.0 - x * x)) : 0.0; }, -1.0, 1.0, 1e-14, 40,
        64);
    return mass;
}

std::vector<double> mollifier_weights(double h, std::size_t n) {
    // psi_n(m h) for |m h| < 1/n, then normalized to unit sum
    const double scale = static_cast<double>(n);
    const auto half = static_cast<std::size_t>(std::floor(1.0 / (scale * h)));
    std::vector<double> w(2 * half + 1);
    double total = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        const double m = static_cast<double>(k) - static_cast<double>(half);
        w[k] = bump(scale * m * h);
        total += w[k];
    }
    if (total == 0.0) return {1.0};
    for (double& v : w) v /= total;
    return w;
}

}  // namespace

double bump(double x) {
    if (!(std::abs(x) < 1.0)) return 0.0;
    return std::exp(-1.0 / (1.0 - x * x)) / bump_mass();
}

Array2D mollify(const HolderFunction& f, std::size_t n) {
    require(n >= 1, "mollify: n must be >= 1");
    const std::size_t nt = f.values.rows(), nx = f.values.cols();
    require(nt >= 2 && nx >= 2, "mollify: grid too small");
    const double dt = f.T / static_cast<double>(nt - 1);
    const double dx = 1.0 / static_cast<double>(nx);
    const auto wx = mollifier_weights(dx, n);
    const auto wt = mollifier_weights(dt, n);
    const auto hx = static_cast<long>(wx.size() / 2);
    const auto ht = static_cast<long>(wt.size() / 2);

    Array2D space(nt, nx);
    for (std::size_t r = 0; r < nt; ++r)
        for (std::size_t c = 0; c < nx; ++c) {
            double acc = 0.0;
            for (long k = -hx; k <= hx; ++k) {
                const long idx = ((static_cast<long>(c) - k) % static_cast<long>(nx) + static_cast<long>(nx)) %
                                 static_cast<long>(nx);
                acc += wx[static_cast<std::size_t>(k + hx)] * f.values(r, static_cast<std::size_t>(idx));
            }
            space(r, c) = acc;
        }
    Array2D out(nt, nx);
    for (std::size_t r = 0; r < nt; ++r)
        for (std::size_t c = 0; c < nx; ++c) {
            double acc = 0.0;
            for (long k = -ht; k <= ht; ++k) {
                const long idx = std::clamp(static_cast<long>(r) - k, 0L, static_cast<long>(nt) - 1);
                acc += wt[static_cast<std::size_t>(k + ht)] * space(static_cast<std::size_t>(idx), c);
            }
            out(r, c) = acc;
        }
    return out;
}

HolderFunction kink_profile(std::size_t n_t, std::size_t n_x, double T, double gamma, double beta) {
    require(n_t >= 1 && n_x >= 2 && T > 0.0, "kink_profile: bad grid");
    HolderFunction f;
    f.values = Array2D(n_t + 1, n_x);
    f.T = T;
    f.gamma = gamma;
    f.beta = beta;
    for (std::size_t r = 0; r <= n_t; ++r) {
        const double t = T * static_cast<double>(r) / static_cast<double>(n_t);
        for (std::size_t c = 0; c < n_x; ++c) {
            const double x = static_cast<double>(c) / static_cast<double>(n_x);
            f.values(r, c) = std::pow(std::abs(std::sin(std::numbers::pi * x)), beta) + std::pow(std::abs(t - T / 2), gamma);
        }
    }
    f.norm_bound = std::pow(T / 2, gamma) + std::max(1.0, std::pow(std::numbers::pi, beta));
    return f;
}

DerivativeBounds derivative_bounds(const Array2D& f, double T) {
    const std::size_t nt = f.rows(), nx = f.cols();
    require(nt >= 3 && nx >= 3, "derivative_bounds: grid too small");
    const double dt = T / static_cast<double>(nt - 1);
    const double dx = 1.0 / static_cast<double>(nx);
    DerivativeBounds b;
    for (std::size_t r = 0; r < nt; ++r)
        for (std::size_t c = 0; c < nx; ++c) {
            const double left = f(r, (c + nx - 1) % nx), right = f(r, (c + 1) % nx);
            b.dx = std::max(b.dx, std::abs(right - left) / (2 * dx));
            b.dxx = std::max(b.dxx, std::abs(right - 2 * f(r, c) + left) / (dx * dx));
            if (r > 0 && r + 1 < nt) b.dt = std::max(b.dt, std::abs(f(r + 1, c) - f(r - 1, c)) / (2 * dt));
        }
    return b;
}

SeminormResult seminorm_diff(const FieldPath& path, const HolderFunction& h, double theta, SeminormKind kind,
                             std::size_t stride, Metric metric) {
    require(h.values.rows() == path.values.rows() && h.values.cols() == path.values.cols(),
            "seminorm_diff: grid mismatch");
    require(std::abs(h.T - path.grid.T) <= 1e-12 * path.grid.T, "seminorm_diff: horizon mismatch");
    Array2D diff(path.values.rows(), path.values.cols());
    for (std::size_t k = 0; k < diff.flat().size(); ++k) diff.flat()[k] = path.values.flat()[k] - h.values.flat()[k];
    switch (kind) {
        case SeminormKind::spatial_sup: return sup_spatial(diff, theta, metric);
        case SeminormKind::temporal_sup: return sup_temporal(diff, theta, path.grid.T, stride);
        case SeminormKind::combined: return combined_seminorm(diff, theta, path.grid.T, stride, metric);
    }
    throw DomainError("seminorm_diff: unknown kind");
}

}  // namespace shelab
