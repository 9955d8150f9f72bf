#include "shelab/localization.hpp"

#include <cmath>

#include "shelab/parallel.hpp"

namespace shelab {

void LocalizationParams::validate(double horizon) const {
    require(beta > 0.0, "beta must be > 0");
    require(p >= 1.0, "p must be >= 1");
    if (enforce_window) require(beta * horizon < 0.25, "window check failed: need beta * t < 1/4");
}

std::size_t window_cells(const Grid& grid, double beta, double t) {
    return static_cast<std::size_t>(std::ceil(std::sqrt(beta * t) * static_cast<double>(grid.n_x) - 1e-12));
}

namespace {

struct Setup {
    Array2D base;                    // G_t * u0 per row
    Array2D kernels;                 // K_r, r = 0..n_t
    std::vector<std::size_t> half;   // window half-width per row, clamped
    std::vector<bool> full;          // window covers the torus
};

Setup prepare(const Grid& grid, std::span<const double> u0, double beta, bool enforce, const KernelConfig& cfg) {
    grid.validate();
    require(u0.size() == grid.n_x, "localization: u0 has the wrong length");
    LocalizationParams{beta, 0, 2.0, enforce}.validate(grid.T);
    Setup s;
    s.base = Array2D(grid.n_t + 1, grid.n_x);
    for (std::size_t n = 0; n <= grid.n_t; ++n) {
        const auto row = kernel_convolve(u0, grid.time(n), cfg);
        std::copy(row.begin(), row.end(), s.base.row(n).begin());
    }
    s.kernels = discrete_kernel_table(grid, grid.n_t);
    bool warned = false;
    for (std::size_t n = 0; n <= grid.n_t; ++n) {
        std::size_t h = window_cells(grid, beta, grid.time(n));
        const bool full = 2 * h + 1 >= grid.n_x;
        if (2 * h + 1 > grid.n_x && !warned) {
            warn("localization window exceeds the torus; clamped to the full circle");
            warned = true;
        }
        s.half.push_back(full ? grid.n_x / 2 : h);
        s.full.push_back(full);
    }
    return s;
}

// sigma(t_m, x_j, v(m, j)) dW(m, j) / dx
void fill_sources(const Grid& grid, const SigmaSpec& sigma, const Array2D& v, const NoiseField& noise,
                  std::size_t m, Array2D& src) {
    const double inv_dx = static_cast<double>(grid.n_x);
    const double t = grid.time(m);
    for (std::size_t j = 0; j < grid.n_x; ++j)
        src(m, j) = sigma(t, grid.space(j), v(m, j)) * noise.increments(m, j) * inv_dx;
}

double convolve_row(const Grid& grid, const Setup& s, const Array2D& src, std::size_t n, std::size_t i) {
    const std::size_t nx = grid.n_x;
    double acc = s.base(n, i);
    for (std::size_t m = 0; m < n; ++m) {
        const auto k = s.kernels.row(n - m);
        const auto sm = src.row(m);
        if (s.full[n]) {
            for (std::size_t j = 0; j < nx; ++j) acc += k[(i + nx - j) % nx] * sm[j];
        } else {
            const std::size_t h = s.half[n];
            for (std::size_t o = 0; o <= 2 * h; ++o) {
                // offset i - j runs over -h..h
                const std::size_t off = (o + nx - h) % nx;
                acc += k[off] * sm[(i + nx - off) % nx];
            }
        }
    }
    return acc;
}

FieldPath next_level(const Grid& grid, const SigmaSpec& sigma, const Setup& s, const FieldPath& prev,
                     const NoiseField& noise) {
    Array2D src(grid.n_t, grid.n_x);
    for (std::size_t m = 0; m < grid.n_t; ++m) fill_sources(grid, sigma, prev.values, noise, m, src);
    FieldPath out{grid, Array2D(grid.n_t + 1, grid.n_x), noise.seed};
    for (std::size_t n = 0; n <= grid.n_t; ++n)
        for (std::size_t i = 0; i < grid.n_x; ++i) out.values(n, i) = convolve_row(grid, s, src, n, i);
    return out;
}

FieldPath fixed_point(const Grid& grid, const SigmaSpec& sigma, const Setup& s, const NoiseField& noise) {
    Array2D src(grid.n_t, grid.n_x);
    FieldPath out{grid, Array2D(grid.n_t + 1, grid.n_x), noise.seed};
    for (std::size_t n = 0; n <= grid.n_t; ++n) {
        for (std::size_t i = 0; i < grid.n_x; ++i) out.values(n, i) = convolve_row(grid, s, src, n, i);
        if (n < grid.n_t) fill_sources(grid, sigma, out.values, noise, n, src);
    }
    return out;
}

FieldPath level_zero(const Grid& grid, const Setup& s, const NoiseField& noise) {
    return FieldPath{grid, s.base, noise.seed};
}

}  // namespace

std::vector<FieldPath> picard_levels(const Grid& grid, const SigmaSpec& sigma, std::span<const double> u0,
                                     double beta, std::size_t max_level, const NoiseField& noise,
                                     bool enforce_window, const KernelConfig& cfg) {
    require(noise.grid == grid, "picard_levels: noise lives on a different grid");
    const Setup s = prepare(grid, u0, beta, enforce_window, cfg);
    std::vector<FieldPath> levels;
    levels.push_back(level_zero(grid, s, noise));
    for (std::size_t l = 1; l <= max_level; ++l) {
        if (l > grid.n_t) {
            levels.push_back(levels.back());  // iterates are stationary past n_t
            continue;
        }
        levels.push_back(next_level(grid, sigma, s, levels.back(), noise));
    }
    return levels;
}

FieldPath picard_path(const Grid& grid, const SigmaSpec& sigma, std::span<const double> u0,
                      const LocalizationParams& params, const NoiseField& noise, const KernelConfig& cfg) {
    require(noise.grid == grid, "picard_path: noise lives on a different grid");
    params.validate(grid.T);
    const Setup s = prepare(grid, u0, params.beta, params.enforce_window, cfg);
    if (params.level == 0) return level_zero(grid, s, noise);
    if (params.level >= grid.n_t) return fixed_point(grid, sigma, s, noise);
    FieldPath v = level_zero(grid, s, noise);
    for (std::size_t l = 1; l <= params.level; ++l) v = next_level(grid, sigma, s, v, noise);
    return v;
}

MomentError moment_error(const std::vector<FieldPath>& u, const std::vector<FieldPath>& v, double p,
                         std::size_t t_index) {
    require(p >= 1.0, "moment_error: p must be >= 1");
    require(!u.empty() && u.size() == v.size(), "moment_error: ensembles must be non-empty and paired");
    const Grid& g = u.front().grid;
    if (t_index == std::numeric_limits<std::size_t>::max()) t_index = g.n_t;
    require(t_index <= g.n_t, "moment_error: t_index out of range");
    const std::size_t n = u.size();
    MomentError best;
    for (std::size_t x = 0; x < g.n_x; ++x) {
        double sum = 0.0, sq = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            require(u[k].grid == v[k].grid, "moment_error: grid mismatch");
            const double e = std::pow(std::abs(u[k].values(t_index, x) - v[k].values(t_index, x)), p);
            sum += e;
            sq += e * e;
        }
        const double mean = sum / static_cast<double>(n);
        if (x == 0 || mean > best.value) {
            const double var = n > 1 ? std::max(0.0, (sq - n * mean * mean) / static_cast<double>(n - 1)) : 0.0;
            best = {mean, std::sqrt(var / static_cast<double>(n)), x};
        }
    }
    return best;
}

CorrelationReport independence_probe(const Grid& grid, const SigmaSpec& sigma, std::span<const double> u0,
                                     const LocalizationParams& params, const std::vector<std::size_t>& cells,
                                     std::size_t t_index, std::size_t n_samples, std::uint64_t base_seed,
                                     const KernelConfig& cfg) {
    require(n_samples >= 100, "independence_probe: need at least 100 samples");
    require(!cells.empty(), "independence_probe: no points");
    require(t_index <= grid.n_t, "independence_probe: t_index out of range");
    for (auto c : cells) require(c < grid.n_x, "independence_probe: cell out of range");
    const auto samples = parallel_map<std::vector<double>>(n_samples, [&](std::size_t k) {
        const auto noise = sample_noise(grid, k, base_seed);
        const auto v = picard_path(grid, sigma, u0, params, noise, cfg);
        std::vector<double> out;
        for (auto c : cells) out.push_back(v.values(t_index, c));
        return out;
    });
    const std::size_t p = cells.size();
    Eigen::MatrixXd X(n_samples, p);
    for (std::size_t k = 0; k < n_samples; ++k)
        for (std::size_t c = 0; c < p; ++c) X(k, c) = samples[k][c];
    const Eigen::RowVectorXd mean = X.colwise().mean();
    const Eigen::MatrixXd centered = X.rowwise() - mean;
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n_samples - 1);
    CorrelationReport rep;
    rep.n_samples = n_samples;
    rep.cells = cells;
    rep.corr = Eigen::MatrixXd(p, p);
    rep.stderr_ = Eigen::MatrixXd(p, p);
    for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = 0; b < p; ++b) {
            const double r = a == b ? 1.0 : cov(a, b) / std::sqrt(cov(a, a) * cov(b, b));
            rep.corr(a, b) = r;
            rep.stderr_(a, b) = (1.0 - r * r) / std::sqrt(static_cast<double>(n_samples));
        }
    const double t = grid.time(t_index);
    rep.window = std::sqrt(params.beta * t);
    const double lvl = params.level == LocalizationParams::kFixedPoint ? static_cast<double>(grid.n_t)
                                                                        : static_cast<double>(params.level);
    rep.cone = lvl * static_cast<double>(window_cells(grid, params.beta, t)) * grid.dx();
    return rep;
}

}  // namespace shelab
