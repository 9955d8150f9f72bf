#include "shelab/solver.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

namespace shelab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> lattice_axis(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

}  // namespace

void SigmaSpec::validate(double horizon) const {
    require(static_cast<bool>(eval), "sigma: missing evaluator");
    require(c1 > 0.0, "sigma: c1 must be > 0");
    require(c2 >= c1, "sigma: c2 must be >= c1");
    require(lip >= 0.0, "sigma: lip must be >= 0");
    if (kind == SigmaKind::constant) require(lip == 0.0, "sigma: constant kind requires lip = 0");
    const auto ts = lattice_axis(0.0, horizon, 10);
    const auto xs = lattice_axis(0.0, 0.9, 10);
    const auto us = lattice_axis(-5.0, 5.0, 100);
    const double slack = 1e-12;
    const double ref = eval(0.0, 0.0, 0.0);
    for (double t : ts)
        for (double x : xs) {
            double prev = 0.0;
            for (std::size_t k = 0; k < us.size(); ++k) {
                const double s = eval(t, x, us[k]);
                require(std::isfinite(s) && s >= c1 - slack && s <= c2 + slack,
                        "sigma: value outside [c1, c2] on the validation lattice");
                if (kind == SigmaKind::constant) require(s == ref, "sigma: constant kind depends on its arguments");
                if (kind != SigmaKind::u_dependent && k > 0)
                    require(s == prev, "sigma: u-dependence in a (t, x) kind");
                if (k > 0)
                    require(std::abs(s - prev) <= lip * (us[k] - us[k - 1]) + slack,
                            "sigma: Lipschitz bound violated on the validation lattice");
                prev = s;
            }
        }
}

SigmaSpec SigmaSpec::constant(double s0) {
    require(s0 > 0.0, "sigma const: value must be > 0");
    SigmaSpec s;
    s.kind = SigmaKind::constant;
    s.eval = [s0](double, double, double) { return s0; };
    s.c1 = s.c2 = s0;
    s.lip = 0.0;
    s.preset = "const";
    s.params = {s0};
    return s;
}

SigmaSpec SigmaSpec::tx_cos(double a, double b) {
    require(a > std::abs(b), "sigma tx_cos: need a > |b|");
    SigmaSpec s;
    s.kind = SigmaKind::tx_dependent;
    s.eval = [a, b](double t, double x, double) { return a + b * std::cos(kTwoPi * x) * std::cos(kTwoPi * t); };
    s.c1 = a - std::abs(b);
    s.c2 = a + std::abs(b);
    s.lip = 0.0;
    s.preset = "tx_cos";
    s.params = {a, b};
    return s;
}

SigmaSpec SigmaSpec::sin_u(double a, double b) {
    require(a > std::abs(b), "sigma sin_u: need a > |b|");
    SigmaSpec s;
    s.kind = SigmaKind::u_dependent;
    s.eval = [a, b](double, double, double u) { return a + b * std::sin(u); };
    s.c1 = a - std::abs(b);
    s.c2 = a + std::abs(b);
    s.lip = std::abs(b);
    s.preset = "sin_u";
    s.params = {a, b};
    return s;
}

SigmaSpec SigmaSpec::from_preset(const std::string& name, const std::vector<double>& p) {
    if (name == "const") {
        require(p.size() == 1, "sigma const takes 1 parameter");
        return constant(p[0]);
    }
    if (name == "tx_cos") {
        require(p.size() == 2, "sigma tx_cos takes 2 parameters");
        return tx_cos(p[0], p[1]);
    }
    if (name == "sin_u") {
        require(p.size() == 2, "sigma sin_u takes 2 parameters");
        return sin_u(p[0], p[1]);
    }
    throw DomainError("unknown sigma preset: " + name);
}

void DriftSpec::validate(double horizon) const {
    require(static_cast<bool>(eval), "drift: missing evaluator");
    require(bound >= 0.0, "drift: bound must be >= 0");
    for (double t : lattice_axis(0.0, horizon, 100))
        for (double x : lattice_axis(0.0, 0.99, 100))
            require(std::abs(eval(t, x)) <= bound * (1.0 + 1e-12), "drift: |g| exceeds the declared bound");
}

FdStepper::FdStepper(const Grid& grid) : grid_(grid) {
    grid.validate();
    const std::size_t n = grid.n_x;
    const double dx = grid.dx();
    r_ = grid.dt() / (2.0 * dx * dx);
    const double a = -r_;          // sub/super diagonal and both corners
    const double b = 1.0 + 2.0 * r_;
    gamma_ = -b;
    std::vector<double> diag(n, b);
    diag[0] = b - gamma_;
    diag[n - 1] = b - a * a / gamma_;
    cprime_.assign(n, 0.0);
    denom_.assign(n, 0.0);
    denom_[0] = diag[0];
    cprime_[0] = a / denom_[0];
    for (std::size_t i = 1; i < n; ++i) {
        denom_[i] = diag[i] - a * cprime_[i - 1];
        cprime_[i] = a / denom_[i];
    }
    z_.assign(n, 0.0);
    z_[0] = gamma_;
    z_[n - 1] = a;
    thomas(z_);
    zfactor_ = 1.0 + z_[0] + a * z_[n - 1] / gamma_;
}

void FdStepper::thomas(std::span<double> v) const {
    const std::size_t n = v.size();
    const double a = -r_;
    v[0] /= denom_[0];
    for (std::size_t i = 1; i < n; ++i) v[i] = (v[i] - a * v[i - 1]) / denom_[i];
    for (std::size_t i = n - 1; i-- > 0;) v[i] -= cprime_[i] * v[i + 1];
}

void FdStepper::resolve(std::span<double> v) const {
    require(v.size() == grid_.n_x, "FdStepper: size mismatch");
    thomas(v);
    const double a = -r_;
    const double fact = (v[0] + a * v[v.size() - 1] / gamma_) / zfactor_;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= fact * z_[i];
}

double FdStepper::symbol(std::size_t k) const {
    const double s = std::sin(std::numbers::pi * static_cast<double>(k) * grid_.dx());
    return 1.0 / (1.0 + 4.0 * r_ * s * s);
}

void FdStepper::step(std::span<double> u, std::size_t n, const SigmaSpec& sigma, const DriftSpec* drift,
                     std::span<const double> dW) const {
    const double t = grid_.time(n);
    const double dt = grid_.dt();
    const double inv_dx = static_cast<double>(grid_.n_x);
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double x = grid_.space(i);
        double rhs = u[i] + sigma(t, x, u[i]) * dW[i] * inv_dx;
        if (drift) rhs += dt * drift->eval(t, x);
        u[i] = rhs;
    }
    resolve(u);
    for (double v : u)
        if (!std::isfinite(v)) throw NumericalFailure(n + 1, "finite-difference step produced a non-finite value");
}

FieldPath solve_fd(const Grid& grid, const SigmaSpec& sigma, std::span<const double> u0, const DriftSpec* drift,
                   const NoiseField& noise) {
    grid.validate();
    require(noise.grid == grid, "solve_fd: noise lives on a different grid");
    require(u0.size() == grid.n_x, "solve_fd: u0 has the wrong length");
    for (double v : u0) require(std::isfinite(v), "solve_fd: u0 must be finite");
    FdStepper stepper(grid);
    FieldPath path{grid, Array2D(grid.n_t + 1, grid.n_x), noise.seed};
    std::copy(u0.begin(), u0.end(), path.values.row(0).begin());
    std::vector<double> u(u0.begin(), u0.end());
    for (std::size_t n = 0; n < grid.n_t; ++n) {
        stepper.step(u, n, sigma, drift, noise.increments.row(n));
        std::copy(u.begin(), u.end(), path.values.row(n + 1).begin());
    }
    return path;
}

namespace {

struct FftPlans {
    fftw_plan c2r = nullptr;
    fftw_plan r2c = nullptr;
};

// FFTW planning is not thread-safe; execution with new arrays is.
FftPlans plans_for(std::size_t n) {
    static std::mutex mu;
    static std::map<std::size_t, FftPlans> cache;
    std::lock_guard lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    const int ni = static_cast<int>(n);
    double* real = fftw_alloc_real(n);
    fftw_complex* cplx = fftw_alloc_complex(n / 2 + 1);
    FftPlans p;
    p.c2r = fftw_plan_dft_c2r_1d(ni, cplx, real, FFTW_ESTIMATE | FFTW_UNALIGNED);
    p.r2c = fftw_plan_dft_r2c_1d(ni, real, cplx, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(real);
    fftw_free(cplx);
    cache.emplace(n, p);
    return p;
}

double ou_variance(double lambda, double h) {
    if (lambda == 0.0) return h;
    return -std::expm1(-2.0 * lambda * h) / (2.0 * lambda);
}

}  // namespace

FieldPath solve_spectral_constant(const Grid& grid, double sigma0, std::span<const double> u0,
                                  std::uint64_t stream_id, std::uint64_t base_seed) {
    grid.validate();
    require(sigma0 > 0.0, "solve_spectral_constant: sigma0 must be > 0");
    require(u0.size() == grid.n_x, "solve_spectral_constant: u0 has the wrong length");
    const std::size_t n = grid.n_x;
    const std::size_t half = n / 2;
    const auto plans = plans_for(n);

    std::vector<std::complex<double>> coef(half + 1), scratch(half + 1);
    std::vector<double> real(u0.begin(), u0.end());
    fftw_execute_dft_r2c(plans.r2c, real.data(), reinterpret_cast<fftw_complex*>(coef.data()));
    for (auto& c : coef) c /= static_cast<double>(n);

    const double dt = grid.dt();
    std::vector<double> decay(half + 1), sd(half + 1);
    for (std::size_t k = 0; k <= half; ++k) {
        const double lambda = 2.0 * std::numbers::pi * std::numbers::pi * static_cast<double>(k * k);
        decay[k] = std::exp(-lambda * dt);
        sd[k] = sigma0 * std::sqrt(ou_variance(lambda, dt));
    }

    FieldPath path{grid, Array2D(grid.n_t + 1, n), {base_seed, stream_id}};
    std::copy(u0.begin(), u0.end(), path.values.row(0).begin());
    StreamRng rng(base_seed, stream_id);
    const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    for (std::size_t step = 1; step <= grid.n_t; ++step) {
        coef[0] = decay[0] * coef[0] + sd[0] * rng.normal();
        for (std::size_t k = 1; k < half; ++k) {
            const double zc = rng.normal();
            const double zs = rng.normal();
            coef[k] = decay[k] * coef[k] + sd[k] * inv_sqrt2 * std::complex<double>(zc, -zs);
        }
        coef[half] = decay[half] * coef[half] + sd[half] * std::numbers::sqrt2 * rng.normal();
        scratch = coef;  // c2r overwrites its input
        auto row = path.values.row(step);
        fftw_execute_dft_c2r(plans.c2r, reinterpret_cast<fftw_complex*>(scratch.data()), row.data());
    }
    return path;
}

SpectralPointSampler::SpectralPointSampler(std::size_t modes, double t, double sigma0, std::vector<double> points)
    : points_(std::move(points)), n_coef_(2 * modes + 1) {
    require(modes >= 1, "SpectralPointSampler: need at least one mode");
    require(t > 0.0, "SpectralPointSampler: t must be > 0");
    require(sigma0 > 0.0, "SpectralPointSampler: sigma0 must be > 0");
    const std::size_t p = points_.size();
    basis_.assign(n_coef_ * p, 0.0);
    for (std::size_t j = 0; j < p; ++j) basis_[j] = sigma0 * std::sqrt(t);
    for (std::size_t k = 1; k <= modes; ++k) {
        const double lambda = 2.0 * std::numbers::pi * std::numbers::pi * static_cast<double>(k * k);
        const double s = sigma0 * std::sqrt(ou_variance(lambda, t)) * std::numbers::sqrt2;
        for (std::size_t j = 0; j < p; ++j) {
            const double arg = kTwoPi * static_cast<double>(k) * points_[j];
            basis_[(2 * k - 1) * p + j] = s * std::cos(arg);
            basis_[(2 * k) * p + j] = s * std::sin(arg);
        }
    }
}

std::vector<double> SpectralPointSampler::sample(StreamRng& rng) const {
    const std::size_t p = points_.size();
    std::vector<double> out(p, 0.0);
    for (std::size_t m = 0; m < n_coef_; ++m) {
        const double z = rng.normal();
        const double* b = basis_.data() + m * p;
        for (std::size_t j = 0; j < p; ++j) out[j] += z * b[j];
    }
    return out;
}

double SpectralPointSampler::covariance(std::size_t i, std::size_t j) const {
    const std::size_t p = points_.size();
    double acc = 0.0;
    for (std::size_t m = 0; m < n_coef_; ++m) acc += basis_[m * p + i] * basis_[m * p + j];
    return acc;
}

double SpectralPointSampler::variance(std::size_t i) const { return covariance(i, i); }

std::vector<double> noise_term(const FieldPath& path, std::span<const double> u0, std::size_t t_index,
                               const KernelConfig& cfg) {
    require(t_index < path.values.rows(), "noise_term: t_index out of range");
    require(u0.size() == path.values.cols(), "noise_term: u0 has the wrong length");
    const auto row = path.values.row(t_index);
    const auto det = kernel_convolve(u0, path.grid.time(t_index), cfg);
    std::vector<double> out(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) out[i] = row[i] - det[i];
    return out;
}

Array2D discrete_kernel_table(const Grid& grid, std::size_t n_steps) {
    FdStepper stepper(grid);
    Array2D table(n_steps + 1, grid.n_x);
    table(0, 0) = 1.0;
    std::vector<double> v(grid.n_x, 0.0);
    v[0] = 1.0;
    for (std::size_t r = 1; r <= n_steps; ++r) {
        stepper.resolve(v);
        std::copy(v.begin(), v.end(), table.row(r).begin());
    }
    return table;
}

double increment_quadratic_variation(const FieldPath& path, const SigmaSpec& sigma, const Array2D& kernels,
                                     std::size_t t_index, std::size_t i, std::size_t shift) {
    const Grid& g = path.grid;
    const std::size_t n = g.n_x;
    require(t_index <= g.n_t && kernels.rows() > t_index, "increment_quadratic_variation: t_index out of range");
    require(i < n, "increment_quadratic_variation: i out of range");
    const double scale = g.dt() / g.dx();
    double acc = 0.0;
    for (std::size_t m = 0; m < t_index; ++m) {
        const auto k = kernels.row(t_index - m);
        const double t = g.time(m);
        for (std::size_t j = 0; j < n; ++j) {
            const double s = sigma(t, g.space(j), path.values(m, j));
            const double d = k[(i + shift + n - j) % n] - k[(i + n - j) % n];
            acc += s * s * d * d;
        }
    }
    return acc * scale;
}

}  // namespace shelab
