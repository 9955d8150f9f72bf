#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "shelab/common.hpp"
#include "shelab/grid_noise.hpp"
#include "shelab/heat_kernel.hpp"

namespace shelab {

enum class SigmaKind { constant, tx_dependent, u_dependent };

/// Noise coefficient sigma(t, x, u) with ellipticity bounds [c1, c2] and
/// Lipschitz constant `lip` in u.
struct SigmaSpec {
    SigmaKind kind = SigmaKind::constant;
    std::function<double(double, double, double)> eval = [](double, double, double) { return 1.0; };
    double c1 = 1.0;
    double c2 = 1.0;
    double lip = 0.0;
    std::string preset = "const";
    std::vector<double> params{1.0};

    double operator()(double t, double x, double u) const { return eval(t, x, u); }

    /// Samples a 10 x 10 x 100 lattice of (t, x, u) and checks the declared
    /// bounds. `horizon` is the largest t sampled.
    void validate(double horizon = 1.0) const;

    static SigmaSpec constant(double s0);
    /// a + b cos(2 pi x) cos(2 pi t), a > |b|.
    static SigmaSpec tx_cos(double a, double b);
    /// a + b sin(u), a > |b|.
    static SigmaSpec sin_u(double a, double b);
    static SigmaSpec from_preset(const std::string& name, const std::vector<double>& params);
};

/// Bounded deterministic drift g(t, x).
struct DriftSpec {
    std::function<double(double, double)> eval;
    double bound = 0.0;

    void validate(double horizon = 1.0) const;
};

/// One step of (I - dt/2 Lap_h) u' = u + dt g + sigma dW / dx on the periodic
/// grid, with the cyclic tridiagonal system factored once.
class FdStepper {
public:
    explicit FdStepper(const Grid& grid);

    const Grid& grid() const { return grid_; }

    /// Solve (I - dt/2 Lap_h) out = rhs in place.
    void resolve(std::span<double> v) const;

    /// Advance u from t_n to t_{n+1}. `dW` holds the n_x increments of step n.
    void step(std::span<double> u, std::size_t n, const SigmaSpec& sigma, const DriftSpec* drift,
              std::span<const double> dW) const;

    /// Fourier multiplier of one noiseless step on mode k.
    double symbol(std::size_t k) const;

private:
    Grid grid_;
    double r_;                        // dt / (2 dx^2)
    std::vector<double> cprime_;      // Thomas forward coefficients of the modified matrix
    std::vector<double> denom_;
    std::vector<double> z_;           // correction vector of the Sherman-Morrison update
    double zfactor_ = 0.0;
    double gamma_ = 0.0;

    void thomas(std::span<double> v) const;
};

FieldPath solve_fd(const Grid& grid, const SigmaSpec& sigma, std::span<const double> u0,
                   const DriftSpec* drift, const NoiseField& noise);

/// Exact-in-law sampler of the Fourier modes |k| <= n_x / 2 for constant sigma.
/// Each mode is an Ornstein-Uhlenbeck process with rate 2 pi^2 k^2.
FieldPath solve_spectral_constant(const Grid& grid, double sigma0, std::span<const double> u0,
                                  std::uint64_t stream_id, std::uint64_t base_seed);

/// Mode-truncated stationary-start (u0 = 0) sampler evaluated at arbitrary
/// points and a single time t, for off-grid increments.
class SpectralPointSampler {
public:
    SpectralPointSampler(std::size_t modes, double t, double sigma0, std::vector<double> points);

    std::vector<double> sample(StreamRng& rng) const;
    /// Exact variance of the truncated field at points[i].
    double variance(std::size_t i) const;
    /// Exact covariance of the truncated field between points[i] and points[j].
    double covariance(std::size_t i, std::size_t j) const;
    std::size_t size() const { return points_.size(); }

private:
    std::vector<double> points_;
    std::size_t n_coef_;
    std::vector<double> basis_;  // n_coef x points, scaled by the mode std
};

/// u(t_index, .) - (G_t * u0).
std::vector<double> noise_term(const FieldPath& path, std::span<const double> u0, std::size_t t_index,
                               const KernelConfig& cfg = {});

/// Rows r = 0..n_steps of the discrete kernel K_r = R^r e_0, R = (I - dt/2 Lap_h)^{-1}.
Array2D discrete_kernel_table(const Grid& grid, std::size_t n_steps);

/// Quadratic variation at the final step of the spatial-increment martingale
/// r -> sum over cells before r of [K(i + shift - j) - K(i - j)] sigma dW / dx.
double increment_quadratic_variation(const FieldPath& path, const SigmaSpec& sigma,
                                     const Array2D& kernels, std::size_t t_index, std::size_t i,
                                     std::size_t shift);

}  // namespace shelab
