#pragma once

#include <span>
#include <vector>

namespace shelab {

/// Truncation and quadrature settings shared by every kernel computation.
struct KernelConfig {
    int periodization_terms = 2;  // floor on the lattice-sum truncation K
    double quad_abs_tol = 1e-10;
    int quad_max_subdiv = 50;     // maximum bisection depth of adaptive Simpson

    void validate() const;
};

/// Whole-line heat kernel p(t, x) = (2 pi t)^{-1/2} exp(-x^2 / 2t).
double gaussian_density(double t, double x);

/// Smallest K with p(t, K - 1) < tol / 10, never below cfg.periodization_terms.
int periodization_extent(double t, const KernelConfig& cfg = {});

/// Heat kernel of (1/2) d^2/dx^2 on the unit torus, by a truncated lattice sum.
double torus_kernel(double t, double x, const KernelConfig& cfg = {});

/// Lambda(theta) = 2^{1/2 - theta} Gamma(1 - theta) / sqrt(pi), the closed form
/// used for every threshold. It equals E|Z|^{1 - 2 theta}, not the integral
/// below; the two agree only at theta = 1/2.
double lambda_theta(double theta);

/// int p(1, w) |w|^{1/2 - theta} dw = E|Z|^{1/2 - theta}
///   = 2^{(1/2 - theta)/2} Gamma(3/4 - theta/2) / sqrt(pi).
/// This is the constant of the temporal bound |G_t*f - G_s*f| <= c H(f) |t-s|^{1/4 - theta/2}.
double lambda_integral(double theta);

/// (G_t * u0) sampled on the uniform grid that carries u0.
///
/// The grid kernel is G(t, .) sampled at the grid offsets and normalized to
/// unit mass, so the map is an average of translates: it preserves constants
/// and the spatial mean, and cannot increase any translation-invariant
/// semi-norm. t = 0 returns u0 unchanged.
std::vector<double> kernel_convolve(std::span<const double> u0, double t,
                                    const KernelConfig& cfg = {});

/// Normalized grid weights used by kernel_convolve, indexed by offset.
std::vector<double> grid_heat_weights(std::size_t n_x, double t, const KernelConfig& cfg = {});

enum class IncrementKind {
    spatial_shift,  // (t1, delta): int_0^t1 int_T [G(s, y + delta) - G(s, y)]^2 dy ds
    time_window,    // (s, t): int_s^t int_T G(r, y)^2 dy dr
    time_cross,     // (s, t): int_0^s int_T [G(t - r, z) - G(s - r, z)]^2 dz dr
};

/// Deterministic increment-variance integrals, reduced to one dimension with
/// the semigroup identity int_T G(s, a - y) G(s, b - y) dy = G(2s, a - b).
double increment_variance_quadrature(IncrementKind kind, double first, double second,
                                     const KernelConfig& cfg = {});

/// The spatial_shift integral by direct two-dimensional quadrature, without
/// the semigroup reduction.
double spatial_shift_variance_direct(double t1, double delta, const KernelConfig& cfg = {});

/// int_0^t1 [2 G(2s, a) - G(2s, a + delta) - G(2s, a - delta)] ds, the
/// covariance of two spatial increments of the noise term at offset a (sigma = 1).
double shifted_increment_covariance(double t1, double delta, double offset,
                                    const KernelConfig& cfg = {});

}  // namespace shelab
