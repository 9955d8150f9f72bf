#pragma once

#include <Eigen/Dense>
#include <limits>

#include "shelab/solver.hpp"

namespace shelab {

/// Truncation window sqrt(beta t) and Picard level.
struct LocalizationParams {
    static constexpr std::size_t kFixedPoint = std::numeric_limits<std::size_t>::max();

    double beta = 1.0;
    std::size_t level = 1;  // kFixedPoint: the truncated solution itself
    double p = 2.0;
    bool enforce_window = true;  // require beta t < 1/4 for every queried t

    void validate(double horizon) const;
};

/// Window half-width in cells at time t: ceil(sqrt(beta t) / dx).
std::size_t window_cells(const Grid& grid, double beta, double t);

/// Level-l iterate on the grid. Row n is (G_{t_n} * u0) plus the discrete
/// stochastic convolution sum_{m<n} sum_{|i-j| <= h_n} K_{n-m}(i-j) sigma(t_m, x_j, V^{l-1}(m, j)) dW(m, j) / dx,
/// with K the kernel of the finite-difference scheme. Levels at or beyond n_t,
/// and kFixedPoint, return the truncated solution computed row by row.
FieldPath picard_path(const Grid& grid, const SigmaSpec& sigma, std::span<const double> u0,
                      const LocalizationParams& params, const NoiseField& noise, const KernelConfig& cfg = {});

/// Levels 0..max_level sharing one noise field.
std::vector<FieldPath> picard_levels(const Grid& grid, const SigmaSpec& sigma, std::span<const double> u0,
                                     double beta, std::size_t max_level, const NoiseField& noise,
                                     bool enforce_window = true, const KernelConfig& cfg = {});

struct MomentError {
    double value = 0.0;   // sup_x mean |u - v|^p
    double stderr_ = 0.0; // standard error at the maximizing x
    std::size_t argmax = 0;
};

/// Empirical p-th moment of |u - v| on row t_index (default: final row),
/// maximized over x. Paths are paired by position.
MomentError moment_error(const std::vector<FieldPath>& u, const std::vector<FieldPath>& v, double p,
                         std::size_t t_index = std::numeric_limits<std::size_t>::max());

struct CorrelationReport {
    Eigen::MatrixXd corr;
    Eigen::MatrixXd stderr_;   // (1 - r^2) / sqrt(n)
    std::size_t n_samples = 0;
    std::vector<std::size_t> cells;
    double window = 0.0;       // sqrt(beta t)
    double cone = 0.0;         // l (h dx), the rounded dependence radius
};

/// Correlations of V^{l}(t_index, x_c) across independent noise streams.
CorrelationReport independence_probe(const Grid& grid, const SigmaSpec& sigma, std::span<const double> u0,
                                     const LocalizationParams& params, const std::vector<std::size_t>& cells,
                                     std::size_t t_index, std::size_t n_samples, std::uint64_t base_seed,
                                     const KernelConfig& cfg = {});

}  // namespace shelab
