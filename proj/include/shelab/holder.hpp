#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "shelab/common.hpp"
#include "shelab/grid_noise.hpp"

namespace shelab {

enum class Metric { representative, torus };

std::string to_string(Metric m);
Metric metric_from_string(const std::string& s);

/// Index pair of a maximizing ratio: (row_a, col_a) and (row_b, col_b).
using ArgPair = std::array<std::size_t, 4>;

struct SeminormResult {
    double value = 0.0;
    ArgPair arg_pair{};
    double theta = 0.0;
    Metric metric = Metric::representative;
    std::size_t stride = 1;
};

/// Stride 1 up to 1024 time steps, 4 beyond. Stride > 1 can only lower the value.
std::size_t default_stride(std::size_t n_t);

/// max_{i<j} |f_i - f_j| / d(x_i, x_j)^{1/2 - theta} with x_i = i dx.
/// dx = 0 means 1 / row.size(). The torus metric wraps with circumference 1.
SeminormResult spatial_seminorm(std::span<const double> row, double theta, Metric metric = Metric::representative,
                                double dx = 0.0);

/// max over strided index pairs of |f_i - f_j| / |t_i - t_j|^{1/4 - theta/2},
/// t_i = i T / (column.size() - 1).
SeminormResult temporal_seminorm(std::span<const double> column, double theta, double T, std::size_t stride = 1);

/// sup over rows of spatial_seminorm; arg_pair rows record the maximizing row.
SeminormResult sup_spatial(const Array2D& values, double theta, Metric metric = Metric::representative);
/// sup over columns of temporal_seminorm.
SeminormResult sup_temporal(const Array2D& values, double theta, double T, std::size_t stride = 1);

/// Space-time ratio with denominator d^{1/2-theta} + |t-s|^{1/4-theta/2},
/// evaluated as max(sup_spatial, sup_temporal).
SeminormResult combined_seminorm(const Array2D& values, double theta, double T, std::size_t stride = 1,
                                 Metric metric = Metric::representative);
SeminormResult combined_seminorm(const FieldPath& path, double theta, std::size_t stride = 1,
                                 Metric metric = Metric::representative);

enum class RatioKind { spatial, temporal };

/// Every ratio entering a semi-norm. Spatial: one row per time row, one column
/// per pair i<j of `pairs`. Temporal: one row per spatial column, pairs of times.
struct RatioField {
    Array2D ratios;
    std::vector<std::array<std::size_t, 2>> pairs;
};

RatioField normalized_increments(const Array2D& values, double theta, double T, RatioKind kind,
                                 Metric metric = Metric::representative);

/// Grid samples of f on [0, T] x T with declared C^{gamma, beta} norm.
struct HolderFunction {
    Array2D values;  // (n_t + 1) x n_x
    double T = 1.0;
    double gamma = 1.0;
    double beta = 1.0;
    double norm_bound = 0.0;

    /// Checks sampled increments against norm_bound (|t-s|^gamma + |x-y|^beta), 1e-9 slack.
    /// Uses every `step`-th grid point in each direction.
    void validate(std::size_t step = 1) const;
};

/// Standard bump exp(-1/(1-x^2)) on (-1, 1), divided by its mass.
double bump(double x);

/// Discrete convolution of f with psi_n x psi_n: periodic in space, f clamped
/// to f(0, .) and f(T, .) outside [0, T]. Grid weights are normalized to sum 1.
Array2D mollify(const HolderFunction& f, std::size_t n);

/// |sin(pi x)|^beta + |t - T/2|^gamma on an (n_t + 1) x n_x grid, a C^{gamma, beta}
/// profile whose worst points are the kinks at x = 0 and t = T/2.
HolderFunction kink_profile(std::size_t n_t, std::size_t n_x, double T, double gamma, double beta);

struct DerivativeBounds {
    double dx = 0.0;   // max |d/dx|
    double dt = 0.0;   // max |d/dt|
    double dxx = 0.0;  // max |d^2/dx^2|
};

/// Centered finite-difference derivative maxima of a grid function (rows span [0, T]).
DerivativeBounds derivative_bounds(const Array2D& f, double T);

enum class SeminormKind { spatial_sup, temporal_sup, combined };

/// Semi-norm of the kind requested applied to path - h.
SeminormResult seminorm_diff(const FieldPath& path, const HolderFunction& h, double theta, SeminormKind kind,
                             std::size_t stride = 1, Metric metric = Metric::representative);

}  // namespace shelab
