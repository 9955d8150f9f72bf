#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "shelab/holder.hpp"
#include "shelab/solver.hpp"

namespace shelab {

enum class EventKind {
    spatial_sup,         // sup_t H_t <= eps
    temporal_sup,        // sup_x H_x <= eps
    combined,            // space-time ratio <= eps
    fixed_time,          // H_T <= eps
    fixed_point,         // H_X <= eps
    joint_with_supnorm,  // sup |u| <= eps^{1/(2 theta)} and combined <= eps
    block_U,
    block_H,
    block_T,             // temporal family only
    block_B,             // U and H (and T for the temporal family)
    diff_h,              // semi-norm of u - h <= eps
};

enum class BlockFamily { spatial, temporal };

std::string to_string(EventKind k);
EventKind event_kind_from_string(const std::string& s);

struct EventSpec {
    static constexpr std::size_t kAllBlocks = std::numeric_limits<std::size_t>::max();

    EventKind kind = EventKind::spatial_sup;
    double epsilon = 0.5;
    double theta = 0.45;
    Metric metric = Metric::representative;
    std::size_t stride = 1;
    std::size_t point = 0;  // column of the fixed_point event

    // Blocks [t_i, t_{i+1}] of block_steps grid steps. block_steps = 0 derives
    // the length from c_block * eps^{2/theta} (c0 or c2 of the block family).
    BlockFamily family = BlockFamily::spatial;
    std::size_t block_steps = 0;
    double c_block = 1.0;
    std::size_t block_index = kAllBlocks;  // kAllBlocks: intersection over every block

    std::shared_ptr<const HolderFunction> h;
    SeminormKind diff_kind = SeminormKind::combined;

    void validate() const;
};

/// Grid steps per block for this event on this grid (at least 1).
std::size_t block_length(const EventSpec& spec, const Grid& grid);

/// Statistic of one block, rows[0] at t_i and rows[last] at t_{i+1}. The
/// block event holds iff the statistic is <= eps. `dt` is the row spacing.
double block_statistic(const Array2D& rows, double dt, const EventSpec& spec);

/// A number s with event <=> s <= spec.epsilon.
double event_statistic(const FieldPath& path, const EventSpec& spec);
bool event_check(const FieldPath& path, const EventSpec& spec);

/// Kinds whose event is an intersection of per-block events.
bool block_decomposable(EventKind k);

enum class SolverKind { fd, spectral };

struct EnsembleConfig {
    Grid grid;
    SigmaSpec sigma;
    std::vector<double> u0;  // empty means zero
    std::size_t n = 1000;
    std::uint64_t base_seed = 1;
    std::uint64_t stream_offset = 0;
    SolverKind solver = SolverKind::fd;
    bool enforce_hypotheses = true;

    std::vector<double> initial_profile() const;
};

struct MCEstimate {
    double p_hat = 0.0;
    std::size_t n = 0;
    double stderr_ = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 1.0;
    std::string method = "plain";
    std::uint64_t seed_base = 0;
    std::uint64_t stream_begin = 0;
    std::uint64_t stream_end = 0;
    double ess = 0.0;              // importance only
    bool low_confidence = false;   // importance: ess < 30
    std::size_t extinctions = 0;   // splitting: replications that died out
};

/// 95% Wilson interval; zero successes use the rule of three.
MCEstimate binomial_estimate(std::size_t successes, std::size_t n);

/// Refuses a run whose initial profile violates the small-ball hypothesis on H(u0):
/// eps/2 (spatial kinds), eps/(2 Lambda) (temporal kinds), eps/2 min(1, 1/Lambda)
/// (combined kinds); block events use |u0| <= eps^{1/(2 theta)}/3 and H(u0) <= eps/3.
void enforce_initial_profile(std::span<const double> u0, const EventSpec& spec);

/// Sample path k of the ensemble (stream stream_offset + k).
FieldPath ensemble_path(const EnsembleConfig& cfg, std::size_t k, const DriftSpec* drift = nullptr);

/// Per-path event statistics; reuse across eps when the block length is fixed.
std::vector<double> plain_statistics(const EventSpec& spec, const EnsembleConfig& cfg);
MCEstimate estimate_from_statistics(const std::vector<double>& stats, double epsilon, const EnsembleConfig& cfg);

MCEstimate estimate_plain(const EventSpec& spec, const EnsembleConfig& cfg);

struct SplittingResult {
    MCEstimate estimate;
    std::vector<std::vector<double>> survival;  // [replication][block]
    std::vector<double> replication_estimates;
};

/// Fixed-effort splitting over the blocks of a block-decomposable event:
/// m particles, survivors resampled uniformly with replacement at each block
/// boundary, R independent replications.
SplittingResult estimate_splitting(const EventSpec& spec, const EnsembleConfig& cfg, std::size_t m, std::size_t R);

/// Change of measure with drift g = -(R^n u0)/t1, where R^n u0 is the
/// noiseless finite-difference evolution. Under Q the deterministic part of
/// the scheme is (1 - t_n/t1) R^n u0, exactly 0 at t1.
class GirsanovTilt {
public:
    GirsanovTilt(const Grid& grid, std::span<const double> u0, double t1, const SigmaSpec& sigma);

    const DriftSpec& drift() const { return drift_; }
    bool is_zero() const { return zero_; }
    std::size_t tilt_steps() const { return n1_; }
    /// h(m, j) = (R^m u0)(j) / (sigma(t_m, x_j) t1) for m < tilt_steps.
    const Array2D& shift() const { return h_; }

    /// log dP/dQ = sum h dW~ - 1/2 sum h^2 dt dx over the Q-noise increments.
    double log_weight(const NoiseField& q_noise) const;
    /// sum h^2 dt dx; E_P[(dQ/dP)^2] = exp of this for the discrete model.
    double z2() const { return z2_; }

private:
    Grid grid_;
    double t1_;
    std::size_t n1_ = 0;
    Array2D h_;
    Array2D g_;  // drift table, rows m < n1
    DriftSpec drift_;
    double z2_ = 0.0;
    bool zero_ = true;
};

/// exp(int_0^t1 int_T |(G_s * u0)(y) / (sigma(s, y) t1)|^2 dy ds), with G_s acting on
/// the trigonometric interpolant of u0 and the grid rule in y. Constant sigma
/// integrates in s exactly; (t, x) sigma uses adaptive quadrature in s.
double rn_second_moment(std::span<const double> u0, const SigmaSpec& sigma, double t1, const KernelConfig& cfg = {});

/// Unnormalized importance estimate E_Q[(dP/dQ) 1_A] from Q-paths.
MCEstimate estimate_importance(const EventSpec& spec, const GirsanovTilt& tilt, const EnsembleConfig& cfg);

struct FitRow {
    double epsilon = 0.0;
    double p_hat = 0.0;
    double stderr_ = 0.0;
};

struct ExponentFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::vector<FitRow> table;  // rows used
    std::vector<std::string> warnings;
};

/// Weighted least squares of log(-log p) against log eps with delta-method weights.
ExponentFit exponent_fit(const std::vector<FitRow>& rows);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::size_t points = 0;
};

/// Weighted least squares y = a + b x.
LineFit weighted_line(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& w);

enum class TailStatistic { sup_N, sup_Ntilde, sup_Nhash };

std::string to_string(TailStatistic s);
TailStatistic tail_statistic_from_string(const std::string& s);

struct TailBox {
    double epsilon = 0.5;
    double theta = 0.25;
    double alpha = 1.0;
    double a = 0.0;  // left end of [a, a + eps^{1/theta}]
};

struct TailRow {
    double lambda = 0.0;
    double p_hat = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 1.0;
    std::size_t n = 0;
};

struct TailCurve {
    std::vector<TailRow> rows;
    LineFit fit;  // log p against lambda^2 over p in [p_min, p_max]
    double scale = 0.0;
};

/// Statistic of one path over the box (rows t <= alpha eps^{2/theta}, columns in the box).
double box_statistic(const FieldPath& path, const TailBox& box, TailStatistic stat);

/// P(statistic > lambda * scale) per lambda, scale = eps^{1/(2 theta)} for sup N and eps otherwise.
TailCurve tail_curve(TailStatistic stat, const TailBox& box, const std::vector<double>& lambdas,
                     const EnsembleConfig& cfg, double p_min = 1e-3, double p_max = 0.5);

/// Fit log p against lambda^2 on rows with p in [p_min, p_max].
LineFit fit_tail(const std::vector<TailRow>& rows, double p_min, double p_max);

}  // namespace shelab
