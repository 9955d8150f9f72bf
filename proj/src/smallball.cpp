#include "shelab/smallball.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "shelab/parallel.hpp"
#include "shelab/quadrature.hpp"

namespace shelab {

namespace {

const std::pair<EventKind, const char*> kEventNames[] = {
    {EventKind::spatial_sup, "spatial_sup"},   {EventKind::temporal_sup, "temporal_sup"},
    {EventKind::combined, "combined"},         {EventKind::fixed_time, "fixed_time"},
    {EventKind::fixed_point, "fixed_point"},   {EventKind::joint_with_supnorm, "joint_with_supnorm"},
    {EventKind::block_U, "block_U"},           {EventKind::block_H, "block_H"},
    {EventKind::block_T, "block_T"},           {EventKind::block_B, "block_B"},
    {EventKind::diff_h, "diff_h"},
};

bool is_block(EventKind k) {
    return k == EventKind::block_U || k == EventKind::block_H || k == EventKind::block_T || k == EventKind::block_B;
}

double sup_abs(const Array2D& rows, std::size_t r) {
    double m = 0.0;
    for (double v : rows.row(r)) m = std::max(m, std::abs(v));
    return m;
}

double sup_abs_all(const Array2D& rows) {
    double m = 0.0;
    for (double v : rows.flat()) m = std::max(m, std::abs(v));
    return m;
}

Array2D row_slice(const Array2D& a, std::size_t begin, std::size_t end) {
    Array2D out(end - begin + 1, a.cols());
    for (std::size_t r = begin; r <= end; ++r) std::copy(a.row(r).begin(), a.row(r).end(), out.row(r - begin).begin());
    return out;
}

}  // namespace

std::string to_string(EventKind k) {
    for (auto& [kind, name] : kEventNames)
        if (kind == k) return name;
    return "unknown";
}

EventKind event_kind_from_string(const std::string& s) {
    for (auto& [kind, name] : kEventNames)
        if (s == name) return kind;
    throw DomainError("unknown event kind: " + s);
}

void EventSpec::validate() const {
    require(epsilon >= 0.0, "epsilon must be >= 0");
    require(theta > 0.0 && theta <= 0.5, "theta must lie in (0, 1/2]");
    require(stride >= 1, "stride must be >= 1");
    require(c_block > 0.0, "c_block must be > 0");
    if (kind == EventKind::diff_h) require(h != nullptr, "diff_h event needs a reference function h");
    if (kind == EventKind::block_T) require(family == BlockFamily::temporal, "block_T belongs to the temporal family");
    if (is_block(kind) && block_steps == 0) require(epsilon > 0.0, "block length from eps needs eps > 0");
}

bool block_decomposable(EventKind k) { return k == EventKind::spatial_sup || is_block(k); }

std::size_t block_length(const EventSpec& spec, const Grid& grid) {
    if (spec.block_steps > 0) return spec.block_steps;
    const double len = spec.c_block * std::pow(spec.epsilon, 2.0 / spec.theta);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(len / grid.dt())));
}

double block_statistic(const Array2D& rows, double dt, const EventSpec& spec) {
    require(rows.rows() >= 2, "block_statistic: a block needs at least 2 rows");
    const std::size_t last = rows.rows() - 1;
    const double th = spec.theta;
    const bool temporal = spec.family == BlockFamily::temporal;
    auto stat_U = [&] {
        const double end = sup_abs(rows, last);
        const double all = sup_abs_all(rows);
        // |u| <= eps^{1/(2 theta)} / c  <=>  (c |u|)^{2 theta} <= eps
        const double k = temporal ? std::pow(spec.c_block, th / 2.0 - 0.25) : 1.0;
        const double c_end = temporal ? 8.0 * k : 6.0;
        const double c_all = temporal ? 4.0 * k : 1.5;
        return std::max(std::pow(c_end * end, 2.0 * th), std::pow(c_all * all, 2.0 * th));
    };
    auto stat_H = [&] {
        const double end = spatial_seminorm(rows.row(last), th, spec.metric).value;
        const double all = sup_spatial(rows, th, spec.metric).value;
        if (!temporal) return std::max(6.0 * end, 1.5 * all);
        const double lam = lambda_theta(th);
        return std::max(8.0 * lam * end, 2.0 * lam * all);
    };
    auto stat_T = [&] { return 2.0 * sup_temporal(rows, th, dt * static_cast<double>(last), spec.stride).value; };
    switch (spec.kind) {
        case EventKind::spatial_sup: return sup_spatial(rows, th, spec.metric).value;
        case EventKind::block_U: return stat_U();
        case EventKind::block_H: return stat_H();
        case EventKind::block_T: return stat_T();
        case EventKind::block_B: {
            double s = std::max(stat_U(), stat_H());
            if (temporal) s = std::max(s, stat_T());
            return s;
        }
        default: throw DomainError("block_statistic: event kind has no block form");
    }
}

double event_statistic(const FieldPath& path, const EventSpec& spec) {
    spec.validate();
    const Array2D& v = path.values;
    const double T = path.grid.T;
    const double th = spec.theta;
    switch (spec.kind) {
        case EventKind::spatial_sup: return sup_spatial(v, th, spec.metric).value;
        case EventKind::temporal_sup: return sup_temporal(v, th, T, spec.stride).value;
        case EventKind::combined: return combined_seminorm(v, th, T, spec.stride, spec.metric).value;
        case EventKind::fixed_time: return spatial_seminorm(v.row(v.rows() - 1), th, spec.metric).value;
        case EventKind::fixed_point: {
            require(spec.point < v.cols(), "fixed_point: column out of range");
            return temporal_seminorm(v.column(spec.point), th, T, spec.stride).value;
        }
        case EventKind::joint_with_supnorm: {
            const double c = combined_seminorm(v, th, T, spec.stride, spec.metric).value;
            return std::max(c, std::pow(sup_abs_all(v), 2.0 * th));
        }
        case EventKind::diff_h: return seminorm_diff(path, *spec.h, th, spec.diff_kind, spec.stride, spec.metric).value;
        default: break;
    }
    const std::size_t L = block_length(spec, path.grid);
    const std::size_t n_t = path.grid.n_t;
    const std::size_t blocks = (n_t + L - 1) / L;
    auto one = [&](std::size_t b) {
        const std::size_t begin = b * L;
        const std::size_t end = std::min(n_t, begin + L);
        return block_statistic(row_slice(v, begin, end), path.grid.dt(), spec);
    };
    if (spec.block_index != EventSpec::kAllBlocks) {
        require(spec.block_index < blocks, "block index out of range");
        return one(spec.block_index);
    }
    double s = 0.0;
    for (std::size_t b = 0; b < blocks; ++b) s = std::max(s, one(b));
    return s;
}

bool event_check(const FieldPath& path, const EventSpec& spec) { return event_statistic(path, spec) <= spec.epsilon; }

std::vector<double> EnsembleConfig::initial_profile() const {
    if (u0.empty()) return std::vector<double>(grid.n_x, 0.0);
    require(u0.size() == grid.n_x, "u0 has the wrong length");
    return u0;
}

MCEstimate binomial_estimate(std::size_t successes, std::size_t n) {
    require(n > 0, "binomial_estimate: n must be > 0");
    MCEstimate e;
    e.n = n;
    const double nd = static_cast<double>(n);
    const double p = static_cast<double>(successes) / nd;
    e.p_hat = p;
    e.stderr_ = std::sqrt(p * (1.0 - p) / nd);
    if (successes == 0) {
        e.ci_lo = 0.0;
        e.ci_hi = std::min(1.0, 3.0 / nd);
        return e;
    }
    const double z = 1.959963984540054;
    const double denom = 1.0 + z * z / nd;
    const double centre = (p + z * z / (2.0 * nd)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / nd + z * z / (4.0 * nd * nd)) / denom;
    e.ci_lo = std::max(0.0, centre - half);
    e.ci_hi = std::min(1.0, centre + half);
    return e;
}

void enforce_initial_profile(std::span<const double> u0, const EventSpec& spec) {
    double sup = 0.0;
    for (double v : u0) sup = std::max(sup, std::abs(v));
    if (sup == 0.0) return;
    const double h = spatial_seminorm(u0, spec.theta, spec.metric).value;
    const double eps = spec.epsilon;
    const double lam = lambda_theta(spec.theta);
    double bound = 0.0;
    switch (spec.kind) {
        case EventKind::spatial_sup:
        case EventKind::fixed_time: bound = eps / 2.0; break;
        case EventKind::temporal_sup:
        case EventKind::fixed_point: bound = eps / (2.0 * lam); break;
        case EventKind::combined:
        case EventKind::joint_with_supnorm: bound = eps / 2.0 * std::min(1.0, 1.0 / lam); break;
        case EventKind::block_U:
        case EventKind::block_H:
        case EventKind::block_T:
        case EventKind::block_B:
            require(sup <= std::pow(eps, 1.0 / (2.0 * spec.theta)) / 3.0,
                    "initial profile violates |u0| <= eps^{1/(2 theta)}/3");
            bound = eps / 3.0;
            break;
        case EventKind::diff_h: return;
    }
    require(h <= bound, "initial profile violates the Holder bound of the targeted result (H(u0) = " +
                            std::to_string(h) + ", bound " + std::to_string(bound) + ")");
}

FieldPath ensemble_path(const EnsembleConfig& cfg, std::size_t k, const DriftSpec* drift) {
    const auto u0 = cfg.initial_profile();
    const std::uint64_t stream = cfg.stream_offset + k;
    if (cfg.solver == SolverKind::spectral) {
        require(cfg.sigma.kind == SigmaKind::constant, "spectral solver needs constant sigma");
        require(drift == nullptr, "spectral solver has no drift");
        return solve_spectral_constant(cfg.grid, cfg.sigma(0.0, 0.0, 0.0), u0, stream, cfg.base_seed);
    }
    const auto noise = sample_noise(cfg.grid, stream, cfg.base_seed);
    return solve_fd(cfg.grid, cfg.sigma, u0, drift, noise);
}

std::vector<double> plain_statistics(const EventSpec& spec, const EnsembleConfig& cfg) {
    spec.validate();
    cfg.grid.validate();
    if (cfg.enforce_hypotheses) enforce_initial_profile(cfg.initial_profile(), spec);
    return parallel_map<double>(cfg.n, [&](std::size_t k) { return event_statistic(ensemble_path(cfg, k), spec); });
}

MCEstimate estimate_from_statistics(const std::vector<double>& stats, double epsilon, const EnsembleConfig& cfg) {
    const auto hits = static_cast<std::size_t>(std::count_if(stats.begin(), stats.end(), [&](double s) { return s <= epsilon; }));
    MCEstimate e = binomial_estimate(hits, stats.size());
    e.method = "plain";
    e.seed_base = cfg.base_seed;
    e.stream_begin = cfg.stream_offset;
    e.stream_end = cfg.stream_offset + stats.size();
    return e;
}

MCEstimate estimate_plain(const EventSpec& spec, const EnsembleConfig& cfg) {
    require(cfg.n >= 100, "estimate_plain: need n >= 100");
    return estimate_from_statistics(plain_statistics(spec, cfg), spec.epsilon, cfg);
}

SplittingResult estimate_splitting(const EventSpec& spec, const EnsembleConfig& cfg, std::size_t m, std::size_t R) {
    spec.validate();
    require(block_decomposable(spec.kind), "estimate_splitting: event does not decompose over time blocks");
    require(spec.block_index == EventSpec::kAllBlocks, "estimate_splitting: needs the intersection over all blocks");
    require(m >= 2 && R >= 2, "estimate_splitting: need m >= 2 and R >= 2");
    require(cfg.solver == SolverKind::fd, "estimate_splitting: uses the finite-difference solver");
    const Grid& grid = cfg.grid;
    grid.validate();
    if (cfg.enforce_hypotheses) enforce_initial_profile(cfg.initial_profile(), spec);
    const std::size_t L = block_length(spec, grid);
    const std::size_t blocks = (grid.n_t + L - 1) / L;
    const FdStepper stepper(grid);
    const auto u0 = cfg.initial_profile();
    constexpr std::uint64_t kNoiseTag = 0x73706c6974ULL, kResampleTag = 0x726573616dULL;

    SplittingResult out;
    out.survival.assign(R, {});
    out.replication_estimates.assign(R, 0.0);
    for (std::size_t r = 0; r < R; ++r) {
        const std::uint64_t rep = cfg.stream_offset + r;
        std::vector<std::vector<double>> states(m, u0);
        double product = 1.0;
        for (std::size_t b = 0; b < blocks; ++b) {
            const std::size_t begin = b * L;
            const std::size_t end = std::min(grid.n_t, begin + L);
            auto run = [&](std::size_t p) -> std::vector<double> {
                StreamRng rng(cfg.base_seed, {kNoiseTag, rep, b, p});
                Array2D rows(end - begin + 1, grid.n_x);
                std::vector<double> u = states[p];
                std::copy(u.begin(), u.end(), rows.row(0).begin());
                std::vector<double> dW(grid.n_x);
                for (std::size_t n = begin; n < end; ++n) {
                    sample_noise_row(grid, rng, dW);
                    stepper.step(u, n, cfg.sigma, nullptr, dW);
                    std::copy(u.begin(), u.end(), rows.row(n - begin + 1).begin());
                }
                if (block_statistic(rows, grid.dt(), spec) > spec.epsilon) return {};
                return u;
            };
            auto next = parallel_map<std::vector<double>>(m, run);
            std::vector<std::size_t> alive;
            for (std::size_t p = 0; p < m; ++p)
                if (!next[p].empty()) alive.push_back(p);
            const double frac = static_cast<double>(alive.size()) / static_cast<double>(m);
            out.survival[r].push_back(frac);
            product *= frac;
            if (alive.empty()) {
                ++out.estimate.extinctions;
                break;
            }
            StreamRng pick(cfg.base_seed, {kResampleTag, rep, b});
            std::vector<std::vector<double>> resampled(m);
            for (std::size_t p = 0; p < m; ++p) resampled[p] = next[alive[pick.index(alive.size())]];
            states = std::move(resampled);
        }
        out.replication_estimates[r] = product;
    }
    const double Rd = static_cast<double>(R);
    double mean = 0.0;
    for (double v : out.replication_estimates) mean += v;
    mean /= Rd;
    double var = 0.0;
    for (double v : out.replication_estimates) var += (v - mean) * (v - mean);
    var /= (Rd - 1.0);
    MCEstimate& e = out.estimate;
    e.p_hat = mean;
    e.n = m * R;
    e.stderr_ = std::sqrt(var / Rd);
    e.ci_lo = std::max(0.0, mean - 1.959963984540054 * e.stderr_);
    e.ci_hi = std::min(1.0, mean + 1.959963984540054 * e.stderr_);
    if (e.ci_hi <= e.ci_lo) e.ci_hi = std::min(1.0, e.ci_lo + 3.0 / static_cast<double>(e.n));
    e.method = "splitting";
    e.seed_base = cfg.base_seed;
    e.stream_begin = cfg.stream_offset;
    e.stream_end = cfg.stream_offset + R;
    return out;
}

GirsanovTilt::GirsanovTilt(const Grid& grid, std::span<const double> u0, double t1, const SigmaSpec& sigma)
    : grid_(grid), t1_(t1) {
    grid.validate();
    require(t1 > 0.0, "girsanov_tilt: t1 must be > 0");
    require(sigma.kind != SigmaKind::u_dependent, "girsanov_tilt: sigma must not depend on u");
    require(u0.size() == grid.n_x, "girsanov_tilt: u0 has the wrong length");
    const double steps = t1 / grid.dt();
    n1_ = static_cast<std::size_t>(std::llround(steps));
    require(n1_ >= 1 && std::abs(steps - static_cast<double>(n1_)) <= 1e-9 * steps,
            "girsanov_tilt: t1 must be a positive multiple of dt");
    n1_ = std::min(n1_, grid.n_t);
    for (double v : u0) {
        require(std::isfinite(v), "girsanov_tilt: u0 must be finite");
        if (v != 0.0) zero_ = false;
    }
    h_ = Array2D(n1_, grid.n_x);
    g_ = Array2D(n1_, grid.n_x);
    const FdStepper stepper(grid);
    std::vector<double> free(u0.begin(), u0.end());  // R^m u0
    const double cell = grid.dt() * grid.dx();
    for (std::size_t m = 0; m < n1_; ++m) {
        for (std::size_t j = 0; j < grid.n_x; ++j) {
            const double s = sigma(grid.time(m), grid.space(j), 0.0);
            h_(m, j) = free[j] / (s * t1);
            g_(m, j) = -free[j] / t1;
            z2_ += h_(m, j) * h_(m, j) * cell;
        }
        stepper.resolve(free);
    }
    const Array2D* table = &g_;
    const Grid g = grid_;
    const std::size_t n1 = n1_;
    double bound = 0.0;
    for (double v : g_.flat()) bound = std::max(bound, std::abs(v));
    drift_.bound = bound;
    drift_.eval = [table, g, n1](double t, double x) {
        const auto m = static_cast<std::size_t>(std::llround(t / g.dt()));
        if (m >= n1) return 0.0;
        const auto j = static_cast<std::size_t>(std::llround(x * static_cast<double>(g.n_x))) % g.n_x;
        return (*table)(m, j);
    };
}

double GirsanovTilt::log_weight(const NoiseField& q_noise) const {
    require(q_noise.grid == grid_, "log_weight: noise lives on a different grid");
    double acc = 0.0;
    for (std::size_t m = 0; m < n1_; ++m)
        for (std::size_t j = 0; j < grid_.n_x; ++j) acc += h_(m, j) * q_noise.increments(m, j);
    return acc - 0.5 * z2_;
}

double rn_second_moment(std::span<const double> u0, const SigmaSpec& sigma, double t1, const KernelConfig& cfg) {
    require(t1 > 0.0, "rn_second_moment: t1 must be > 0");
    require(sigma.kind != SigmaKind::u_dependent, "rn_second_moment: sigma must not depend on u");
    const std::size_t n = u0.size();
    require(n >= 2, "rn_second_moment: u0 too short");
    if (std::all_of(u0.begin(), u0.end(), [](double v) { return v == 0.0; })) return 1.0;
    const double dx = 1.0 / static_cast<double>(n);
    const double two_pi = 2.0 * std::numbers::pi;

    // G_s acts on the trigonometric interpolant of u0: mode k decays by exp(-2 pi^2 k^2 s)
    struct Mode {
        double k, re, im;  // coefficient of exp(2 pi i k x), signed frequency
    };
    std::vector<Mode> modes;
    double largest = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double re = 0.0, im = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double ang = two_pi * static_cast<double>((k * j) % n) * dx;
            re += u0[j] * std::cos(ang);
            im -= u0[j] * std::sin(ang);
        }
        const double freq = 2 * k <= n ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
        modes.push_back({freq, re * dx, im * dx});
        largest = std::max(largest, std::hypot(re, im) * dx);
    }
    std::erase_if(modes, [&](const Mode& m) { return std::hypot(m.re, m.im) <= 1e-15 * largest; });
    auto rate = [&](const Mode& m) { return 2.0 * std::numbers::pi * std::numbers::pi * m.k * m.k; };

    double z = 0.0;
    if (sigma.kind == SigmaKind::constant) {
        // Parseval on the grid, then int_0^t1 exp(-2 rate s) ds in closed form
        const double s0 = sigma(0.0, 0.0, 0.0);
        require(s0 >= sigma.c1 * (1.0 - 1e-12), "rn_second_moment: sigma below c1");
        for (const auto& m : modes) {
            const double r2 = 2.0 * rate(m);
            const double time = r2 * t1 < 1e-8 ? t1 : -std::expm1(-r2 * t1) / r2;
            z += (m.re * m.re + m.im * m.im) * time;
        }
        z /= s0 * s0 * t1 * t1;
    } else {
        auto integrand = [&](double s) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double y = static_cast<double>(j) * dx;
                double v = 0.0;
                for (const auto& m : modes) {
                    const double ang = two_pi * m.k * y;
                    v += std::exp(-rate(m) * s) * (m.re * std::cos(ang) - m.im * std::sin(ang));
                }
                const double sg = sigma(s, y, 0.0);
                require(sg >= sigma.c1 * (1.0 - 1e-12), "rn_second_moment: sigma below c1 at a quadrature node");
                acc += (v / (sg * t1)) * (v / (sg * t1));
            }
            return acc * dx;
        };
        z = quad::adaptive_simpson(integrand, 0.0, t1, cfg.quad_abs_tol, cfg.quad_max_subdiv);
    }
    return std::exp(z);
}

MCEstimate estimate_importance(const EventSpec& spec, const GirsanovTilt& tilt, const EnsembleConfig& cfg) {
    spec.validate();
    require(cfg.n >= 100, "estimate_importance: need n >= 100");
    require(cfg.solver == SolverKind::fd, "estimate_importance: uses the finite-difference solver");
    if (cfg.enforce_hypotheses) enforce_initial_profile(cfg.initial_profile(), spec);
    const auto u0 = cfg.initial_profile();
    const DriftSpec* drift = tilt.is_zero() ? nullptr : &tilt.drift();
    const auto vals = parallel_map<double>(cfg.n, [&](std::size_t k) {
        const auto noise = sample_noise(cfg.grid, cfg.stream_offset + k, cfg.base_seed);
        const auto path = solve_fd(cfg.grid, cfg.sigma, u0, drift, noise);
        if (!event_check(path, spec)) return 0.0;
        return tilt.is_zero() ? 1.0 : std::exp(tilt.log_weight(noise));
    });
    const double nd = static_cast<double>(cfg.n);
    double sum = 0.0, sq = 0.0;
    for (double v : vals) {
        sum += v;
        sq += v * v;
    }
    MCEstimate e;
    e.n = cfg.n;
    e.p_hat = sum / nd;
    const double var = std::max(0.0, (sq - nd * e.p_hat * e.p_hat) / (nd - 1.0));
    e.stderr_ = std::sqrt(var / nd);
    e.ess = sq > 0.0 ? sum * sum / sq : 0.0;
    e.low_confidence = e.ess < 30.0;
    if (sum == 0.0) {
        e.ci_lo = 0.0;
        e.ci_hi = std::min(1.0, 3.0 / nd);
    } else {
        e.ci_lo = std::max(0.0, e.p_hat - 1.959963984540054 * e.stderr_);
        e.ci_hi = std::min(1.0, e.p_hat + 1.959963984540054 * e.stderr_);
    }
    e.method = "importance";
    e.seed_base = cfg.base_seed;
    e.stream_begin = cfg.stream_offset;
    e.stream_end = cfg.stream_offset + cfg.n;
    return e;
}

LineFit weighted_line(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& w) {
    require(x.size() == y.size() && x.size() == w.size(), "weighted_line: size mismatch");
    require(x.size() >= 2, "weighted_line: need at least 2 points");
    double sw = 0, sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        require(w[i] > 0.0 && std::isfinite(w[i]), "weighted_line: weights must be positive");
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
    }
    const double mx = sx / sw, my = sy / sw;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += w[i] * (x[i] - mx) * (x[i] - mx);
        sxy += w[i] * (x[i] - mx) * (y[i] - my);
        syy += w[i] * (y[i] - my) * (y[i] - my);
    }
    require(sxx > 0.0, "weighted_line: abscissae are all equal");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    f.points = x.size();
    return f;
}

ExponentFit exponent_fit(const std::vector<FitRow>& rows) {
    require(rows.size() >= 4, "exponent_fit: need at least 4 eps values");
    ExponentFit fit;
    std::vector<double> x, y, w;
    bool any_se = false;
    for (const auto& r : rows) any_se = any_se || r.stderr_ > 0.0;
    for (const auto& r : rows) {
        if (!(r.p_hat > 0.0 && r.p_hat < 1.0)) {
            fit.warnings.push_back("excluded eps = " + std::to_string(r.epsilon) + " with p_hat = " +
                                   std::to_string(r.p_hat));
            continue;
        }
        require(r.epsilon > 0.0, "exponent_fit: eps must be > 0");
        const double lp = std::log(r.p_hat);
        x.push_back(std::log(r.epsilon));
        y.push_back(std::log(-lp));
        // d/dp log(-log p) = 1 / (p log p)
        const double se_y = r.stderr_ / (r.p_hat * std::abs(lp));
        w.push_back(any_se ? 1.0 / std::max(se_y * se_y, 1e-300) : 1.0);
        fit.table.push_back(r);
    }
    require(x.size() >= 2, "exponent_fit: fewer than 2 usable rows");
    const LineFit lf = weighted_line(x, y, w);
    fit.slope = lf.slope;
    fit.intercept = lf.intercept;
    fit.r2 = lf.r2;
    return fit;
}

std::string to_string(TailStatistic s) {
    switch (s) {
        case TailStatistic::sup_N: return "sup_N";
        case TailStatistic::sup_Ntilde: return "sup_Ntilde";
        case TailStatistic::sup_Nhash: return "sup_Nhash";
    }
    return "unknown";
}

TailStatistic tail_statistic_from_string(const std::string& s) {
    if (s == "sup_N") return TailStatistic::sup_N;
    if (s == "sup_Ntilde") return TailStatistic::sup_Ntilde;
    if (s == "sup_Nhash") return TailStatistic::sup_Nhash;
    throw DomainError("unknown tail statistic: " + s);
}

double box_statistic(const FieldPath& path, const TailBox& box, TailStatistic stat) {
    const Grid& g = path.grid;
    const double delta = std::pow(box.epsilon, 1.0 / box.theta);
    const double horizon = box.alpha * delta * delta;
    require(box.a >= 0.0 && box.a + delta <= 1.0 + 1e-12, "tail box leaves [0, 1)");
    require(horizon <= g.T * (1.0 + 1e-12), "tail box is longer than the grid horizon");
    const auto rows = static_cast<std::size_t>(std::floor(horizon / g.dt() + 1e-9));
    const auto c0 = static_cast<std::size_t>(std::ceil(box.a * static_cast<double>(g.n_x) - 1e-9));
    const auto c1 = static_cast<std::size_t>(std::floor((box.a + delta) * static_cast<double>(g.n_x) + 1e-9));
    require(rows >= 1 && c1 > c0 && c1 < g.n_x + 1, "tail box holds fewer than 2 grid points per side");
    const std::size_t c_end = std::min(c1, g.n_x - 1);
    Array2D sub(rows + 1, c_end - c0 + 1);
    for (std::size_t r = 0; r <= rows; ++r)
        for (std::size_t c = c0; c <= c_end; ++c) sub(r, c - c0) = path.values(r, c);
    switch (stat) {
        case TailStatistic::sup_N: return sup_abs_all(sub);
        case TailStatistic::sup_Ntilde: {
            double best = 0.0;
            for (std::size_t r = 0; r <= rows; ++r)
                best = std::max(best, spatial_seminorm(sub.row(r), box.theta, Metric::representative, g.dx()).value);
            return best;
        }
        case TailStatistic::sup_Nhash:
            return sup_temporal(sub, box.theta, g.dt() * static_cast<double>(rows), 1).value;
    }
    throw DomainError("box_statistic: unknown statistic");
}

LineFit fit_tail(const std::vector<TailRow>& rows, double p_min, double p_max) {
    std::vector<double> x, y, w;
    for (const auto& r : rows) {
        if (r.p_hat < p_min || r.p_hat > p_max || r.p_hat <= 0.0 || r.p_hat >= 1.0) continue;
        x.push_back(r.lambda * r.lambda);
        y.push_back(std::log(r.p_hat));
        // Var(log p) ~ (1 - p) / (n p)
        w.push_back(static_cast<double>(r.n) * r.p_hat / (1.0 - r.p_hat));
    }
    require(x.size() >= 3, "fit_tail: fewer than 3 rows in the estimable range");
    return weighted_line(x, y, w);
}

TailCurve tail_curve(TailStatistic stat, const TailBox& box, const std::vector<double>& lambdas,
                     const EnsembleConfig& cfg, double p_min, double p_max) {
    require(box.epsilon > 0.0 && box.theta > 0.0 && box.theta <= 0.5 && box.alpha > 0.0, "invalid tail box");
    require(cfg.n >= 100, "tail_curve: need n >= 100");
    const auto u0 = cfg.initial_profile();
    const bool zero = std::all_of(u0.begin(), u0.end(), [](double v) { return v == 0.0; });
    const auto stats = parallel_map<double>(cfg.n, [&](std::size_t k) {
        FieldPath path = ensemble_path(cfg, k);
        if (!zero)
            for (std::size_t r = 0; r <= cfg.grid.n_t; ++r) {
                const auto nrow = noise_term(path, u0, r);
                std::copy(nrow.begin(), nrow.end(), path.values.row(r).begin());
            }
        return box_statistic(path, box, stat);
    });
    TailCurve out;
    out.scale = stat == TailStatistic::sup_N ? std::pow(box.epsilon, 1.0 / (2.0 * box.theta)) : box.epsilon;
    for (double lam : lambdas) {
        const auto hits = static_cast<std::size_t>(
            std::count_if(stats.begin(), stats.end(), [&](double s) { return s > lam * out.scale; }));
        const MCEstimate e = binomial_estimate(hits, stats.size());
        out.rows.push_back({lam, e.p_hat, e.ci_lo, e.ci_hi, e.n});
    }
    try {
        out.fit = fit_tail(out.rows, p_min, p_max);
    } catch (const DomainError&) {
        out.fit = {};
    }
    return out;
}

}  // namespace shelab
