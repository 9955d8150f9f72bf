// Command-line front end: every subcommand maps onto shelab::run.
#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <utility>

#include "shelab/harness.hpp"

namespace {

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::optional<std::string> out;
    std::optional<std::size_t> n_x, n_t, n, m, R, stride, max_level, point, block_steps;
    std::optional<std::uint64_t> stream_offset;
    std::optional<double> T, theta, t1, beta, alpha, c0, c1;
    std::optional<std::vector<double>> eps, lambdas, betas;
    std::optional<std::string> event, method, solver, metric, sigma, u0, statistic, format, family, input;
    std::optional<std::vector<double>> sigma_params, u0_params;
};

void add_options(CLI::App* app, Overrides& o) {
    app->add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
    app->add_option("--seed", o.seed, "base seed");
    app->add_option("--threads", o.threads, "worker threads (default: SHELAB_THREADS or 1)");
    app->add_option("--out", o.out, "output prefix; writes <out>.csv and <out>.json");
    app->add_option("--n-x", o.n_x, "grid.n_x");
    app->add_option("--n-t", o.n_t, "grid.n_t");
    app->add_option("--T", o.T, "grid.T");
    app->add_option("--theta", o.theta, "event.theta");
    app->add_option("--eps", o.eps, "event.epsilons");
    app->add_option("--event", o.event, "event.kind");
    app->add_option("--metric", o.metric, "event.metric: representative | torus");
    app->add_option("--stride", o.stride, "event.stride");
    app->add_option("--method", o.method, "estimator.method: plain | splitting | importance");
    app->add_option("--solver", o.solver, "estimator.solver: fd | spectral");
    app->add_option("--n", o.n, "estimator.n");
    app->add_option("--m", o.m, "estimator.m (splitting particles)");
    app->add_option("--R", o.R, "estimator.R (splitting replications)");
    app->add_option("--t1", o.t1, "estimator.t1 (importance tilt horizon)");
    app->add_option("--sigma", o.sigma, "sigma.preset: const | tx_cos | sin_u");
    app->add_option("--sigma-params", o.sigma_params, "sigma.params");
    app->add_option("--u0", o.u0, "u0.preset: zero | const | sin | cos");
    app->add_option("--u0-params", o.u0_params, "u0.params");
    app->add_option("--beta", o.beta, "localize.beta");
    app->add_option("--betas", o.betas, "localize.betas");
    app->add_option("--max-level", o.max_level, "localize.max_level");
    app->add_option("--statistic", o.statistic, "tail.statistic: sup_N | sup_Ntilde | sup_Nhash");
    app->add_option("--alpha", o.alpha, "tail.alpha");
    app->add_option("--lambdas", o.lambdas, "tail.lambdas");
    app->add_option("--c0", o.c0, "covariance.c0");
    app->add_option("--c1", o.c1, "covariance.c1");
    app->add_option("--format", o.format, "simulate output: csv | binary");
    app->add_option("--point", o.point, "event.point (fixed_point column)");
    app->add_option("--family", o.family, "event.family: spatial | temporal");
    app->add_option("--block-steps", o.block_steps, "event.block_steps (0: from c_block eps^{2/theta})");
    app->add_option("--stream-offset", o.stream_offset, "seeds.stream_offset");
    app->add_option("--input", o.input, "exponent-fit: smallball CSV to fit")->check(CLI::ExistingFile);
}

template <class T, class U>
void apply(const std::optional<T>& v, U& dst) {
    if (v) dst = *v;
}

shelab::ExperimentConfig build(const std::string& sub, const Overrides& o) {
    shelab::ExperimentConfig c;
    if (!o.config_path.empty()) {
        std::ifstream f(o.config_path);
        std::stringstream ss;
        ss << f.rdbuf();
        c = shelab::config_from_json(ss.str());
    }
    c.subcommand = sub;
    apply(o.seed, c.base_seed);
    apply(o.threads, c.threads);
    apply(o.out, c.out);
    apply(o.n_x, c.grid.n_x);
    apply(o.n_t, c.grid.n_t);
    apply(o.T, c.grid.T);
    apply(o.theta, c.theta);
    apply(o.eps, c.epsilons);
    apply(o.event, c.event);
    apply(o.metric, c.metric);
    apply(o.stride, c.stride);
    apply(o.method, c.method);
    apply(o.solver, c.solver);
    apply(o.n, c.n);
    apply(o.m, c.m);
    apply(o.R, c.R);
    apply(o.t1, c.t1);
    apply(o.sigma, c.sigma.name);
    apply(o.sigma_params, c.sigma.params);
    apply(o.u0, c.u0.name);
    apply(o.u0_params, c.u0.params);
    apply(o.beta, c.beta);
    apply(o.betas, c.betas);
    apply(o.max_level, c.max_level);
    apply(o.statistic, c.tail_statistic);
    apply(o.alpha, c.alpha);
    apply(o.lambdas, c.lambdas);
    apply(o.c0, c.c0);
    apply(o.c1, c.c1);
    apply(o.format, c.format);
    apply(o.point, c.point);
    apply(o.family, c.family);
    apply(o.block_steps, c.block_steps);
    apply(o.stream_offset, c.stream_offset);
    apply(o.input, c.input);
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"shelab: stochastic heat equation small-ball lab"};
    app.require_subcommand(1);
    Overrides o;
    const std::pair<const char*, const char*> commands[] = {
        {"simulate", "sample paths with the FD or spectral solver"},
        {"smallball", "estimate P(event <= eps) over an eps sweep"},
        {"exponent-fit", "fit log(-log p) against log eps"},
        {"tail-curve", "tail probabilities of box statistics against lambda"},
        {"localize", "Picard / window-truncation errors and decay"},
        {"mollify", "mollification error and derivative growth"},
        {"verify-kernel", "kernel identities and quadrature checks"},
        {"verify-covariance", "increment covariance and Schur conditional variances"},
    };
    for (const auto& [name, help] : commands) add_options(app.add_subcommand(name, help), o);
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << shelab::error_json("usage", e.what()) << '\n';
        return 2;
    }
    const std::string sub = app.get_subcommands().front()->get_name();
    try {
        const auto cfg = build(sub, o);
        const auto rec = shelab::run(cfg);
        if (cfg.out.empty()) {
            shelab::write_csv(std::cout, rec.table);
        } else {
            for (const auto& path : shelab::persist(rec, cfg.out)) std::cerr << "wrote " << path << '\n';
        }
        for (const auto& w : rec.warnings) std::cerr << "warning: " << w << '\n';
        if (!rec.ok) {
            std::cerr << shelab::error_json("verification", sub + ": one or more checks failed") << '\n';
            return 3;
        }
        return 0;
    } catch (const shelab::ConfigError& e) {
        std::cerr << shelab::error_json("config", e.what(), e.fields()) << '\n';
        return 2;
    } catch (const shelab::NumericalFailure& e) {
        std::cerr << shelab::error_json("numerical", e.what()) << '\n';
        return 4;
    } catch (const shelab::DomainError& e) {
        std::cerr << shelab::error_json("domain", e.what()) << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << shelab::error_json("runtime", e.what()) << '\n';
        return 1;
    }
}
