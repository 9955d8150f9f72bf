#include "shelab/gaussian_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "shelab/quadrature.hpp"

namespace shelab {

IncrementScheme IncrementScheme::make(double epsilon, double theta, double c0, double c1) {
    require(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
    require(theta > 0.0 && theta <= 0.5, "theta must lie in (0, 1/2]");
    require(c0 > 0.0, "c0 must be > 0");
    require(c1 > 0.0, "c1 must be > 0");
    IncrementScheme s;
    s.epsilon = epsilon;
    s.theta = theta;
    s.c0 = c0;
    s.c1 = c1;
    s.delta = std::pow(epsilon, 1.0 / theta);
    s.t1 = c0 * s.delta * s.delta;
    s.J = static_cast<std::size_t>(std::floor(1.0 / (c1 * s.delta)));
    return s;
}

namespace {

double wrap(double x) { return x - std::floor(x); }

double direct_covariance(double xk, double xl, double delta, double t1, const SigmaSpec& sigma,
                         const KernelConfig& cfg) {
    const double tol = cfg.quad_abs_tol;
    const int depth = cfg.quad_max_subdiv;
    std::vector<double> cuts{0.0, 1.0, wrap(xk), wrap(xk + delta), wrap(xl), wrap(xl + delta)};
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    // r = t1 - s is the kernel age; sigma is evaluated at s
    auto inner = [&](double r) {
        auto f = [&](double y) {
            const double gk = torus_kernel(r, xk + delta - y, cfg) - torus_kernel(r, xk - y, cfg);
            const double gl = torus_kernel(r, xl + delta - y, cfg) - torus_kernel(r, xl - y, cfg);
            const double s = sigma(t1 - r, y, 0.0);
            return s * s * gk * gl;
        };
        // kernel peaks sit on the cuts with width sqrt(r)
        const double w0 = std::sqrt(r);
        double acc = 0.0;
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) acc += quad::graded_gauss(f, cuts[c], cuts[c + 1], w0);
        return acc;
    };
    return quad::integrate_sqrt_singular(inner, t1, tol, depth);
}

}  // namespace

double increment_covariance(std::size_t k, std::size_t l, const IncrementScheme& scheme, const SigmaSpec& sigma,
                            const KernelConfig& cfg, bool force_direct) {
    require(k < scheme.J && l < scheme.J, "increment_covariance: index out of range");
    require(sigma.kind != SigmaKind::u_dependent, "increment_covariance: sigma must not depend on u");
    const double xk = scheme.x(k), xl = scheme.x(l);
    if (sigma.kind == SigmaKind::constant && !force_direct) {
        const double s0 = sigma(0.0, 0.0, 0.0);
        return s0 * s0 * shifted_increment_covariance(scheme.t1, scheme.delta, xk - xl, cfg);
    }
    return direct_covariance(xk, xl, scheme.delta, scheme.t1, sigma, cfg);
}

double norm_11(const Eigen::MatrixXd& M) {
    if (M.size() == 0) return 0.0;
    return M.cwiseAbs().colwise().sum().maxCoeff();
}

CovarianceReport covariance_report(const IncrementScheme& scheme, const SigmaSpec& sigma, const KernelConfig& cfg) {
    const std::size_t J = scheme.J;
    require(J >= 1, "covariance_report: scheme has no increments (J = 0)");
    require(sigma.kind != SigmaKind::u_dependent, "covariance_report: sigma must not depend on u");
    CovarianceReport rep;
    rep.S = Eigen::MatrixXd::Zero(J, J);
    std::map<std::size_t, double> by_gap;  // constant sigma: S is Toeplitz
    for (std::size_t k = 0; k < J; ++k)
        for (std::size_t l = 0; l <= k; ++l) {
            double v;
            if (sigma.kind == SigmaKind::constant) {
                auto it = by_gap.find(k - l);
                if (it == by_gap.end()) it = by_gap.emplace(k - l, increment_covariance(k, l, scheme, sigma, cfg)).first;
                v = it->second;
            } else {
                v = increment_covariance(k, l, scheme, sigma, cfg);
            }
            rep.S(k, l) = rep.S(l, k) = v;
        }
    rep.D = rep.S.diagonal().cwiseMax(0.0).cwiseSqrt();
    const Eigen::VectorXd dinv = rep.D.cwiseInverse();
    rep.A = Eigen::MatrixXd::Identity(J, J) - dinv.asDiagonal() * rep.S * dinv.asDiagonal();
    rep.norm_A = norm_11(rep.A);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(rep.S, Eigen::EigenvaluesOnly);
    rep.min_eigenvalue = eig.eigenvalues().minCoeff();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double dinv_norm = dinv.maxCoeff();
    rep.neumann_bound = rep.norm_A < 1.0 ? dinv_norm * dinv_norm / (1.0 - rep.norm_A) : nan;

    Eigen::LLT<Eigen::MatrixXd> llt(rep.S);
    const double scale = rep.S.diagonal().maxCoeff();
    rep.singular = llt.info() != Eigen::Success || rep.min_eigenvalue <= 1e-14 * scale;
    if (rep.singular) {
        rep.norm_S_inv = nan;
        rep.conditional_variances.assign(J, nan);
        return rep;
    }
    rep.norm_S_inv = norm_11(llt.solve(Eigen::MatrixXd::Identity(J, J)));
    const Eigen::MatrixXd L = llt.matrixL();
    for (std::size_t j = 0; j < J; ++j) rep.conditional_variances.push_back(L(j, j) * L(j, j));
    return rep;
}

double schur_conditional_variance(const Eigen::MatrixXd& S, std::size_t j, std::size_t m) {
    require(j < static_cast<std::size_t>(S.rows()) && m <= j, "schur_conditional_variance: need m <= j < dim");
    if (m == 0) return S(j, j);
    const Eigen::MatrixXd block = S.topLeftCorner(m, m);
    const Eigen::VectorXd cross = S.block(0, j, m, 1);
    Eigen::LLT<Eigen::MatrixXd> llt(block);
    require(llt.info() == Eigen::Success, "schur_conditional_variance: conditioning block is not positive definite");
    return S(j, j) - cross.dot(llt.solve(cross));
}

double eta_from_variance(double delta, double var) {
    require(delta > 0.0, "eta: delta must be > 0");
    require(var > 0.0 && std::isfinite(var), "eta: degenerate conditional variance");
    return std::erf(std::sqrt(delta / (2.0 * var)));
}

double eta_bound(const IncrementScheme& scheme, const CovarianceReport& report) {
    require(!report.conditional_variances.empty(), "eta_bound: no conditional variances");
    const double mn = *std::min_element(report.conditional_variances.begin(), report.conditional_variances.end());
    const double eta = eta_from_variance(scheme.delta, mn);
    require(eta < 1.0, "eta_bound: eta is not below 1");
    return eta;
}

}  // namespace shelab
