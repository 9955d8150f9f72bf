#pragma once

#include <Eigen/Dense>

#include "shelab/heat_kernel.hpp"
#include "shelab/solver.hpp"

namespace shelab {

/// delta = eps^{1/theta}, t1 = c0 delta^2, x_j = j c1 delta, J = floor(1/(c1 delta)).
/// Increments Delta_j = u(t1, x_j + delta) - u(t1, x_j) are indexed j = 0..J-1.
struct IncrementScheme {
    double epsilon = 0.3;
    double theta = 0.3;
    double c0 = 1.0;
    double c1 = 4.0;
    double delta = 0.0;
    double t1 = 0.0;
    std::size_t J = 0;

    static IncrementScheme make(double epsilon, double theta, double c0, double c1);
    double x(std::size_t j) const { return static_cast<double>(j) * c1 * delta; }
};

/// Cov(Delta_k, Delta_l) of the noise term. Constant sigma uses the 1-D
/// semigroup reduction; (t, x) sigma, or force_direct, integrates in (s, y).
double increment_covariance(std::size_t k, std::size_t l, const IncrementScheme& scheme, const SigmaSpec& sigma,
                            const KernelConfig& cfg = {}, bool force_direct = false);

struct CovarianceReport {
    Eigen::MatrixXd S;
    Eigen::VectorXd D;  // standard deviations
    Eigen::MatrixXd A;  // I - D^{-1} S D^{-1}
    double norm_A = 0.0;
    double norm_S_inv = 0.0;        // direct, NaN when S is singular
    double neumann_bound = 0.0;     // ||D^{-1}||^2 / (1 - ||A||), NaN when ||A|| >= 1
    double min_eigenvalue = 0.0;
    bool singular = false;
    std::vector<double> conditional_variances;  // Var(Delta_j | Delta_0..Delta_{j-1})
};

/// Induced l1 norm: max column absolute sum.
double norm_11(const Eigen::MatrixXd& M);

CovarianceReport covariance_report(const IncrementScheme& scheme, const SigmaSpec& sigma, const KernelConfig& cfg = {});

/// Var(X_j | X_0..X_{m-1}) for a covariance matrix S, m <= j.
double schur_conditional_variance(const Eigen::MatrixXd& S, std::size_t j, std::size_t m);

/// P(|Z| <= sqrt(delta / var)) for standard normal Z.
double eta_from_variance(double delta, double var);

/// eta evaluated at the smallest conditional variance of the report.
double eta_bound(const IncrementScheme& scheme, const CovarianceReport& report);

}  // namespace shelab
