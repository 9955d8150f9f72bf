#include <doctest.h>

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "shelab/gaussian_analysis.hpp"
#include "stats.hpp"

using namespace shelab;

namespace {

constexpr double kPi = std::numbers::pi;

double bernoulli2(double x) {
    x -= std::floor(x);
    return x * x - x + 1.0 / 6.0;
}

// Fourier series of Cov(u(t1, a + delta) - u(t1, a), u(t1, delta) - u(t1, 0)) for sigma = 1.
// The t-independent part sum 4 cos(2 pi k a)(1 - cos 2 pi k delta)/(4 pi^2 k^2) is summed in
// closed form through B_2; the remaining exponentially damped series converges fast.
double fourier_increment_cov(double t1, double delta, double a) {
    double v = bernoulli2(a) - 0.5 * bernoulli2(a + delta) - 0.5 * bernoulli2(a - delta);
    for (int k = 1; k < 200000; ++k) {
        const double lam = 4 * kPi * kPi * k * k;
        const double damp = std::exp(-lam * t1);
        if (damp < 1e-300) break;
        v -= 4 * std::cos(2 * kPi * k * a) * (1 - std::cos(2 * kPi * k * delta)) * damp / lam;
    }
    return v;
}

// Var(X_j | X_0..X_{m-1}) = 1 / (inverse of the sub-covariance)_{last, last}
double inverse_oracle(const Eigen::MatrixXd& S, std::size_t j, std::size_t m) {
    Eigen::MatrixXd sub(m + 1, m + 1);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < m; ++i) idx.push_back(i);
    idx.push_back(j);
    for (std::size_t a = 0; a <= m; ++a)
        for (std::size_t b = 0; b <= m; ++b) sub(a, b) = S(idx[a], idx[b]);
    return 1.0 / sub.inverse()(m, m);
}

Eigen::MatrixXd random_spd(int n, std::uint32_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    Eigen::MatrixXd B(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) B(i, j) = z(rng);
    return B * B.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
}

}  // namespace

TEST_SUITE("gaussian_analysis") {

TEST_CASE("increment scheme geometry") {
    const auto s = IncrementScheme::make(0.3, 0.3, 2.0, 4.0);
    CHECK(s.delta == doctest::Approx(std::exp(std::log(0.3) / 0.3)).epsilon(1e-15));
    CHECK(s.t1 == doctest::Approx(2.0 * s.delta * s.delta).epsilon(1e-15));
    CHECK(s.J == static_cast<std::size_t>(std::floor(1.0 / (4.0 * s.delta))));
    CHECK(s.x(3) == doctest::Approx(12.0 * s.delta).epsilon(1e-15));
    CHECK(s.x(s.J - 1) + s.delta < 1.0);
    CHECK_THROWS_AS(IncrementScheme::make(1.0, 0.3, 1, 4), DomainError);
    CHECK_THROWS_AS(IncrementScheme::make(0.3, 0.6, 1, 4), DomainError);
    CHECK_THROWS_AS(IncrementScheme::make(0.3, 0.3, 0, 4), DomainError);
    CHECK_THROWS_AS(IncrementScheme::make(0.3, 0.3, 1, -1), DomainError);
}

TEST_CASE("constant-sigma covariance matches the Fourier oracle") {
    const auto s = IncrementScheme::make(0.3, 0.3, 1.0, 4.0);
    const auto one = SigmaSpec::constant(1.0);
    for (std::size_t k = 0; k < 4; ++k) {
        const double ref = fourier_increment_cov(s.t1, s.delta, s.x(k) - s.x(0));
        CHECK(std::abs(increment_covariance(k, 0, s, one) - ref) < 1e-9);
    }
    const auto two = SigmaSpec::constant(2.0);
    CHECK(increment_covariance(1, 1, s, two) == doctest::Approx(4.0 * increment_covariance(1, 1, s, one)));
}

TEST_CASE("symmetry and index range") {
    const auto s = IncrementScheme::make(0.4, 0.35, 1.0, 4.0);
    const auto sig = SigmaSpec::tx_cos(1.0, 0.3);
    CHECK(increment_covariance(0, 2, s, sig) == doctest::Approx(increment_covariance(2, 0, s, sig)).epsilon(1e-9));
    CHECK_THROWS_AS(increment_covariance(s.J, 0, s, sig), DomainError);
    CHECK_THROWS_AS(increment_covariance(0, 0, s, SigmaSpec::sin_u(1.0, 0.5)), DomainError);
}

TEST_CASE("direct quadrature agrees with the semigroup reduction") {
    const auto s = IncrementScheme::make(0.4, 0.35, 1.0, 4.0);
    const auto one = SigmaSpec::constant(1.0);
    for (std::size_t k = 0; k < 2; ++k) {
        const double red = increment_covariance(k, 0, s, one);
        const double dir = increment_covariance(k, 0, s, one, {}, true);
        CHECK(std::abs(red - dir) < 1e-8);
    }
    // a tx preset with b = 0 goes through the direct path and must reproduce a^2 times the reduction
    const auto flat = SigmaSpec::tx_cos(1.5, 0.0);
    CHECK(std::abs(increment_covariance(0, 0, s, flat) - 2.25 * increment_covariance(0, 0, s, one)) < 1e-8);
}

TEST_CASE("distant increments are negatively correlated") {
    for (double eps : {0.2, 0.3, 0.4})
        for (double c1 : {4.0, 8.0}) {
            const auto s = IncrementScheme::make(eps, 0.3, 1.0, c1);
            for (std::size_t k = 1; k < std::min<std::size_t>(s.J, 6); ++k)
                CHECK(increment_covariance(k, 0, s, SigmaSpec::constant(1.0)) <= 0.0);
        }
}

TEST_CASE("variance scales like delta") {
    std::vector<double> ratio;
    for (double eps : {0.1, 0.2, 0.3, 0.4, 0.5}) {
        const auto s = IncrementScheme::make(eps, 0.3, 1.0, 4.0);
        ratio.push_back(increment_covariance(0, 0, s, SigmaSpec::constant(1.0)) / s.delta);
    }
    const auto [lo, hi] = std::minmax_element(ratio.begin(), ratio.end());
    CHECK(*hi / *lo <= 3.0);
    CHECK(*lo > 0.0);
}

TEST_CASE("norm_11 is the max column absolute sum") {
    Eigen::MatrixXd M(2, 3);
    M << 1, -4, 0.5, -2, 1, -0.25;
    CHECK(norm_11(M) == 5.0);
    CHECK(norm_11(Eigen::MatrixXd()) == 0.0);
}

TEST_CASE("Schur conditional variance against the inverse oracle") {
    const auto S = random_spd(6, 3);
    for (std::size_t j = 0; j < 6; ++j) {
        double prev = S(j, j);
        CHECK(schur_conditional_variance(S, j, 0) == S(j, j));
        for (std::size_t m = 1; m <= j; ++m) {
            const double v = schur_conditional_variance(S, j, m);
            CHECK(v == doctest::Approx(inverse_oracle(S, j, m)).epsilon(1e-10));
            CHECK(v <= prev * (1 + 1e-12));
            prev = v;
        }
    }
    CHECK_THROWS_AS(schur_conditional_variance(S, 2, 3), DomainError);
}

TEST_CASE("covariance report, c1 = 16") {
    const auto s = IncrementScheme::make(0.3, 0.3, 1.0, 16.0);
    REQUIRE(s.J >= 2);
    const auto rep = covariance_report(s, SigmaSpec::constant(1.0));
    const auto J = static_cast<Eigen::Index>(s.J);
    CHECK(rep.S.rows() == J);
    CHECK((rep.S - rep.S.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(rep.min_eigenvalue >= -1e-10);
    CHECK_FALSE(rep.singular);

    double colmax = 0;
    for (Eigen::Index c = 0; c < J; ++c) {
        double sum = 0;
        for (Eigen::Index r = 0; r < J; ++r) sum += std::abs(rep.A(r, c));
        colmax = std::max(colmax, sum);
    }
    CHECK(rep.norm_A == colmax);
    CHECK(rep.norm_A < 1.0 / 3.0);
    CHECK(rep.norm_S_inv <= rep.neumann_bound * (1 + 1e-12));

    for (std::size_t j = 0; j < s.J; ++j) {
        const double cv = rep.conditional_variances[j];
        CHECK(cv == doctest::Approx(schur_conditional_variance(rep.S, j, j)).epsilon(1e-10));
        CHECK(cv / rep.S(j, j) >= 0.5);
        CHECK(cv / s.delta > 0.0);
    }
}

TEST_CASE("covariance report with a single increment") {
    const auto s = IncrementScheme::make(0.3, 0.3, 1.0, 40.0);
    REQUIRE(s.J == 1);
    const auto rep = covariance_report(s, SigmaSpec::constant(1.0));
    CHECK(rep.conditional_variances[0] == doctest::Approx(rep.S(0, 0)).epsilon(1e-14));
    CHECK(rep.norm_A < 1e-15);
}

TEST_CASE("eta") {
    const boost::math::normal nd;
    const double ref = 2 * boost::math::cdf(nd, 1.0) - 1;
    CHECK(eta_from_variance(0.01, 0.01) == doctest::Approx(ref).epsilon(1e-14));
    CHECK(ref == doctest::Approx(0.6827).epsilon(1e-4));
    CHECK(eta_from_variance(0.01, 1e12) < 1e-6);
    CHECK_THROWS_AS(eta_from_variance(0.01, 0.0), DomainError);
    CHECK_THROWS_AS(eta_from_variance(0.01, std::nan("")), DomainError);

    const auto s = IncrementScheme::make(0.3, 0.3, 1.0, 16.0);
    const auto rep = covariance_report(s, SigmaSpec::constant(1.0));
    const double eta = eta_bound(s, rep);
    CHECK(eta > 0.0);
    CHECK(eta < 1.0);
}

TEST_CASE("quadrature covariance matches spectral increments") {
    const auto s = IncrementScheme::make(0.4, 0.35, 1.0, 4.0);
    const auto rep = covariance_report(s, SigmaSpec::constant(1.0));
    std::vector<double> pts;
    for (std::size_t j = 0; j < s.J; ++j) {
        pts.push_back(s.x(j));
        pts.push_back(s.x(j) + s.delta);
    }
    SpectralPointSampler sampler(4096, s.t1, 1.0, pts);
    const std::size_t N = 10000;
    std::vector<std::vector<double>> inc(s.J, std::vector<double>(N));
    for (std::size_t n = 0; n < N; ++n) {
        StreamRng rng(17, n);
        const auto v = sampler.sample(rng);
        for (std::size_t j = 0; j < s.J; ++j) inc[j][n] = v[2 * j + 1] - v[2 * j];
    }
    for (std::size_t k = 0; k < s.J; ++k)
        for (std::size_t l = 0; l <= k; ++l) {
            const double truncated = sampler.covariance(2 * k + 1, 2 * l + 1) - sampler.covariance(2 * k + 1, 2 * l) -
                                     sampler.covariance(2 * k, 2 * l + 1) + sampler.covariance(2 * k, 2 * l);
            double se = 0;
            const double c = teststats::covariance(inc[k], inc[l], &se);
            CHECK(std::abs(c - rep.S(k, l)) <= 5 * se + std::abs(truncated - rep.S(k, l)));
            CHECK(std::abs(truncated - rep.S(k, l)) < 1e-3 * rep.S(0, 0));
        }
}

}  // TEST_SUITE
