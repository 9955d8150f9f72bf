#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "shelab/holder.hpp"

using namespace shelab;

namespace {

Array2D random_field(std::size_t rows, std::size_t cols, std::uint32_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    Array2D a(rows, cols);
    for (double& v : a.flat()) v = z(rng);
    return a;
}

// plain double loops, recomputing every denominator in place
double brute_spatial(std::span<const double> f, double theta, bool torus) {
    const std::size_t n = f.size();
    double best = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const std::size_t g = torus ? std::min(j - i, n - (j - i)) : j - i;
            const double d = static_cast<double>(g) / static_cast<double>(n);
            best = std::max(best, std::abs(f[i] - f[j]) / std::pow(d, 0.5 - theta));
        }
    return best;
}

double brute_temporal(const std::vector<double>& f, double theta, double T, std::size_t stride) {
    const std::size_t n = f.size();
    double best = 0;
    for (std::size_t i = 0; i < n; i += stride)
        for (std::size_t j = i + stride; j < n; j += stride) {
            const double tau = static_cast<double>(j - i) * T / static_cast<double>(n - 1);
            best = std::max(best, std::abs(f[i] - f[j]) / std::pow(tau, 0.25 - theta / 2));
        }
    return best;
}

// sup over all distinct space-time pairs with the summed denominator
double brute_space_time(const Array2D& v, double theta, double T) {
    const std::size_t nt = v.rows(), nx = v.cols();
    double best = 0;
    for (std::size_t a = 0; a < nt; ++a)
        for (std::size_t b = 0; b < nx; ++b)
            for (std::size_t c = 0; c < nt; ++c)
                for (std::size_t d = 0; d < nx; ++d) {
                    if (a == c && b == d) continue;
                    const double tau = std::abs(double(c) - double(a)) * T / double(nt - 1);
                    const double xi = std::abs(double(d) - double(b)) / double(nx);
                    const double den = std::pow(xi, 0.5 - theta) + std::pow(tau, 0.25 - theta / 2);
                    best = std::max(best, std::abs(v(a, b) - v(c, d)) / den);
                }
    return best;
}

FieldPath make_path(const Array2D& values, double T) {
    FieldPath p;
    p.grid = Grid{values.cols(), values.rows() - 1, T};
    p.values = values;
    return p;
}

double log_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) mx += std::log(x[i]) / n, my += std::log(y[i]) / n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
        sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
    }
    return sxy / sxx;
}

}  // namespace

TEST_SUITE("holder") {

TEST_CASE("metric names round-trip") {
    CHECK(metric_from_string(to_string(Metric::torus)) == Metric::torus);
    CHECK(metric_from_string(to_string(Metric::representative)) == Metric::representative);
    CHECK_THROWS_AS(metric_from_string("euclid"), DomainError);
    CHECK(default_stride(1024) == 1);
    CHECK(default_stride(1025) == 4);
}

TEST_CASE("two-point examples") {
    const std::vector<double> row{0.0, 1.0};
    CHECK(spatial_seminorm(row, 0.25).value == doctest::Approx(std::pow(2.0, 0.25)).epsilon(1e-15));
    CHECK(temporal_seminorm(row, 0.25, 1.0).value == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("domain errors") {
    const std::vector<double> one{1.0}, two{0.0, 1.0};
    CHECK_THROWS_AS(spatial_seminorm(one, 0.3), DomainError);
    CHECK_THROWS_AS(spatial_seminorm(two, 0.0), DomainError);
    CHECK_THROWS_AS(spatial_seminorm(two, 0.6), DomainError);
    CHECK_THROWS_AS(spatial_seminorm(two, 0.3, Metric::torus, 0.1), DomainError);
    CHECK_THROWS_AS(temporal_seminorm(two, 0.3, 1.0, 0), DomainError);
    CHECK_THROWS_AS(temporal_seminorm(two, 0.3, 0.0), DomainError);
}

TEST_CASE("semi-norms equal the brute-force double loop on 32x32") {
    for (std::uint32_t seed = 1; seed <= 5; ++seed) {
        const auto v = random_field(32, 32, seed);
        for (double theta : {0.05, 0.25, 0.45, 0.5}) {
            double sup_rep = 0, sup_tor = 0, sup_t = 0, sup_t4 = 0;
            for (std::size_t r = 0; r < 32; ++r) {
                const double rep = brute_spatial(v.row(r), theta, false);
                const double tor = brute_spatial(v.row(r), theta, true);
                CHECK(spatial_seminorm(v.row(r), theta).value == rep);
                CHECK(spatial_seminorm(v.row(r), theta, Metric::torus).value ==
                      doctest::Approx(tor).epsilon(1e-14));
                sup_rep = std::max(sup_rep, rep);
                sup_tor = std::max(sup_tor, tor);
            }
            for (std::size_t c = 0; c < 32; ++c) {
                const auto col = v.column(c);
                sup_t = std::max(sup_t, brute_temporal(col, theta, 0.7, 1));
                sup_t4 = std::max(sup_t4, brute_temporal(col, theta, 0.7, 4));
                CHECK(temporal_seminorm(col, theta, 0.7).value == brute_temporal(col, theta, 0.7, 1));
            }
            CHECK(sup_spatial(v, theta).value == sup_rep);
            CHECK(sup_spatial(v, theta, Metric::torus).value == doctest::Approx(sup_tor).epsilon(1e-14));
            CHECK(sup_temporal(v, theta, 0.7).value == sup_t);
            CHECK(sup_temporal(v, theta, 0.7, 4).value == sup_t4);
            CHECK(combined_seminorm(v, theta, 0.7).value == std::max(sup_rep, sup_t));
        }
    }
}

TEST_CASE("arg pairs reproduce the value") {
    const auto v = random_field(16, 16, 9);
    const auto s = sup_spatial(v, 0.3);
    const auto [r, i, r2, j] = s.arg_pair;
    CHECK(r == r2);
    CHECK(std::abs(v(r, i) - v(r, j)) / std::pow((j - i) / 16.0, 0.2) == doctest::Approx(s.value).epsilon(1e-14));
    const auto t = sup_temporal(v, 0.3, 1.0);
    CHECK(t.arg_pair[1] == t.arg_pair[3]);
}

TEST_CASE("combined max identity against all space-time pairs on 8x8") {
    for (std::uint32_t seed = 11; seed <= 20; ++seed) {
        const auto v = random_field(8, 8, seed);
        for (double theta : {0.1, 0.3, 0.45}) {
            const double full = brute_space_time(v, theta, 0.5);
            CHECK(combined_seminorm(v, theta, 0.5).value == doctest::Approx(full).epsilon(1e-13));
        }
    }
}

TEST_CASE("stride can only lower the temporal value") {
    for (std::uint32_t seed = 30; seed < 40; ++seed) {
        const auto v = random_field(65, 8, seed);
        for (std::size_t s : {2u, 4u, 8u})
            CHECK(sup_temporal(v, 0.4, 1.0, s).value <= sup_temporal(v, 0.4, 1.0, 1).value);
    }
}

TEST_CASE("constants vanish, shifts and offsets are invariant, scaling is linear") {
    const Array2D c(8, 16, 3.25);
    CHECK(combined_seminorm(c, 0.3, 1.0).value == 0.0);

    const auto v = random_field(12, 16, 41);
    Array2D shifted(12, 16), offset(12, 16), scaled(12, 16);
    for (std::size_t r = 0; r < 12; ++r)
        for (std::size_t j = 0; j < 16; ++j) {
            shifted(r, j) = v(r, (j + 5) % 16);
            offset(r, j) = v(r, j) + 2.5;
            scaled(r, j) = -3.0 * v(r, j);
        }
    const double tor = sup_spatial(v, 0.35, Metric::torus).value;
    CHECK(sup_spatial(shifted, 0.35, Metric::torus).value == doctest::Approx(tor).epsilon(1e-13));
    const double base = combined_seminorm(v, 0.35, 1.0).value;
    CHECK(combined_seminorm(offset, 0.35, 1.0).value == doctest::Approx(base).epsilon(1e-13));
    CHECK(combined_seminorm(scaled, 0.35, 1.0).value == doctest::Approx(3.0 * base).epsilon(1e-13));
}

TEST_CASE("normalized increments: max equals the semi-norm") {
    const auto v = random_field(10, 12, 51);
    for (Metric m : {Metric::representative, Metric::torus}) {
        const auto sp = normalized_increments(v, 0.3, 1.0, RatioKind::spatial, m);
        CHECK(sp.ratios.rows() == 10);
        CHECK(sp.pairs.size() == 66);
        const double mx = *std::max_element(sp.ratios.flat().begin(), sp.ratios.flat().end());
        CHECK(mx == sup_spatial(v, 0.3, m).value);
    }
    const auto tp = normalized_increments(v, 0.3, 2.0, RatioKind::temporal);
    CHECK(tp.ratios.rows() == 12);
    CHECK(tp.pairs.size() == 45);
    CHECK(*std::max_element(tp.ratios.flat().begin(), tp.ratios.flat().end()) == sup_temporal(v, 0.3, 2.0).value);
}

TEST_CASE("seminorm_diff") {
    const auto v = random_field(9, 16, 61);
    const auto path = make_path(v, 0.5);
    HolderFunction same{v, 0.5, 1.0, 1.0, 0.0};
    HolderFunction zero{Array2D(9, 16), 0.5, 1.0, 1.0, 0.0};
    const auto h = random_field(9, 16, 62);
    HolderFunction other{h, 0.5, 1.0, 1.0, 0.0};
    for (auto kind : {SeminormKind::spatial_sup, SeminormKind::temporal_sup, SeminormKind::combined}) {
        CHECK(seminorm_diff(path, same, 0.3, kind).value == 0.0);
    }
    CHECK(seminorm_diff(path, zero, 0.3, SeminormKind::spatial_sup).value == sup_spatial(v, 0.3).value);
    CHECK(seminorm_diff(path, zero, 0.3, SeminormKind::temporal_sup).value == sup_temporal(v, 0.3, 0.5).value);
    CHECK(seminorm_diff(path, zero, 0.3, SeminormKind::combined).value == combined_seminorm(path, 0.3).value);
    const double lhs = seminorm_diff(path, other, 0.3, SeminormKind::combined).value;
    CHECK(lhs <= combined_seminorm(v, 0.3, 0.5).value + combined_seminorm(h, 0.3, 0.5).value + 1e-12);

    HolderFunction wrong{Array2D(9, 8), 0.5, 1.0, 1.0, 0.0};
    CHECK_THROWS_AS(seminorm_diff(path, wrong, 0.3, SeminormKind::combined), DomainError);
    HolderFunction horizon{v, 0.6, 1.0, 1.0, 0.0};
    CHECK_THROWS_AS(seminorm_diff(path, horizon, 0.3, SeminormKind::combined), DomainError);
}

TEST_CASE("HolderFunction validate") {
    auto f = kink_profile(12, 16, 1.0, 0.5, 0.5);
    CHECK_NOTHROW(f.validate());
    CHECK_NOTHROW(f.validate(3));
    auto g = f;
    for (double& x : g.values.flat()) x *= 10.0;
    CHECK_THROWS_AS(g.validate(), DomainError);
    auto bad = f;
    bad.gamma = 1.5;
    CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("bump has unit mass and compact support") {
    double s = 0;
    const int m = 20000;
    for (int k = 0; k < m; ++k) s += bump(-1.0 + (k + 0.5) * 2.0 / m) * 2.0 / m;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(bump(1.0) == 0.0);
    CHECK(bump(-1.5) == 0.0);
}

TEST_CASE("mollify preserves constants") {
    HolderFunction c{Array2D(33, 64, -1.75), 1.0, 1.0, 1.0, 0.0};
    for (std::size_t n : {1u, 4u, 16u}) {
        const auto m = mollify(c, n);
        for (double v : m.flat()) CHECK(v == doctest::Approx(-1.75).epsilon(1e-14));
    }
}

TEST_CASE("mollifier sup error decays at rate min(gamma, beta)") {
    const double gamma = 0.5, beta = 0.5;
    const auto f = kink_profile(256, 512, 1.0, gamma, beta);
    std::vector<double> ns, err;
    for (std::size_t n : {4u, 8u, 16u, 32u}) {
        const auto m = mollify(f, n);
        double e = 0;
        for (std::size_t k = 0; k < m.flat().size(); ++k) e = std::max(e, std::abs(m.flat()[k] - f.values.flat()[k]));
        ns.push_back(double(n));
        err.push_back(e);
    }
    CHECK(log_slope(ns, err) <= -std::min(gamma, beta) + 0.1);
}

// int |psi'| and int |psi''| by central differences of the bump
std::pair<double, double> bump_derivative_masses() {
    const int m = 40000;
    const double h = 2.0 / m, e = 1e-5;
    double d1 = 0, d2 = 0;
    for (int k = 0; k < m; ++k) {
        const double x = -1.0 + (k + 0.5) * h;
        d1 += std::abs(bump(x + e) - bump(x - e)) / (2 * e) * h;
        d2 += std::abs(bump(x + e) - 2 * bump(x) + bump(x - e)) / (e * e) * h;
    }
    return {d1, d2};
}

TEST_CASE("mollified derivatives stay below C n and C n^2") {
    // |d/dx psi_n * f| <= H n int|psi'|, |d2/dx2 psi_n * f| <= H n^2 int|psi''|
    const double beta = 0.1, gamma = 0.5;
    const auto f = kink_profile(256, 1024, 1.0, gamma, beta);
    const double hx = std::pow(std::numbers::pi, beta), ht = 1.0;
    const auto [m1, m2] = bump_derivative_masses();
    double prev = 0;
    for (std::size_t n : {4u, 8u, 16u, 32u}) {
        const auto d = derivative_bounds(mollify(f, n), 1.0);
        const double nn = double(n);
        CHECK(d.dx <= 1.1 * hx * nn * m1);
        CHECK(d.dt <= 1.1 * ht * nn * m1);
        CHECK(d.dxx <= 1.1 * hx * nn * nn * m2);
        CHECK(d.dx > prev);
        prev = d.dx;
    }
}

}  // TEST_SUITE
