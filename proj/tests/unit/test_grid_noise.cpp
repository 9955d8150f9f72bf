#include <doctest.h>

#include <cmath>
#include <limits>

#include "shelab/grid_noise.hpp"
#include "shelab/parallel.hpp"
#include "stats.hpp"

using namespace shelab;

TEST_SUITE("grid_noise") {
    TEST_CASE("grid validation and step sizes") {
        CHECK_NOTHROW(Grid{8, 8, 1.0}.validate());
        CHECK_THROWS_AS(Grid({48, 64, 1.0}).validate(), DomainError);
        CHECK_THROWS_AS(Grid({4, 64, 1.0}).validate(), DomainError);
        CHECK_THROWS_AS(Grid({64, 4, 1.0}).validate(), DomainError);
        CHECK_THROWS_AS(Grid({64, 64, 0.0}).validate(), DomainError);
        CHECK_THROWS_AS(Grid({64, 64, std::numeric_limits<double>::infinity()}).validate(), DomainError);
        for (std::size_t nx : {8u, 64u, 1024u})
            for (double T : {0.01, 0.3, 1.0, 7.0})
                for (std::size_t nt : {8u, 100u, 333u}) {
                    const Grid g{nx, nt, T};
                    CHECK(g.dx() * static_cast<double>(nx) == 1.0);
                    CHECK(std::abs(g.dt() * static_cast<double>(nt) - T) <= std::nextafter(T, 2 * T) - T);
                    CHECK(g.time(nt) == T);
                }
    }

    TEST_CASE("same seed and stream give identical noise") {
        const Grid g{32, 16, 0.1};
        const auto a = sample_noise(g, 7, 42), b = sample_noise(g, 7, 42);
        CHECK(a.increments == b.increments);
        CHECK(a.seed.stream_id == 7);
        CHECK(a.seed.base_seed == 42);
        CHECK_FALSE(sample_noise(g, 8, 42).increments == a.increments);
        CHECK_FALSE(sample_noise(g, 7, 43).increments == a.increments);
    }

    TEST_CASE("keyed streams depend on key order") {
        StreamRng a(1, {2, 3}), b(1, {3, 2});
        CHECK(a.normal() != b.normal());
    }

    TEST_CASE("increment variance is dt dx") {
        const Grid g{64, 64, 0.5};
        std::vector<double> all;
        for (std::uint64_t s = 0; s < 25; ++s) {
            const auto f = sample_noise(g, s, 9);
            all.insert(all.end(), f.increments.flat().begin(), f.increments.flat().end());
        }
        REQUIRE(all.size() >= 100000);
        const auto m = teststats::moments(all);
        const double target = g.dt() * g.dx();
        CHECK(std::abs(m.var - target) <= 5 * m.se_var);
        CHECK(std::abs(m.mean) <= 5 * m.se_mean);
    }

    TEST_CASE("matched cells of distinct streams are uncorrelated") {
        const Grid g{256, 400, 1.0};
        const auto a = sample_noise(g, 0, 5), b = sample_noise(g, 1, 5);
        std::vector<double> x(a.increments.flat().begin(), a.increments.flat().end());
        std::vector<double> y(b.increments.flat().begin(), b.increments.flat().end());
        REQUIRE(x.size() >= 100000);
        CHECK(std::abs(teststats::correlation(x, y)) < 4 / std::sqrt(double(x.size())));
        // neighbouring cells within one stream
        std::vector<double> x0(x.begin(), x.end() - 1), x1(x.begin() + 1, x.end());
        CHECK(std::abs(teststats::correlation(x0, x1)) < 4 / std::sqrt(double(x0.size())));
    }

    TEST_CASE("property: ensembles do not depend on the worker count") {
        const Grid g{16, 8, 0.1};
        auto run = [&](std::size_t threads) {
            set_thread_count(threads);
            return parallel_map<double>(40, [&](std::size_t k) {
                const auto f = sample_noise(g, k, 3);
                double s = 0;
                for (double v : f.increments.flat()) s += v * v;
                return s;
            });
        };
        const auto one = run(1), four = run(4), seven = run(7);
        set_thread_count(1);
        CHECK(one == four);
        CHECK(one == seven);
    }

    TEST_CASE("parallel_map rethrows worker exceptions") {
        set_thread_count(3);
        CHECK_THROWS_AS(parallel_map<int>(10, [](std::size_t i) -> int {
                            if (i == 6) throw DomainError("boom");
                            return 0;
                        }),
                        DomainError);
        set_thread_count(1);
    }

    TEST_CASE("check_finite") {
        FieldPath p{Grid{8, 8, 1.0}, Array2D(9, 8), {}};
        CHECK_NOTHROW(check_finite(p));
        p.values(3, 4) = std::nan("");
        CHECK_THROWS_AS(check_finite(p), DomainError);
    }
}
