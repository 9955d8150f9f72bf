#pragma once

#include <cstdint>
#include <random>
#include <initializer_list>

#include "shelab/common.hpp"

namespace shelab {

/// Uniform space-time lattice on [0, T] x T.
struct Grid {
    std::size_t n_x = 64;  // power of two, >= 8
    std::size_t n_t = 64;  // >= 8
    double T = 1.0;

    void validate() const;
    double dx() const { return 1.0 / static_cast<double>(n_x); }
    double dt() const { return T / static_cast<double>(n_t); }
    double time(std::size_t i) const { return T * static_cast<double>(i) / static_cast<double>(n_t); }
    double space(std::size_t j) const { return static_cast<double>(j) / static_cast<double>(n_x); }

    friend bool operator==(const Grid&, const Grid&) = default;
};

struct SeedRecord {
    std::uint64_t base_seed = 0;
    std::uint64_t stream_id = 0;
};

/// Gaussian engine for one substream, keyed by (base_seed, keys...).
class StreamRng {
public:
    StreamRng(std::uint64_t base_seed, std::initializer_list<std::uint64_t> keys);
    StreamRng(std::uint64_t base_seed, std::uint64_t stream_id) : StreamRng(base_seed, {stream_id}) {}

    double normal() { return normal_(engine_); }
    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }
    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Discrete white-noise increments W(cell), one row per time step.
struct NoiseField {
    Grid grid;
    Array2D increments;  // n_t x n_x, each N(0, dt dx)
    SeedRecord seed;
};

NoiseField sample_noise(const Grid& grid, std::uint64_t stream_id, std::uint64_t base_seed);

/// Fill `out` with n_x independent N(0, dt dx) draws.
void sample_noise_row(const Grid& grid, StreamRng& rng, std::span<double> out);

/// A sampled solution, (n_t + 1) x n_x; row 0 is the initial profile.
struct FieldPath {
    Grid grid;
    Array2D values;
    SeedRecord seed;
};

/// Throws DomainError if any entry is non-finite.
void check_finite(const FieldPath& path);

}  // namespace shelab
