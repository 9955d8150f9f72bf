#include "shelab/grid_noise.hpp"

#include <bit>
#include <cmath>
#include <vector>

namespace shelab {

void Grid::validate() const {
    require(n_x >= 8 && std::has_single_bit(n_x), "n_x must be a power of two >= 8");
    require(n_t >= 8, "n_t must be >= 8");
    require(T > 0.0 && std::isfinite(T), "T must be finite and > 0");
}

StreamRng::StreamRng(std::uint64_t base_seed, std::initializer_list<std::uint64_t> keys) {
    std::vector<std::uint32_t> words;
    words.reserve(2 * (keys.size() + 1));
    auto push = [&](std::uint64_t v) {
        words.push_back(static_cast<std::uint32_t>(v));
        words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(base_seed);
    for (auto k : keys) push(k);
    std::seed_seq seq(words.begin(), words.end());
    engine_.seed(seq);
}

void sample_noise_row(const Grid& grid, StreamRng& rng, std::span<double> out) {
    const double scale = std::sqrt(grid.dt() * grid.dx());
    for (double& v : out) v = scale * rng.normal();
}

NoiseField sample_noise(const Grid& grid, std::uint64_t stream_id, std::uint64_t base_seed) {
    grid.validate();
    NoiseField field{grid, Array2D(grid.n_t, grid.n_x), {base_seed, stream_id}};
    StreamRng rng(base_seed, stream_id);
    for (std::size_t n = 0; n < grid.n_t; ++n) sample_noise_row(grid, rng, field.increments.row(n));
    return field;
}

void check_finite(const FieldPath& path) {
    for (double v : path.values.flat())
        if (!std::isfinite(v)) throw DomainError("path contains a non-finite entry");
}

}  // namespace shelab
