#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string_view>

namespace divlab {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Hierarchical seed derivation: every named component gets its own stream, so
/// adding a consumer in one component never shifts the draws of another.
class SeedTree {
public:
    constexpr explicit SeedTree(std::uint64_t root) noexcept : root_(root) {}

    [[nodiscard]] constexpr std::uint64_t root() const noexcept { return root_; }

    [[nodiscard]] constexpr SeedTree child(std::string_view name) const noexcept {
        return SeedTree(splitmix64(root_ ^ splitmix64(fnv1a64(name))));
    }

    [[nodiscard]] constexpr SeedTree child(std::uint64_t index) const noexcept {
        return SeedTree(splitmix64(root_ ^ splitmix64(index + 0x632BE59BD9B4E019ULL)));
    }

    [[nodiscard]] Rng engine() const { return Rng(root_); }
    [[nodiscard]] Rng engine(std::string_view name) const { return child(name).engine(); }

private:
    std::uint64_t root_;
};

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Inverse-CDF draw from an unnormalized non-negative weight vector.
inline std::size_t sample_index(std::span<const double> weights, Rng& rng) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw std::invalid_argument("sample_index: weights must have positive mass");
    const double u = uniform01(rng) * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        acc += weights[i];
        last_positive = i;
        if (u < acc) return i;
    }
    return last_positive;
}

}  // namespace divlab
