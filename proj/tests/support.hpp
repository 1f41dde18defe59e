#pragma once

// Shared generators and fixtures for the test suites.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "divlab/rng.hpp"

namespace divlab::testing {

/// Beta(a, b) via two gamma draws.
inline double beta_draw(double a, double b, Rng& rng) {
    std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
    const double x = ga(rng), y = gb(rng);
    return x / (x + y);
}

/// Per-problem success rates from a random mixture of Beta shapes, with
/// occasional exact 0 / 1 atoms.
inline std::vector<double> random_rhos(Rng& rng, std::size_t min_size = 1, std::size_t max_size = 500) {
    std::uniform_int_distribution<std::size_t> size(min_size, max_size);
    std::uniform_int_distribution<int> comps(1, 3);
    std::uniform_real_distribution<double> shape(0.1, 5.0);
    const int c = comps(rng);
    std::vector<std::pair<double, double>> mix;
    for (int i = 0; i < c; ++i) mix.emplace_back(shape(rng), shape(rng));
    const double atom = uniform01(rng) < 0.3 ? 0.2 : 0.0;
    std::vector<double> rhos(size(rng));
    for (double& r : rhos) {
        const double u = uniform01(rng);
        if (u < atom / 2) r = 0.0;
        else if (u < atom) r = 1.0;
        else {
            const auto& [a, b] = mix[static_cast<std::size_t>(uniform01(rng) * c)];
            r = beta_draw(a, b, rng);
        }
    }
    return rhos;
}

/// Random probability vector of length n with some exact zeros and ties.
inline std::vector<double> random_probs(std::size_t n, Rng& rng) {
    std::vector<double> p(n);
    double total = 0.0;
    for (auto& v : p) {
        const double u = uniform01(rng);
        if (u < 0.15) v = 0.0;
        else if (u < 0.3) v = 1.0;  // repeated weight produces ties
        else v = -std::log(uniform01(rng) + 1e-300);
        total += v;
    }
    if (total == 0.0) {
        p[0] = 1.0;
        total = 1.0;
    }
    for (auto& v : p) v /= total;
    return p;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / (tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace divlab::testing
