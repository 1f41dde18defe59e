#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "divlab/rng.hpp"

namespace divlab {

/// Distribution over answer labels. Keys are ordered, which fixes every
/// label-order tie break downstream.
using Categorical = std::map<std::string, double>;

inline void validate_categorical(const Categorical& dist, double tol = 1e-9) {
    if (dist.empty()) throw std::invalid_argument("categorical distribution is empty");
    double total = 0.0;
    for (const auto& [label, p] : dist) {
        if (!std::isfinite(p) || p < 0.0)
            throw std::invalid_argument("categorical probability for '" + label + "' is negative or non-finite");
        total += p;
    }
    if (std::abs(total - 1.0) > tol)
        throw std::invalid_argument("categorical probabilities do not sum to 1");
}

inline double probability_of(const Categorical& dist, const std::string& label) {
    auto it = dist.find(label);
    return it == dist.end() ? 0.0 : it->second;
}

/// Draws one label; labels and weights are materialized once per call so callers
/// that sample in a loop should prefer CategoricalSampler.
class CategoricalSampler {
public:
    explicit CategoricalSampler(const Categorical& dist) {
        labels_.reserve(dist.size());
        weights_.reserve(dist.size());
        for (const auto& [label, p] : dist) {
            labels_.push_back(label);
            weights_.push_back(p);
        }
    }

    const std::string& operator()(Rng& rng) const { return labels_[sample_index(weights_, rng)]; }

private:
    std::vector<std::string> labels_;
    std::vector<double> weights_;
};

}  // namespace divlab
