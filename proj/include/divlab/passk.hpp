#pragma once

// Pass@k / Best@k arithmetic over per-problem success probabilities.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "divlab/categorical.hpp"
#include "divlab/rng.hpp"

namespace divlab::passk {

namespace detail {

inline void check_probability(double rho, const char* what) {
    if (!(rho >= 0.0 && rho <= 1.0))
        throw std::invalid_argument(std::string(what) + ": probability must lie in [0, 1]");
}

inline void check_k(std::int64_t k, const char* what) {
    if (k < 1) throw std::invalid_argument(std::string(what) + ": k must be >= 1");
}

}  // namespace detail

/// Per-problem Pass@1 values over a test set. Non-empty, every entry in [0, 1].
class RhoDistribution {
public:
    explicit RhoDistribution(std::vector<double> rhos) : rhos_(std::move(rhos)) {
        if (rhos_.empty()) throw std::invalid_argument("RhoDistribution: no problems");
        for (double r : rhos_) detail::check_probability(r, "RhoDistribution");
    }

    [[nodiscard]] std::span<const double> values() const noexcept { return rhos_; }
    [[nodiscard]] std::size_t size() const noexcept { return rhos_.size(); }

private:
    std::vector<double> rhos_;
};

struct SampleOutcomes {
    std::int64_t n = 0;  ///< sampled traces
    std::int64_t c = 0;  ///< correct traces

    void validate() const {
        if (n < 1) throw std::invalid_argument("SampleOutcomes: n must be >= 1");
        if (c < 0 || c > n) throw std::invalid_argument("SampleOutcomes: need 0 <= c <= n");
    }
};

/// Mean error E[1 - rho] and population variance Var(rho).
struct BiasVariance {
    double bias = 0.0;
    double variance = 0.0;
};

/// 1 - (1 - rho)^k: chance that at least one of k independent draws is correct.
inline double pass_at_k_from_rho(double rho, std::int64_t k) {
    detail::check_probability(rho, "pass_at_k_from_rho");
    detail::check_k(k, "pass_at_k_from_rho");
    return 1.0 - std::pow(1.0 - rho, static_cast<double>(k));
}

/// Plug-in estimate c / n.
inline double estimate_rho(const SampleOutcomes& o) {
    o.validate();
    return static_cast<double>(o.c) / static_cast<double>(o.n);
}

/// Binomial coefficient, or nullopt once it no longer fits in 53 bits (exact double range).
inline std::optional<std::uint64_t> exact_binomial(std::int64_t n, std::int64_t k) {
    if (k < 0 || k > n) return std::uint64_t{0};
    k = std::min(k, n - k);
    unsigned __int128 acc = 1;
    constexpr unsigned __int128 limit = static_cast<unsigned __int128>(1) << 53;
    for (std::int64_t i = 0; i < k; ++i) {
        acc = acc * static_cast<unsigned __int128>(n - i) / static_cast<unsigned __int128>(i + 1);
        if (acc > limit) return std::nullopt;
    }
    return static_cast<std::uint64_t>(acc);
}

/// Unbiased estimator 1 - C(n-c, k) / C(n, k) over n traces with c correct.
///
/// When both binomials are exactly representable the ratio is a single correctly
/// rounded division; otherwise the telescoping product
/// prod_{i=n-c+1}^{n} (1 - k/i) is used.
inline double pass_at_k_unbiased(std::int64_t n, std::int64_t c, std::int64_t k) {
    SampleOutcomes{n, c}.validate();
    detail::check_k(k, "pass_at_k_unbiased");
    if (k > n) throw std::invalid_argument("pass_at_k_unbiased: k must not exceed n");
    if (n - c < k) return 1.0;
    if (auto total = exact_binomial(n, k)) {
        if (auto miss = exact_binomial(n - c, k)) {
            return static_cast<double>(*total - *miss) / static_cast<double>(*total);
        }
    }
    double miss_prob = 1.0;
    for (std::int64_t i = n - c + 1; i <= n; ++i) miss_prob *= 1.0 - static_cast<double>(k) / static_cast<double>(i);
    return 1.0 - miss_prob;
}

/// Mean over problems of 1 - (1 - rho_x)^k.
inline double expected_pass_at_k(const RhoDistribution& dist, std::int64_t k) {
    detail::check_k(k, "expected_pass_at_k");
    double sum = 0.0;
    for (double r : dist.values()) sum += pass_at_k_from_rho(r, k);
    return sum / static_cast<double>(dist.size());
}

inline BiasVariance bias_variance(const RhoDistribution& dist) {
    const auto n = static_cast<double>(dist.size());
    double mean = 0.0;
    for (double r : dist.values()) mean += r;
    mean /= n;
    double ss = 0.0;
    for (double r : dist.values()) ss += (r - mean) * (r - mean);
    return {1.0 - mean, ss / n};
}

/// Upper bound 1 - (bias^2 + variance)^{k/2} on expected Pass@k.
///
/// Only valid for k >= 2: the bound follows from convexity of x^{k/2}, and at
/// k = 1 it is false whenever the variance is positive.
inline double prop1_bound(const BiasVariance& bv, std::int64_t k) {
    if (k < 2)
        throw std::invalid_argument(
            "prop1_bound: k must be >= 2 (x^{k/2} is not convex for k < 2, so the bound does not hold)");
    if (!(bv.bias >= 0.0 && bv.bias <= 1.0)) throw std::invalid_argument("prop1_bound: bias must lie in [0, 1]");
    if (!(bv.variance >= 0.0 && bv.variance <= 0.25))
        throw std::invalid_argument("prop1_bound: variance must lie in [0, 0.25]");
    const double second_moment = bv.bias * bv.bias + bv.variance;
    return 1.0 - std::pow(second_moment, static_cast<double>(k) / 2.0);
}

/// Most frequent label; ties go to the label whose first occurrence is earliest.
template <class Label>
Label majority_vote(std::span<const Label> guesses) {
    if (guesses.empty()) throw std::invalid_argument("majority_vote: no guesses");
    struct Tally {
        std::size_t count = 0;
        std::size_t first = 0;
    };
    std::map<Label, Tally> tallies;
    for (std::size_t i = 0; i < guesses.size(); ++i) {
        auto [it, inserted] = tallies.try_emplace(guesses[i], Tally{0, i});
        ++it->second.count;
    }
    const Label* best = nullptr;
    Tally best_tally{};
    for (const auto& [label, tally] : tallies) {
        if (best == nullptr || tally.count > best_tally.count ||
            (tally.count == best_tally.count && tally.first < best_tally.first)) {
            best = &label;
            best_tally = tally;
        }
    }
    return *best;
}

inline std::string majority_vote(const std::vector<std::string>& guesses) {
    return majority_vote<std::string>(std::span<const std::string>(guesses));
}

/// Selects the answer with the highest score; ties go to the earliest draw.
using Scorer = std::function<double(const std::string&)>;

struct MonteCarloEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::int64_t trials = 0;
};

enum class Selector { majority, scorer };

/// Monte Carlo Best@k: draw k answers, select one by majority vote or by the
/// injected scorer, and count how often the selection equals the truth.
inline MonteCarloEstimate best_at_k(const Categorical& answers, const std::string& truth, std::int64_t k,
                                    Selector selector, std::int64_t trials, std::uint64_t seed,
                                    const Scorer& scorer = {}) {
    validate_categorical(answers);
    detail::check_k(k, "best_at_k");
    if (trials < 1) throw std::invalid_argument("best_at_k: trials must be >= 1");
    if (selector == Selector::scorer && !scorer) throw std::invalid_argument("best_at_k: scorer selector needs a scorer");

    Rng rng = SeedTree(seed).engine("best_at_k");
    const CategoricalSampler draw(answers);
    std::vector<std::string> sample(static_cast<std::size_t>(k));
    std::int64_t hits = 0;
    for (std::int64_t t = 0; t < trials; ++t) {
        for (auto& s : sample) s = draw(rng);
        std::string chosen;
        if (selector == Selector::majority) {
            chosen = majority_vote(sample);
        } else {
            double best_score = -std::numeric_limits<double>::infinity();
            bool first = true;
            for (const auto& s : sample) {
                const double score = scorer(s);
                if (first || score > best_score) {
                    best_score = score;
                    chosen = s;
                    first = false;
                }
            }
        }
        if (chosen == truth) ++hits;
    }
    const double mean = static_cast<double>(hits) / static_cast<double>(trials);
    return {mean, std::sqrt(mean * (1.0 - mean) / static_cast<double>(trials)), trials};
}

/// Uniform bins on [0, 1]: half-open [lo, hi) except the last, which is closed.
struct Histogram {
    std::vector<double> lo;
    std::vector<double> hi;
    std::vector<std::size_t> counts;
};

inline Histogram rho_histogram(const RhoDistribution& dist, std::size_t bins) {
    if (bins < 1) throw std::invalid_argument("rho_histogram: bins must be >= 1");
    Histogram h;
    h.lo.resize(bins);
    h.hi.resize(bins);
    h.counts.assign(bins, 0);
    const auto nb = static_cast<double>(bins);
    for (std::size_t i = 0; i < bins; ++i) {
        h.lo[i] = static_cast<double>(i) / nb;
        h.hi[i] = static_cast<double>(i + 1) / nb;
    }
    for (double r : dist.values()) {
        auto idx = static_cast<std::size_t>(std::floor(r * nb));
        ++h.counts[std::min(idx, bins - 1)];
    }
    return h;
}

}  // namespace divlab::passk
