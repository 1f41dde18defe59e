#pragma once

// Exactly enumerable toy autoregressive model and decoding strategies.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "divlab/categorical.hpp"
#include "divlab/errors.hpp"
#include "divlab/rng.hpp"

namespace divlab::decode {

inline constexpr int kMaxVocab = 10;
inline constexpr int kMaxLen = 6;
inline constexpr std::int64_t kEnumerationCap = 1'000'000;

using Probs = std::vector<double>;

/// softmax(logits / T), max-shifted.
inline Probs apply_temperature(std::span<const double> logits, double temperature) {
    if (!(temperature > 0.0) || !std::isfinite(temperature))
        throw std::invalid_argument("apply_temperature: temperature must be finite and > 0");
    if (logits.empty()) throw std::invalid_argument("apply_temperature: empty logits");
    double mx = -INFINITY;
    for (double z : logits) {
        if (!std::isfinite(z)) throw std::invalid_argument("apply_temperature: non-finite logit");
        mx = std::max(mx, z);
    }
    Probs p(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) total += p[i] = std::exp((logits[i] - mx) / temperature);
    for (double& v : p) v /= total;
    return p;
}

namespace detail {

inline Probs keep_and_renormalize(std::span<const double> probs, const std::vector<bool>& keep) {
    double mass = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i)
        if (keep[i]) mass += probs[i];
    if (!(mass > 0.0)) throw std::invalid_argument("filter: no probability mass survives");
    Probs out(probs.size(), 0.0);
    for (std::size_t i = 0; i < probs.size(); ++i)
        if (keep[i]) out[i] = probs[i] / mass;
    return out;
}

/// Indices sorted by descending probability, ties by lower index.
inline std::vector<std::size_t> descending_order(std::span<const double> probs) {
    std::vector<std::size_t> idx(probs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
    return idx;
}

}  // namespace detail

/// Keeps the k largest entries, ties by lower index.
inline Probs filter_top_k(std::span<const double> probs, int k) {
    if (k < 1) throw std::invalid_argument("filter_top_k: k must be >= 1");
    if (static_cast<std::size_t>(k) >= probs.size()) return {probs.begin(), probs.end()};
    const auto order = detail::descending_order(probs);
    std::vector<bool> keep(probs.size(), false);
    for (int i = 0; i < k; ++i) keep[order[static_cast<std::size_t>(i)]] = true;
    return detail::keep_and_renormalize(probs, keep);
}

/// Keeps the smallest descending prefix whose cumulative mass reaches p.
inline Probs filter_nucleus(std::span<const double> probs, double p) {
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("filter_nucleus: p must lie in (0, 1]");
    if (p == 1.0) return {probs.begin(), probs.end()};
    const auto order = detail::descending_order(probs);
    std::vector<bool> keep(probs.size(), false);
    double cum = 0.0;
    for (std::size_t idx : order) {
        if (probs[idx] <= 0.0) break;
        keep[idx] = true;
        cum += probs[idx];
        if (cum >= p) break;
    }
    return detail::keep_and_renormalize(probs, keep);
}

/// Keeps entries with probability >= gamma * max.
inline Probs filter_min_p(std::span<const double> probs, double gamma) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("filter_min_p: gamma must lie in [0, 1)");
    if (gamma == 0.0) return {probs.begin(), probs.end()};
    const double threshold = gamma * *std::max_element(probs.begin(), probs.end());
    std::vector<bool> keep(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) keep[i] = probs[i] > 0.0 && probs[i] >= threshold;
    return detail::keep_and_renormalize(probs, keep);
}

struct NoFilter {};
struct TopK {
    int k = 50;
};
struct Nucleus {
    double p = 0.9;
};
struct MinP {
    double gamma = 0.1;
};
using Filter = std::variant<NoFilter, TopK, Nucleus, MinP>;

/// Temperature on logits, then the probability-space filter.
struct DecodeStrategy {
    double temperature = 1.0;
    Filter filter = NoFilter{};

    void validate() const {
        if (!(temperature > 0.0) || !std::isfinite(temperature))
            throw ConfigError("strategy: temperature must be finite and > 0");
        std::visit(
            [](const auto& f) {
                using F = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<F, TopK>) {
                    if (f.k < 1) throw ConfigError("strategy: top_k requires k >= 1");
                } else if constexpr (std::is_same_v<F, Nucleus>) {
                    if (!(f.p > 0.0 && f.p <= 1.0)) throw ConfigError("strategy: nucleus requires p in (0, 1]");
                } else if constexpr (std::is_same_v<F, MinP>) {
                    if (!(f.gamma >= 0.0 && f.gamma < 1.0)) throw ConfigError("strategy: min_p requires gamma in [0, 1)");
                }
            },
            filter);
    }

    [[nodiscard]] Probs next_token(std::span<const double> logits) const {
        const Probs p = apply_temperature(logits, temperature);
        return std::visit(
            [&](const auto& f) -> Probs {
                using F = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<F, TopK>) return filter_top_k(p, f.k);
                else if constexpr (std::is_same_v<F, Nucleus>) return filter_nucleus(p, f.p);
                else if constexpr (std::is_same_v<F, MinP>) return filter_min_p(p, f.gamma);
                else return p;
            },
            filter);
    }

    [[nodiscard]] std::string family() const {
        return std::visit(
            [](const auto& f) -> std::string {
                using F = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<F, TopK>) return "top_k";
                else if constexpr (std::is_same_v<F, Nucleus>) return "nucleus";
                else if constexpr (std::is_same_v<F, MinP>) return "min_p";
                else return "naive";
            },
            filter);
    }

    [[nodiscard]] std::string name() const {
        const std::string t = fmt::format("{}", temperature);
        return std::visit(
            [&](const auto& f) -> std::string {
                using F = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<F, TopK>) return fmt::format("top_k({})@T={}", f.k, t);
                else if constexpr (std::is_same_v<F, Nucleus>) return fmt::format("nucleus({})@T={}", f.p, t);
                else if constexpr (std::is_same_v<F, MinP>) return fmt::format("min_p({})@T={}", f.gamma, t);
                else return fmt::format("naive@T={}", t);
            },
            filter);
    }
};

/// Default temperature grid and filter parameters used for strategy comparisons.
inline std::vector<double> default_temperatures() { return {0.8, 1.0, 1.2, 1.5, 1.8}; }

inline std::vector<DecodeStrategy> default_strategy_grid() {
    std::vector<DecodeStrategy> grid;
    for (const Filter& f : {Filter{NoFilter{}}, Filter{TopK{3}}, Filter{Nucleus{0.9}}, Filter{MinP{0.1}}})
        for (double t : default_temperatures()) grid.push_back({t, f});
    return grid;
}

enum class AnswerMap { last_token, full_sequence };

inline std::string to_string(AnswerMap m) { return m == AnswerMap::last_token ? "last_token" : "full_sequence"; }

inline AnswerMap parse_answer_map(const std::string& s) {
    if (s == "last_token") return AnswerMap::last_token;
    if (s == "full_sequence") return AnswerMap::full_sequence;
    throw ConfigError(fmt::format("unknown answer map '{}'", s));
}

/// Contexts are strings of token digits; "" is the empty prefix.
struct ToyLM {
    int vocab = 2;
    int len = 1;
    std::map<std::string, std::vector<double>> logits;
    AnswerMap answer = AnswerMap::last_token;

    void validate() const {
        if (vocab < 1 || vocab > kMaxVocab) throw ConfigError(fmt::format("toy model: vocab must lie in [1, {}]", kMaxVocab));
        if (len < 1 || len > kMaxLen) throw ConfigError(fmt::format("toy model: len must lie in [1, {}]", kMaxLen));
        std::int64_t leaves = 1;
        std::int64_t contexts = 0;
        for (int j = 0; j < len; ++j) {
            contexts += leaves;
            leaves *= vocab;
        }
        if (leaves > kEnumerationCap) throw ConfigError("toy model: vocab^len exceeds the enumeration cap");
        if (static_cast<std::int64_t>(logits.size()) != contexts)
            throw ConfigError(fmt::format("toy model: expected {} contexts, found {}", contexts, logits.size()));
        for (const auto& [ctx, row] : logits) {
            if (static_cast<int>(ctx.size()) >= len) throw ConfigError(fmt::format("toy model: context '{}' too long", ctx));
            for (char c : ctx)
                if (c < '0' || c - '0' >= vocab) throw ConfigError(fmt::format("toy model: bad context '{}'", ctx));
            if (static_cast<int>(row.size()) != vocab)
                throw ConfigError(fmt::format("toy model: context '{}' has {} logits, expected {}", ctx, row.size(), vocab));
            for (double z : row)
                if (!std::isfinite(z)) throw ConfigError(fmt::format("toy model: non-finite logit in context '{}'", ctx));
        }
    }

    [[nodiscard]] const std::vector<double>& at(const std::string& context) const {
        const auto it = logits.find(context);
        if (it == logits.end()) throw std::out_of_range(fmt::format("toy model: missing context '{}'", context));
        return it->second;
    }

    [[nodiscard]] std::string answer_of(const std::string& sequence) const {
        return answer == AnswerMap::last_token ? sequence.substr(sequence.size() - 1) : sequence;
    }
};

inline void to_json(nlohmann::json& j, const ToyLM& m) {
    j = nlohmann::json{{"vocab", m.vocab}, {"len", m.len}, {"logits", m.logits}, {"answer", to_string(m.answer)}};
}

inline void from_json(const nlohmann::json& j, ToyLM& m) {
    m.vocab = j.at("vocab").get<int>();
    m.len = j.at("len").get<int>();
    m.logits = j.at("logits").get<std::map<std::string, std::vector<double>>>();
    m.answer = parse_answer_map(j.value("answer", std::string("last_token")));
}

/// Every context gets i.i.d. N(0, scale^2) logits.
inline ToyLM random_toy_lm(int vocab, int len, double scale, Rng& rng) {
    ToyLM m{vocab, len, {}, AnswerMap::last_token};
    std::normal_distribution<double> normal(0.0, scale);
    std::vector<std::string> frontier{""};
    for (int depth = 0; depth < len; ++depth) {
        std::vector<std::string> next;
        for (const auto& ctx : frontier) {
            std::vector<double> row(static_cast<std::size_t>(vocab));
            for (double& z : row) z = normal(rng);
            m.logits.emplace(ctx, std::move(row));
            for (int t = 0; t < vocab; ++t) next.push_back(ctx + static_cast<char>('0' + t));
        }
        frontier = std::move(next);
    }
    return m;
}

/// Exact distribution over answers: products of per-step post-filter probabilities.
inline Categorical marginal_answer_distribution(const ToyLM& model, const DecodeStrategy& strategy) {
    model.validate();
    strategy.validate();
    Categorical out;
    std::function<void(const std::string&, double)> walk = [&](const std::string& ctx, double mass) {
        if (static_cast<int>(ctx.size()) == model.len) {
            out[model.answer_of(ctx)] += mass;
            return;
        }
        const Probs p = strategy.next_token(model.at(ctx));
        for (int t = 0; t < model.vocab; ++t)
            if (p[static_cast<std::size_t>(t)] > 0.0) walk(ctx + static_cast<char>('0' + t), mass * p[static_cast<std::size_t>(t)]);
    };
    walk("", 1.0);
    return out;
}

/// Draws one complete sequence token by token.
inline std::string sample_sequence(const ToyLM& model, const DecodeStrategy& strategy, Rng& rng) {
    std::string ctx;
    while (static_cast<int>(ctx.size()) < model.len) {
        const Probs p = strategy.next_token(model.at(ctx));
        ctx.push_back(static_cast<char>('0' + sample_index(p, rng)));
    }
    return ctx;
}

inline std::string sample_answer(const ToyLM& model, const DecodeStrategy& strategy, Rng& rng) {
    return model.answer_of(sample_sequence(model, strategy, rng));
}

/// 1 - (1 - marginal[truth])^k; an unseen truth has probability 0.
inline double iid_pass_at_k(const Categorical& marginal, const std::string& truth, std::int64_t k) {
    if (k < 1) throw std::invalid_argument("iid_pass_at_k: k must be >= 1");
    return 1.0 - std::pow(1.0 - probability_of(marginal, truth), static_cast<double>(k));
}

/// Labels ranked by descending probability, ties by label order.
inline std::vector<std::string> top_k_answers(const Categorical& marginal, std::int64_t k) {
    if (k < 1) throw std::invalid_argument("top_k_answers: k must be >= 1");
    std::vector<std::pair<std::string, double>> ranked(marginal.begin(), marginal.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> out;
    for (const auto& [label, p] : ranked) {
        if (static_cast<std::int64_t>(out.size()) == k || !(p > 0.0)) break;
        out.push_back(label);
    }
    return out;
}

inline int oracle_top_k(const Categorical& marginal, const std::string& truth, std::int64_t k) {
    const auto top = top_k_answers(marginal, k);
    return std::find(top.begin(), top.end(), truth) != top.end() ? 1 : 0;
}

/// E_{truth ~ truth_dist}[oracle_top_k(truth_dist, truth, k)], i.e. the top-k mass.
inline double expected_oracle_top_k(const Categorical& truth_dist, std::int64_t k) {
    double mass = 0.0;
    for (const auto& label : top_k_answers(truth_dist, k)) mass += truth_dist.at(label);
    return mass;
}

/// E_{truth ~ truth_dist}[iid_pass_at_k(sampling, truth, k)].
inline double expected_iid_pass_at_k(const Categorical& truth_dist, const Categorical& sampling, std::int64_t k) {
    double total = 0.0;
    for (const auto& [label, q] : truth_dist) total += q * iid_pass_at_k(sampling, label, k);
    return total;
}

struct Problem {
    ToyLM model;
    std::string truth;
};

struct PassRow {
    std::string strategy;
    std::int64_t k = 0;
    double pass = 0.0;
};

inline constexpr const char* kOptimalRow = "Optimal";

inline DecodeStrategy base_strategy() { return {1.0, NoFilter{}}; }

/// Mean Pass@k over problems for each strategy and k, plus the oracle row on the base marginal.
inline std::vector<PassRow> compare_strategies(const std::vector<Problem>& problems,
                                               const std::vector<DecodeStrategy>& strategies,
                                               const std::vector<std::int64_t>& ks) {
    if (problems.empty() || strategies.empty() || ks.empty())
        throw std::invalid_argument("compare_strategies: problems, strategies and ks must be non-empty");
    const double n = static_cast<double>(problems.size());
    std::vector<PassRow> rows;
    for (const auto& s : strategies) {
        std::vector<Categorical> marginals;
        for (const auto& pr : problems) marginals.push_back(marginal_answer_distribution(pr.model, s));
        for (auto k : ks) {
            double total = 0.0;
            for (std::size_t i = 0; i < problems.size(); ++i) total += iid_pass_at_k(marginals[i], problems[i].truth, k);
            rows.push_back({s.name(), k, total / n});
        }
    }
    std::vector<Categorical> base;
    for (const auto& pr : problems) base.push_back(marginal_answer_distribution(pr.model, base_strategy()));
    for (auto k : ks) {
        double total = 0.0;
        for (std::size_t i = 0; i < problems.size(); ++i) total += oracle_top_k(base[i], problems[i].truth, k);
        rows.push_back({kOptimalRow, k, total / n});
    }
    return rows;
}

/// As compare_strategies, but with the truth of each model distributed as its
/// base marginal and every entry an exact expectation over that truth.
inline std::vector<PassRow> compare_strategies_calibrated(const std::vector<ToyLM>& models,
                                                          const std::vector<DecodeStrategy>& strategies,
                                                          const std::vector<std::int64_t>& ks) {
    if (models.empty() || strategies.empty() || ks.empty())
        throw std::invalid_argument("compare_strategies_calibrated: inputs must be non-empty");
    const double n = static_cast<double>(models.size());
    std::vector<Categorical> base;
    for (const auto& m : models) base.push_back(marginal_answer_distribution(m, base_strategy()));
    std::vector<PassRow> rows;
    for (const auto& s : strategies) {
        std::vector<double> totals(ks.size(), 0.0);
        for (std::size_t i = 0; i < models.size(); ++i) {
            const auto m = marginal_answer_distribution(models[i], s);
            for (std::size_t j = 0; j < ks.size(); ++j) totals[j] += expected_iid_pass_at_k(base[i], m, ks[j]);
        }
        for (std::size_t j = 0; j < ks.size(); ++j) rows.push_back({s.name(), ks[j], totals[j] / n});
    }
    for (auto k : ks) {
        double total = 0.0;
        for (const auto& q : base) total += expected_oracle_top_k(q, k);
        rows.push_back({kOptimalRow, k, total / n});
    }
    return rows;
}

/// Collapses a per-strategy table to the best temperature within each filter family.
inline std::vector<PassRow> best_per_family(const std::vector<PassRow>& rows,
                                            const std::vector<DecodeStrategy>& strategies) {
    std::map<std::string, std::string> family;
    for (const auto& s : strategies) family[s.name()] = s.family();
    std::map<std::pair<std::string, std::int64_t>, double> best;
    std::vector<std::string> order;
    for (const auto& r : rows) {
        const auto it = family.find(r.strategy);
        const std::string fam = it == family.end() ? r.strategy : it->second;
        if (std::find(order.begin(), order.end(), fam) == order.end()) order.push_back(fam);
        auto [pos, inserted] = best.try_emplace({fam, r.k}, r.pass);
        if (!inserted) pos->second = std::max(pos->second, r.pass);
    }
    std::vector<PassRow> out;
    for (const auto& fam : order)
        for (const auto& [key, v] : best)
            if (key.first == fam) out.push_back({fam, key.second, v});
    return out;
}

}  // namespace divlab::decode
