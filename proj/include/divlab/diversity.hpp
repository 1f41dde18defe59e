#pragma once

// Answer, operation and semantic diversity over sampled reasoning traces.

#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "divlab/errors.hpp"

namespace divlab::diversity {

struct TraceRecord {
    std::string problem_id;
    std::string answer;
    std::optional<std::vector<std::string>> operations;
    std::optional<std::vector<double>> embedding;

    void validate() const {
        if (answer.empty()) throw ConfigError(fmt::format("trace for '{}': empty answer", problem_id));
        if (embedding) {
            double sq = 0.0;
            for (double v : *embedding) {
                if (!std::isfinite(v)) throw ConfigError(fmt::format("trace for '{}': non-finite embedding", problem_id));
                sq += v * v;
            }
            if (!(sq > 0.0)) throw ConfigError(fmt::format("trace for '{}': zero-norm embedding", problem_id));
        }
    }
};

inline TraceRecord parse_trace(const nlohmann::json& j) {
    TraceRecord r;
    r.problem_id = j.at("problem_id").get<std::string>();
    r.answer = j.at("answer").get<std::string>();
    if (j.contains("operations") && !j["operations"].is_null())
        r.operations = j["operations"].get<std::vector<std::string>>();
    if (j.contains("embedding") && !j["embedding"].is_null()) r.embedding = j["embedding"].get<std::vector<double>>();
    r.validate();
    return r;
}

/// One JSON object per line; blank lines are skipped.
inline std::vector<TraceRecord> read_traces(std::istream& in) {
    std::vector<TraceRecord> out;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(parse_trace(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(fmt::format("traces line {}: {}", lineno, e.what()));
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("traces line {}: {}", lineno, e.what()));
        }
    }
    return out;
}

inline std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n\f\v");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n\f\v");
    return s.substr(first, last - first + 1);
}

/// |unique answers| / n.
inline double answer_diversity(std::span<const TraceRecord> traces) {
    if (traces.empty()) throw std::invalid_argument("answer_diversity: no traces");
    std::set<std::string> unique;
    for (const auto& t : traces) unique.insert(t.answer);
    return static_cast<double>(unique.size()) / static_cast<double>(traces.size());
}

/// |unique operation sequences| / n, comparing trimmed operations in order.
inline double operation_diversity(std::span<const TraceRecord> traces) {
    if (traces.empty()) throw std::invalid_argument("operation_diversity: no traces");
    std::set<std::vector<std::string>> unique;
    for (const auto& t : traces) {
        if (!t.operations) throw std::invalid_argument(fmt::format("operation_diversity: trace for '{}' has no operations", t.problem_id));
        std::vector<std::string> seq;
        for (const auto& op : *t.operations) seq.push_back(trim(op));
        unique.insert(std::move(seq));
    }
    return static_cast<double>(unique.size()) / static_cast<double>(traces.size());
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine: embedding dimensions differ");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (!(na > 0.0 && nb > 0.0)) throw std::invalid_argument("cosine: zero-norm embedding");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Mean cosine over the n(n-1)/2 unordered pairs of distinct records.
inline double semantic_similarity(std::span<const TraceRecord> traces) {
    if (traces.size() < 2) throw std::invalid_argument("semantic_similarity: need at least two traces");
    for (const auto& t : traces)
        if (!t.embedding) throw std::invalid_argument(fmt::format("semantic_similarity: trace for '{}' has no embedding", t.problem_id));
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < traces.size(); ++i)
        for (std::size_t j = i + 1; j < traces.size(); ++j, ++pairs) total += cosine(*traces[i].embedding, *traces[j].embedding);
    return total / static_cast<double>(pairs);
}

/// Metrics that a problem's traces cannot support are left empty.
struct ProblemMetrics {
    std::string problem_id;
    std::size_t n = 0;
    double answer_div = 0.0;
    std::optional<double> op_div;
    std::optional<double> semantic_sim;

    [[nodiscard]] std::optional<double> semantic_div() const {
        if (!semantic_sim) return std::nullopt;
        return 1.0 - *semantic_sim;
    }
};

struct CorpusReport {
    std::string tag;
    std::vector<ProblemMetrics> problems;  ///< sorted by problem_id
    ProblemMetrics mean;                   ///< problem_id "mean"; each field averaged over problems that define it
};

inline ProblemMetrics problem_metrics(const std::string& id, std::span<const TraceRecord> traces) {
    ProblemMetrics m{id, traces.size(), answer_diversity(traces), std::nullopt, std::nullopt};
    bool all_ops = true, all_emb = true;
    for (const auto& t : traces) {
        all_ops = all_ops && t.operations.has_value();
        all_emb = all_emb && t.embedding.has_value();
    }
    if (all_ops) m.op_div = operation_diversity(traces);
    if (all_emb && traces.size() >= 2) m.semantic_sim = semantic_similarity(traces);
    return m;
}

inline CorpusReport corpus_report(const std::vector<TraceRecord>& corpus, std::string tag) {
    std::map<std::string, std::vector<TraceRecord>> groups;
    for (const auto& r : corpus) groups[r.problem_id].push_back(r);
    CorpusReport rep{std::move(tag), {}, {"mean", 0, 0.0, std::nullopt, std::nullopt}};
    double ans = 0.0, ops = 0.0, sem = 0.0;
    std::size_t n_ops = 0, n_sem = 0;
    for (const auto& [id, traces] : groups) {
        auto m = problem_metrics(id, traces);
        rep.mean.n += m.n;
        ans += m.answer_div;
        if (m.op_div) {
            ops += *m.op_div;
            ++n_ops;
        }
        if (m.semantic_sim) {
            sem += *m.semantic_sim;
            ++n_sem;
        }
        rep.problems.push_back(std::move(m));
    }
    if (!rep.problems.empty()) rep.mean.answer_div = ans / static_cast<double>(rep.problems.size());
    if (n_ops > 0) rep.mean.op_div = ops / static_cast<double>(n_ops);
    if (n_sem > 0) rep.mean.semantic_sim = sem / static_cast<double>(n_sem);
    return rep;
}

}  // namespace divlab::diversity
