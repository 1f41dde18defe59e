#pragma once

// K+1-armed bandit (K reward-1 arms, one reward-0 arm) trained with
// softmax-parameterized REINFORCE or GRPO, optionally KL-anchored to the
// initial policy.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "divlab/errors.hpp"
#include "divlab/rng.hpp"

namespace divlab::bandit {

enum class Algorithm { reinforce, grpo };

inline std::string_view to_string(Algorithm a) { return a == Algorithm::reinforce ? "reinforce" : "grpo"; }

inline Algorithm parse_algorithm(std::string_view s) {
    if (s == "reinforce") return Algorithm::reinforce;
    if (s == "grpo") return Algorithm::grpo;
    throw ConfigError(fmt::format("unknown bandit algorithm '{}' (expected reinforce or grpo)", s));
}

struct BanditConfig {
    int good_arms = 4;             ///< K; the bad arm is index K (0-based)
    double eta = 0.1;              ///< step size
    double beta = 0.0;             ///< KL strength
    int group_size = 8;            ///< GRPO group size G
    Algorithm algorithm = Algorithm::reinforce;
    std::int64_t max_steps = 100000;
    std::uint64_t seed = 0;
    double collapse_eps = 0.01;    ///< collapse once max good-arm probability >= 1 - eps
    double fixed_point_tol = 1e-12;
    double fixed_point_rate = 0.5; ///< natural-gradient step is rate / beta
    std::int64_t record_stride = 1;
    bool stop_at_collapse = false;

    [[nodiscard]] int arms() const noexcept { return good_arms + 1; }
    [[nodiscard]] int bad_arm() const noexcept { return good_arms; }
    [[nodiscard]] double reward(int arm) const noexcept { return arm < good_arms ? 1.0 : 0.0; }

    void validate() const {
        if (good_arms < 1) throw ConfigError("bandit: need at least one good arm (K >= 1)");
        if (!(eta >= 0.0) || !std::isfinite(eta)) throw ConfigError("bandit: eta must be finite and >= 0");
        if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("bandit: beta must be finite and >= 0");
        if (algorithm == Algorithm::grpo && group_size < 2) throw ConfigError("bandit: GRPO needs group_size >= 2");
        if (max_steps < 0) throw ConfigError("bandit: max_steps must be >= 0");
        if (!(collapse_eps > 0.0 && collapse_eps < 1.0)) throw ConfigError("bandit: collapse_eps must lie in (0, 1)");
        if (!(fixed_point_tol > 0.0)) throw ConfigError("bandit: fixed_point_tol must be > 0");
        if (!(fixed_point_rate > 0.0 && fixed_point_rate <= 1.0))
            throw ConfigError("bandit: fixed_point_rate must lie in (0, 1]");
        if (record_stride < 1) throw ConfigError("bandit: record_stride must be >= 1");
    }
};

inline std::vector<double> softmax(std::span<const double> theta) {
    if (theta.empty()) throw std::invalid_argument("softmax: empty input");
    double hi = theta[0];
    for (double t : theta) {
        if (!std::isfinite(t)) throw std::invalid_argument("softmax: non-finite input");
        hi = std::max(hi, t);
    }
    std::vector<double> p(theta.size());
    double z = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) z += (p[i] = std::exp(theta[i] - hi));
    for (double& v : p) v /= z;
    return p;
}

/// log softmax, accurate even where the probability underflows.
inline std::vector<double> log_softmax(std::span<const double> theta) {
    if (theta.empty()) throw std::invalid_argument("log_softmax: empty input");
    const double hi = *std::max_element(theta.begin(), theta.end());
    double z = 0.0;
    for (double t : theta) z += std::exp(t - hi);
    const double lse = hi + std::log(z);
    std::vector<double> out(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) out[i] = theta[i] - lse;
    return out;
}

namespace detail {

inline void check_reference(std::span<const double> p0, std::size_t n) {
    if (p0.size() != n) throw std::invalid_argument("reference policy has the wrong number of arms");
    double total = 0.0;
    for (double v : p0) {
        if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("reference policy must be strictly positive");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("reference policy must sum to 1");
}

}  // namespace detail

/// KL(p || p0) with 0 log 0 = 0.
inline double kl_divergence(std::span<const double> p, std::span<const double> p0) {
    detail::check_reference(p0, p.size());
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0) throw std::invalid_argument("kl_divergence: negative probability");
        if (p[i] > 0.0) kl += p[i] * std::log(p[i] / p0[i]);
    }
    return kl;
}

/// d KL(softmax(theta) || p0) / d theta. Component k is
/// sum_i p_i (1[i=k] - p_k)(log p_i + 1 - log p0_i) = p_k (l_k - sum_i p_i l_i).
inline std::vector<double> kl_gradient(std::span<const double> theta, std::span<const double> p0) {
    detail::check_reference(p0, theta.size());
    const auto logp = log_softmax(theta);
    std::vector<double> l(theta.size());
    std::vector<double> p(theta.size());
    double mean_l = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        p[i] = std::exp(logp[i]);
        l[i] = logp[i] + 1.0 - std::log(p0[i]);
        mean_l += p[i] * l[i];
    }
    std::vector<double> g(theta.size());
    for (std::size_t k = 0; k < theta.size(); ++k) g[k] = p[k] * (l[k] - mean_l);
    return g;
}

struct PolicyState {
    std::vector<double> theta;
    std::vector<double> p0;

    /// Reference policy taken as softmax(theta).
    static PolicyState from_theta(std::vector<double> theta) {
        auto p0 = softmax(theta);
        return {std::move(theta), std::move(p0)};
    }

    [[nodiscard]] std::vector<double> probs() const { return softmax(theta); }

    void validate() const {
        for (double t : theta)
            if (!std::isfinite(t)) throw NumericalError("policy parameters became non-finite");
        detail::check_reference(p0, theta.size());
    }
};

/// Deterministic REINFORCE update for an already-sampled arm:
/// theta_i += eta r (1[arm=i] - p_i) - eta beta dKL/dtheta_i.
inline PolicyState reinforce_update(const PolicyState& state, const BanditConfig& cfg, int arm) {
    if (arm < 0 || arm >= cfg.arms()) throw std::invalid_argument("reinforce_update: arm out of range");
    PolicyState next = state;
    const auto p = softmax(state.theta);
    const double r = cfg.reward(arm);
    if (r != 0.0) {
        for (int i = 0; i < cfg.arms(); ++i)
            next.theta[i] += cfg.eta * r * ((i == arm ? 1.0 : 0.0) - p[i]);
    }
    if (cfg.beta > 0.0) {
        const auto g = kl_gradient(state.theta, state.p0);
        for (int i = 0; i < cfg.arms(); ++i) next.theta[i] -= cfg.eta * cfg.beta * g[i];
    }
    return next;
}

inline int sample_arm(const PolicyState& state, Rng& rng) {
    const auto p = softmax(state.theta);
    return static_cast<int>(sample_index(p, rng));
}

inline PolicyState reinforce_step(const PolicyState& state, const BanditConfig& cfg, Rng& rng) {
    return reinforce_update(state, cfg, sample_arm(state, rng));
}

/// Group-normalized advantages (r - mu) / sigma with the divide-by-G standard
/// deviation; nullopt when sigma is zero (the update is skipped).
inline std::optional<std::vector<double>> normalized_advantages(std::span<const double> rewards) {
    if (rewards.empty()) throw std::invalid_argument("normalized_advantages: empty group");
    const auto g = static_cast<double>(rewards.size());
    double mu = 0.0;
    for (double r : rewards) mu += r;
    mu /= g;
    double var = 0.0;
    for (double r : rewards) var += (r - mu) * (r - mu);
    const double sigma = std::sqrt(var / g);
    if (sigma == 0.0) return std::nullopt;
    std::vector<double> adv(rewards.size());
    for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mu) / sigma;
    return adv;
}

/// Deterministic GRPO update for an already-sampled group, or nullopt when skipped.
inline std::optional<PolicyState> grpo_update(const PolicyState& state, const BanditConfig& cfg,
                                              std::span<const int> group) {
    if (group.size() < 2) throw std::invalid_argument("grpo_update: group size must be >= 2");
    std::vector<double> rewards(group.size());
    for (std::size_t g = 0; g < group.size(); ++g) {
        if (group[g] < 0 || group[g] >= cfg.arms()) throw std::invalid_argument("grpo_update: arm out of range");
        rewards[g] = cfg.reward(group[g]);
    }
    const auto adv = normalized_advantages(rewards);
    if (!adv) return std::nullopt;

    PolicyState next = state;
    const auto p = softmax(state.theta);
    const double scale = cfg.eta / static_cast<double>(group.size());
    for (int i = 0; i < cfg.arms(); ++i) {
        double acc = 0.0;
        for (std::size_t g = 0; g < group.size(); ++g) acc += (*adv)[g] * ((group[g] == i ? 1.0 : 0.0) - p[i]);
        next.theta[i] += scale * acc;
    }
    // KL term sits outside the 1/G group average.
    if (cfg.beta > 0.0) {
        const auto kg = kl_gradient(state.theta, state.p0);
        for (int i = 0; i < cfg.arms(); ++i) next.theta[i] -= cfg.eta * cfg.beta * kg[i];
    }
    return next;
}

inline std::optional<PolicyState> grpo_step(const PolicyState& state, const BanditConfig& cfg, Rng& rng) {
    const auto p = softmax(state.theta);
    std::vector<int> group(static_cast<std::size_t>(cfg.group_size));
    for (auto& a : group) a = static_cast<int>(sample_index(p, rng));
    return grpo_update(state, cfg, group);
}

inline std::vector<double> good_arm_conditional(std::span<const double> p, int good_arms) {
    if (good_arms < 1 || static_cast<std::size_t>(good_arms) > p.size())
        throw std::invalid_argument("good_arm_conditional: K out of range");
    double mass = 0.0;
    for (int i = 0; i < good_arms; ++i) mass += p[i];
    if (!(mass > 0.0)) throw std::invalid_argument("good_arm_conditional: good arms carry no probability mass");
    std::vector<double> out(static_cast<std::size_t>(good_arms));
    for (int i = 0; i < good_arms; ++i) out[i] = p[i] / mass;
    return out;
}

struct TrajectoryPoint {
    std::int64_t step = 0;
    std::vector<double> probs;
    double theta_bad = 0.0;
};

struct Trajectory {
    std::vector<TrajectoryPoint> steps;  ///< recorded every record_stride steps, plus the final state
    std::optional<std::int64_t> collapse_step;
    std::int64_t skipped_updates = 0;
    std::int64_t steps_run = 0;
    /// Largest single-step increase of the bad arm's parameter (<= 0 means non-increasing).
    double max_theta_bad_increase = 0.0;
    double max_simplex_error = 0.0;
    std::vector<double> final_theta;
    std::vector<double> p0;
};

inline double max_good_prob(std::span<const double> p, int good_arms) {
    return *std::max_element(p.begin(), p.begin() + good_arms);
}

/// Runs the stochastic policy-gradient process for max_steps updates.
inline Trajectory run_simulation(const BanditConfig& cfg, std::vector<double> initial_theta) {
    cfg.validate();
    if (initial_theta.empty()) initial_theta.assign(static_cast<std::size_t>(cfg.arms()), 0.0);
    if (initial_theta.size() != static_cast<std::size_t>(cfg.arms()))
        throw ConfigError(fmt::format("bandit: initial_theta has {} entries, expected {}", initial_theta.size(), cfg.arms()));
    for (double t : initial_theta)
        if (!std::isfinite(t)) throw ConfigError("bandit: initial_theta must be finite");

    Rng rng = SeedTree(cfg.seed).engine("bandit");
    PolicyState state = PolicyState::from_theta(std::move(initial_theta));
    Trajectory traj;
    traj.p0 = state.p0;

    const int bad = cfg.bad_arm();
    auto record = [&](std::int64_t step, const std::vector<double>& p) {
        traj.steps.push_back({step, p, state.theta[bad]});
    };

    std::int64_t t = 0;
    for (; t <= cfg.max_steps; ++t) {
        const auto p = softmax(state.theta);
        double total = 0.0;
        for (double v : p) total += v;
        traj.max_simplex_error = std::max(traj.max_simplex_error, std::abs(total - 1.0));
        if (!traj.collapse_step && max_good_prob(p, cfg.good_arms) >= 1.0 - cfg.collapse_eps) traj.collapse_step = t;

        const bool last = t == cfg.max_steps || (cfg.stop_at_collapse && traj.collapse_step);
        if (t % cfg.record_stride == 0 || last) record(t, p);
        if (last) break;

        const double before = state.theta[bad];
        if (cfg.algorithm == Algorithm::reinforce) {
            state = reinforce_step(state, cfg, rng);
        } else if (auto next = grpo_step(state, cfg, rng)) {
            state = std::move(*next);
        } else {
            ++traj.skipped_updates;
        }
        for (double v : state.theta) {
            if (!std::isfinite(v))
                throw NumericalError(fmt::format("bandit: non-finite parameter at step {} (eta={}, beta={})", t + 1,
                                                 cfg.eta, cfg.beta));
        }
        traj.max_theta_bad_increase = std::max(traj.max_theta_bad_increase, state.theta[bad] - before);
    }
    traj.steps_run = t;
    traj.final_theta = state.theta;
    return traj;
}

/// Gradient of J(theta) = sum_i r_i p_i - beta KL(p || p0).
inline std::vector<double> expected_gradient(std::span<const double> theta, std::span<const double> p0,
                                             const BanditConfig& cfg) {
    const auto p = softmax(theta);
    double mean_r = 0.0;
    for (int i = 0; i < cfg.arms(); ++i) mean_r += p[i] * cfg.reward(i);
    auto g = kl_gradient(theta, p0);
    for (int k = 0; k < cfg.arms(); ++k) g[k] = p[k] * (cfg.reward(k) - mean_r) - cfg.beta * g[k];
    return g;
}

struct FixedPoint {
    PolicyState state;
    std::vector<double> probs;
    std::int64_t iterations = 0;
    double gradient_norm = 0.0;
};

/// Deterministic ascent on sum_i r_i p_i - beta KL(p || p0) until the gradient
/// norm drops below cfg.fixed_point_tol. Steps are Fisher-preconditioned
/// (the plain gradient divided by p_k), which makes the contraction rate
/// independent of how small individual arm probabilities become.
inline FixedPoint expected_gradient_fixed_point(const BanditConfig& cfg, std::vector<double> initial_theta) {
    cfg.validate();
    if (!(cfg.beta > 0.0)) throw ConfigError("fixed point: beta must be > 0 (no interior fixed point without KL)");
    if (initial_theta.empty()) initial_theta.assign(static_cast<std::size_t>(cfg.arms()), 0.0);
    if (initial_theta.size() != static_cast<std::size_t>(cfg.arms()))
        throw ConfigError("fixed point: initial_theta has the wrong number of arms");

    PolicyState state = PolicyState::from_theta(std::move(initial_theta));
    std::vector<double> log_p0(state.p0.size());
    for (std::size_t i = 0; i < log_p0.size(); ++i) log_p0[i] = std::log(state.p0[i]);
    const double step = cfg.fixed_point_rate / cfg.beta;
    const auto n = static_cast<std::size_t>(cfg.arms());

    for (std::int64_t it = 0; it <= cfg.max_steps; ++it) {
        const auto g = expected_gradient(state.theta, state.p0, cfg);
        double norm = 0.0;
        for (double v : g) norm += v * v;
        norm = std::sqrt(norm);
        if (!std::isfinite(norm)) throw NumericalError("fixed point: gradient became non-finite");
        if (norm < cfg.fixed_point_tol) return {state, softmax(state.theta), it, norm};

        const auto logp = log_softmax(state.theta);
        std::vector<double> u(n);
        double mean_u = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            u[k] = cfg.reward(static_cast<int>(k)) - cfg.beta * (logp[k] + 1.0 - log_p0[k]);
            mean_u += std::exp(logp[k]) * u[k];
        }
        for (std::size_t k = 0; k < n; ++k) state.theta[k] += step * (u[k] - mean_u);
    }
    throw NumericalError(fmt::format("fixed point: no convergence within {} iterations", cfg.max_steps));
}

/// Spread (max - min) over good arms of r_k + beta (log p_k + 1 - log p0_k).
inline double first_order_spread(std::span<const double> p, std::span<const double> p0, const BanditConfig& cfg) {
    double lo = INFINITY, hi = -INFINITY;
    for (int k = 0; k < cfg.good_arms; ++k) {
        const double v = cfg.reward(k) + cfg.beta * (std::log(p[k]) + 1.0 - std::log(p0[k]));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return hi - lo;
}

}  // namespace divlab::bandit
