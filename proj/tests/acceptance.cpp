// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <array>
#include <bit>
#include <map>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <fmt/format.h>

#include "divlab/bandit.hpp"
#include "divlab/decode.hpp"
#include "divlab/linear_sft.hpp"
#include "divlab/passk.hpp"
#include "divlab/safetensors.hpp"
#include "divlab_cli.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using divlab::Rng;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double budget_s;
    std::function<Outcome()> body;
};

// ---------------------------------------------------------------- 1

Outcome bound_criterion() {
    namespace pk = divlab::passk;
    Rng rng(20240101);
    const std::array<std::int64_t, 4> ks{2, 4, 8, 32};
    int violations = 0;
    double worst = -INFINITY;
    for (int t = 0; t < 1000; ++t) {
        const pk::RhoDistribution dist(divlab::testing::random_rhos(rng, 1, 500));
        const auto bv = pk::bias_variance(dist);
        for (auto k : ks) {
            const double gap = pk::expected_pass_at_k(dist, k) - pk::prop1_bound(bv, k);
            worst = std::max(worst, gap);
            if (gap > 1e-12) ++violations;
        }
    }
    // Tightness: constant distributions at every k; the two-point {0, 1} family at k = 2.
    double const_gap = 0.0, two_point_gap = 0.0, two_point_gap_k4 = INFINITY;
    for (int t = 0; t < 200; ++t) {
        const double c = t == 0 ? 0.0 : t == 1 ? 1.0 : divlab::uniform01(rng);
        const pk::RhoDistribution flat(std::vector<double>(1 + t % 7, c));
        for (auto k : ks)
            const_gap = std::max(const_gap, std::abs(pk::expected_pass_at_k(flat, k) - pk::prop1_bound(pk::bias_variance(flat), k)));
        std::vector<double> two(10, 0.0);
        std::fill(two.begin(), two.begin() + 1 + t % 9, 1.0);
        const pk::RhoDistribution tp(two);
        two_point_gap = std::max(two_point_gap, std::abs(pk::expected_pass_at_k(tp, 2) - pk::prop1_bound(pk::bias_variance(tp), 2)));
        two_point_gap_k4 = std::min(two_point_gap_k4, pk::prop1_bound(pk::bias_variance(tp), 4) - pk::expected_pass_at_k(tp, 4));
    }
    const bool ok = violations == 0 && const_gap <= 1e-12 && two_point_gap <= 1e-12;
    return {ok, fmt::format("violations={} max(value-bound)={:.3g}; equality gap constant={:.2g}, two-point@k=2={:.2g} "
                            "(two-point@k=4 min slack {:.3g}: strict for 0<q<1)",
                            violations, worst, const_gap, two_point_gap, two_point_gap_k4)};
}

// ---------------------------------------------------------------- 2

Outcome estimator_criterion() {
    std::int64_t cases = 0, mismatches = 0;
    for (int n = 1; n <= 12; ++n) {
        for (int c = 0; c <= n; ++c) {
            for (int k = 1; k <= n; ++k) {
                // Items 0..c-1 are correct; count k-subsets that contain at least one of them.
                std::uint64_t total = 0, hit = 0;
                for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
                    if (std::popcount(mask) != k) continue;
                    ++total;
                    if (mask & ((1u << c) - 1u)) ++hit;
                }
                const double oracle = static_cast<double>(hit) / static_cast<double>(total);
                ++cases;
                if (divlab::passk::pass_at_k_unbiased(n, c, k) != oracle) ++mismatches;
            }
        }
    }
    return {mismatches == 0, fmt::format("{} (n,c,k) cases, {} inexact", cases, mismatches)};
}

// ---------------------------------------------------------------- 3

Outcome collapse_criterion() {
    namespace bd = divlab::bandit;
    bool ok = true;
    std::vector<std::string> parts;
    for (auto alg : {bd::Algorithm::reinforce, bd::Algorithm::grpo}) {
        for (double eta : {0.01, 0.1}) {
            int collapsed = 0, monotone = 0;
            std::int64_t skips = 0, steps = 0;
            for (std::uint64_t seed = 0; seed < 50; ++seed) {
                bd::BanditConfig cfg;
                cfg.good_arms = 4;
                cfg.eta = eta;
                cfg.algorithm = alg;
                cfg.group_size = 8;
                cfg.max_steps = 100000;
                cfg.record_stride = cfg.max_steps;
                cfg.stop_at_collapse = true;
                cfg.seed = seed;
                const auto tr = bd::run_simulation(cfg, {});
                collapsed += tr.collapse_step.has_value();
                monotone += tr.max_theta_bad_increase <= 0.0;
                skips += tr.skipped_updates;
                steps += tr.steps_run;
            }
            const bool cell = collapsed >= 48 && monotone == 50;  // 95% of 50 runs rounds up to 48
            ok = ok && cell;
            std::string extra = alg == bd::Algorithm::grpo ? fmt::format(" skipped {}/{}", skips, steps) : "";
            parts.push_back(fmt::format("{} eta={}: collapse {}/50, theta_bad monotone {}/50{}", bd::to_string(alg), eta,
                                        collapsed, monotone, extra));
        }
    }
    return {ok, fmt::format("{}", fmt::join(parts, "; "))};
}

// ---------------------------------------------------------------- 4

Outcome kl_fixed_point_criterion() {
    namespace bd = divlab::bandit;
    Rng rng(4242);
    double worst_cond = 0.0, worst_spread = 0.0;
    int solved = 0;
    for (int good : {2, 3, 5}) {
        for (double beta : {0.01, 0.1, 1.0}) {
            for (int t = 0; t < 20; ++t) {
                bd::BanditConfig cfg;
                cfg.good_arms = good;
                cfg.beta = beta;
                std::normal_distribution<double> normal(0.0, 1.0);
                std::vector<double> theta0(static_cast<std::size_t>(cfg.arms()));
                for (double& v : theta0) v = normal(rng);
                const auto fp = bd::expected_gradient_fixed_point(cfg, theta0);
                const auto p0 = bd::softmax(theta0);
                const auto c0 = bd::good_arm_conditional(p0, good);
                const auto c = bd::good_arm_conditional(fp.probs, good);
                for (std::size_t i = 0; i < c.size(); ++i) worst_cond = std::max(worst_cond, std::abs(c[i] - c0[i]));
                worst_spread = std::max(worst_spread, bd::first_order_spread(fp.probs, p0, cfg));
                ++solved;
            }
        }
    }
    return {worst_cond <= 1e-4 && worst_spread <= 1e-6,
            fmt::format("{} fixed points; max conditional L_inf error {:.2g}, max first-order spread {:.2g}", solved,
                        worst_cond, worst_spread)};
}

// ---------------------------------------------------------------- 5

Outcome gradient_criterion() {
    namespace bd = divlab::bandit;
    namespace ln = divlab::linear;
    Rng rng(55);
    std::normal_distribution<double> normal(0.0, 2.0);
    auto rel = [](double a, double fd) { return std::abs(a - fd) / std::max(1.0, std::abs(fd)); };
    double worst_kl = 0.0, worst_lr = 0.0;
    for (int t = 0; t < 100; ++t) {
        const int n = 2 + t % 6;
        std::vector<double> theta(static_cast<std::size_t>(n)), ref(static_cast<std::size_t>(n));
        for (double& v : theta) v = normal(rng);
        for (double& v : ref) v = normal(rng);
        const auto p0 = bd::softmax(ref);
        const auto g = bd::kl_gradient(theta, p0);
        for (int k = 0; k < n; ++k) {
            const double h = 1e-5;
            auto up = theta, dn = theta;
            up[k] += h;
            dn[k] -= h;
            const double fd = (bd::kl_divergence(bd::softmax(up), p0) - bd::kl_divergence(bd::softmax(dn), p0)) / (2 * h);
            worst_kl = std::max(worst_kl, rel(g[k], fd));
        }
    }
    for (int t = 0; t < 100; ++t) {
        const int d = 2 + t % 9;
        const auto ds = ln::sample_mixture(d, 12, 1.0, 0.5, rng);
        const auto w = ln::initial_weights(d, 3.0, rng);
        const auto g = ln::logistic_gradient(w, ds);
        for (int j = 0; j < d; ++j) {
            const double h = 1e-5;
            ln::Vector up = w, dn = w;
            up(j) += h;
            dn(j) -= h;
            const double fd = (ln::logistic_loss(up, ds) - ln::logistic_loss(dn, ds)) / (2 * h);
            worst_lr = std::max(worst_lr, rel(g(j), fd));
        }
    }
    return {worst_kl <= 1e-6 && worst_lr <= 1e-6,
            fmt::format("max relative error: kl_gradient {:.2g}, logistic gradient {:.2g}", worst_kl, worst_lr)};
}

// ---------------------------------------------------------------- 6

Outcome linear_criterion() {
    namespace ln = divlab::linear;
    ln::MixtureConfig mix;  // d=1000, n_train=200, n_test=400
    mix.seed = 0;
    ln::TrainConfig tc;     // lr 0.5, 10^4 steps, init std 4/sqrt(d)
    const auto ex = ln::run_experiment(mix, tc);
    const auto& rec = ex.record;
    const auto rows = ln::metrics_table(rec);

    const bool a = rec.zero_error_step.has_value() && rec.norm_non_increases == 0;
    const bool b = rows.back().bv.variance > rows.front().bv.variance && rows.back().bv.bias < rows.front().bv.bias;

    const std::int64_t burn_in = rec.zero_error_step.value_or(0);
    bool pass1_monotone = true;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i - 1].step >= burn_in && rows[i].pass1 < rows[i - 1].pass1) pass1_monotone = false;
    const auto peak = static_cast<std::size_t>(
        std::max_element(rows.begin(), rows.end(), [](const auto& x, const auto& y) { return x.pass32 < y.pass32; }) -
        rows.begin());
    const bool rise_fall = peak > 0 && peak + 1 < rows.size() && rows[peak].pass32 > rows.front().pass32 &&
                           rows[peak].pass32 > rows.back().pass32;
    const bool c = pass1_monotone && rise_fall;

    const auto& early = rows[peak];
    const auto& late = rows.back();
    bool d = false;
    double best1 = -INFINITY, best32 = -INFINITY;
    if (peak + 1 < rows.size()) {
        const auto sweep = ln::wiseft_sweep(rec, ex.test, early.step, late.step,
                                            {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9});
        for (const auto& r : sweep) {
            best1 = std::max(best1, r.pass1);
            best32 = std::max(best32, r.pass32);
            d = d || (r.pass1 >= late.pass1 - 1e-9 && r.pass32 >= early.pass32 - 1e-9);
        }
    }
    auto mark = [](bool v) { return v ? "ok" : "FAILED"; };
    return {a && b && c && d,
            fmt::format("(a) {} zero error at step {}, {} norm decreases; (b) {} var {:.4f}->{:.4f}, bias {:.4f}->{:.4f}; "
                        "(c) {} pass@32 peak {:.5f} at step {} -> final {:.5f}; (d) {} over delta 0.1..0.9 max pass@1 "
                        "{:.5f} vs late {:.5f}, max pass@32 {:.5f} vs early {:.5f}",
                        mark(a), burn_in, rec.norm_non_increases, mark(b), rows.front().bv.variance,
                        rows.back().bv.variance, rows.front().bv.bias, rows.back().bv.bias, mark(c), early.pass32,
                        early.step, late.pass32, mark(d), best1, late.pass1, best32, early.pass32)};
}

// ---------------------------------------------------------------- 7

Outcome decoding_criterion() {
    namespace dc = divlab::decode;
    Rng rng(777);
    const auto grid = dc::default_strategy_grid();
    std::int64_t checks = 0, violations = 0, subset_checks = 0, subset_failures = 0;
    double min_margin = INFINITY;
    for (int t = 0; t < 100; ++t) {
        const int vocab = 2 + static_cast<int>(divlab::uniform01(rng) * 5);
        const int len = 1 + static_cast<int>(divlab::uniform01(rng) * 4);
        auto model = dc::random_toy_lm(vocab, len, 2.0, rng);
        if (t % 2 == 1) model.answer = dc::AnswerMap::full_sequence;
        const auto base = dc::marginal_answer_distribution(model, dc::base_strategy());
        std::vector<divlab::Categorical> marginals;
        for (const auto& s : grid) marginals.push_back(dc::marginal_answer_distribution(model, s));
        for (std::int64_t k : {1, 2, 4}) {
            const double oracle = dc::expected_oracle_top_k(base, k);
            for (const auto& m : marginals) {
                const double margin = oracle - dc::expected_iid_pass_at_k(base, m, k);
                min_margin = std::min(min_margin, margin);
                ++checks;
                if (margin < -1e-12) ++violations;
            }
            // Exhaustive subset search over the support (capped to keep enumeration small).
            std::vector<double> mass;
            for (const auto& [label, p] : base) mass.push_back(p);
            std::sort(mass.rbegin(), mass.rend());
            if (mass.size() > 16) mass.resize(16);
            double best = 0.0;
            for (std::uint32_t mask = 0; mask < (1u << mass.size()); ++mask) {
                if (std::popcount(mask) > k) continue;
                double s = 0.0;
                for (std::size_t i = 0; i < mass.size(); ++i)
                    if (mask >> i & 1u) s += mass[i];
                best = std::max(best, s);
            }
            ++subset_checks;
            if (oracle < best - 1e-12) ++subset_failures;
        }
    }
    return {violations == 0 && subset_failures == 0,
            fmt::format("{} strategy comparisons, {} violations, min margin {:.3g}; top-k subset optimal in {}/{}",
                        checks, violations, min_margin, subset_checks - subset_failures, subset_checks)};
}

// ---------------------------------------------------------------- 8

Outcome filter_criterion() {
    namespace dc = divlab::decode;
    Rng rng(8888);
    struct Tally {
        int idem = 0, support = 0, renorm = 0;
    };
    std::map<std::string, Tally> tally{{"top_k", {}}, {"nucleus", {}}, {"min_p", {}}};
    for (int t = 0; t < 1000; ++t) {
        const auto n = static_cast<std::size_t>(2 + divlab::uniform01(rng) * 9);
        const auto p = divlab::testing::random_probs(n, rng);
        const int k = 1 + static_cast<int>(divlab::uniform01(rng) * static_cast<double>(n));
        const double top_p = 0.05 + 0.95 * divlab::uniform01(rng);
        const double gamma = divlab::uniform01(rng);
        const std::vector<std::pair<std::string, std::function<dc::Probs(std::span<const double>)>>> filters{
            {"top_k", [&](std::span<const double> x) { return dc::filter_top_k(x, k); }},
            {"nucleus", [&](std::span<const double> x) { return dc::filter_nucleus(x, top_p); }},
            {"min_p", [&](std::span<const double> x) { return dc::filter_min_p(x, gamma); }},
        };
        for (const auto& [name, f] : filters) {
            auto& tl = tally[name];
            const auto once = f(p);
            const auto twice = f(once);
            bool idem = true, support = true, renorm = true;
            double total = 0.0, scale = -1.0;
            bool any = false;
            for (std::size_t i = 0; i < n; ++i) {
                idem = idem && std::abs(once[i] - twice[i]) <= 1e-12;
                total += once[i];
                if (once[i] > 0.0) {
                    any = true;
                    support = support && p[i] > 0.0;
                    const double ratio = once[i] / p[i];
                    if (scale < 0.0) scale = ratio;
                    renorm = renorm && std::abs(ratio - scale) <= 1e-12 * scale;
                }
            }
            support = support && any;
            renorm = renorm && std::abs(total - 1.0) <= 1e-12;
            tl.idem += !idem;
            tl.support += !support;
            tl.renorm += !renorm;
        }
    }
    bool ok = true;
    std::vector<std::string> parts;
    for (const auto& [name, tl] : tally) {
        ok = ok && tl.idem == 0 && tl.support == 0 && tl.renorm == 0;
        parts.push_back(fmt::format("{}: idempotence {}, support {}, renormalization {}", name, tl.idem, tl.support, tl.renorm));
    }
    return {ok, fmt::format("violations over 1000 distributions: {}", fmt::join(parts, "; "))};
}

// ---------------------------------------------------------------- 9

std::vector<std::byte> framed(const std::string& header, std::size_t data_bytes, std::uint64_t declared) {
    std::vector<std::byte> out(8 + header.size() + data_bytes, std::byte{0});
    for (int i = 0; i < 8; ++i) out[static_cast<std::size_t>(i)] = static_cast<std::byte>((declared >> (8 * i)) & 0xFF);
    std::memcpy(out.data() + 8, header.data(), header.size());
    return out;
}

std::vector<std::byte> framed(const std::string& header, std::size_t data_bytes) {
    return framed(header, data_bytes, header.size());
}

Outcome checkpoint_criterion() {
    namespace st = divlab::st;
    Rng rng(99);
    std::normal_distribution<double> normal(0.0, 3.0);
    auto make = [&](st::DType dtype) {
        st::TensorFile tf;
        for (const auto& [name, n] : std::vector<std::pair<std::string, std::uint64_t>>{{"a.weight", 12}, {"a.bias", 4}, {"s", 1}}) {
            std::vector<std::byte> bytes(n * st::dtype_size(dtype));
            for (std::uint64_t i = 0; i < n; ++i) st::detail::store_element(normal(rng), bytes.data() + i * st::dtype_size(dtype), dtype);
            tf.add(name, dtype, n == 1 ? std::vector<std::uint64_t>{} : std::vector<std::uint64_t>{n}, bytes);
        }
        tf.metadata = st::Metadata{{"format", "pt"}};
        return tf;
    };
    int endpoint_fail = 0, symmetry_fail = 0, roundtrip_fail = 0, fixtures = 0;
    for (auto dtype : {st::DType::F32, st::DType::F16, st::DType::BF16}) {
        for (int t = 0; t < 20; ++t) {
            const auto a = make(dtype), b = make(dtype);
            const auto m0 = st::interpolate_checkpoints(a, b, 0.0), m1 = st::interpolate_checkpoints(a, b, 1.0);
            for (const auto& name : a.names()) {
                endpoint_fail += !std::ranges::equal(m0.data(name), b.data(name));
                endpoint_fail += !std::ranges::equal(m1.data(name), a.data(name));
            }
            const double delta = divlab::uniform01(rng);
            const auto x = st::interpolate_checkpoints(a, b, delta), y = st::interpolate_checkpoints(b, a, 1.0 - delta);
            for (const auto& name : a.names()) symmetry_fail += !std::ranges::equal(x.data(name), y.data(name));
            const auto bytes = st::serialize_checkpoint(a);
            roundtrip_fail += st::serialize_checkpoint(st::parse_checkpoint(bytes)) != bytes;
        }
    }
    using K = st::CheckpointErrc;
    const std::string ok_hdr = R"({"a":{"dtype":"F32","shape":[2],"data_offsets":[0,8]}})";
    const std::vector<std::pair<std::vector<std::byte>, K>> corrupt{
        {std::vector<std::byte>(5), K::malformed_prefix},
        {framed(ok_hdr, 8, ok_hdr.size() + 64), K::malformed_prefix},
        {framed("{oops", 0), K::invalid_header},
        {framed(R"({"a":{"dtype":"F32","shape":[2]}})", 8), K::invalid_header},
        {framed(R"({"a":{"dtype":"F13","shape":[2],"data_offsets":[0,8]}})", 8), K::unknown_dtype},
        {framed(ok_hdr, 4), K::offsets_out_of_bounds},
        {framed(R"({"a":{"dtype":"F32","shape":[3],"data_offsets":[0,8]}})", 8), K::size_mismatch},
        {framed(R"({"a":{"dtype":"F32","shape":[2],"data_offsets":[0,8]},"b":{"dtype":"F32","shape":[2],"data_offsets":[4,12]}})",
                12),
         K::overlapping_offsets},
    };
    int wrong_kind = 0;
    for (const auto& [bytes, kind] : corrupt) {
        ++fixtures;
        try {
            st::parse_checkpoint(bytes);
            ++wrong_kind;
        } catch (const st::CheckpointError& e) {
            wrong_kind += e.kind() != kind;
        }
    }
    return {endpoint_fail == 0 && symmetry_fail == 0 && roundtrip_fail == 0 && wrong_kind == 0,
            fmt::format("endpoint mismatches {}, symmetry mismatches {}, round-trip mismatches {} (60 fixtures); "
                        "{}/{} corruption fixtures rejected with the designated kind",
                        endpoint_fail, symmetry_fail, roundtrip_fail, fixtures - wrong_kind, fixtures)};
}

// ---------------------------------------------------------------- 10

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism_criterion() {
    namespace st = divlab::st;
    const fs::path configs = DIVLAB_CONFIG_DIR;
    divlab::testing::TempDir dir("acceptance_det");
    Rng rng(10);
    for (const char* name : {"early", "late"}) {
        std::vector<float> w(64);
        for (float& v : w) v = static_cast<float>(divlab::uniform01(rng) - 0.5);
        st::TensorFile tf;
        tf.add_f32("w", {8, 8}, w);
        st::write_checkpoint(tf, dir / (std::string(name) + ".safetensors"));
    }
    const std::vector<std::pair<std::string, std::vector<std::string>>> runs{
        {"passk", {"passk", "--input", (configs / "outcomes.jsonl").string(), "--k", "1,2,4,8"}},
        {"bandit", {"--config", (configs / "bandit_kl.json").string(), "--seed", "3", "bandit"}},
        {"linear", {"--config", (configs / "linear.json").string(), "--seed", "0", "linear"}},
        {"decode", {"--config", (configs / "decode.json").string(), "--seed", "1", "decode"}},
        {"diversity", {"diversity", "--input", (configs / "traces.jsonl").string()}},
    };
    std::vector<std::string> bad;
    std::size_t files = 0;
    auto invoke = [](std::vector<std::string> args) {
        args.insert(args.begin(), "divlab");
        std::ostringstream out, err;
        const int code = divlab::cli::run(args, out, err);
        if (code != 0) throw std::runtime_error(fmt::format("exit {}: {}", code, err.str()));
    };
    for (const auto& [name, args] : runs) {
        for (const char* tag : {"1", "2"}) {
            std::vector<std::string> full{"--out", (dir / (name + tag)).string()};
            full.insert(full.end(), args.begin(), args.end());
            invoke(full);
        }
        const auto manifest = nlohmann::json::parse(slurp(dir / (name + "1") / "manifest.json"));
        const auto other = nlohmann::json::parse(slurp(dir / (name + "2") / "manifest.json"));
        if (manifest["artifacts"] != other["artifacts"]) bad.push_back(name + "/manifest");
        for (const auto& a : manifest["artifacts"]) {
            const auto rel = a["name"].get<std::string>();
            ++files;
            if (slurp(dir / (name + "1") / rel) != slurp(dir / (name + "2") / rel)) bad.push_back(name + "/" + rel);
        }
    }
    for (const char* tag : {"1", "2"})
        invoke({"merge", "--early", (dir / "early.safetensors").string(), "--late", (dir / "late.safetensors").string(),
                "--delta", "0.3", "--out", (dir / fmt::format("merged{}.safetensors", tag)).string()});
    ++files;
    if (slurp(dir / "merged1.safetensors") != slurp(dir / "merged2.safetensors")) bad.push_back("merge");
    return {bad.empty(), fmt::format("6 subcommands, {} artifacts compared, {} differ{}", files, bad.size(),
                                     bad.empty() ? "" : fmt::format(" ({})", fmt::join(bad, ", ")))};
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "pass@k upper bound", 5, bound_criterion},
        {2, "unbiased estimator vs subset enumeration", 5, estimator_criterion},
        {3, "policy-gradient collapse without KL", 180, collapse_criterion},
        {4, "KL fixed point keeps good-arm conditional", 30, kl_fixed_point_criterion},
        {5, "gradient checks", 10, gradient_criterion},
        {6, "linear finetuning reproduction", 120, linear_criterion},
        {7, "oracle top-k decoding optimality", 60, decoding_criterion},
        {8, "filter algebra", 5, filter_criterion},
        {9, "checkpoint merge and format", 5, checkpoint_criterion},
        {10, "CLI determinism", 60, determinism_criterion},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.body();
        } catch (const std::exception& e) {
            o = {false, fmt::format("exception: {}", e.what())};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_budget = secs < c.budget_s;
        const bool pass = o.pass && in_budget;
        failed += !pass;
        std::cout << fmt::format("[{}] {:2d} {}: {} [{:.2f}s / {:.0f}s{}]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail,
                                 secs, c.budget_s, in_budget ? "" : " OVER BUDGET")
                  << std::flush;
    }
    std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
    return failed == 0 ? 0 : 1;
}
