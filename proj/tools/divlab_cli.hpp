#pragma once

// Command-line front end. run() is usable in-process so tests can drive it.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "divlab/bandit.hpp"
#include "divlab/decode.hpp"
#include "divlab/digest.hpp"
#include "divlab/diversity.hpp"
#include "divlab/errors.hpp"
#include "divlab/linear_sft.hpp"
#include "divlab/numfmt.hpp"
#include "divlab/passk.hpp"
#include "divlab/report.hpp"
#include "divlab/safetensors.hpp"

namespace divlab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int {
    kOk = 0,
    kNumerical = 1,
    kUsage = 2,
    kConfig = 3,
    kIo = 4,
    kCheckpoint = 5,
    kVerifyMismatch = 6,
};

struct GlobalOptions {
    std::string config;
    std::string out = "divlab_out";
    std::string format = "csv";
};

/// Everything a subcommand needs besides its own flags.
struct RunContext {
    json config = json::object();
    std::uint64_t seed = 0;
    report::OutputSink* sink = nullptr;
    std::ostream* log = nullptr;
};

// ---------------------------------------------------------------- config

inline json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open config '{}'", path));
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("config '{}': {}", path, e.what()));
    }
    if (!j.is_object()) throw ConfigError(fmt::format("config '{}' must be a JSON object", path));
    return j;
}

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) throw ConfigError(fmt::format("{}: unknown key '{}'", where, key));
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    try {
        return j[key].get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("config key '{}': {}", key, e.what()));
    }
}

inline std::string join_ints(const std::vector<std::int64_t>& v) { return fmt::format("{}", fmt::join(v, ",")); }

// ---------------------------------------------------------------- passk

struct PasskArgs {
    std::string input;
    std::vector<std::int64_t> ks;
    std::size_t bins = 0;
};

struct OutcomeRecord {
    std::string problem_id;
    double rho = 0.0;
    std::optional<passk::SampleOutcomes> counts;
};

inline std::vector<OutcomeRecord> read_outcomes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open '{}'", path));
    std::vector<OutcomeRecord> out;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            OutcomeRecord r;
            r.problem_id = j.at("problem_id").get<std::string>();
            if (j.contains("n") || j.contains("c")) {
                passk::SampleOutcomes o{j.at("n").get<std::int64_t>(), j.at("c").get<std::int64_t>()};
                o.validate();
                r.counts = o;
                r.rho = passk::estimate_rho(o);
            } else {
                r.rho = j.at("rho").get<double>();
                if (!(r.rho >= 0.0 && r.rho <= 1.0)) throw ConfigError("rho must lie in [0, 1]");
            }
            out.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw ConfigError(fmt::format("{} line {}: {}", path, lineno, e.what()));
        }
    }
    if (out.empty()) throw ConfigError(fmt::format("{}: no outcome records", path));
    return out;
}

inline std::vector<std::string> run_passk(const RunContext& ctx, PasskArgs args) {
    check_keys(ctx.config, {"seed", "input", "k", "bins"}, "passk config");
    if (args.input.empty()) args.input = get_or<std::string>(ctx.config, "input", "");
    if (args.input.empty()) throw ConfigError("passk: --input (or config 'input') is required");
    if (args.ks.empty()) args.ks = get_or<std::vector<std::int64_t>>(ctx.config, "k", {1, 2, 4, 8, 16, 32});
    if (args.bins == 0) args.bins = get_or<std::size_t>(ctx.config, "bins", 10);
    for (auto k : args.ks)
        if (k < 1) throw ConfigError("passk: every k must be >= 1");

    const auto records = read_outcomes(args.input);
    std::vector<double> rhos;
    bool all_counts = true;
    for (const auto& r : records) {
        rhos.push_back(r.rho);
        all_counts = all_counts && r.counts.has_value();
    }
    const passk::RhoDistribution dist(rhos);
    const auto bv = passk::bias_variance(dist);

    report::Table table{{"k", "expected_pass_at_k", "bound"}, {}};
    for (auto k : args.ks) {
        const report::Cell bound = k >= 2 ? report::Cell{passk::prop1_bound(bv, k)} : report::Cell{};
        table.add({k, passk::expected_pass_at_k(dist, k), bound});
    }
    ctx.sink->table("passk", table);

    if (all_counts) {
        report::Table unbiased{{"k", "unbiased_pass_at_k"}, {}};
        for (auto k : args.ks) {
            double total = 0.0;
            bool defined = true;
            for (const auto& r : records) {
                if (k > r.counts->n) {
                    defined = false;
                    break;
                }
                total += passk::pass_at_k_unbiased(r.counts->n, r.counts->c, k);
            }
            unbiased.add({k, defined ? report::Cell{total / static_cast<double>(records.size())} : report::Cell{}});
        }
        ctx.sink->table("unbiased", unbiased);
    }

    const auto hist = passk::rho_histogram(dist, args.bins);
    report::Table ht{{"bin_lo", "bin_hi", "count"}, {}};
    for (std::size_t i = 0; i < args.bins; ++i)
        ht.add({hist.lo[i], hist.hi[i], static_cast<std::int64_t>(hist.counts[i])});
    ctx.sink->table("histogram", ht);

    ctx.sink->json("summary.json", {{"problems", records.size()}, {"bias", bv.bias}, {"variance", bv.variance}});
    *ctx.log << fmt::format("passk: {} problems, bias {}, variance {}\n", records.size(), format_real(bv.bias),
                            format_real(bv.variance));
    return {"--input", args.input, "--k", join_ints(args.ks), "--bins", std::to_string(args.bins)};
}

// ---------------------------------------------------------------- bandit

inline bandit::BanditConfig bandit_config_from_json(const json& j, std::uint64_t seed) {
    check_keys(j,
               {"seed", "good_arms", "eta", "beta", "group_size", "algorithm", "max_steps", "collapse_eps",
                "fixed_point_tol", "fixed_point_rate", "record_stride", "stop_at_collapse", "initial_theta"},
               "bandit config");
    bandit::BanditConfig c;
    c.good_arms = get_or(j, "good_arms", c.good_arms);
    c.eta = get_or(j, "eta", c.eta);
    c.beta = get_or(j, "beta", c.beta);
    c.group_size = get_or(j, "group_size", c.group_size);
    c.algorithm = bandit::parse_algorithm(get_or<std::string>(j, "algorithm", "reinforce"));
    c.max_steps = get_or(j, "max_steps", c.max_steps);
    c.collapse_eps = get_or(j, "collapse_eps", c.collapse_eps);
    c.fixed_point_tol = get_or(j, "fixed_point_tol", c.fixed_point_tol);
    c.fixed_point_rate = get_or(j, "fixed_point_rate", c.fixed_point_rate);
    c.record_stride = get_or(j, "record_stride", c.record_stride);
    c.stop_at_collapse = get_or(j, "stop_at_collapse", c.stop_at_collapse);
    c.seed = seed;
    c.validate();
    return c;
}

inline json optional_json(const std::optional<std::int64_t>& v) { return v ? json(*v) : json(nullptr); }

inline std::vector<std::string> run_bandit(const RunContext& ctx) {
    const auto cfg = bandit_config_from_json(ctx.config, ctx.seed);
    const auto theta0 = get_or<std::vector<double>>(ctx.config, "initial_theta", {});
    const auto traj = bandit::run_simulation(cfg, theta0);

    report::Table t{{"step"}, {}};
    for (int i = 1; i <= cfg.arms(); ++i) t.columns.push_back(fmt::format("p_{}", i));
    t.columns.push_back("theta_bad");
    for (const auto& pt : traj.steps) {
        std::vector<report::Cell> row{pt.step};
        for (double p : pt.probs) row.emplace_back(p);
        row.emplace_back(pt.theta_bad);
        t.add(std::move(row));
    }
    ctx.sink->table("trajectory", t);

    const auto final_p = bandit::softmax(traj.final_theta);
    json summary = {{"algorithm", std::string(bandit::to_string(cfg.algorithm))},
                    {"collapse_step", optional_json(traj.collapse_step)},
                    {"steps_run", traj.steps_run},
                    {"skipped_updates", traj.skipped_updates},
                    {"max_theta_bad_increase", traj.max_theta_bad_increase},
                    {"final_probs", final_p},
                    {"final_conditional", bandit::good_arm_conditional(final_p, cfg.good_arms)},
                    {"initial_conditional", bandit::good_arm_conditional(traj.p0, cfg.good_arms)}};
    if (cfg.beta > 0.0) {
        const auto fp = bandit::expected_gradient_fixed_point(cfg, theta0);
        summary["fixed_point"] = {{"probs", fp.probs},
                                  {"conditional", bandit::good_arm_conditional(fp.probs, cfg.good_arms)},
                                  {"iterations", fp.iterations},
                                  {"gradient_norm", fp.gradient_norm}};
    }
    ctx.sink->json("summary.json", summary);
    *ctx.log << fmt::format("bandit: {} steps, collapse step {}, {} skipped updates\n", traj.steps_run,
                            traj.collapse_step ? std::to_string(*traj.collapse_step) : "none", traj.skipped_updates);
    return {};
}

// ---------------------------------------------------------------- linear

inline std::vector<std::string> run_linear(const RunContext& ctx) {
    const json& j = ctx.config;
    check_keys(j,
               {"seed", "d", "n_train", "n_test", "mean_scale", "noise", "lr", "steps", "init_scale", "per_decade",
                "schedule", "deltas", "early_step", "late_step", "histogram_bins", "checkpoints"},
               "linear config");
    linear::MixtureConfig mix;
    mix.d = get_or(j, "d", mix.d);
    mix.n_train = get_or(j, "n_train", mix.n_train);
    mix.n_test = get_or(j, "n_test", mix.n_test);
    mix.mean_scale = get_or(j, "mean_scale", mix.mean_scale);
    mix.noise = get_or(j, "noise", mix.noise);
    mix.seed = ctx.seed;
    linear::TrainConfig tc;
    tc.lr = get_or(j, "lr", tc.lr);
    tc.steps = get_or(j, "steps", tc.steps);
    tc.init_scale = get_or(j, "init_scale", tc.init_scale);
    tc.per_decade = get_or(j, "per_decade", tc.per_decade);
    tc.schedule = get_or(j, "schedule", tc.schedule);
    const auto deltas = get_or<std::vector<double>>(j, "deltas", {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9});
    const auto bins = get_or<std::size_t>(j, "histogram_bins", 20);
    const auto which = get_or<std::string>(j, "checkpoints", "wiseft");
    if (which != "all" && which != "wiseft" && which != "none")
        throw ConfigError("linear: 'checkpoints' must be all, wiseft or none");
    if (bins < 1) throw ConfigError("linear: histogram_bins must be >= 1");

    const auto ex = linear::run_experiment(mix, tc);
    const auto& rec = ex.record;

    report::Table metrics{{"step", "norm", "bias", "variance", "pass@1", "pass@4", "pass@32"}, {}};
    const auto rows = linear::metrics_table(rec);
    std::size_t peak = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        metrics.add({r.step, r.norm, r.bv.bias, r.bv.variance, r.pass1, r.pass4, r.pass32});
        if (r.pass32 > rows[peak].pass32) peak = i;
    }
    ctx.sink->table("metrics", metrics);

    for (std::size_t i = 0; i < rec.checkpoints.size(); ++i) {
        const auto h = passk::rho_histogram(rec.rhos(i), bins);
        report::Table ht{{"bin_lo", "bin_hi", "count"}, {}};
        for (std::size_t b = 0; b < bins; ++b) ht.add({h.lo[b], h.hi[b], static_cast<std::int64_t>(h.counts[b])});
        ctx.sink->table(fmt::format("histograms/step_{:07d}", rec.checkpoints[i].step), ht);
    }

    const std::int64_t late_step = get_or<std::int64_t>(j, "late_step", rec.checkpoints.back().step);
    std::int64_t early_step = get_or<std::int64_t>(j, "early_step", rows[peak].step);
    json wise_summary = nullptr;
    if (early_step < late_step) {
        report::Table wt{{"delta", "bias", "variance", "pass@1", "pass@32"}, {}};
        for (const auto& w : linear::wiseft_sweep(rec, ex.test, early_step, late_step, deltas))
            wt.add({w.delta, w.bias, w.variance, w.pass1, w.pass32});
        ctx.sink->table("wiseft", wt);
        wise_summary = {{"early_step", early_step}, {"late_step", late_step}};
    }

    auto save = [&](std::size_t i) {
        const auto& cp = rec.checkpoints[i];
        st::TensorFile tf;
        const std::vector<double> w(cp.w.data(), cp.w.data() + cp.w.size());
        tf.add("w", st::DType::F64, {static_cast<std::uint64_t>(w.size())}, std::as_bytes(std::span(w)));
        tf.metadata = st::Metadata{{"step", std::to_string(cp.step)}};
        const auto name = fmt::format("checkpoints/step_{:07d}.safetensors", cp.step);
        const auto bytes = st::serialize_checkpoint(tf);
        ctx.sink->text(name, std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    };
    for (std::size_t i = 0; i < rec.checkpoints.size(); ++i) {
        const auto step = rec.checkpoints[i].step;
        if (which == "all" || (which == "wiseft" && (step == early_step || step == late_step))) save(i);
    }

    ctx.sink->json("summary.json", {{"zero_error_step", optional_json(rec.zero_error_step)},
                                    {"norm_non_increases_after_separation", rec.norm_non_increases},
                                    {"loss_increases", rec.loss_increases},
                                    {"pass32_peak_step", rows[peak].step},
                                    {"wiseft", wise_summary}});
    *ctx.log << fmt::format("linear: {} checkpoints, zero train error at step {}, pass@32 peak at step {}\n",
                            rec.checkpoints.size(),
                            rec.zero_error_step ? std::to_string(*rec.zero_error_step) : "never", rows[peak].step);
    return {};
}

// ---------------------------------------------------------------- decode

inline decode::Filter filter_from_json(const json& f) {
    const auto type = f.at("type").get<std::string>();
    if (type == "none") return decode::NoFilter{};
    if (type == "top_k") return decode::TopK{f.at("k").get<int>()};
    if (type == "nucleus") return decode::Nucleus{f.at("p").get<double>()};
    if (type == "min_p") return decode::MinP{f.at("gamma").get<double>()};
    throw ConfigError(fmt::format("decode: unknown filter type '{}'", type));
}

inline std::vector<std::string> run_decode(const RunContext& ctx) {
    const json& j = ctx.config;
    check_keys(j, {"seed", "problems", "synthetic", "temperatures", "filters", "k", "per_strategy"}, "decode config");
    const auto ks = get_or<std::vector<std::int64_t>>(j, "k", {1, 2, 4});
    const auto temps = get_or<std::vector<double>>(j, "temperatures", decode::default_temperatures());
    std::vector<decode::Filter> filters;
    try {
        if (j.contains("filters")) {
            for (const auto& f : j["filters"]) filters.push_back(filter_from_json(f));
        } else {
            filters = {decode::NoFilter{}, decode::TopK{3}, decode::Nucleus{0.9}, decode::MinP{0.1}};
        }
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("decode filters: {}", e.what()));
    }
    std::vector<decode::DecodeStrategy> strategies;
    for (const auto& f : filters)
        for (double t : temps) {
            decode::DecodeStrategy s{t, f};
            s.validate();
            strategies.push_back(s);
        }

    std::vector<decode::PassRow> rows;
    const SeedTree seeds = SeedTree(ctx.seed).child("decode");
    if (j.contains("problems")) {
        std::vector<decode::Problem> problems;
        try {
            for (const auto& p : j["problems"]) {
                decode::ToyLM m = p.at("model").get<decode::ToyLM>();
                m.validate();
                problems.push_back({std::move(m), p.at("truth").get<std::string>()});
            }
        } catch (const json::exception& e) {
            throw ConfigError(fmt::format("decode problems: {}", e.what()));
        }
        rows = decode::compare_strategies(problems, strategies, ks);
    } else {
        const json syn = get_or<json>(j, "synthetic", json::object());
        check_keys(syn, {"count", "vocab", "len", "scale", "calibrated"}, "decode synthetic");
        const int count = get_or(syn, "count", 100);
        const int vocab = get_or(syn, "vocab", 4);
        const int len = get_or(syn, "len", 3);
        const double scale = get_or(syn, "scale", 2.0);
        const bool calibrated = get_or(syn, "calibrated", true);
        if (count < 1) throw ConfigError("decode synthetic: count must be >= 1");
        Rng model_rng = seeds.engine("models");
        std::vector<decode::ToyLM> models;
        for (int i = 0; i < count; ++i) {
            models.push_back(decode::random_toy_lm(vocab, len, scale, model_rng));
            models.back().validate();
        }
        if (calibrated) {
            rows = decode::compare_strategies_calibrated(models, strategies, ks);
        } else {
            Rng truth_rng = seeds.engine("truths");
            std::vector<decode::Problem> problems;
            for (auto& m : models) {
                const auto base = decode::marginal_answer_distribution(m, decode::base_strategy());
                problems.push_back({m, CategoricalSampler(base)(truth_rng)});
            }
            rows = decode::compare_strategies(problems, strategies, ks);
        }
    }

    auto to_table = [](const std::vector<decode::PassRow>& rs) {
        report::Table t{{"strategy", "k", "pass"}, {}};
        for (const auto& r : rs) t.add({r.strategy, r.k, r.pass});
        return t;
    };
    ctx.sink->table("decode", to_table(decode::best_per_family(rows, strategies)));
    if (get_or(j, "per_strategy", true)) ctx.sink->table("strategies", to_table(rows));
    *ctx.log << fmt::format("decode: {} strategies, k = {}\n", strategies.size(), join_ints(ks));
    return {};
}

// ---------------------------------------------------------------- diversity

struct DiversityArgs {
    std::string input;
    std::string tag;
};

inline std::vector<std::string> run_diversity(const RunContext& ctx, DiversityArgs args) {
    check_keys(ctx.config, {"seed", "input", "tag"}, "diversity config");
    if (args.input.empty()) args.input = get_or<std::string>(ctx.config, "input", "");
    if (args.tag.empty()) args.tag = get_or<std::string>(ctx.config, "tag", "");
    if (args.input.empty()) throw ConfigError("diversity: --input (or config 'input') is required");
    std::ifstream in(args.input);
    if (!in) throw IoError(fmt::format("cannot open '{}'", args.input));
    const auto rep = diversity::corpus_report(diversity::read_traces(in), args.tag);

    report::Table t{{"problem_id", "answer_div", "op_div", "semantic_sim", "semantic_div", "n"}, {}};
    auto add = [&](const diversity::ProblemMetrics& m) {
        t.add({m.problem_id, m.answer_div, report::cell(m.op_div), report::cell(m.semantic_sim),
               report::cell(m.semantic_div()), static_cast<std::int64_t>(m.n)});
    };
    for (const auto& m : rep.problems) add(m);
    if (!rep.problems.empty()) add(rep.mean);
    ctx.sink->table("diversity", t);
    *ctx.log << fmt::format("diversity: {} problems, tag '{}'\n", rep.problems.size(), rep.tag);
    std::vector<std::string> out{"--input", args.input};
    if (!args.tag.empty()) out.insert(out.end(), {"--tag", args.tag});
    return out;
}

// ---------------------------------------------------------------- merge

struct MergeArgs {
    std::string early;
    std::string late;
    double delta = 0.5;
    std::string out;
    std::string exclude;
    bool dry_run = false;
};

inline std::vector<std::string> merge_tokens(const MergeArgs& a) {
    std::vector<std::string> t{"--early", a.early, "--late", a.late, "--delta", format_real(a.delta)};
    if (!a.exclude.empty()) t.insert(t.end(), {"--exclude", a.exclude});
    return t;
}

/// Returns the path of the merged file, or nothing for a dry run.
inline std::optional<fs::path> run_merge(const MergeArgs& a, std::ostream& log) {
    if (!(a.delta >= 0.0 && a.delta <= 1.0)) throw ConfigError("merge: --delta must lie in [0, 1]");
    st::MergeOptions opts;
    if (!a.exclude.empty()) {
        try {
            opts.exclude = std::regex(a.exclude);
        } catch (const std::regex_error& e) {
            throw ConfigError(fmt::format("merge: bad --exclude pattern: {}", e.what()));
        }
    }
    const auto early = st::read_checkpoint(a.early);
    const auto late = st::read_checkpoint(a.late);
    const auto merged = st::interpolate_checkpoints(early, late, a.delta, opts);
    log << fmt::format("merge: {} tensors, delta {}\n", merged.tensors.size(), format_real(a.delta));
    if (a.dry_run) {
        for (const auto& [name, t] : merged.tensors)
            log << fmt::format("  {} {} [{}]\n", name, st::dtype_name(t.dtype), fmt::join(t.shape, ","));
        return std::nullopt;
    }
    if (a.out.empty()) throw ConfigError("merge: --out is required unless --dry-run is given");
    st::write_checkpoint(merged, a.out);
    return fs::path(a.out);
}

// ---------------------------------------------------------------- driver

inline int exit_with(std::ostream& err, int code, const std::string& category, const std::string& what) {
    err << fmt::format("divlab: {} error: {}\n", category, what);
    return code;
}

int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

inline int verify(const std::string& manifest_path, std::ostream& out, std::ostream& err) {
    const auto manifest = report::manifest_from_json(load_config(manifest_path));
    bool ok = true;
    const fs::path out_dir = manifest.out_dir;

    for (const auto& a : manifest.artifacts) {
        const auto path = manifest.subcommand == "merge" ? fs::path(a.name) : out_dir / a.name;
        std::string status = "ok";
        if (!fs::exists(path)) status = "missing";
        else if (sha256_file(path) != a.sha256) status = "modified";
        if (status != "ok") {
            ok = false;
            out << fmt::format("on-disk {} {}\n", a.name, status);
        }
    }

    std::random_device rd;
    const fs::path scratch = fs::temp_directory_path() / fmt::format("divlab_verify_{:016x}", (std::uint64_t{rd()} << 32) | rd());
    fs::create_directories(scratch);
    std::vector<std::string> args{"divlab", "--seed", std::to_string(manifest.seed), "--format", manifest.format};
    if (!manifest.config_path.empty()) args.insert(args.end(), {"--config", manifest.config_path});
    args.insert(args.end(), {"--out", scratch.string(), manifest.subcommand});
    args.insert(args.end(), manifest.args.begin(), manifest.args.end());
    fs::path merged_out;
    if (manifest.subcommand == "merge") {
        merged_out = scratch / "merged.safetensors";
        args.insert(args.end(), {"--out", merged_out.string()});
    }
    std::ostringstream sink_out, sink_err;
    const int code = run(args, sink_out, sink_err);
    if (code != kOk) {
        fs::remove_all(scratch);
        err << sink_err.str();
        return exit_with(err, kVerifyMismatch, "verify", fmt::format("re-run exited with status {}", code));
    }
    for (const auto& a : manifest.artifacts) {
        const auto path = manifest.subcommand == "merge" ? merged_out : scratch / a.name;
        const bool same = fs::exists(path) && sha256_file(path) == a.sha256;
        if (!same) {
            ok = false;
            out << fmt::format("re-run {} mismatch\n", a.name);
        }
    }
    fs::remove_all(scratch);
    if (!ok) return exit_with(err, kVerifyMismatch, "verify", "digests do not match the manifest");
    out << fmt::format("verify: {} artifacts match\n", manifest.artifacts.size());
    return kOk;
}

inline int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Diversity and Pass@k laboratory", "divlab"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalOptions g;
    std::uint64_t seed_value = 0;
    app.add_option("--config", g.config, "JSON config file")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed_value, "root seed (overrides config 'seed')");
    app.add_option("--out", g.out, "output directory")->envname("DIVLAB_OUT");
    app.add_option("--format", g.format, "table format")->check(CLI::IsMember({"csv", "json"}));

    PasskArgs pk;
    auto* c_passk = app.add_subcommand("passk", "Pass@k tables, bound and histogram from outcome records");
    c_passk->add_option("--input", pk.input, "JSONL outcome records");
    c_passk->add_option("--k", pk.ks, "comma-separated k values")->delimiter(',');
    c_passk->add_option("--bins", pk.bins, "histogram bins");

    auto* c_bandit = app.add_subcommand("bandit", "policy-gradient bandit simulation");
    auto* c_linear = app.add_subcommand("linear", "logistic-regression finetuning experiment");
    auto* c_decode = app.add_subcommand("decode", "decoding strategies on toy models");

    DiversityArgs dv;
    auto* c_div = app.add_subcommand("diversity", "answer, operation and semantic diversity");
    c_div->add_option("--input", dv.input, "JSONL trace records");
    c_div->add_option("--tag", dv.tag, "corpus tag, e.g. a temperature");

    MergeArgs mg;
    auto* c_merge = app.add_subcommand("merge", "interpolate two safetensors checkpoints");
    c_merge->add_option("--early", mg.early, "earlier checkpoint (weight delta)")->required();
    c_merge->add_option("--late", mg.late, "later checkpoint (weight 1 - delta)")->required();
    c_merge->add_option("--delta", mg.delta, "weight on the earlier checkpoint");
    c_merge->add_option("--out", mg.out, "output checkpoint path");
    c_merge->add_option("--exclude", mg.exclude, "regex of tensor names copied from the later checkpoint");
    c_merge->add_flag("--dry-run", mg.dry_run, "validate and report without writing");

    std::string manifest_path;
    auto* c_verify = app.add_subcommand("verify", "re-run a manifest and compare artifact digests");
    c_verify->add_option("--manifest", manifest_path, "manifest.json of a previous run")->required();

    std::vector<const char*> raw;
    for (const auto& a : argv) raw.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(raw.size()), raw.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kUsage;
    }

    try {
        if (c_verify->parsed()) return verify(manifest_path, out, err);

        RunContext ctx;
        ctx.config = load_config(g.config);
        ctx.seed = seed_opt->count() ? seed_value : get_or<std::uint64_t>(ctx.config, "seed", 0);
        ctx.log = &out;

        report::ExperimentManifest manifest;
        manifest.config_path = g.config;
        manifest.format = g.format;
        manifest.seed = ctx.seed;

        if (c_merge->parsed()) {
            manifest.subcommand = "merge";
            const auto written = run_merge(mg, out);
            if (!written) return kOk;
            manifest.out_dir = written->parent_path().string();
            manifest.args = merge_tokens(mg);
            manifest.artifacts.push_back({written->string(), sha256_file(*written)});
            report::write_text(written->string() + ".manifest.json", report::to_json_value(manifest).dump(2) + "\n");
            return kOk;
        }

        report::OutputSink sink(g.out, report::parse_format(g.format));
        ctx.sink = &sink;
        if (c_passk->parsed()) {
            manifest.subcommand = "passk";
            manifest.args = run_passk(ctx, pk);
        } else if (c_bandit->parsed()) {
            manifest.subcommand = "bandit";
            manifest.args = run_bandit(ctx);
        } else if (c_linear->parsed()) {
            manifest.subcommand = "linear";
            manifest.args = run_linear(ctx);
        } else if (c_decode->parsed()) {
            manifest.subcommand = "decode";
            manifest.args = run_decode(ctx);
        } else {
            manifest.subcommand = "diversity";
            manifest.args = run_diversity(ctx, dv);
        }
        manifest.out_dir = g.out;
        manifest.artifacts = sink.artifacts();
        report::write_text(fs::path(g.out) / report::kManifestName, report::to_json_value(manifest).dump(2) + "\n");
        return kOk;
    } catch (const NumericalError& e) {
        return exit_with(err, kNumerical, "numerical", e.what());
    } catch (const ConfigError& e) {
        return exit_with(err, kConfig, "config", e.what());
    } catch (const IoError& e) {
        return exit_with(err, kIo, "io", e.what());
    } catch (const st::CheckpointError& e) {
        if (e.kind() == st::CheckpointErrc::io) return exit_with(err, kIo, "io", e.what());
        return exit_with(err, kCheckpoint, "checkpoint", e.what());
    } catch (const std::invalid_argument& e) {
        return exit_with(err, kConfig, "config", e.what());
    } catch (const fs::filesystem_error& e) {
        return exit_with(err, kIo, "io", e.what());
    }
}

}  // namespace divlab::cli
