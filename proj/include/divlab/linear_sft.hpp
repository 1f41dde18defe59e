#pragma once

// Overparameterized logistic regression on a two-class Gaussian mixture,
// trained by full-batch gradient descent. Per-example Pass@1 is the exact
// logistic probability of the correct label, so Pass@k needs no sampling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "divlab/errors.hpp"
#include "divlab/passk.hpp"
#include "divlab/rng.hpp"

namespace divlab::linear {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// x | y ~ N(y * mean_scale / sqrt(d) * 1, noise * I), y uniform on {-1, +1}.
struct MixtureConfig {
    int d = 1000;
    int n_train = 200;
    int n_test = 400;
    double mean_scale = 1.0;
    double noise = 0.5;
    std::uint64_t seed = 0;

    void validate() const {
        if (d < 1) throw ConfigError("mixture: d must be >= 1");
        if (n_train < 1) throw ConfigError("mixture: n_train must be >= 1");
        if (n_test < 1) throw ConfigError("mixture: n_test must be >= 1");
        if (!std::isfinite(mean_scale)) throw ConfigError("mixture: mean_scale must be finite");
        if (!(noise > 0.0) || !std::isfinite(noise)) throw ConfigError("mixture: noise must be finite and > 0");
    }
};

struct Dataset {
    Matrix x;  ///< one example per row
    Vector y;  ///< labels in {-1, +1}

    [[nodiscard]] Eigen::Index size() const { return x.rows(); }
    [[nodiscard]] Eigen::Index dim() const { return x.cols(); }
};

/// Draws n examples; noise may be 0 here, which places every point on its class mean.
inline Dataset sample_mixture(int d, int n, double mean_scale, double noise, Rng& rng) {
    if (d < 1 || n < 0) throw std::invalid_argument("sample_mixture: bad dimensions");
    if (!(noise >= 0.0)) throw std::invalid_argument("sample_mixture: noise must be >= 0");
    Dataset ds{Matrix(n, d), Vector(n)};
    const double centre = mean_scale / std::sqrt(static_cast<double>(d));
    const double sd = std::sqrt(noise);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
        const double y = uniform01(rng) < 0.5 ? -1.0 : 1.0;
        ds.y(i) = y;
        for (int j = 0; j < d; ++j) ds.x(i, j) = y * centre + sd * normal(rng);
    }
    return ds;
}

inline Dataset generate_mixture(const MixtureConfig& cfg, int n, Rng& rng) {
    cfg.validate();
    return sample_mixture(cfg.d, n, cfg.mean_scale, cfg.noise, rng);
}

inline double logistic(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

/// rho = sigmoid(y <w, x>).
template <class Row>
double rho_of_example(const Vector& w, const Row& x, double y) {
    return logistic(y * w.dot(x));
}

/// Mean logistic loss log(1 + exp(-y <w, x>)).
inline double logistic_loss(const Vector& w, const Dataset& data) {
    const Vector margins = data.y.cwiseProduct(data.x * w);
    double total = 0.0;
    for (Eigen::Index i = 0; i < margins.size(); ++i) {
        const double m = margins(i);
        total += std::max(-m, 0.0) + std::log1p(std::exp(-std::abs(m)));
    }
    return total / static_cast<double>(data.size());
}

/// -(1/n) sum_i y_i x_i sigmoid(-y_i <w, x_i>).
inline Vector logistic_gradient(const Vector& w, const Dataset& data) {
    const Vector margins = data.y.cwiseProduct(data.x * w);
    Vector coef(margins.size());
    for (Eigen::Index i = 0; i < margins.size(); ++i) coef(i) = -data.y(i) * logistic(-margins(i));
    return data.x.transpose() * coef / static_cast<double>(data.size());
}

inline double train_error(const Vector& w, const Dataset& data) {
    const Vector margins = data.y.cwiseProduct(data.x * w);
    return static_cast<double>((margins.array() <= 0.0).count()) / static_cast<double>(data.size());
}

/// Step 0 plus round(10^(j / per_decade)) for every value up to max_step, deduplicated.
inline std::vector<std::int64_t> geometric_schedule(std::int64_t max_step, int per_decade = 8) {
    if (max_step < 0 || per_decade < 1) throw std::invalid_argument("geometric_schedule: bad arguments");
    std::vector<std::int64_t> steps{0};
    for (int j = 0;; ++j) {
        const auto s = static_cast<std::int64_t>(std::llround(std::pow(10.0, static_cast<double>(j) / per_decade)));
        if (s > max_step) break;
        if (s != steps.back()) steps.push_back(s);
    }
    if (steps.back() != max_step) steps.push_back(max_step);
    return steps;
}

struct TrainConfig {
    double lr = 0.5;
    std::int64_t steps = 10000;
    std::vector<std::int64_t> schedule;  ///< empty means geometric_schedule(steps, per_decade)
    int per_decade = 8;
    double init_scale = 4.0;  ///< initial weights are N(0, (init_scale^2 / d) I)

    void validate() const {
        if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("train: lr must be finite and >= 0");
        if (steps < 0) throw ConfigError("train: steps must be >= 0");
        if (!(init_scale >= 0.0)) throw ConfigError("train: init_scale must be >= 0");
        if (per_decade < 1) throw ConfigError("train: per_decade must be >= 1");
        for (std::size_t i = 0; i < schedule.size(); ++i) {
            if (schedule[i] < 0 || schedule[i] > steps) throw ConfigError("train: schedule step outside [0, steps]");
            if (i > 0 && schedule[i] <= schedule[i - 1]) throw ConfigError("train: schedule must be strictly increasing");
        }
    }
};

inline Vector initial_weights(int d, double init_scale, Rng& rng) {
    Vector w = Vector::Zero(d);
    if (init_scale == 0.0) return w;
    std::normal_distribution<double> normal(0.0, init_scale / std::sqrt(static_cast<double>(d)));
    for (int j = 0; j < d; ++j) w(j) = normal(rng);
    return w;
}

struct Checkpoint {
    std::int64_t step = 0;
    Vector w;
    double norm = 0.0;
    double train_loss = 0.0;
    double train_error = 0.0;
};

struct LinearRunRecord {
    std::vector<Checkpoint> checkpoints;
    std::vector<std::vector<double>> rho_matrix;  ///< [checkpoint][test example]
    std::optional<std::int64_t> zero_error_step;  ///< first step whose weights separate the training set
    /// Steps after zero_error_step at which ||w|| failed to increase strictly.
    std::int64_t norm_non_increases = 0;
    std::int64_t loss_increases = 0;

    [[nodiscard]] passk::RhoDistribution rhos(std::size_t checkpoint) const {
        return passk::RhoDistribution(rho_matrix.at(checkpoint));
    }

    [[nodiscard]] std::size_t index_of(std::int64_t step) const {
        for (std::size_t i = 0; i < checkpoints.size(); ++i)
            if (checkpoints[i].step == step) return i;
        throw std::invalid_argument(fmt::format("step {} was not recorded", step));
    }
};

inline std::vector<double> test_rhos(const Vector& w, const Dataset& test) {
    const Vector margins = test.y.cwiseProduct(test.x * w);
    std::vector<double> out(static_cast<std::size_t>(margins.size()));
    for (Eigen::Index i = 0; i < margins.size(); ++i) out[static_cast<std::size_t>(i)] = logistic(margins(i));
    return out;
}

/// Full-batch gradient descent from `init`, recording checkpoints at the
/// scheduled steps. Aborts if the loss exceeds ten times its initial value.
inline LinearRunRecord train_logistic(const Dataset& train, const Dataset& test, const TrainConfig& cfg, Vector init) {
    cfg.validate();
    if (init.size() != train.dim() || test.dim() != train.dim())
        throw std::invalid_argument("train_logistic: dimension mismatch between weights and data");
    const auto schedule = cfg.schedule.empty() ? geometric_schedule(cfg.steps, cfg.per_decade) : cfg.schedule;

    LinearRunRecord rec;
    Vector w = std::move(init);
    const double initial_loss = logistic_loss(w, train);
    double prev_loss = initial_loss;
    double prev_norm = w.norm();
    std::size_t next = 0;

    for (std::int64_t t = 0;; ++t) {
        const Vector margins = train.y.cwiseProduct(train.x * w);
        double loss = 0.0;
        Vector coef(margins.size());
        for (Eigen::Index i = 0; i < margins.size(); ++i) {
            const double m = margins(i);
            loss += std::max(-m, 0.0) + std::log1p(std::exp(-std::abs(m)));
            coef(i) = -train.y(i) * logistic(-m);
        }
        loss /= static_cast<double>(train.size());
        if (!std::isfinite(loss) || loss > 10.0 * initial_loss)
            throw NumericalError(fmt::format("train_logistic: diverged at step {} (loss {} vs initial {}, lr {})", t, loss,
                                             initial_loss, cfg.lr));
        if (t > 0 && loss > prev_loss) ++rec.loss_increases;
        prev_loss = loss;

        const double norm = w.norm();
        if (rec.zero_error_step && t > *rec.zero_error_step && !(norm > prev_norm)) ++rec.norm_non_increases;
        prev_norm = norm;
        const bool separated = (margins.array() > 0.0).all();
        if (!rec.zero_error_step && separated) rec.zero_error_step = t;

        if (next < schedule.size() && schedule[next] == t) {
            const double err = static_cast<double>((margins.array() <= 0.0).count()) / static_cast<double>(train.size());
            rec.checkpoints.push_back({t, w, norm, loss, err});
            rec.rho_matrix.push_back(test_rhos(w, test));
            ++next;
        }
        if (t == cfg.steps) break;
        w -= cfg.lr * (train.x.transpose() * coef) / static_cast<double>(train.size());
    }
    return rec;
}

/// Data and initialization drawn from independent child streams of the mixture seed.
struct Experiment {
    Dataset train;
    Dataset test;
    LinearRunRecord record;
};

inline Experiment run_experiment(const MixtureConfig& mix, const TrainConfig& train_cfg) {
    mix.validate();
    train_cfg.validate();
    const SeedTree seeds(mix.seed);
    Rng train_rng = seeds.engine("linear/train_data");
    Rng test_rng = seeds.engine("linear/test_data");
    Rng init_rng = seeds.engine("linear/init");
    Experiment ex{generate_mixture(mix, mix.n_train, train_rng), generate_mixture(mix, mix.n_test, test_rng), {}};
    ex.record = train_logistic(ex.train, ex.test, train_cfg, initial_weights(mix.d, train_cfg.init_scale, init_rng));
    return ex;
}

/// delta * early + (1 - delta) * late.
inline Vector interpolate_weights(const Vector& early, const Vector& late, double delta) {
    if (early.size() != late.size()) throw std::invalid_argument("interpolate_weights: dimension mismatch");
    if (!(delta >= 0.0 && delta <= 1.0)) throw std::invalid_argument("interpolate_weights: delta must lie in [0, 1]");
    if (delta == 0.0) return late;
    if (delta == 1.0) return early;
    return delta * early + (1.0 - delta) * late;
}

struct PasskCurve {
    std::vector<std::int64_t> steps;
    std::vector<std::int64_t> ks;
    std::vector<std::vector<double>> values;  ///< [checkpoint][k]
};

inline PasskCurve passk_curve(const LinearRunRecord& rec, const std::vector<std::int64_t>& ks) {
    if (ks.empty()) throw std::invalid_argument("passk_curve: no k values");
    PasskCurve curve{{}, ks, {}};
    for (std::size_t i = 0; i < rec.checkpoints.size(); ++i) {
        curve.steps.push_back(rec.checkpoints[i].step);
        const auto dist = rec.rhos(i);
        std::vector<double> row;
        for (auto k : ks) row.push_back(passk::expected_pass_at_k(dist, k));
        curve.values.push_back(std::move(row));
    }
    return curve;
}

struct MetricsRow {
    std::int64_t step = 0;
    double norm = 0.0;
    passk::BiasVariance bv;
    double pass1 = 0.0;
    double pass4 = 0.0;
    double pass32 = 0.0;
};

inline MetricsRow metrics_of(std::int64_t step, double norm, const passk::RhoDistribution& dist) {
    return {step,
            norm,
            passk::bias_variance(dist),
            passk::expected_pass_at_k(dist, 1),
            passk::expected_pass_at_k(dist, 4),
            passk::expected_pass_at_k(dist, 32)};
}

inline std::vector<MetricsRow> metrics_table(const LinearRunRecord& rec) {
    std::vector<MetricsRow> rows;
    for (std::size_t i = 0; i < rec.checkpoints.size(); ++i)
        rows.push_back(metrics_of(rec.checkpoints[i].step, rec.checkpoints[i].norm, rec.rhos(i)));
    return rows;
}

struct WiseRow {
    double delta = 0.0;
    double bias = 0.0;
    double variance = 0.0;
    double pass1 = 0.0;
    double pass32 = 0.0;
};

/// Evaluates delta * w_early + (1 - delta) * w_late on the test set for each delta.
inline std::vector<WiseRow> wiseft_sweep(const LinearRunRecord& rec, const Dataset& test, std::int64_t early_step,
                                         std::int64_t late_step, const std::vector<double>& deltas) {
    if (early_step >= late_step) throw std::invalid_argument("wiseft_sweep: early_step must precede late_step");
    const auto& early = rec.checkpoints[rec.index_of(early_step)].w;
    const auto& late = rec.checkpoints[rec.index_of(late_step)].w;
    std::vector<WiseRow> rows;
    for (double delta : deltas) {
        const passk::RhoDistribution dist(test_rhos(interpolate_weights(early, late, delta), test));
        const auto bv = passk::bias_variance(dist);
        rows.push_back({delta, bv.bias, bv.variance, passk::expected_pass_at_k(dist, 1),
                        passk::expected_pass_at_k(dist, 32)});
    }
    return rows;
}

}  // namespace divlab::linear
