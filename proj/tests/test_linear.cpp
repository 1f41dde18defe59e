#include <gtest/gtest.h>

#include <cmath>

#include "divlab/linear_sft.hpp"
#include "support.hpp"

namespace ln = divlab::linear;
using divlab::Rng;

TEST(Mixture, NoiselessPointsSitOnClassMeans) {
    Rng rng(1);
    const auto ds = ln::sample_mixture(16, 30, 2.0, 0.0, rng);
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
        EXPECT_TRUE(ds.y(i) == 1.0 || ds.y(i) == -1.0);
        for (Eigen::Index j = 0; j < ds.dim(); ++j) EXPECT_DOUBLE_EQ(ds.x(i, j), ds.y(i) * 2.0 / 4.0);
    }
}

TEST(Mixture, MomentsMatchConfiguration) {
    Rng rng(2);
    const int d = 4, n = 40000;
    const auto ds = ln::sample_mixture(d, n, 1.0, 0.5, rng);
    double pos = 0.0, resid_sq = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        pos += ds.y(i) > 0;
        for (int j = 0; j < d; ++j) {
            const double r = ds.x(i, j) - ds.y(i) * 0.5;
            resid_sq += r * r;
        }
    }
    EXPECT_NEAR(pos / n, 0.5, 0.01);
    EXPECT_NEAR(resid_sq / (n * d), 0.5, 0.01);
}

TEST(Mixture, ConfigValidation) {
    ln::MixtureConfig c;
    c.noise = 0.0;
    EXPECT_THROW(c.validate(), divlab::ConfigError);
    c = {};
    c.d = 0;
    EXPECT_THROW(c.validate(), divlab::ConfigError);
}

TEST(Logistic, LossAtZeroIsLogTwo) {
    Rng rng(3);
    const auto ds = ln::sample_mixture(5, 10, 1.0, 0.5, rng);
    EXPECT_NEAR(ln::logistic_loss(ln::Vector::Zero(5), ds), std::log(2.0), 1e-15);
}

TEST(Logistic, StableForHugeMargins) {
    EXPECT_DOUBLE_EQ(ln::logistic(800.0), 1.0);
    EXPECT_DOUBLE_EQ(ln::logistic(-800.0), 0.0);
    Rng rng(4);
    const auto ds = ln::sample_mixture(3, 8, 1.0, 0.5, rng);
    ln::Vector w = ln::Vector::Constant(3, 1e6);
    EXPECT_TRUE(std::isfinite(ln::logistic_loss(w, ds)));
    EXPECT_TRUE(ln::logistic_gradient(w, ds).allFinite());
}

TEST(Logistic, GradientMatchesCentralDifferences) {
    Rng rng(5);
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
            EXPECT_NEAR(g(j), fd, 1e-6 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST(Logistic, RhoIsSigmoidOfSignedMargin) {
    ln::Vector w(2);
    w << 1.0, -2.0;
    ln::Vector x(2);
    x << 0.5, 0.25;
    EXPECT_DOUBLE_EQ(ln::rho_of_example(w, x, 1.0), 0.5);
    EXPECT_NEAR(ln::rho_of_example(w, x * 4.0, -1.0), 0.5, 1e-15);
    x << 1.0, 0.0;
    EXPECT_NEAR(ln::rho_of_example(w, x, 1.0), 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
}

TEST(Schedule, GeometricWithEndpoints) {
    const auto s = ln::geometric_schedule(10000, 8);
    const std::vector<std::int64_t> head{0, 1, 2, 3, 4, 6, 7, 10, 13, 18, 24, 32};
    ASSERT_GE(s.size(), head.size());
    EXPECT_TRUE(std::equal(head.begin(), head.end(), s.begin()));
    EXPECT_EQ(s.back(), 10000);
    for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LT(s[i - 1], s[i]);
    EXPECT_EQ(ln::geometric_schedule(5, 1), (std::vector<std::int64_t>{0, 1, 5}));
    EXPECT_EQ(ln::geometric_schedule(0, 8), (std::vector<std::int64_t>{0}));
}

TEST(Interpolate, EndpointsAndValidation) {
    ln::Vector a = ln::Vector::Constant(3, 2.0), b = ln::Vector::Constant(3, 4.0);
    EXPECT_EQ(ln::interpolate_weights(a, b, 0.0), b);
    EXPECT_EQ(ln::interpolate_weights(a, b, 1.0), a);
    EXPECT_EQ(ln::interpolate_weights(a, b, 0.5), ln::Vector::Constant(3, 3.0));
    EXPECT_THROW(ln::interpolate_weights(a, b, 1.5), std::invalid_argument);
    EXPECT_THROW(ln::interpolate_weights(a, ln::Vector::Zero(2), 0.5), std::invalid_argument);
}

TEST(Training, NormGrowsAfterSeparation) {
    ln::MixtureConfig mix;
    mix.d = 100;
    mix.n_train = 30;
    mix.n_test = 50;
    mix.seed = 9;
    ln::TrainConfig tc;
    tc.steps = 2000;
    const auto ex = ln::run_experiment(mix, tc);
    ASSERT_TRUE(ex.record.zero_error_step);
    EXPECT_EQ(ex.record.norm_non_increases, 0);
    EXPECT_EQ(ex.record.loss_increases, 0);
    EXPECT_EQ(ex.record.checkpoints.front().step, 0);
    EXPECT_EQ(ex.record.checkpoints.back().step, 2000);
    EXPECT_EQ(ex.record.checkpoints.back().train_error, 0.0);
    EXPECT_EQ(ex.record.rho_matrix.size(), ex.record.checkpoints.size());
    EXPECT_EQ(ex.record.rho_matrix[0].size(), 50u);
}

TEST(Training, DeterministicForSeed) {
    ln::MixtureConfig mix;
    mix.d = 40;
    mix.n_train = 20;
    mix.n_test = 20;
    ln::TrainConfig tc;
    tc.steps = 100;
    const auto a = ln::run_experiment(mix, tc);
    const auto b = ln::run_experiment(mix, tc);
    EXPECT_EQ(a.record.checkpoints.back().w, b.record.checkpoints.back().w);
}

TEST(Training, DivergenceIsReported) {
    Rng rng(6);
    const auto train = ln::sample_mixture(2, 200, 0.3, 2.0, rng);
    ln::TrainConfig tc;
    tc.lr = 1e5;
    tc.steps = 50;
    EXPECT_THROW(ln::train_logistic(train, train, tc, ln::Vector::Zero(2)), divlab::NumericalError);
}

TEST(Training, ExplicitScheduleAndValidation) {
    Rng rng(7);
    const auto train = ln::sample_mixture(10, 20, 1.0, 0.5, rng);
    ln::TrainConfig tc;
    tc.steps = 10;
    tc.schedule = {0, 5, 10};
    const auto rec = ln::train_logistic(train, train, tc, ln::Vector::Zero(10));
    ASSERT_EQ(rec.checkpoints.size(), 3u);
    EXPECT_EQ(rec.checkpoints[1].step, 5);
    EXPECT_EQ(rec.index_of(10), 2u);
    EXPECT_THROW((void)rec.index_of(7), std::invalid_argument);
    tc.schedule = {0, 11};
    EXPECT_THROW(tc.validate(), divlab::ConfigError);
    tc.schedule = {3, 3};
    EXPECT_THROW(tc.validate(), divlab::ConfigError);
}

TEST(Evaluation, CurvesAndSweepShapes) {
    ln::MixtureConfig mix;
    mix.d = 60;
    mix.n_train = 20;
    mix.n_test = 30;
    ln::TrainConfig tc;
    tc.steps = 300;
    const auto ex = ln::run_experiment(mix, tc);
    const auto curve = ln::passk_curve(ex.record, {1, 4, 32});
    ASSERT_EQ(curve.values.size(), ex.record.checkpoints.size());
    for (const auto& row : curve.values) {
        EXPECT_LE(row[0], row[1]);
        EXPECT_LE(row[1], row[2]);
    }
    const auto rows = ln::wiseft_sweep(ex.record, ex.test, 0, 300, {0.0, 0.5, 1.0});
    ASSERT_EQ(rows.size(), 3u);
    const auto table = ln::metrics_table(ex.record);
    EXPECT_DOUBLE_EQ(rows[0].pass1, table.back().pass1);
    EXPECT_DOUBLE_EQ(rows[2].pass32, table.front().pass32);
    EXPECT_THROW(ln::wiseft_sweep(ex.record, ex.test, 300, 0, {0.5}), std::invalid_argument);
}
