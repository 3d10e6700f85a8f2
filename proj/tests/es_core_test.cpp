#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "llmes/errors.hpp"
#include "llmes/es_core.hpp"
#include "llmes/rng.hpp"

using namespace llmes;

TEST(SphereEval, KnownValues) {
    EXPECT_EQ(sphere_eval(std::vector<double>{0, 0, 0, 0, 0}), 0.0);
    EXPECT_EQ(sphere_eval(std::vector<double>{1, 1, 1, 1, 1}), 5.0);
    EXPECT_EQ(sphere_eval(std::vector<double>{3, 4}), 25.0);
}

TEST(SphereEval, ZeroOnlyAtOrigin) {
    EXPECT_GT(sphere_eval(std::vector<double>{0, 1e-100}), 0.0);
}

TEST(SphereEval, RejectsNonFiniteAndEmpty) {
    EXPECT_THROW(sphere_eval(std::vector<double>{1.0, std::nan("")}), InvalidInputError);
    EXPECT_THROW(sphere_eval(std::vector<double>{INFINITY}), InvalidInputError);
    EXPECT_THROW(sphere_eval(std::vector<double>{}), InvalidInputError);
}

TEST(Mutate, VanishingSigmaKeepsPoint) {
    Rng rng(3);
    const std::vector<double> x{0.0, 0.0};
    const auto y = mutate(x, 1e-300, rng);
    ASSERT_EQ(y.size(), 2u);
    EXPECT_NEAR(y[0], 0.0, 1e-290);
    EXPECT_NEAR(y[1], 0.0, 1e-290);
}

TEST(Mutate, SeededDeterminismAndInputUntouched) {
    const std::vector<double> x{1.0, 1.0};
    Rng a(42), b(42);
    const auto ya = mutate(x, 1.0, a);
    const auto yb = mutate(x, 1.0, b);
    EXPECT_EQ(ya, yb);
    EXPECT_EQ(x, (std::vector<double>{1.0, 1.0}));
    EXPECT_NE(ya, x);
}

TEST(Mutate, SampleStdMatchesSigma) {
    Rng rng(2024);
    const std::vector<double> x{0.0, 0.0, 0.0};
    constexpr int draws = 100000;
    std::vector<double> sum(3, 0.0), sumsq(3, 0.0);
    for (int i = 0; i < draws; ++i) {
        const auto y = mutate(x, 2.0, rng);
        for (int k = 0; k < 3; ++k) {
            sum[k] += y[k];
            sumsq[k] += y[k] * y[k];
        }
    }
    for (int k = 0; k < 3; ++k) {
        const double mean = sum[k] / draws;
        const double sd = std::sqrt((sumsq[k] - draws * mean * mean) / (draws - 1));
        EXPECT_GE(sd, 1.97) << "coordinate " << k;
        EXPECT_LE(sd, 2.03) << "coordinate " << k;
    }
}

TEST(UpdateSigma, ClosedFormValues) {
    // exp(0.76) and 2 exp(-0.1) from a 30-digit mpmath evaluation
    EXPECT_NEAR(update_sigma(1.0, 0.95, true), 2.1382762204968186, 1e-15);
    EXPECT_NEAR(update_sigma(2.0, 0.5, false), 1.8096748360719191, 1e-15);
    EXPECT_NEAR(update_sigma(3.7, 1e-300, true), 3.7, 1e-15);
    EXPECT_NEAR(update_sigma(3.7, 1e-300, false), 3.7, 1e-15);
}

TEST(UpdateSigma, OneSuccessBalancesFourFailures) {
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
        const double sigma = std::exp(rng.uniform(-10, 10));
        const double tau = rng.uniform(1e-6, 5.0);
        const double up = update_sigma(sigma, tau, true);
        const double down = update_sigma(sigma, tau, false);
        const double product = up * std::pow(down, 4);
        EXPECT_NEAR(product / std::pow(sigma, 5), 1.0, 1e-12);
    }
}

TEST(ScoreOf, KnownValues) {
    EXPECT_EQ(score_of(1.0), 0.0);
    EXPECT_FALSE(std::signbit(score_of(1.0)));
    EXPECT_NEAR(score_of(std::exp(-10.0)), 10.0, 1e-12);
    EXPECT_NEAR(score_of(0.0), 690.77552789821371, 1e-10);
    EXPECT_EQ(score_of(1e-320), score_of(0.0));
}

TEST(ScoreOf, RejectsNegative) {
    EXPECT_THROW(score_of(-1e-9), InvalidInputError);
    EXPECT_THROW(score_of(std::nan("")), InvalidInputError);
}

TEST(ScoreOf, MonotoneDecreasing) {
    double prev = score_of(0.0);
    for (double f = 1e-200; f < 1e10; f *= 10.0) {
        const double s = score_of(f);
        EXPECT_LT(s, prev);
        prev = s;
    }
}

TEST(EsConfig, Validation) {
    EsConfig c;
    EXPECT_NO_THROW(c.validate());
    c.tau = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = EsConfig{};
    c.sigma0 = -1;
    EXPECT_THROW(c.validate(), ConfigError);
    c = EsConfig{};
    c.max_generations = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = EsConfig{};
    c.init_low = 5;
    c.init_high = 5;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(RunEs, DimensionMismatch) {
    EsConfig c;
    c.dimension = 5;
    EXPECT_THROW(run_es(c, ObjectiveSpec{"sphere", 4}), ConfigError);
}

TEST(RunEs, UnknownObjective) {
    EXPECT_THROW(run_es(EsConfig{}, ObjectiveSpec{"rastrigin", 5}), ConfigError);
}

// Replays the first generation by hand from the same stream.
TEST(RunEs, SingleGenerationTrace) {
    EsConfig c;
    c.tau = 0.95;
    c.dimension = 5;
    c.max_generations = 1;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        c.seed = seed;
        Rng rng(seed);
        std::vector<double> x(5);
        for (double& xi : x) xi = rng.uniform(-5, 5);
        const double f0 = sphere_eval(x);
        const auto y = mutate(x, 1.0, rng);
        const double f1 = sphere_eval(y);

        const EsRunResult r = run_es(c, ObjectiveSpec{"sphere", 5});
        EXPECT_EQ(r.generations_run, 1u);
        if (f1 <= f0) {
            EXPECT_EQ(r.best_f, f1);
            EXPECT_EQ(r.final_sigma, std::exp(0.95 * 0.8));
        } else {
            EXPECT_EQ(r.best_f, f0);
            EXPECT_EQ(r.final_sigma, std::exp(-0.95 * 0.2));
        }
    }
}

TEST(RunEs, MonotoneAcceptanceAndPositiveSigma) {
    EsConfig c;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        c.seed = seed;
        c.tau = 0.3 + 0.1 * static_cast<double>(seed);
        double prev = INFINITY;
        std::size_t calls = 0;
        const auto r = run_es(c, ObjectiveSpec{}, [&](const GenerationTrace& t) {
            EXPECT_LE(t.f, prev);
            EXPECT_GT(t.sigma, 0.0);
            prev = t.f;
            ++calls;
        });
        EXPECT_EQ(calls, c.max_generations);
        EXPECT_EQ(r.best_f, prev);
        EXPECT_GT(r.final_sigma, 0.0);
        EXPECT_EQ(r.score, score_of(r.best_f));
    }
}

TEST(RunEs, Deterministic) {
    EsConfig c;
    c.seed = 99;
    EXPECT_EQ(run_es(c, ObjectiveSpec{}), run_es(c, ObjectiveSpec{}));
    c.seed = 100;
    EXPECT_NE(run_es(c, ObjectiveSpec{}).best_f, run_es(EsConfig{.seed = 99}, ObjectiveSpec{}).best_f);
}

TEST(RunEs, ConvergesOnSphere) {
    EsConfig c;  // N = 5, tau = 0.95, sigma0 = 1, 1000 generations
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        c.seed = seed;
        total += run_es(c, ObjectiveSpec{}).score;
    }
    EXPECT_GE(total / 10.0, 40.0);
}

TEST(Rng, UniformRange) {
    Rng rng(5);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform01();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}

TEST(Rng, ReplicateSeedsDistinct) {
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t t = 0; t < 20; ++t)
        for (std::uint64_t r = 0; r < 20; ++r) seeds.push_back(replicate_seed(1, t, r));
    std::sort(seeds.begin(), seeds.end());
    EXPECT_EQ(std::adjacent_find(seeds.begin(), seeds.end()), seeds.end());
}
