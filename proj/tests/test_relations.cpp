#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "starmap/demo.hpp"
#include "starmap/relations.hpp"

using namespace starmap;

TEST(MatchMoments, GaussianUsesUnbiasedVariance) {
    const RelationSamples s{Relation::distance, "road", {}, {1, 2, 3, 4}};
    const Gaussian g = match_gaussian(s);
    EXPECT_DOUBLE_EQ(g.mean, 2.5);
    EXPECT_DOUBLE_EQ(g.variance, 5.0 / 3.0);
}

TEST(MatchMoments, ConstantSamplesGiveExactZeroVariance) {
    const RelationSamples s{Relation::distance, "road", {}, std::vector<double>(50, 0.1 + 0.2)};
    const Gaussian g = match_gaussian(s);
    EXPECT_EQ(g.mean, 0.1 + 0.2);
    EXPECT_EQ(g.variance, 0.0);
}

TEST(MatchMoments, Bernoulli) {
    const RelationSamples s{Relation::over, "park", {}, {1, 0, 0, 1, 1}};
    EXPECT_DOUBLE_EQ(match_bernoulli(s).p, 0.6);
    EXPECT_EQ(parameters(match_moments(s)), std::vector<double>{0.6});
    EXPECT_THROW(match_gaussian(s), InvalidArgument);
    EXPECT_THROW(match_gaussian({Relation::distance, "r", {}, {1.0}}), InvalidArgument);
}

TEST(ProbThreshold, MatchesIntegratedCdf) {
    const Gaussian g{20.0, 100.0};
    EXPECT_NEAR(prob_threshold(g, Comparison::greater, 30.0), 1.0 - oracle::normal_cdf(1.0), 1e-9);
    EXPECT_NEAR(prob_threshold(g, Comparison::greater, 30.0), 0.158655, 1e-6);
    EXPECT_NEAR(prob_threshold(g, Comparison::less, 5.0), oracle::normal_cdf(-1.5), 1e-9);
}

TEST(ProbThreshold, ComplementarityProperty) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-100, 100), v(0, 400);
    for (int i = 0; i < 1000; ++i) {
        const Gaussian g{u(rng), i % 10 == 0 ? 0.0 : v(rng)};
        const double t = i % 7 == 0 ? g.mean : u(rng);
        const double gt = prob_threshold(g, Comparison::greater, t);
        const double lt = prob_threshold(g, Comparison::less, t);
        EXPECT_NEAR(gt + lt, 1.0, 1e-12);
        EXPECT_GE(gt, 0.0);
        EXPECT_LE(gt, 1.0);
    }
}

TEST(ProbThreshold, DegenerateIsAStep) {
    EXPECT_EQ(prob_threshold(Gaussian{10, 0}, Comparison::greater, 10), 0.0);
    EXPECT_EQ(prob_threshold(Gaussian{10, 0}, Comparison::less, 10), 1.0);
    EXPECT_EQ(prob_threshold(Gaussian{10, 0}, Comparison::greater, 9.99), 1.0);
    EXPECT_THROW(prob_threshold(DistributionParams{Bernoulli{0.5}}, Comparison::less, 1), InvalidArgument);
}

TEST(SampleRelation, OverIsExactlyZeroOrOne) {
    const auto w = sample_collection(demo::scene_uam(), 30, 2);
    const auto s = sample_relation(Relation::over, {380, 280}, "park", w);
    ASSERT_EQ(s.values.size(), 30u);
    for (const double v : s.values) EXPECT_TRUE(v == 0.0 || v == 1.0);
    EXPECT_EQ(s.location, (Point{380, 280}));
}

// Distance to a long straight road under N(0, 10^2) translation is |20 + Z|
// (folded normal). Oracle: closed-form moments, and 10^6 direct 1-D draws for
// the exceedance probability.
TEST(SampleRelation, FoldedNormalAgainstProjectionOracle) {
    const auto w = sample_collection(demo::straight_road_uam(10.0), 10000, 17);
    const Gaussian g = match_gaussian(sample_relation(Relation::distance, {0, 20}, "road", w));

    std::mt19937_64 rng(123);
    std::normal_distribution<double> z(0.0, 10.0);
    int over = 0;
    for (int i = 0; i < 1'000'000; ++i) over += std::abs(20.0 + z(rng)) > 30.0;
    const double p_oracle = over / 1e6;

    EXPECT_NEAR(oracle::folded_mean(20, 10), 20.1698, 1e-3);
    EXPECT_NEAR(g.mean, oracle::folded_mean(20, 10), 0.5);
    EXPECT_NEAR(g.variance, oracle::folded_variance(20, 10), 0.05 * 93.18);
    EXPECT_NEAR(p_oracle, 0.1587, 0.002);
    EXPECT_NEAR(prob_threshold(g, Comparison::greater, 30.0), p_oracle, 0.02);
}
