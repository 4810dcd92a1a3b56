#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "starmap/demo.hpp"
#include "starmap/fields.hpp"
#include "starmap/gp.hpp"

using namespace starmap;

namespace {

struct Data {
    std::vector<Point> x;
    std::vector<double> y;
};

Data random_training_data(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 100);
    Data d;
    for (std::size_t i = 0; i < n; ++i) {
        d.x.push_back({u(rng), u(rng)});
        d.y.push_back(std::sin(d.x.back().x / 15.0) * 10.0 + d.x.back().y * 0.1);
    }
    return d;
}

double se(const KernelConfig& k, Point a, Point b) {
    const double dx = a.x - b.x, dy = a.y - b.y;
    return k.signal_variance * std::exp(-(dx * dx + dy * dy) / (2 * k.length_scale * k.length_scale));
}

}  // namespace

TEST(Gp, PosteriorMatchesDenseSolve) {
    const Data d = random_training_data(40, 3);
    const KernelConfig k{4.0, 20.0, 0.01, 1.5};
    const GpModel m(d.x, d.y, k);
    std::vector<std::vector<double>> K(40, std::vector<double>(40));
    for (std::size_t i = 0; i < 40; ++i)
        for (std::size_t j = 0; j < 40; ++j) K[i][j] = se(k, d.x[i], d.x[j]) + (i == j ? k.noise_variance : 0.0);
    std::vector<double> centered(d.y);
    for (auto& v : centered) v -= k.prior_mean;
    const auto alpha = oracle::solve(K, centered);
    for (const Point q : {Point{50, 50}, Point{3, 97}, Point{-20, 40}}) {
        std::vector<double> kq(40);
        for (std::size_t i = 0; i < 40; ++i) kq[i] = se(k, d.x[i], q);
        double mean = k.prior_mean;
        for (std::size_t i = 0; i < 40; ++i) mean += kq[i] * alpha[i];
        const auto v = oracle::solve(K, kq);
        double var = k.signal_variance + k.noise_variance;
        for (std::size_t i = 0; i < 40; ++i) var -= kq[i] * v[i];
        const auto p = m.predict(q);
        EXPECT_NEAR(p.mean, mean, 1e-8);
        EXPECT_NEAR(p.stddev, std::sqrt(var), 1e-7);
        EXPECT_NEAR(m.predict_mean(std::vector<Point>{q})[0], mean, 1e-8);
    }
}

TEST(Gp, BatchedPredictEqualsPointwise) {
    const Data d = random_training_data(30, 4);
    const GpModel m(d.x, d.y, {4.0, 20.0, 0.01, 0.0});
    const Data q = random_training_data(3000, 5);
    const auto batch = m.predict(q.x);
    for (std::size_t i = 0; i < q.x.size(); i += 97) {
        const auto p = m.predict(q.x[i]);
        EXPECT_NEAR(batch[i].mean, p.mean, 1e-10);
        EXPECT_NEAR(batch[i].stddev, p.stddev, 1e-10);
    }
}

// Predictions include observation noise, so at a training input the latent
// variance (at most the noise) adds to the noise itself.
TEST(Gp, StddevAtTrainingInputsBoundedByNoise) {
    const Data d = random_training_data(60, 6);
    const KernelConfig k{4.0, 10.0, 0.04, 0.0};
    const GpModel m(d.x, d.y, k);
    for (const auto& x : d.x) EXPECT_LE(m.predict(x).stddev, std::sqrt(2.0 * k.noise_variance) + 1e-9);
}

TEST(Gp, DuplicateInputsAreMerged) {
    const std::vector<Point> x{{0, 0}, {0, 0}, {10, 0}};
    const std::vector<double> y{1.0, 3.0, 5.0};
    const GpModel m(x, y, {1.0, 5.0, 1e-6, 0.0});
    EXPECT_EQ(m.size(), 2u);
    EXPECT_DOUBLE_EQ(m.targets()[0], 2.0);
    EXPECT_NEAR(m.predict({0, 0}).mean, 2.0, 1e-4);
}

TEST(Gp, RejectsBadInput) {
    EXPECT_THROW(GpModel(std::vector<Point>{{0, 0}}, std::vector<double>{1}, {}), InvalidArgument);
    EXPECT_THROW(GpModel(std::vector<Point>{{0, 0}, {1, 1}}, std::vector<double>{1}, {}), InvalidArgument);
    EXPECT_THROW(GpModel(std::vector<Point>{{0, 0}, {1, 1}}, std::vector<double>{1, 2}, {1.0, -1.0, 0.0, 0.0}), InvalidArgument);
}

TEST(Gp, NearlySingularKernelGetsJitter) {
    std::vector<Point> x;
    std::vector<double> y;
    for (int i = 0; i < 30; ++i) {
        x.push_back({i * 1e-3, 0});
        y.push_back(1.0);
    }
    const GpModel m(x, y, {1.0, 100.0, 0.0, 0.0});
    EXPECT_GT(m.jitter(), 0.0);
    EXPECT_NEAR(m.predict({0.01, 0}).mean, 1.0, 1e-3);
}

TEST(Gp, TuningNeverLowersLikelihood) {
    const Data d = random_training_data(50, 8);
    const KernelConfig start{1.0, 60.0, 1e-4, 0.0};
    const KernelConfig tuned = tune_kernel(d.x, d.y, start);
    EXPECT_GE(GpModel(d.x, d.y, tuned).log_marginal_likelihood(), GpModel(d.x, d.y, start).log_marginal_likelihood());
}

TEST(Refine, SelectsHighestStddevWithStableTies) {
    const GpModel m(std::vector<Point>{{0, 0}, {1, 0}}, std::vector<double>{0, 0}, {1.0, 1.0, 1e-6, 0.0});
    const std::vector<Point> cands{{100, 0}, {0.5, 0}, {0, 100}, {200, 0}};
    const auto idx = select_uncertain(m, cands, 2);
    EXPECT_EQ(idx, (std::vector<std::size_t>{0, 2}));  // far points tie at the prior stddev
}

TEST(Refine, MaxStddevOverCandidatesNeverIncreases) {
    const auto w = sample_collection(demo::scene_uam(), 20, 1);
    const BBox e = demo::kSceneExtent;
    const auto pts = random_points(e, 64, 3);
    const auto params = sample_parameters(w, Relation::distance, "road", pts);
    const GpModel start(pts, params[0], default_kernel(params[0], e, pts.size()));
    const auto cands = square_grid(e, 24).nodes();
    double last = 0.0;
    for (const auto& p : start.predict(cands)) last = std::max(last, p.stddev);
    std::size_t rounds_seen = 0;
    gp_refine(start, w, Relation::distance, "road", 0, cands, {8, 6}, {}, [&](const GpModel& m, std::size_t round) {
        double now = 0.0;
        for (const auto& p : m.predict(cands)) now = std::max(now, p.stddev);
        EXPECT_LE(now, last + 1e-12) << "round " << round;
        EXPECT_EQ(m.size(), 64 + 8 * round);
        last = now;
        ++rounds_seen;
    });
    EXPECT_EQ(rounds_seen, 6u);
}
