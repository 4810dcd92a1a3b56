#include <algorithm>
#include <cstdlib>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "starmap/demo.hpp"
#include "starmap/uam.hpp"

using namespace starmap;

namespace {

Map single(FeatureKind kind, std::vector<Point> v) {
    std::vector<Feature> f;
    f.emplace_back("f", kind, std::move(v), TagSet{"t"});
    return Map(std::move(f), {}, {-100, -100, 100, 100});
}

// Kolmogorov-Smirnov statistic of xs against N(0, sigma^2).
double ks_statistic(std::vector<double> xs, double sigma) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = oracle::normal_cdf(xs[i] / sigma);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return d;
}

}  // namespace

TEST(Uam, DegenerateAnnotationsReproduceMapBitExactly) {
    const auto uam = demo::exact_scene_uam();
    const auto w = sample_collection(uam, 5, 99);
    for (const auto& m : w.maps) EXPECT_TRUE(m == uam->map());
}

TEST(Uam, ResolvePrecedence) {
    AnnotationConfig cfg;
    cfg.fallback.translate = TranslationParams::isotropic(1.0);
    cfg.tag_rules = {{"t", {{}, TranslationParams::isotropic(2.0)}}};
    cfg.overrides = {{"f", {{}, TranslationParams::isotropic(3.0)}}};
    const Feature f("f", FeatureKind::node, {{0, 0}}, {"t"});
    const Feature g("g", FeatureKind::node, {{0, 0}}, {"t"});
    const Feature h("h", FeatureKind::node, {{0, 0}}, {"u"});
    EXPECT_EQ(cfg.resolve(f).translate.covariance.a, 9.0);
    EXPECT_EQ(cfg.resolve(g).translate.covariance.a, 4.0);
    EXPECT_EQ(cfg.resolve(h).translate.covariance.a, 1.0);
}

TEST(Uam, InvalidParametersRejected) {
    AnnotationConfig cfg;
    cfg.fallback.translate.covariance = {1.0, 2.0, 2.0, 1.0};  // indefinite
    EXPECT_THROW(UncertaintyAnnotatedMap(single(FeatureKind::node, {{0, 0}}), cfg), InvalidArgument);
    cfg.fallback.translate.covariance = {1.0, 0.5, 0.4, 1.0};  // asymmetric
    EXPECT_THROW(UncertaintyAnnotatedMap(single(FeatureKind::node, {{0, 0}}), cfg), InvalidArgument);
    cfg = {};
    cfg.fallback.transform.scale_mean = 0.0;
    EXPECT_THROW(UncertaintyAnnotatedMap(single(FeatureKind::node, {{0, 0}}), cfg), InvalidArgument);
    EXPECT_THROW(sample_collection(UncertaintyAnnotatedMap(single(FeatureKind::node, {{0, 0}}), {}), 0, 1), InvalidArgument);
}

TEST(Uam, TranslationMarginalsPassKsTest) {
    AnnotationConfig cfg;
    cfg.fallback.translate = TranslationParams::isotropic(10.0);
    const UncertaintyAnnotatedMap uam(single(FeatureKind::node, {{5, -5}}), cfg);
    const auto w = sample_collection(uam, 4000, 7);
    std::vector<double> dx, dy;
    for (const auto& m : w.maps) {
        const Point v = m.features()[0].vertices()[0];
        dx.push_back(v.x - 5);
        dy.push_back(v.y + 5);
    }
    // Critical value at alpha = 0.001.
    const double crit = 1.949 / std::sqrt(4000.0);
    EXPECT_LT(ks_statistic(dx, 10.0), crit);
    EXPECT_LT(ks_statistic(dy, 10.0), crit);
}

TEST(Uam, CorrelatedTranslationCovariance) {
    AnnotationConfig cfg;
    cfg.fallback.translate = {{1.0, -2.0}, {16.0, 4.0, 4.0, 9.0}};
    const UncertaintyAnnotatedMap uam(single(FeatureKind::node, {{0, 0}}), cfg);
    const auto w = sample_collection(uam, 20000, 3);
    double mx = 0, my = 0;
    for (const auto& m : w.maps) {
        mx += m.features()[0].vertices()[0].x;
        my += m.features()[0].vertices()[0].y;
    }
    mx /= 20000;
    my /= 20000;
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& m : w.maps) {
        const Point v = m.features()[0].vertices()[0];
        sxx += (v.x - mx) * (v.x - mx);
        sxy += (v.x - mx) * (v.y - my);
        syy += (v.y - my) * (v.y - my);
    }
    EXPECT_NEAR(mx, 1.0, 0.1);
    EXPECT_NEAR(my, -2.0, 0.1);
    EXPECT_NEAR(sxx / 19999, 16.0, 0.6);
    EXPECT_NEAR(sxy / 19999, 4.0, 0.4);
    EXPECT_NEAR(syy / 19999, 9.0, 0.4);
}

TEST(Uam, PerFeatureMovesRigidlyPerVertexDoesNot) {
    AnnotationConfig cfg;
    cfg.fallback.translate = TranslationParams::isotropic(5.0);
    const Map m = single(FeatureKind::polyline, {{0, 0}, {10, 0}, {20, 5}});
    const auto rigid = sample_collection(UncertaintyAnnotatedMap(m, cfg), 20, 1);
    for (const auto& s : rigid.maps) {
        const auto v = s.features()[0].vertices();
        EXPECT_NEAR(v[1].x - v[0].x, 10.0, 1e-12);
        EXPECT_NEAR(v[2].y - v[0].y, 5.0, 1e-12);
    }
    cfg.correlation = Correlation::per_vertex;
    const auto loose = sample_collection(UncertaintyAnnotatedMap(m, cfg), 20, 1);
    int moved = 0;
    for (const auto& s : loose.maps) {
        const auto v = s.features()[0].vertices();
        moved += std::abs(v[1].x - v[0].x - 10.0) > 1e-6;
    }
    EXPECT_GT(moved, 15);
}

TEST(Uam, RotationKeepsCentroidDistances) {
    AnnotationConfig cfg;
    cfg.fallback.transform.rotation_stddev = 0.3;
    const Map m = single(FeatureKind::polygon, {{0, 0}, {10, 0}, {10, 10}, {0, 10}});
    const auto w = sample_collection(UncertaintyAnnotatedMap(m, cfg), 20, 5);
    for (const auto& s : w.maps) {
        const auto& f = s.features()[0];
        const Point c = f.centroid();
        EXPECT_NEAR(c.x, 5.0, 1e-9);
        EXPECT_NEAR(c.y, 5.0, 1e-9);
        for (const auto& v : f.vertices()) EXPECT_NEAR(distance(v, c), std::sqrt(50.0), 1e-9);
    }
}

TEST(Uam, ScaleAboutCentroid) {
    RandomStream rng = substream(1, 2);
    TransformationParams tp;
    tp.scale_mean = 2.0;
    const auto p = draw_perturbation(tp, {}, rng);
    const Feature f("s", FeatureKind::polygon, {{0, 0}, {2, 0}, {2, 2}, {0, 2}}, {});
    const Feature g = perturb_feature(f, p);
    EXPECT_EQ(g.vertices()[0], (Point{-1, -1}));
    EXPECT_EQ(g.vertices()[2], (Point{3, 3}));
}

TEST(Uam, SeededAndThreadIndependent) {
    const auto uam = demo::scene_uam();
    setenv("STARMAP_THREADS", "1", 1);
    const auto a = sample_collection(uam, 12, 42);
    setenv("STARMAP_THREADS", "4", 1);
    const auto b = sample_collection(uam, 12, 42);
    unsetenv("STARMAP_THREADS");
    const auto c = sample_collection(uam, 12, 43);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(a.maps[i] == b.maps[i]);
    EXPECT_FALSE(a.maps[0] == c.maps[0]);
}

TEST(Uam, PrefixStable) {
    // Map i depends only on (seed, i), so a larger collection extends a smaller one.
    const auto uam = demo::scene_uam();
    const auto a = sample_collection(uam, 4, 9);
    const auto b = sample_collection(uam, 8, 9);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_TRUE(a.maps[i] == b.maps[i]);
}
