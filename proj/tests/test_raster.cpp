#include <random>

#include <gtest/gtest.h>

#include "starmap/raster.hpp"

using namespace starmap;

TEST(Grid, CornersAndSpacing) {
    const GridSpec g{{0, 0, 90, 30}, 4, 10};
    EXPECT_EQ(g.node(0, 0), (Point{0, 0}));
    EXPECT_EQ(g.node(3, 9), (Point{90, 30}));
    EXPECT_DOUBLE_EQ(g.dx(), 10.0);
    EXPECT_DOUBLE_EQ(g.dy(), 10.0);
    EXPECT_EQ(g.node(13), g.node(1, 3));
    EXPECT_THROW((GridSpec{{0, 0, 1, 1}, 1, 5}.validate()), InvalidArgument);
    EXPECT_THROW((GridSpec{{0, 0, 0, 1}, 2, 2}.validate()), InvalidArgument);
}

TEST(Raster, NodeValuesReturnedExactly) {
    const GridSpec g{{0, 0, 1, 1}, 7, 7};
    std::vector<double> v(g.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(0.37 * static_cast<double>(i)) * 1e3;
    const Raster r(g, v);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(r.evaluate(g.node(i)), v[i]);
}

TEST(Raster, BilinearIsExactOnBilinearFunctions) {
    const auto f = [](Point p) { return 3.0 + 2.0 * p.x - 0.5 * p.y + 0.25 * p.x * p.y; };
    const GridSpec g{{-10, -5, 10, 15}, 5, 9};
    std::vector<double> v;
    for (const auto& p : g.nodes()) v.push_back(f(p));
    const Raster r(g, v);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> ux(-10, 10), uy(-5, 15);
    for (int i = 0; i < 500; ++i) {
        const Point p{ux(rng), uy(rng)};
        EXPECT_NEAR(r.evaluate(p), f(p), 1e-9);
    }
}

TEST(Raster, OutsideExtentThrows) {
    const Raster r(GridSpec{{0, 0, 1, 1}, 2, 2}, {0, 1, 2, 3});
    EXPECT_THROW(r.evaluate({1.01, 0.5}), OutOfExtentError);
    EXPECT_THROW(r.evaluate({0.5, -0.01}), OutOfExtentError);
    EXPECT_NO_THROW(r.evaluate({1.0, 1.0}));
    EXPECT_DOUBLE_EQ(r.evaluate({0.5, 0.5}), 1.5);
}

TEST(Raster, SizeMismatchRejected) {
    EXPECT_THROW(Raster(GridSpec{{0, 0, 1, 1}, 2, 2}, {0, 1, 2}), InvalidArgument);
}
