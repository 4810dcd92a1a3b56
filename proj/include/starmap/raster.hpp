#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "starmap/errors.hpp"
#include "starmap/geometry.hpp"

namespace starmap {

// Regular node lattice over an extent. Node (row, col) sits at
// (min_x + col * dx, min_y + row * dy); row 0 is the southern edge and the
// corner nodes coincide with the extent corners.
struct GridSpec {
    BBox extent;
    std::size_t rows = 2;
    std::size_t cols = 2;

    void validate() const {
        if (rows < 2 || cols < 2) throw InvalidArgument("grid resolution must be at least 2x2");
        if (!(extent.width() > 0.0) || !(extent.height() > 0.0)) throw InvalidArgument("grid extent must have positive area");
    }

    std::size_t size() const { return rows * cols; }
    double dx() const { return extent.width() / static_cast<double>(cols - 1); }
    double dy() const { return extent.height() / static_cast<double>(rows - 1); }

    Point node(std::size_t row, std::size_t col) const {
        // Last node is pinned to the extent edge so both ends are exact.
        const double x = col + 1 == cols ? extent.max_x : extent.min_x + static_cast<double>(col) * dx();
        const double y = row + 1 == rows ? extent.max_y : extent.min_y + static_cast<double>(row) * dy();
        return {x, y};
    }

    Point node(std::size_t index) const { return node(index / cols, index % cols); }

    std::vector<Point> nodes() const {
        std::vector<Point> out;
        out.reserve(size());
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) out.push_back(node(r, c));
        return out;
    }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

inline GridSpec square_grid(const BBox& extent, std::size_t resolution) { return {extent, resolution, resolution}; }

// Node values on a GridSpec (row-major) with bilinear evaluation inside the
// node hull. Evaluation outside the hull throws.
class Raster {
public:
    Raster() = default;
    Raster(GridSpec grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
        grid_.validate();
        if (values_.size() != grid_.size()) throw InvalidArgument("raster value count does not match grid");
    }
    explicit Raster(GridSpec grid, double fill = 0.0) : Raster(grid, std::vector<double>(grid.size(), fill)) {}

    const GridSpec& grid() const { return grid_; }
    std::span<const double> values() const { return values_; }
    double& at(std::size_t row, std::size_t col) { return values_[row * grid_.cols + col]; }
    double at(std::size_t row, std::size_t col) const { return values_[row * grid_.cols + col]; }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    double evaluate(Point p) const {
        const BBox& e = grid_.extent;
        const double tol = 1e-9 * std::max({1.0, e.width(), e.height()});
        if (!e.contains(p, tol))
            throw OutOfExtentError("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ") is outside the raster extent");
        const auto [c0, tx] = locate(p.x - e.min_x, grid_.dx(), grid_.cols);
        const auto [r0, ty] = locate(p.y - e.min_y, grid_.dy(), grid_.rows);
        // Exact at nodes: zero weights drop out entirely.
        double v = 0.0;
        const auto add = [&](std::size_t r, std::size_t c, double w) {
            if (w != 0.0) v += w * at(r, c);
        };
        add(r0, c0, (1.0 - tx) * (1.0 - ty));
        add(r0, c0 + 1, tx * (1.0 - ty));
        add(r0 + 1, c0, (1.0 - tx) * ty);
        add(r0 + 1, c0 + 1, tx * ty);
        return v;
    }

    friend bool operator==(const Raster&, const Raster&) = default;

private:
    static std::pair<std::size_t, double> locate(double offset, double step, std::size_t n) {
        double f = std::clamp(offset / step, 0.0, static_cast<double>(n - 1));
        if (std::abs(f - std::round(f)) < 1e-9) f = std::round(f);  // snap onto nodes
        const auto i = std::min(static_cast<std::size_t>(f), n - 2);
        return {i, std::clamp(f - static_cast<double>(i), 0.0, 1.0)};
    }

    GridSpec grid_;
    std::vector<double> values_;
};

}  // namespace starmap
