#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "starmap/errors.hpp"
#include "starmap/ingest.hpp"
#include "starmap/raster.hpp"

namespace starmap::exporting {

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

// RFC 4180 CSV, CRLF line ends: header row,col,x,y,value then one line per node
// in row-major order.
inline std::string raster_csv(const Raster& r) {
    std::string out = "row,col,x,y,value\r\n";
    const auto& g = r.grid();
    for (std::size_t row = 0; row < g.rows; ++row) {
        for (std::size_t col = 0; col < g.cols; ++col) {
            const Point p = g.node(row, col);
            out += std::to_string(row) + "," + std::to_string(col) + "," + format_double(p.x) + "," + format_double(p.y) + "," +
                   format_double(r.at(row, col)) + "\r\n";
        }
    }
    return out;
}

// Inverse of raster_csv. Accepts LF or CRLF line ends; every node must appear once.
inline Raster parse_raster_csv(std::string_view text) {
    std::vector<std::string> lines;
    {
        std::string cur;
        for (const char c : text) {
            if (c == '\n') {
                if (!cur.empty() && cur.back() == '\r') cur.pop_back();
                lines.push_back(std::move(cur));
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        if (!cur.empty()) lines.push_back(std::move(cur));
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty() || lines.front() != "row,col,x,y,value") throw SourceError("raster CSV must start with header row,col,x,y,value");

    struct Cell {
        std::size_t row, col;
        double x, y, value;
    };
    std::vector<Cell> cells;
    std::size_t rows = 0, cols = 0;
    BBox extent = BBox::empty();
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::array<double, 5> f{};
        std::string_view rest = lines[i];
        for (std::size_t k = 0; k < 5; ++k) {
            const auto comma = rest.find(',');
            const std::string_view field = rest.substr(0, comma);
            if ((k < 4) == (comma == std::string_view::npos))
                throw SourceError("raster CSV line " + std::to_string(i + 1) + " must have 5 fields");
            const auto res = std::from_chars(field.data(), field.data() + field.size(), f[k]);
            if (res.ec != std::errc() || res.ptr != field.data() + field.size() || !std::isfinite(f[k]))
                throw SourceError("raster CSV line " + std::to_string(i + 1) + " has a malformed number");
            rest = comma == std::string_view::npos ? std::string_view() : rest.substr(comma + 1);
        }
        if (f[0] < 0 || f[1] < 0 || f[0] != std::floor(f[0]) || f[1] != std::floor(f[1]))
            throw SourceError("raster CSV line " + std::to_string(i + 1) + " has a bad row/col index");
        Cell c{static_cast<std::size_t>(f[0]), static_cast<std::size_t>(f[1]), f[2], f[3], f[4]};
        rows = std::max(rows, c.row + 1);
        cols = std::max(cols, c.col + 1);
        extent.expand({c.x, c.y});
        cells.push_back(c);
    }
    if (rows < 2 || cols < 2 || cells.size() != rows * cols) throw SourceError("raster CSV does not describe a complete grid");
    std::vector<double> values(rows * cols, std::numeric_limits<double>::quiet_NaN());
    for (const auto& c : cells) {
        double& slot = values[c.row * cols + c.col];
        if (!std::isnan(slot)) throw SourceError("raster CSV repeats node (" + std::to_string(c.row) + ", " + std::to_string(c.col) + ")");
        slot = c.value;
    }
    try {
        return Raster(GridSpec{extent, rows, cols}, std::move(values));
    } catch (const InvalidArgument& e) {
        throw SourceError(std::string("raster CSV: ") + e.what());
    }
}

// RFC 7946 FeatureCollection with one WGS84 polygon cell per node, centred on
// the node and spanning one grid step.
inline nlohmann::json raster_geojson(const Raster& r, const GeoOrigin& origin, const std::string& name,
                                     const nlohmann::json& metadata = nlohmann::json::object()) {
    using nlohmann::json;
    const auto& g = r.grid();
    const double hx = 0.5 * g.dx();
    const double hy = 0.5 * g.dy();
    json features = json::array();
    for (std::size_t row = 0; row < g.rows; ++row) {
        for (std::size_t col = 0; col < g.cols; ++col) {
            const Point c = g.node(row, col);
            const Point corners[] = {{c.x - hx, c.y - hy}, {c.x + hx, c.y - hy}, {c.x + hx, c.y + hy}, {c.x - hx, c.y + hy}, {c.x - hx, c.y - hy}};
            json ring = json::array();
            for (const auto& p : corners) {
                const auto ll = ingest::unproject(origin, p);
                ring.push_back(json::array({ll.longitude, ll.latitude}));
            }
            features.push_back({{"type", "Feature"},
                                {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({ring})}}},
                                {"properties", {{"row", row}, {"col", col}, {"x", c.x}, {"y", c.y}, {"value", r.at(row, col)}}}});
        }
    }
    return {{"type", "FeatureCollection"}, {"name", name}, {"starmap", metadata}, {"features", features}};
}

struct Legend {
    double min = 0.0;
    double max = 0.0;
};

// Linear five-stop ramp, blue (low) through green to red (high).
inline std::array<std::uint8_t, 3> ramp(double t) {
    static constexpr std::array<std::array<double, 3>, 5> stops{{{0, 0, 255}, {0, 255, 255}, {0, 255, 0}, {255, 255, 0}, {255, 0, 0}}};
    t = std::clamp(t, 0.0, 1.0) * 4.0;
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(t), 3);
    const double f = t - static_cast<double>(i);
    std::array<std::uint8_t, 3> rgb{};
    for (std::size_t k = 0; k < 3; ++k)
        rgb[k] = static_cast<std::uint8_t>(std::lround(stops[i][k] + f * (stops[i + 1][k] - stops[i][k])));
    return rgb;
}

// Binary PPM (P6), one pixel per node, north up. Colors scale linearly from the
// raster minimum to its maximum; a constant raster maps to the low color. A
// single-line comment is embedded in the header.
inline std::string render_ppm(const Raster& r, Legend* legend = nullptr, const std::string& comment = {}) {
    if (comment.find_first_of("\r\n") != std::string::npos) throw InvalidArgument("ppm comment must be a single line");
    const auto& g = r.grid();
    const auto vals = r.values();
    const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
    const double span = *hi - *lo;
    if (legend) *legend = {*lo, *hi};
    std::string out = "P6\n" + (comment.empty() ? std::string() : "# " + comment + "\n") + std::to_string(g.cols) + " " + std::to_string(g.rows) + "\n255\n";
    for (std::size_t row = g.rows; row-- > 0;) {
        for (std::size_t col = 0; col < g.cols; ++col) {
            const auto rgb = ramp(span > 0.0 ? (r.at(row, col) - *lo) / span : 0.0);
            out.append(reinterpret_cast<const char*>(rgb.data()), 3);
        }
    }
    return out;
}

}  // namespace starmap::exporting
