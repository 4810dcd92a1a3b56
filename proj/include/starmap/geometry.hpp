#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "starmap/errors.hpp"

namespace starmap {

// Local Cartesian frame: x east, y north, meters.
struct Point {
    static constexpr std::size_t dimension = 2;

    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
    friend auto operator<=>(const Point&, const Point&) = default;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point p) { return {s * p.x, s * p.y}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point p) { return std::hypot(p.x, p.y); }
inline double distance(Point a, Point b) { return norm(a - b); }
inline bool is_finite(Point p) { return std::isfinite(p.x) && std::isfinite(p.y); }

using Tag = std::string;
using TagSet = std::set<Tag>;

// Axis-aligned extent in meters.
struct BBox {
    double min_x = 0.0;
    double min_y = 0.0;
    double max_x = 0.0;
    double max_y = 0.0;

    static BBox empty() {
        constexpr double inf = std::numeric_limits<double>::infinity();
        return {inf, inf, -inf, -inf};
    }

    bool is_empty() const { return min_x > max_x || min_y > max_y; }
    double width() const { return max_x - min_x; }
    double height() const { return max_y - min_y; }

    bool contains(Point p, double tol = 0.0) const {
        return p.x >= min_x - tol && p.x <= max_x + tol && p.y >= min_y - tol && p.y <= max_y + tol;
    }

    void expand(Point p) {
        min_x = std::min(min_x, p.x);
        min_y = std::min(min_y, p.y);
        max_x = std::max(max_x, p.x);
        max_y = std::max(max_y, p.y);
    }

    // Euclidean distance from p to the box; 0 inside.
    double distance_to(Point p) const {
        const double dx = std::max({min_x - p.x, 0.0, p.x - max_x});
        const double dy = std::max({min_y - p.y, 0.0, p.y - max_y});
        return std::hypot(dx, dy);
    }

    friend bool operator==(const BBox&, const BBox&) = default;
};

// WGS84 anchor of the local frame.
struct GeoOrigin {
    double latitude = 0.0;
    double longitude = 0.0;

    friend bool operator==(const GeoOrigin&, const GeoOrigin&) = default;
};

enum class FeatureKind { node, polyline, polygon };

inline const char* to_string(FeatureKind kind) {
    switch (kind) {
        case FeatureKind::node: return "node";
        case FeatureKind::polyline: return "polyline";
        case FeatureKind::polygon: return "polygon";
    }
    return "?";
}

inline FeatureKind parse_feature_kind(const std::string& s) {
    if (s == "node") return FeatureKind::node;
    if (s == "polyline") return FeatureKind::polyline;
    if (s == "polygon") return FeatureKind::polygon;
    throw InvalidArgument("unknown feature kind '" + s + "'");
}

// A connected component of the map graph. Polygons are implicitly closed: the
// first vertex is not repeated at the end. Immutable after construction.
class Feature {
public:
    Feature(std::string id, FeatureKind kind, std::vector<Point> vertices, TagSet tags)
        : id_(std::move(id)), kind_(kind), vertices_(std::move(vertices)), tags_(std::move(tags)) {
        validate();
        for (const auto& v : vertices_) bounds_.expand(v);
    }

    const std::string& id() const { return id_; }
    FeatureKind kind() const { return kind_; }
    std::span<const Point> vertices() const { return vertices_; }
    const TagSet& tags() const { return tags_; }
    const BBox& bounds() const { return bounds_; }

    bool has_tag(const Tag& tag) const { return tags_.contains(tag); }

    // Vertex mean; the fixed point of centroid-anchored perturbations.
    Point centroid() const {
        Point c;
        for (const auto& v : vertices_) c = c + v;
        return (1.0 / static_cast<double>(vertices_.size())) * c;
    }

    // Same id, kind and tags with new coordinates.
    Feature with_vertices(std::vector<Point> vertices) const {
        return Feature(id_, kind_, std::move(vertices), tags_);
    }

    friend bool operator==(const Feature& a, const Feature& b) {
        return a.id_ == b.id_ && a.kind_ == b.kind_ && a.vertices_ == b.vertices_ && a.tags_ == b.tags_;
    }

private:
    void validate() const {
        const std::size_t n = vertices_.size();
        switch (kind_) {
            case FeatureKind::node:
                if (n != 1) throw InvalidArgument("node feature '" + id_ + "' needs exactly 1 vertex");
                break;
            case FeatureKind::polyline:
                if (n < 2) throw InvalidArgument("polyline feature '" + id_ + "' needs at least 2 vertices");
                break;
            case FeatureKind::polygon:
                if (n < 3) throw InvalidArgument("polygon feature '" + id_ + "' needs at least 3 vertices");
                if (vertices_.front() == vertices_.back())
                    throw InvalidArgument("polygon feature '" + id_ + "' repeats its first vertex");
                break;
        }
        for (const auto& v : vertices_) {
            if (!is_finite(v)) throw InvalidArgument("feature '" + id_ + "' has a non-finite vertex");
        }
    }

    std::string id_;
    FeatureKind kind_;
    std::vector<Point> vertices_;
    TagSet tags_;
    BBox bounds_ = BBox::empty();
};

// Tagged feature graph over a local frame. Feature ids are unique. The bbox is
// advisory; features are not clipped to it.
class Map {
public:
    Map() = default;

    Map(std::vector<Feature> features, GeoOrigin origin, BBox bbox)
        : features_(std::move(features)), origin_(origin), bbox_(bbox) {
        std::set<std::string> ids;
        for (std::size_t i = 0; i < features_.size(); ++i) {
            const auto& f = features_[i];
            if (!ids.insert(f.id()).second) throw InvalidArgument("duplicate feature id '" + f.id() + "'");
            for (const auto& tag : f.tags()) by_tag_[tag].push_back(i);
        }
    }

    std::span<const Feature> features() const { return features_; }
    const GeoOrigin& origin() const { return origin_; }
    const BBox& bbox() const { return bbox_; }

    // Indices of the features carrying tag, in map order.
    std::span<const std::size_t> tagged(const Tag& tag) const {
        const auto it = by_tag_.find(tag);
        if (it == by_tag_.end()) return {};
        return it->second;
    }

    bool has_tag(const Tag& tag) const { return by_tag_.contains(tag); }

    std::vector<Tag> tags() const {
        std::vector<Tag> out;
        for (const auto& [tag, _] : by_tag_) out.push_back(tag);
        return out;
    }

    friend bool operator==(const Map& a, const Map& b) {
        return a.features_ == b.features_ && a.origin_ == b.origin_ && a.bbox_ == b.bbox_;
    }

private:
    std::vector<Feature> features_;
    GeoOrigin origin_;
    BBox bbox_;
    std::map<Tag, std::vector<std::size_t>> by_tag_;
};

// Absolute tolerance used to decide that a point lies on a polygon edge.
inline constexpr double kBoundaryTolerance = 1e-9;

// Distance from p to segment [a, b]. A degenerate segment is treated as a point.
inline double point_segment_distance(Point p, Point a, Point b) {
    const Point ab = b - a;
    const double len2 = dot(ab, ab);
    if (len2 == 0.0) return distance(p, a);
    const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    return distance(p, a + t * ab);
}

// Even-odd containment. Points on the boundary count as inside.
inline bool point_in_polygon(Point p, std::span<const Point> ring) {
    const std::size_t n = ring.size();
    if (n < 3) throw InvalidArgument("polygon ring needs at least 3 vertices");
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point a = ring[j];
        const Point b = ring[i];
        if (point_segment_distance(p, a, b) <= kBoundaryTolerance) return true;
        if ((b.y > p.y) != (a.y > p.y)) {
            const double x_cross = b.x + (p.y - b.y) * (a.x - b.x) / (a.y - b.y);
            if (p.x < x_cross) inside = !inside;
        }
    }
    return inside;
}

inline double feature_distance(Point p, const Feature& f) {
    const auto v = f.vertices();
    switch (f.kind()) {
        case FeatureKind::node:
            return distance(p, v[0]);
        case FeatureKind::polyline: {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i + 1 < v.size(); ++i) best = std::min(best, point_segment_distance(p, v[i], v[i + 1]));
            return best;
        }
        case FeatureKind::polygon: {
            if (point_in_polygon(p, v)) return 0.0;
            double best = point_segment_distance(p, v.back(), v.front());
            for (std::size_t i = 0; i + 1 < v.size(); ++i) best = std::min(best, point_segment_distance(p, v[i], v[i + 1]));
            return best;
        }
    }
    return std::numeric_limits<double>::infinity();
}

// Minimum distance to any feature carrying tag. Throws MissingTagError if none does.
inline double map_distance(Point p, const Tag& tag, const Map& m) {
    const auto idx = m.tagged(tag);
    if (idx.empty()) throw MissingTagError(tag);
    const auto features = m.features();
    double best = std::numeric_limits<double>::infinity();
    for (const std::size_t i : idx) {
        const Feature& f = features[i];
        if (f.bounds().distance_to(p) >= best) continue;
        best = std::min(best, feature_distance(p, f));
        if (best == 0.0) break;
    }
    return best;
}

struct OverOptions {
    // Polyline features are buffered by half this width for the over relation.
    double line_width = 4.0;
};

// True if p lies in a tagged polygon or within line_width/2 of a tagged polyline.
// Node features never contain a point. An absent tag yields false.
inline bool map_over(Point p, const Tag& tag, const Map& m, const OverOptions& options = {}) {
    const double half_width = 0.5 * options.line_width;
    const auto features = m.features();
    for (const std::size_t i : m.tagged(tag)) {
        const Feature& f = features[i];
        switch (f.kind()) {
            case FeatureKind::node:
                break;
            case FeatureKind::polygon:
                if (f.bounds().contains(p, kBoundaryTolerance) && point_in_polygon(p, f.vertices())) return true;
                break;
            case FeatureKind::polyline:
                if (f.bounds().distance_to(p) <= half_width && feature_distance(p, f) <= half_width) return true;
                break;
        }
    }
    return false;
}

}  // namespace starmap
