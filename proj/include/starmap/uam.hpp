#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "starmap/errors.hpp"
#include "starmap/geometry.hpp"
#include "starmap/parallel.hpp"

namespace starmap {

using RandomStream = std::mt19937_64;

// Independent stream for sample `index` of a run seeded with `seed`.
inline RandomStream substream(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return RandomStream(seq);
}

struct Matrix2 {
    double a = 1.0, b = 0.0;
    double c = 0.0, d = 1.0;

    static Matrix2 identity() { return {}; }
    static Matrix2 rotation(double theta) {
        const double cs = std::cos(theta);
        const double sn = std::sin(theta);
        return {cs, -sn, sn, cs};
    }
    static Matrix2 scale(double s) { return {s, 0.0, 0.0, s}; }
    static Matrix2 shear(double h) { return {1.0, h, 0.0, 1.0}; }

    Point operator*(Point p) const { return {a * p.x + b * p.y, c * p.x + d * p.y}; }
    Matrix2 operator*(const Matrix2& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
    }

    friend bool operator==(const Matrix2&, const Matrix2&) = default;
};

// Moments of the centroid-anchored linear error: rotation, isotropic scale, x-shear.
struct TransformationParams {
    double rotation_stddev = 0.0;  // radians
    double scale_mean = 1.0;
    double scale_stddev = 0.0;
    double shear_stddev = 0.0;

    void validate() const {
        if (!(rotation_stddev >= 0.0) || !(scale_stddev >= 0.0) || !(shear_stddev >= 0.0))
            throw InvalidArgument("transformation stddevs must be >= 0");
        if (!(scale_mean > 0.0)) throw InvalidArgument("scale_mean must be > 0");
    }

    friend bool operator==(const TransformationParams&, const TransformationParams&) = default;
};

// Gaussian translation error: mean offset and 2x2 covariance (m^2).
struct TranslationParams {
    Point mean;
    Matrix2 covariance{0.0, 0.0, 0.0, 0.0};

    static TranslationParams isotropic(double stddev) {
        const double var = stddev * stddev;
        return {{0.0, 0.0}, {var, 0.0, 0.0, var}};
    }

    void validate() const {
        const auto& s = covariance;
        if (!is_finite(mean)) throw InvalidArgument("translation mean must be finite");
        if (s.b != s.c) throw InvalidArgument("translation covariance must be symmetric");
        const double tol = 1e-12 * std::max(1.0, std::abs(s.a) + std::abs(s.d));
        if (!(s.a >= 0.0) || !(s.d >= 0.0) || s.a * s.d - s.b * s.c < -tol)
            throw InvalidArgument("translation covariance must be positive semi-definite");
    }

    // Lower-triangular factor L with L L^T = covariance (PSD-safe).
    Matrix2 cholesky() const {
        const auto& s = covariance;
        const double l11 = std::sqrt(s.a);
        const double l21 = l11 > 0.0 ? s.c / l11 : 0.0;
        const double l22 = std::sqrt(std::max(0.0, s.d - l21 * l21));
        return {l11, 0.0, l21, l22};
    }

    friend bool operator==(const TranslationParams&, const TranslationParams&) = default;
};

struct Annotation {
    TransformationParams transform;
    TranslationParams translate;

    void validate() const {
        transform.validate();
        translate.validate();
    }

    friend bool operator==(const Annotation&, const Annotation&) = default;
};

enum class Correlation { per_feature, per_vertex };

inline const char* to_string(Correlation c) { return c == Correlation::per_feature ? "per_feature" : "per_vertex"; }

inline Correlation parse_correlation(const std::string& s) {
    if (s == "per_feature") return Correlation::per_feature;
    if (s == "per_vertex") return Correlation::per_vertex;
    throw InvalidArgument("unknown correlation mode '" + s + "'");
}

// Annotator tables: a feature takes its id override if present, else the first
// matching tag rule, else the default.
struct AnnotationConfig {
    struct TagRule {
        Tag tag;
        Annotation annotation;
        friend bool operator==(const TagRule&, const TagRule&) = default;
    };
    struct FeatureOverride {
        std::string id;
        Annotation annotation;
        friend bool operator==(const FeatureOverride&, const FeatureOverride&) = default;
    };

    Annotation fallback;
    std::vector<TagRule> tag_rules;
    std::vector<FeatureOverride> overrides;
    Correlation correlation = Correlation::per_feature;

    const Annotation& resolve(const Feature& f) const {
        for (const auto& o : overrides)
            if (o.id == f.id()) return o.annotation;
        for (const auto& r : tag_rules)
            if (f.has_tag(r.tag)) return r.annotation;
        return fallback;
    }

    void validate() const {
        fallback.validate();
        for (const auto& r : tag_rules) r.annotation.validate();
        for (const auto& o : overrides) o.annotation.validate();
    }

    friend bool operator==(const AnnotationConfig&, const AnnotationConfig&) = default;
};

// A map plus total transformation/translation annotators. Annotations are
// resolved once per feature at construction.
class UncertaintyAnnotatedMap {
public:
    UncertaintyAnnotatedMap(Map map, AnnotationConfig config) : map_(std::move(map)), config_(std::move(config)) {
        config_.validate();
        resolved_.reserve(map_.features().size());
        for (const auto& f : map_.features()) resolved_.push_back(config_.resolve(f));
    }

    const Map& map() const { return map_; }
    const AnnotationConfig& config() const { return config_; }
    Correlation correlation() const { return config_.correlation; }
    const Annotation& annotation(std::size_t feature_index) const { return resolved_.at(feature_index); }

private:
    Map map_;
    AnnotationConfig config_;
    std::vector<Annotation> resolved_;
};

struct Perturbation {
    Matrix2 transform;
    Point offset;
};

// Phi = R(theta) S(s) H(h), t = mean + L z. Always consumes five standard normals
// from rng, in the order theta, s, h, z1, z2.
inline Perturbation draw_perturbation(const TransformationParams& tp, const TranslationParams& tl, RandomStream& rng) {
    std::normal_distribution<double> unit(0.0, 1.0);
    const double theta = tp.rotation_stddev * unit(rng);
    const double s = tp.scale_mean + tp.scale_stddev * unit(rng);
    const double h = tp.shear_stddev * unit(rng);
    const double z1 = unit(rng);
    const double z2 = unit(rng);
    const Point t = tl.mean + tl.cholesky() * Point{z1, z2};
    return {Matrix2::rotation(theta) * Matrix2::scale(s) * Matrix2::shear(h), t};
}

// v' = c + Phi (v - c) + t, evaluated as v + (Phi - I)(v - c) + t so that the
// identity perturbation reproduces v bit-exactly.
inline Point perturb_point(Point v, Point centroid, const Perturbation& p) {
    const Matrix2 delta{p.transform.a - 1.0, p.transform.b, p.transform.c, p.transform.d - 1.0};
    return v + delta * (v - centroid) + p.offset;
}

inline Feature perturb_feature(const Feature& f, const Perturbation& p) {
    const Point c = f.centroid();
    std::vector<Point> out;
    out.reserve(f.vertices().size());
    for (const auto& v : f.vertices()) out.push_back(perturb_point(v, c, p));
    return f.with_vertices(std::move(out));
}

inline Map sample_map(const UncertaintyAnnotatedMap& uam, RandomStream& rng) {
    const auto features = uam.map().features();
    std::vector<Feature> out;
    out.reserve(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        const Feature& f = features[i];
        const Annotation& a = uam.annotation(i);
        if (uam.correlation() == Correlation::per_feature) {
            out.push_back(perturb_feature(f, draw_perturbation(a.transform, a.translate, rng)));
        } else {
            const Point c = f.centroid();
            std::vector<Point> verts;
            verts.reserve(f.vertices().size());
            for (const auto& v : f.vertices()) verts.push_back(perturb_point(v, c, draw_perturbation(a.transform, a.translate, rng)));
            out.push_back(f.with_vertices(std::move(verts)));
        }
    }
    return Map(std::move(out), uam.map().origin(), uam.map().bbox());
}

// The sampled world W: N map instances drawn from one UAM.
struct MapCollection {
    std::vector<Map> maps;
    std::uint64_t seed = 0;
    std::shared_ptr<const UncertaintyAnnotatedMap> source;

    std::size_t size() const { return maps.size(); }
};

// Map i is drawn from substream(seed, i); the result does not depend on thread count.
inline MapCollection sample_collection(std::shared_ptr<const UncertaintyAnnotatedMap> uam, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw InvalidArgument("sample_collection needs n >= 1");
    if (!uam) throw InvalidArgument("sample_collection needs a UAM");
    std::vector<std::optional<Map>> slots(n);
    parallel_for(n, [&](std::size_t i) {
        auto rng = substream(seed, i);
        slots[i] = sample_map(*uam, rng);
    });
    MapCollection w;
    w.seed = seed;
    w.source = std::move(uam);
    w.maps.reserve(n);
    for (auto& m : slots) w.maps.push_back(std::move(*m));
    return w;
}

inline MapCollection sample_collection(const UncertaintyAnnotatedMap& uam, std::size_t n, std::uint64_t seed) {
    return sample_collection(std::make_shared<const UncertaintyAnnotatedMap>(uam), n, seed);
}

}  // namespace starmap
