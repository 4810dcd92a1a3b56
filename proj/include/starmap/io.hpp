#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "starmap/errors.hpp"
#include "starmap/fields.hpp"
#include "starmap/geometry.hpp"
#include "starmap/uam.hpp"

// JSON persistence. Doubles are written in shortest round-trip form, so every
// load(save(x)) reproduces x exactly; object keys are sorted, so equal values
// serialize to identical bytes.
namespace starmap::io {

using nlohmann::json;

inline constexpr int kMapVersion = 1;
inline constexpr int kAnnotationVersion = 1;
inline constexpr int kArchiveVersion = 1;

inline json point_json(Point p) { return json::array({p.x, p.y}); }
inline Point point_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

inline json bbox_json(const BBox& b) { return json::array({b.min_x, b.min_y, b.max_x, b.max_y}); }
inline BBox bbox_from(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

inline void check_header(const json& j, const char* format, int version) {
    if (!j.is_object() || j.value("format", std::string()) != format)
        throw SourceError(std::string("not a ") + format + " document");
    if (j.value("version", 0) != version)
        throw SourceError(std::string("unsupported ") + format + " version " + std::to_string(j.value("version", 0)));
}

// Wraps JSON access errors into SourceError.
template <typename F>
auto guarded(const char* what, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw SourceError(std::string("malformed ") + what + ": " + e.what());
    }
}

inline json to_json(const Map& m) {
    json features = json::array();
    for (const auto& f : m.features()) {
        json verts = json::array();
        for (const auto& v : f.vertices()) verts.push_back(point_json(v));
        features.push_back({{"id", f.id()}, {"kind", to_string(f.kind())}, {"tags", f.tags()}, {"vertices", verts}});
    }
    return {{"format", "starmap-map"},
            {"version", kMapVersion},
            {"origin", {{"lat", m.origin().latitude}, {"lon", m.origin().longitude}}},
            {"bbox", bbox_json(m.bbox())},
            {"features", features}};
}

inline Map map_from_json(const json& j) {
    check_header(j, "starmap-map", kMapVersion);
    return guarded("map", [&] {
        std::vector<Feature> features;
        for (const auto& f : j.at("features")) {
            std::vector<Point> verts;
            for (const auto& v : f.at("vertices")) verts.push_back(point_from(v));
            features.emplace_back(f.at("id").get<std::string>(), parse_feature_kind(f.at("kind").get<std::string>()),
                                  std::move(verts), f.at("tags").get<TagSet>());
        }
        return Map(std::move(features), {j.at("origin").at("lat").get<double>(), j.at("origin").at("lon").get<double>()},
                   bbox_from(j.at("bbox")));
    });
}

inline json to_json(const Annotation& a) {
    const auto& t = a.transform;
    const auto& c = a.translate.covariance;
    return {{"transform",
             {{"rotation_stddev", t.rotation_stddev},
              {"scale_mean", t.scale_mean},
              {"scale_stddev", t.scale_stddev},
              {"shear_stddev", t.shear_stddev}}},
            {"translate", {{"mean", point_json(a.translate.mean)}, {"covariance", json::array({json::array({c.a, c.b}), json::array({c.c, c.d})})}}}};
}

// Missing keys take the degenerate defaults.
inline Annotation annotation_from_json(const json& j) {
    Annotation a;
    if (j.contains("transform")) {
        const auto& t = j["transform"];
        a.transform.rotation_stddev = t.value("rotation_stddev", 0.0);
        a.transform.scale_mean = t.value("scale_mean", 1.0);
        a.transform.scale_stddev = t.value("scale_stddev", 0.0);
        a.transform.shear_stddev = t.value("shear_stddev", 0.0);
    }
    if (j.contains("translate")) {
        const auto& t = j["translate"];
        if (t.contains("mean")) a.translate.mean = point_from(t["mean"]);
        if (t.contains("covariance")) {
            const auto& c = t["covariance"];
            a.translate.covariance = {c.at(0).at(0).get<double>(), c.at(0).at(1).get<double>(), c.at(1).at(0).get<double>(),
                                      c.at(1).at(1).get<double>()};
        } else if (t.contains("stddev")) {
            a.translate = TranslationParams::isotropic(t["stddev"].get<double>());
            if (t.contains("mean")) a.translate.mean = point_from(t["mean"]);
        }
    }
    a.validate();
    return a;
}

// Annotation config file:
// {"format": "starmap-annotations", "version": 1, "correlation": "per_feature",
//  "default": {...}, "tags": [{"tag": t, ...}], "features": [{"id": i, ...}]}
// where each annotation holds optional "transform" and "translate" objects.
inline json to_json(const AnnotationConfig& cfg) {
    json tags = json::array();
    for (const auto& r : cfg.tag_rules) {
        json e = to_json(r.annotation);
        e["tag"] = r.tag;
        tags.push_back(e);
    }
    json features = json::array();
    for (const auto& o : cfg.overrides) {
        json e = to_json(o.annotation);
        e["id"] = o.id;
        features.push_back(e);
    }
    return {{"format", "starmap-annotations"},
            {"version", kAnnotationVersion},
            {"correlation", to_string(cfg.correlation)},
            {"default", to_json(cfg.fallback)},
            {"tags", tags},
            {"features", features}};
}

inline AnnotationConfig annotation_config_from_json(const json& j) {
    check_header(j, "starmap-annotations", kAnnotationVersion);
    return guarded("annotation config", [&] {
        AnnotationConfig cfg;
        cfg.correlation = parse_correlation(j.value("correlation", std::string("per_feature")));
        if (j.contains("default")) cfg.fallback = annotation_from_json(j["default"]);
        if (j.contains("tags"))
            for (const auto& e : j["tags"]) cfg.tag_rules.push_back({e.at("tag").get<std::string>(), annotation_from_json(e)});
        if (j.contains("features"))
            for (const auto& e : j["features"]) cfg.overrides.push_back({e.at("id").get<std::string>(), annotation_from_json(e)});
        return cfg;
    });
}

inline json kernel_json(const KernelConfig& k) {
    return {{"signal_variance", k.signal_variance},
            {"length_scale", k.length_scale},
            {"noise_variance", k.noise_variance},
            {"prior_mean", k.prior_mean}};
}

inline KernelConfig kernel_from(const json& j) {
    return {j.at("signal_variance").get<double>(), j.at("length_scale").get<double>(), j.at("noise_variance").get<double>(),
            j.at("prior_mean").get<double>()};
}

inline json to_json(const ParamField& f) {
    json j = {{"relation", to_string(f.relation())},
              {"tag", f.tag()},
              {"param", f.param_index()},
              {"extent", bbox_json(f.extent())},
              {"backend", to_string(f.backend())},
              {"provenance", f.provenance()}};
    if (f.backend() == Backend::raster) {
        const auto& r = f.raster();
        j["raster"] = {{"extent", bbox_json(r.grid().extent)},
                       {"rows", r.grid().rows},
                       {"cols", r.grid().cols},
                       {"values", std::vector<double>(r.values().begin(), r.values().end())}};
    } else {
        const auto& g = f.gp();
        json inputs = json::array();
        for (const auto& p : g.inputs()) inputs.push_back(point_json(p));
        j["gp"] = {{"kernel", kernel_json(g.kernel())},
                   {"inputs", inputs},
                   {"targets", std::vector<double>(g.targets().begin(), g.targets().end())}};
    }
    return j;
}

inline ParamField param_field_from_json(const json& j) {
    FieldKey key{parse_relation(j.at("relation").get<std::string>()), j.at("tag").get<std::string>(), j.at("param").get<int>()};
    const BBox extent = bbox_from(j.at("extent"));
    std::string provenance = j.value("provenance", std::string());
    if (parse_backend(j.at("backend").get<std::string>()) == Backend::raster) {
        const auto& r = j.at("raster");
        GridSpec grid{bbox_from(r.at("extent")), r.at("rows").get<std::size_t>(), r.at("cols").get<std::size_t>()};
        return ParamField(key, extent, Raster(grid, r.at("values").get<std::vector<double>>()), provenance);
    }
    const auto& g = j.at("gp");
    std::vector<Point> inputs;
    for (const auto& p : g.at("inputs")) inputs.push_back(point_from(p));
    const auto targets = g.at("targets").get<std::vector<double>>();
    return ParamField(key, extent, GpModel(inputs, targets, kernel_from(g.at("kernel"))), provenance);
}

// StaR Map archive. `config` is free-form run metadata stored verbatim.
inline json to_json(const StarMap& s, const json& config = json::object()) {
    json samples = json::array();
    for (const auto& [_, rs] : s.sample_sets)
        samples.push_back({{"relation", to_string(rs.relation)}, {"tag", rs.tag}, {"location", point_json(rs.location)}, {"values", rs.values}});
    json fields = json::array();
    for (const auto& [_, f] : s.fields) fields.push_back(to_json(f));
    json j = {{"format", "starmap-archive"},
              {"version", kArchiveVersion},
              {"config", config},
              {"collection", {{"n_maps", s.n_maps}, {"seed", s.seed}}},
              {"over", {{"line_width", s.over.line_width}}},
              {"sample_sets", samples},
              {"fields", fields}};
    if (s.source) j["uam"] = {{"map", to_json(s.source->map())}, {"annotations", to_json(s.source->config())}};
    return j;
}

struct Archive {
    StarMap star;
    json config;
};

inline Archive archive_from_json(const json& j) {
    check_header(j, "starmap-archive", kArchiveVersion);
    return guarded("archive", [&] {
        Archive a;
        a.config = j.value("config", json::object());
        a.star.n_maps = j.at("collection").at("n_maps").get<std::size_t>();
        a.star.seed = j.at("collection").at("seed").get<std::uint64_t>();
        a.star.over.line_width = j.at("over").at("line_width").get<double>();
        for (const auto& e : j.at("sample_sets"))
            a.star.put(RelationSamples{parse_relation(e.at("relation").get<std::string>()), e.at("tag").get<std::string>(),
                                       point_from(e.at("location")), e.at("values").get<std::vector<double>>()});
        for (const auto& e : j.at("fields")) a.star.put(param_field_from_json(e));
        if (j.contains("uam"))
            a.star.source = std::make_shared<const UncertaintyAnnotatedMap>(map_from_json(j["uam"].at("map")),
                                                                            annotation_config_from_json(j["uam"].at("annotations")));
        return a;
    });
}

inline json parse_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SourceError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw SourceError("malformed JSON in '" + path + "': " + e.what(), e.byte);
    }
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << text;
    if (!out) throw Error("failed writing '" + path + "'");
}

inline void write_json(const std::string& path, const json& j) { write_text(path, j.dump(1) + "\n"); }

inline Map load_map(const std::string& path) { return map_from_json(parse_json_file(path)); }
inline AnnotationConfig load_annotations(const std::string& path) { return annotation_config_from_json(parse_json_file(path)); }
inline Archive load_archive(const std::string& path) { return archive_from_json(parse_json_file(path)); }

// 64-bit FNV-1a, used to fingerprint serialized outputs.
inline std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace starmap::io
