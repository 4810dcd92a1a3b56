#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <exception>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <expat.h>
#include <nlohmann/json.hpp>

#include "starmap/errors.hpp"
#include "starmap/geometry.hpp"
#include "starmap/uam.hpp"

namespace starmap::ingest {

inline constexpr double kEarthRadius = 6'371'000.0;     // meters
inline constexpr double kValidityRadius = 100'000.0;    // meters from the origin

inline void validate(const GeoOrigin& o) {
    if (!(std::abs(o.latitude) <= 90.0) || !(std::abs(o.longitude) <= 180.0))
        throw InvalidArgument("origin must satisfy |lat| <= 90 and |lon| <= 180");
}

// Equirectangular projection about origin: x = R cos(lat0) dlon, y = R dlat.
inline Point project(const GeoOrigin& origin, double lat, double lon) {
    validate(origin);
    constexpr double rad = std::numbers::pi / 180.0;
    const Point p{kEarthRadius * std::cos(origin.latitude * rad) * (lon - origin.longitude) * rad,
                  kEarthRadius * (lat - origin.latitude) * rad};
    if (!(norm(p) <= kValidityRadius))
        throw InvalidArgument("coordinate (" + std::to_string(lat) + ", " + std::to_string(lon) +
                              ") is more than 100 km from the origin");
    return p;
}

struct LatLon {
    double latitude = 0.0;
    double longitude = 0.0;
};

inline LatLon unproject(const GeoOrigin& origin, Point p) {
    constexpr double deg = 180.0 / std::numbers::pi;
    return {origin.latitude + p.y / kEarthRadius * deg,
            origin.longitude + p.x / (kEarthRadius * std::cos(origin.latitude / deg)) * deg};
}

enum class SourceFormat { osm_xml, overpass_json };

inline SourceFormat parse_source_format(const std::string& s) {
    if (s == "osm_xml" || s == "osm") return SourceFormat::osm_xml;
    if (s == "overpass_json" || s == "overpass") return SourceFormat::overpass_json;
    throw InvalidArgument("unsupported source format '" + s + "' (expected osm_xml or overpass_json)");
}

// A node or way as read from the source, before tag mapping. Closed ways drop
// their repeated last vertex and are flagged as polygon candidates.
struct RawFeature {
    std::string id;  // "n<id>" or "w<id>"
    bool is_way = false;
    bool closed = false;
    std::vector<LatLon> coords;
    std::multimap<std::string, std::string> tags;
};

struct RawData {
    std::vector<RawFeature> features;
    std::vector<std::string> warnings;
};

namespace detail {

struct OsmNode {
    LatLon coord;
    std::multimap<std::string, std::string> tags;
    std::string id;
};

struct OsmWay {
    std::string id;
    std::vector<std::string> refs;
    std::multimap<std::string, std::string> tags;
};

// Resolves way node references and assembles raw features in source order:
// tagged nodes first, then ways.
inline RawData assemble(const std::vector<OsmNode>& nodes, const std::vector<OsmWay>& ways,
                        const std::vector<std::vector<LatLon>>& inline_geometry = {}) {
    RawData out;
    std::unordered_map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < nodes.size(); ++i) by_id[nodes[i].id] = i;
    for (const auto& n : nodes) {
        if (n.tags.empty()) continue;
        out.features.push_back({"n" + n.id, false, false, {n.coord}, n.tags});
    }
    for (std::size_t w = 0; w < ways.size(); ++w) {
        const auto& way = ways[w];
        RawFeature f{"w" + way.id, true, false, {}, way.tags};
        if (w < inline_geometry.size() && !inline_geometry[w].empty()) {
            f.coords = inline_geometry[w];
        } else {
            bool missing = false;
            for (const auto& ref : way.refs) {
                const auto it = by_id.find(ref);
                if (it == by_id.end()) {
                    missing = true;
                    break;
                }
                f.coords.push_back(nodes[it->second].coord);
            }
            if (missing) {
                out.warnings.push_back("way " + way.id + " references a missing node; skipped");
                continue;
            }
        }
        const bool same_ref = way.refs.size() >= 2 && way.refs.front() == way.refs.back();
        const bool same_coord = f.coords.size() >= 2 && f.coords.front().latitude == f.coords.back().latitude &&
                                f.coords.front().longitude == f.coords.back().longitude;
        if (same_ref || (way.refs.empty() && same_coord)) {
            f.closed = true;
            f.coords.pop_back();
        }
        if (f.coords.empty()) {
            out.warnings.push_back("way " + way.id + " has no vertices; skipped");
            continue;
        }
        out.features.push_back(std::move(f));
    }
    return out;
}

inline double parse_coordinate(const char* s, const char* what) {
    char* end = nullptr;
    const double v = std::strtod(s, &end);
    if (end == s || *end != '\0' || !std::isfinite(v)) throw SourceError(std::string("malformed ") + what + " '" + s + "'");
    return v;
}

class OsmXmlReader {
public:
    RawData read(const std::string& text) {
        std::unique_ptr<XML_ParserStruct, decltype(&XML_ParserFree)> parser(XML_ParserCreate(nullptr), &XML_ParserFree);
        XML_SetUserData(parser.get(), this);
        XML_SetElementHandler(parser.get(), &OsmXmlReader::on_start, &OsmXmlReader::on_end);
        parser_ = parser.get();
        if (XML_Parse(parser.get(), text.data(), static_cast<int>(text.size()), XML_TRUE) == XML_STATUS_ERROR) {
            if (failure_) std::rethrow_exception(failure_);
            throw SourceError(std::string("malformed OSM XML: ") + XML_ErrorString(XML_GetErrorCode(parser.get())),
                              static_cast<std::size_t>(XML_GetCurrentByteIndex(parser.get())));
        }
        if (!saw_root_) throw SourceError("not an OSM XML document (missing <osm> root)", 0);
        return assemble(nodes_, ways_);
    }

private:
    static const char* attr(const XML_Char** atts, const char* name) {
        for (std::size_t i = 0; atts[i]; i += 2)
            if (std::strcmp(atts[i], name) == 0) return atts[i + 1];
        return nullptr;
    }

    std::size_t offset() const { return static_cast<std::size_t>(XML_GetCurrentByteIndex(parser_)); }

    const char* required(const XML_Char** atts, const char* name, const char* element) const {
        const char* v = attr(atts, name);
        if (!v) throw SourceError(std::string("<") + element + "> without '" + name + "'", offset());
        return v;
    }

    void start(const char* name, const XML_Char** atts) {
        if (std::strcmp(name, "osm") == 0) {
            saw_root_ = true;
        } else if (std::strcmp(name, "node") == 0) {
            OsmNode n;
            n.id = required(atts, "id", "node");
            n.coord = {parse_coordinate(required(atts, "lat", "node"), "latitude"),
                       parse_coordinate(required(atts, "lon", "node"), "longitude")};
            nodes_.push_back(std::move(n));
            in_ = In::node;
        } else if (std::strcmp(name, "way") == 0) {
            ways_.push_back({required(atts, "id", "way"), {}, {}});
            in_ = In::way;
        } else if (std::strcmp(name, "nd") == 0 && in_ == In::way) {
            ways_.back().refs.emplace_back(required(atts, "ref", "nd"));
        } else if (std::strcmp(name, "tag") == 0) {
            const char* k = required(atts, "k", "tag");
            const char* v = required(atts, "v", "tag");
            if (in_ == In::node) nodes_.back().tags.emplace(k, v);
            if (in_ == In::way) ways_.back().tags.emplace(k, v);
        } else if (std::strcmp(name, "relation") == 0) {
            in_ = In::other;  // relations are not supported; their tags are ignored
        }
    }

    void end(const char* name) {
        if (std::strcmp(name, "node") == 0 || std::strcmp(name, "way") == 0 || std::strcmp(name, "relation") == 0) in_ = In::none;
    }

    static void XMLCALL on_start(void* self, const XML_Char* name, const XML_Char** atts) {
        auto* r = static_cast<OsmXmlReader*>(self);
        try {
            r->start(name, atts);
        } catch (...) {
            r->failure_ = std::current_exception();
            XML_StopParser(r->parser_, XML_FALSE);
        }
    }

    static void XMLCALL on_end(void* self, const XML_Char* name) { static_cast<OsmXmlReader*>(self)->end(name); }

    enum class In { none, node, way, other };
    XML_Parser parser_ = nullptr;
    In in_ = In::none;
    bool saw_root_ = false;
    std::exception_ptr failure_;
    std::vector<OsmNode> nodes_;
    std::vector<OsmWay> ways_;
};

inline std::string id_string(const nlohmann::json& v) {
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    if (v.is_string()) return v.get<std::string>();
    throw SourceError("element id must be an integer");
}

inline RawData read_overpass(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        std::string hint;
        const auto first = text.find_first_not_of(" \t\r\n");
        if (first != std::string::npos && text[first] == '<') hint = "; input looks like XML, try --format osm_xml";
        throw SourceError(std::string("malformed Overpass JSON: ") + e.what() + hint, e.byte);
    }
    if (!doc.is_object() || !doc.contains("elements") || !doc["elements"].is_array())
        throw SourceError("Overpass JSON needs a top-level \"elements\" array", 0);
    std::vector<OsmNode> nodes;
    std::vector<OsmWay> ways;
    std::vector<std::vector<LatLon>> geometry;
    try {
        for (const auto& el : doc["elements"]) {
            const auto type = el.at("type").get<std::string>();
            std::multimap<std::string, std::string> tags;
            if (el.contains("tags"))
                for (const auto& [k, v] : el["tags"].items()) tags.emplace(k, v.get<std::string>());
            if (type == "node") {
                nodes.push_back({{el.at("lat").get<double>(), el.at("lon").get<double>()}, std::move(tags), id_string(el.at("id"))});
            } else if (type == "way") {
                OsmWay w{id_string(el.at("id")), {}, std::move(tags)};
                if (el.contains("nodes"))
                    for (const auto& r : el["nodes"]) w.refs.push_back(id_string(r));
                std::vector<LatLon> g;
                if (el.contains("geometry"))
                    for (const auto& c : el["geometry"]) g.push_back({c.at("lat").get<double>(), c.at("lon").get<double>()});
                ways.push_back(std::move(w));
                geometry.push_back(std::move(g));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw SourceError(std::string("malformed Overpass element: ") + e.what());
    }
    return assemble(nodes, ways, geometry);
}

}  // namespace detail

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SourceError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline RawData parse_source(const std::string& text, SourceFormat format) {
    if (format == SourceFormat::osm_xml) return detail::OsmXmlReader().read(text);
    return detail::read_overpass(text);
}

inline RawData load_source(const std::string& path, SourceFormat format) { return parse_source(read_file(path), format); }

// Source key=value pattern mapped to relation tags. value "*" matches any value.
struct TagRule {
    std::string key;
    std::string value;
    TagSet tags;
    FeatureKind kind = FeatureKind::polyline;

    bool matches(const std::multimap<std::string, std::string>& source) const {
        const auto [lo, hi] = source.equal_range(key);
        for (auto it = lo; it != hi; ++it)
            if (value == "*" || it->second == value) return true;
        return false;
    }

    friend bool operator==(const TagRule&, const TagRule&) = default;
};

// Ordered rules; the first match wins and unmatched features are dropped.
struct TagMapping {
    std::vector<TagRule> rules;

    const TagRule* match(const std::multimap<std::string, std::string>& source) const {
        for (const auto& r : rules)
            if (r.matches(source)) return &r;
        return nullptr;
    }

    static TagMapping defaults() {
        return {{
            {"highway", "primary", {"primary", "road"}, FeatureKind::polyline},
            {"highway", "*", {"road"}, FeatureKind::polyline},
            {"building", "*", {"building"}, FeatureKind::polygon},
            {"leisure", "park", {"park"}, FeatureKind::polygon},
        }};
    }

    friend bool operator==(const TagMapping&, const TagMapping&) = default;
};

inline nlohmann::json to_json(const TagMapping& m) {
    nlohmann::json rules = nlohmann::json::array();
    for (const auto& r : m.rules)
        rules.push_back({{"key", r.key}, {"value", r.value}, {"tags", r.tags}, {"kind", to_string(r.kind)}});
    return {{"rules", rules}};
}

inline TagMapping tag_mapping_from_json(const nlohmann::json& j) {
    TagMapping m;
    try {
        for (const auto& r : j.at("rules")) {
            TagRule rule{r.at("key").get<std::string>(), r.value("value", std::string("*")),
                         r.at("tags").get<TagSet>(), parse_feature_kind(r.value("kind", std::string("polyline")))};
            if (rule.tags.empty()) throw InvalidArgument("tag rule for '" + rule.key + "' maps to no tags");
            if (rule.kind == FeatureKind::node) throw InvalidArgument("tag rule kind hint must be polyline or polygon");
            m.rules.push_back(std::move(rule));
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed tag mapping: ") + e.what());
    }
    return m;
}

inline TagMapping load_tag_mapping(const std::string& path) {
    try {
        return tag_mapping_from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument("malformed tag mapping '" + path + "': " + e.what());
    }
}

struct BuildReport {
    Map map;
    std::size_t unmatched = 0;       // features with no matching rule
    std::size_t outside = 0;         // features with no vertex inside the bbox
    std::vector<std::string> warnings;
};

// Projects, tag-maps and bbox-filters raw features. A feature is kept whole if
// any vertex falls inside bbox. Polygon hints on open or too-short ways are
// demoted to polylines; single-vertex ways are dropped.
inline BuildReport build_map(const RawData& raw, const TagMapping& mapping, const GeoOrigin& origin, const BBox& bbox) {
    BuildReport report;
    report.warnings = raw.warnings;
    std::vector<Feature> features;
    for (const auto& rf : raw.features) {
        const TagRule* rule = mapping.match(rf.tags);
        if (!rule) {
            ++report.unmatched;
            continue;
        }
        std::vector<Point> pts;
        pts.reserve(rf.coords.size());
        for (const auto& c : rf.coords) pts.push_back(project(origin, c.latitude, c.longitude));
        if (std::none_of(pts.begin(), pts.end(), [&](Point p) { return bbox.contains(p); })) {
            ++report.outside;
            continue;
        }
        FeatureKind kind = FeatureKind::node;
        if (rf.is_way) {
            kind = rule->kind;
            if (kind == FeatureKind::polygon && (!rf.closed || pts.size() < 3)) {
                report.warnings.push_back("way " + rf.id.substr(1) + " mapped to polygon but has " + std::to_string(pts.size()) +
                                          (rf.closed ? " distinct" : " open") + " vertices; demoted to polyline");
                kind = FeatureKind::polyline;
            }
            if (kind == FeatureKind::polyline && rf.closed && pts.size() >= 2) pts.push_back(pts.front());
            if (kind == FeatureKind::polyline && pts.size() < 2) {
                report.warnings.push_back("way " + rf.id.substr(1) + " has a single vertex; dropped");
                continue;
            }
        }
        features.emplace_back(rf.id, kind, std::move(pts), rule->tags);
    }
    if (features.empty()) throw EmptyMapError("tag mapping produced no features inside the bounding box");
    report.map = Map(std::move(features), origin, bbox);
    return report;
}

enum class SpreadConvention { stddev, variance };

// Same pure-translation Gaussian for every feature, per-feature correlation.
// spread is the per-axis standard deviation (m) or, with the variance
// convention, the per-axis variance (m^2).
inline UncertaintyAnnotatedMap annotate_uniform(Map map, double spread, SpreadConvention convention = SpreadConvention::stddev) {
    if (!(spread >= 0.0)) throw InvalidArgument("translation spread must be >= 0");
    AnnotationConfig cfg;
    const double var = convention == SpreadConvention::stddev ? spread * spread : spread;
    cfg.fallback.translate = {{0.0, 0.0}, {var, 0.0, 0.0, var}};
    cfg.correlation = Correlation::per_feature;
    return UncertaintyAnnotatedMap(std::move(map), std::move(cfg));
}

}  // namespace starmap::ingest
