// starmap: command-line front end for ingestion, field building, reasoning,
// rendering and benchmarking.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "starmap/bench.hpp"
#include "starmap/starmap.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace starmap;

namespace {

enum Exit : int {
    kOk = 0,
    kInputError = 2,
    kEmptyMap = 3,
    kFieldFailure = 4,
    kProgramError = 5,
    kMissingField = 6,
};

BBox bbox_of(const std::vector<double>& v) { return {v.at(0), v.at(1), v.at(2), v.at(3)}; }

std::string csv_name(const FieldKey& k) {
    return std::string(to_string(k.relation)) + "_" + k.tag + "_" + parameter_name(k.relation, k.param_index);
}

void write_meta(const std::string& path, const json& config) { io::write_json(path + ".meta.json", config); }

struct RelationSpec {
    Relation relation;
    Tag tag;
};

RelationSpec parse_relation_spec(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos || colon + 1 == s.size()) throw InvalidArgument("relation spec must look like distance:road");
    return {parse_relation(s.substr(0, colon)), s.substr(colon + 1)};
}

struct ThresholdSpec {
    Comparison op;
    double value;
    std::string label;
};

ThresholdSpec parse_threshold_spec(const std::string& s) {
    const auto at = s.find_first_of("<>");
    if (at == std::string::npos || s.substr(0, at) != "distance")
        throw InvalidArgument("threshold must look like distance>30 or distance<15");
    std::size_t used = 0;
    const double v = std::stod(s.substr(at + 1), &used);
    if (used != s.size() - at - 1) throw InvalidArgument("malformed threshold value in '" + s + "'");
    const bool greater = s[at] == '>';
    return {greater ? Comparison::greater : Comparison::less, v, (greater ? "gt" : "lt") + s.substr(at + 1)};
}

// ---- ingest ---------------------------------------------------------------

struct IngestArgs {
    std::string input;
    std::string format = "osm_xml";
    std::vector<double> origin;
    std::vector<double> bbox;
    std::string tags;
    std::string output;
    std::uint64_t seed = 0;
};

int run_ingest(const IngestArgs& a) {
    const GeoOrigin origin{a.origin.at(0), a.origin.at(1)};
    const BBox bbox = a.bbox.empty() ? BBox{-ingest::kValidityRadius, -ingest::kValidityRadius, ingest::kValidityRadius,
                                            ingest::kValidityRadius}
                                     : bbox_of(a.bbox);
    const auto mapping = a.tags.empty() ? ingest::TagMapping::defaults() : ingest::load_tag_mapping(a.tags);
    const auto raw = ingest::load_source(a.input, ingest::parse_source_format(a.format));
    auto report = ingest::build_map(raw, mapping, origin, bbox);

    const json config = {{"command", "ingest"},
                         {"input", a.input},
                         {"format", a.format},
                         {"origin", {origin.latitude, origin.longitude}},
                         {"bbox", io::bbox_json(bbox)},
                         {"tags", a.tags.empty() ? json(ingest::to_json(mapping)) : json(a.tags)},
                         {"seed", a.seed}};
    json doc = io::to_json(report.map);
    doc["config"] = config;
    if (!a.output.empty()) io::write_json(a.output, doc);

    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "features\t" << report.map.features().size() << "\n";
    for (const auto& tag : report.map.tags()) std::cout << "tag\t" << tag << "\t" << report.map.tagged(tag).size() << "\n";
    std::cout << "unmatched\t" << report.unmatched << "\n";
    std::cout << "outside\t" << report.outside << "\n";
    if (!a.output.empty()) std::cout << "hash\t" << std::hex << io::fnv1a(doc.dump(1) + "\n") << std::dec << "\n";
    return kOk;
}

// ---- shared map/UAM loading -------------------------------------------------

struct UamArgs {
    std::string map;
    bool demo = false;
    std::optional<double> stddev;
    std::string annotations;
};

std::shared_ptr<const UncertaintyAnnotatedMap> load_uam(const UamArgs& a, json& config) {
    if (a.demo == !a.map.empty()) throw InvalidArgument("give exactly one of --map or --demo");
    Map map = a.demo ? demo::scene() : io::load_map(a.map);
    config["map"] = a.demo ? json("demo") : json(a.map);
    AnnotationConfig annotations;
    if (!a.annotations.empty()) {
        annotations = io::load_annotations(a.annotations);
    } else if (a.stddev) {
        if (!(*a.stddev >= 0.0)) throw InvalidArgument("--stddev must be >= 0");
        annotations.fallback.translate = TranslationParams::isotropic(*a.stddev);
    } else if (a.demo) {
        annotations = demo::scene_annotations();
    } else {
        throw InvalidArgument("give --stddev or --annotations");
    }
    config["annotations"] = io::to_json(annotations);
    return std::make_shared<const UncertaintyAnnotatedMap>(std::move(map), std::move(annotations));
}

// ---- field ----------------------------------------------------------------

struct FieldArgs {
    UamArgs uam;
    std::vector<std::string> relations{"distance:road"};
    std::string backend = "raster";
    std::size_t resolution = 64;
    std::size_t seed_points = 256;
    std::size_t batch = 16;
    std::size_t rounds = 0;
    std::size_t candidates = 64;
    bool tune = false;
    std::size_t samples = 50;
    std::uint64_t seed = 0;
    std::vector<double> extent;
    double line_width = 4.0;
    std::string output;
    std::string csv_dir;
    std::string geojson_dir;
    std::vector<std::string> thresholds;
};

int run_field(const FieldArgs& a) {
    json config = {{"command", "field"}};
    const auto uam = load_uam(a.uam, config);
    const BBox extent = a.extent.empty() ? uam->map().bbox() : bbox_of(a.extent);
    const Backend backend = parse_backend(a.backend);
    std::vector<RelationSpec> specs;
    for (const auto& s : a.relations) specs.push_back(parse_relation_spec(s));
    std::vector<ThresholdSpec> thresholds;
    for (const auto& s : a.thresholds) thresholds.push_back(parse_threshold_spec(s));

    config["relations"] = a.relations;
    config["backend"] = a.backend;
    config["resolution"] = a.resolution;
    if (backend == Backend::gp)
        config["gp"] = {{"seed_points", a.seed_points}, {"batch", a.batch}, {"rounds", a.rounds}, {"candidates", a.candidates}, {"tune", a.tune}};
    config["samples"] = a.samples;
    config["seed"] = a.seed;
    config["extent"] = io::bbox_json(extent);
    config["line_width"] = a.line_width;
    config["thresholds"] = a.thresholds;

    const auto w = sample_collection(uam, a.samples, a.seed);
    StarMap star = make_star_map(w, OverOptions{a.line_width});
    const GridSpec grid = square_grid(extent, a.resolution);
    for (const auto& s : specs) {
        if (backend == Backend::raster) {
            build_raster(star, w, s.relation, s.tag, grid);
        } else {
            GpBuildOptions o;
            o.seed_points = a.seed_points;
            o.seed = a.seed;
            o.refine = {a.batch, a.rounds};
            o.candidate_resolution = a.candidates;
            o.tune = a.tune;
            build_gp(star, w, s.relation, s.tag, extent, o);
        }
    }
    if (!a.output.empty()) io::write_json(a.output, io::to_json(star, config));

    const auto export_raster = [&](const Raster& r, const std::string& name) {
        if (!a.csv_dir.empty()) {
            fs::create_directories(a.csv_dir);
            const auto path = (fs::path(a.csv_dir) / (name + ".csv")).string();
            io::write_text(path, exporting::raster_csv(r));
            write_meta(path, config);
        }
        if (!a.geojson_dir.empty()) {
            fs::create_directories(a.geojson_dir);
            io::write_text((fs::path(a.geojson_dir) / (name + ".geojson")).string(),
                           exporting::raster_geojson(r, uam->map().origin(), name, config).dump(1) + "\n");
        }
    };
    for (const auto& [key, field] : star.fields) {
        const Raster r = field.backend() == Backend::raster ? field.raster() : field_raster(field, grid);
        const auto vals = r.values();
        const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
        std::cout << "field\t" << csv_name(key) << "\t" << to_string(field.backend()) << "\tmin " << *lo << "\tmax " << *hi << "\n";
        export_raster(r, csv_name(key));
    }
    for (const auto& t : thresholds) {
        for (const auto& s : specs) {
            if (s.relation != Relation::distance) continue;
            const Raster r = threshold_raster(star, s.tag, t.op, t.value, grid);
            std::cout << "threshold\tdistance_" << s.tag << "_" << t.label << "\n";
            export_raster(r, "p_distance_" + s.tag + "_" + t.label);
        }
    }
    return kOk;
}

// ---- query ----------------------------------------------------------------

struct QueryArgs {
    std::string program;
    std::string query;
    std::string star;
    std::vector<double> at;
    std::size_t resolution = 64;
    std::vector<double> extent;
    std::string method = "auto";
    std::optional<std::size_t> mc_samples;
    std::uint64_t seed = 0;
    std::string csv;
    std::string geojson;
    std::vector<double> origin;
};

int run_query(const QueryArgs& a) {
    const auto program = logic::parse_program(ingest::read_file(a.program));
    const auto atom = logic::parse_atom(a.query);
    StarMap star;
    json star_config;
    if (!a.star.empty()) {
        auto archive = io::load_archive(a.star);
        star = std::move(archive.star);
        star_config = std::move(archive.config);
    }
    logic::QueryOptions opts{logic::parse_method(a.method), 0, a.seed};
    json config = {{"command", "query"}, {"program", a.program}, {"query", logic::to_string(atom)},
                   {"star", a.star},     {"method", a.method},   {"seed", a.seed}};
    if (!star_config.is_null()) config["star_config"] = star_config;

    if (!a.at.empty()) {
        opts.mc_samples = a.mc_samples.value_or(logic::kDefaultQuerySamples);
        config["at"] = a.at;
        config["mc_samples"] = opts.mc_samples;
        const Point x{a.at.at(0), a.at.at(1)};
        const auto r = logic::query(logic::ground_program(program, star, x), atom, opts);
        json out = {{"query", logic::to_string(r.query)},
                    {"probability", r.probability},
                    {"method", logic::to_string(r.method)},
                    {"mc_samples", r.mc_samples},
                    {"config", config}};
        if (r.mc_stderr) out["mc_stderr"] = *r.mc_stderr;
        std::cout << out.dump() << "\n";
        return kOk;
    }

    BBox extent;
    if (!a.extent.empty()) {
        extent = bbox_of(a.extent);
    } else if (!star.fields.empty()) {
        extent = star.fields.begin()->second.extent();
    } else {
        throw InvalidArgument("give --extent or a StaR Map with fields");
    }
    opts.mc_samples = a.mc_samples.value_or(logic::kDefaultFieldSamples);
    config["extent"] = io::bbox_json(extent);
    config["resolution"] = a.resolution;
    config["mc_samples"] = opts.mc_samples;
    const Raster r = logic::query_field(program, star, atom, square_grid(extent, a.resolution), opts);
    const auto vals = r.values();
    const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
    std::cout << "raster\t" << a.resolution << "x" << a.resolution << "\tmin " << *lo << "\tmax " << *hi << "\n";
    if (!a.csv.empty()) {
        io::write_text(a.csv, exporting::raster_csv(r));
        write_meta(a.csv, config);
    }
    if (!a.geojson.empty()) {
        GeoOrigin origin;
        if (!a.origin.empty()) {
            origin = {a.origin.at(0), a.origin.at(1)};
        } else if (star.source) {
            origin = star.source->map().origin();
        } else {
            throw InvalidArgument("GeoJSON export needs --origin or a StaR Map with its source map");
        }
        io::write_text(a.geojson, exporting::raster_geojson(r, origin, logic::to_string(atom), config).dump(1) + "\n");
    }
    return kOk;
}

// ---- render ---------------------------------------------------------------

struct RenderArgs {
    std::string input;
    std::string output;
    std::uint64_t seed = 0;
};

int run_render(const RenderArgs& a) {
    Raster r;
    try {
        r = exporting::parse_raster_csv(ingest::read_file(a.input));
    } catch (const SourceError& e) {
        std::cerr << "error: " << a.input << ": " << e.what() << "\n";
        return kFieldFailure;
    }
    exporting::Legend legend;
    const json config = {{"command", "render"}, {"input", a.input}, {"seed", a.seed}};
    io::write_text(a.output, exporting::render_ppm(r, &legend, config.dump()));
    std::cout << "min\t" << exporting::format_double(legend.min) << "\n";
    std::cout << "max\t" << exporting::format_double(legend.max) << "\n";
    return kOk;
}

// ---- bench ----------------------------------------------------------------

struct BenchArgs {
    UamArgs uam;
    std::string tag = "road";
    std::size_t reference = 256;
    std::vector<std::size_t> resolutions{8, 16, 32, 64, 128};
    std::size_t seed_points = 256;
    std::size_t batch = 16;
    std::size_t rounds = 5;
    std::size_t candidates = 64;
    bool tune = false;
    std::size_t samples = 50;
    std::size_t repeats = 3;
    std::uint64_t seed = 0;
    std::string output;
};

int run_bench(BenchArgs a) {
    // Paper setup by default: every feature gets the same 10 m translation error.
    if (!a.uam.stddev && a.uam.annotations.empty()) a.uam.stddev = 10.0;
    json config = {{"command", "bench"}};
    const auto uam = load_uam(a.uam, config);
    bench::Setup s;
    s.tag = a.tag;
    s.extent = uam->map().bbox();
    s.reference_resolution = a.reference;
    config.update({{"tag", a.tag},
                   {"reference", a.reference},
                   {"resolutions", a.resolutions},
                   {"gp", {{"seed_points", a.seed_points}, {"batch", a.batch}, {"rounds", a.rounds}, {"candidates", a.candidates}, {"tune", a.tune}}},
                   {"samples", a.samples},
                   {"repeats", a.repeats},
                   {"seed", a.seed},
                   {"extent", io::bbox_json(s.extent)}});

    const auto w = sample_collection(uam, a.samples, a.seed);
    const auto reference = bench::reference_field(w, s);
    auto rows = bench::grid_sweep(w, s, reference, a.resolutions, a.repeats);
    bench::GpSweepOptions o{a.seed_points, a.seed, {a.batch, a.rounds}, a.candidates, a.tune};
    for (auto& r : bench::gp_sweep(w, s, reference, o)) rows.push_back(std::move(r));

    std::string csv = "method,resolution,round,points,relation_samples,seconds,mae\r\n";
    for (const auto& r : rows)
        csv += r.method + "," + std::to_string(r.resolution) + "," + std::to_string(r.round) + "," + std::to_string(r.points) + "," +
               std::to_string(r.relation_samples) + "," + exporting::format_double(r.seconds) + "," + exporting::format_double(r.mae) +
               "\r\n";
    if (a.output.empty()) {
        std::cout << csv;
    } else {
        io::write_text(a.output, csv);
        write_meta(a.output, config);
        std::cout << "rows\t" << rows.size() << "\n";
    }
    return kOk;
}

template <typename F>
int guarded(const char* command, F&& f) {
    try {
        return f();
    } catch (const std::exception& e) {
        std::cerr << "error: " << command << ": " << e.what() << "\n";
        throw;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Statistical relational maps: sample uncertain maps, build parameter fields and query them."};
    app.require_subcommand(1);

    IngestArgs ingest_args;
    auto* ingest_cmd = app.add_subcommand("ingest", "Convert an OSM extract into a tagged local map");
    ingest_cmd->add_option("--input", ingest_args.input, "OSM XML or Overpass JSON file")->required();
    ingest_cmd->add_option("--format", ingest_args.format, "osm_xml | overpass_json")->capture_default_str();
    ingest_cmd->add_option("--origin", ingest_args.origin, "lat,lon of the local frame origin")->required()->delimiter(',')->expected(2);
    ingest_cmd->add_option("--bbox", ingest_args.bbox, "min_x,min_y,max_x,max_y in meters")->delimiter(',')->expected(4);
    ingest_cmd->add_option("--tags", ingest_args.tags, "tag mapping JSON (default mapping if omitted)");
    ingest_cmd->add_option("--output", ingest_args.output, "map JSON to write");
    ingest_cmd->add_option("--seed", ingest_args.seed, "recorded in metadata");

    const auto add_uam = [](CLI::App* cmd, UamArgs& u) {
        cmd->add_option("--map", u.map, "map JSON from 'ingest'");
        cmd->add_flag("--demo", u.demo, "use the built-in demo scene");
        cmd->add_option("--stddev", u.stddev, "uniform translation stddev per axis (m)");
        cmd->add_option("--annotations", u.annotations, "annotation config JSON");
    };

    FieldArgs field_args;
    auto* field_cmd = app.add_subcommand("field", "Sample a map collection and fit parameter fields");
    add_uam(field_cmd, field_args.uam);
    field_cmd->add_option("--relation", field_args.relations, "relation:tag, repeatable")->capture_default_str();
    field_cmd->add_option("--backend", field_args.backend, "raster | gp")->capture_default_str();
    field_cmd->add_option("--resolution", field_args.resolution, "raster nodes per side (also the export grid)")->capture_default_str();
    field_cmd->add_option("--seed-points", field_args.seed_points, "gp: random seed points")->capture_default_str();
    field_cmd->add_option("--batch", field_args.batch, "gp: points per refinement round")->capture_default_str();
    field_cmd->add_option("--rounds", field_args.rounds, "gp: refinement rounds")->capture_default_str();
    field_cmd->add_option("--candidates", field_args.candidates, "gp: candidate grid per side")->capture_default_str();
    field_cmd->add_flag("--tune", field_args.tune, "gp: tune kernel by marginal likelihood");
    field_cmd->add_option("--samples", field_args.samples, "sampled maps N")->capture_default_str();
    field_cmd->add_option("--seed", field_args.seed, "master seed")->capture_default_str();
    field_cmd->add_option("--extent", field_args.extent, "min_x,min_y,max_x,max_y (default: map bbox)")->delimiter(',')->expected(4);
    field_cmd->add_option("--line-width", field_args.line_width, "width (m) for 'over' on polylines")->capture_default_str();
    field_cmd->add_option("--output", field_args.output, "StaR Map archive JSON");
    field_cmd->add_option("--csv-dir", field_args.csv_dir, "write one CSV raster per field");
    field_cmd->add_option("--geojson-dir", field_args.geojson_dir, "write one GeoJSON raster per field");
    field_cmd->add_option("--threshold", field_args.thresholds, "distance>T or distance<T probability raster, repeatable");

    QueryArgs query_args;
    auto* query_cmd = app.add_subcommand("query", "Evaluate a probabilistic logic query over a StaR Map");
    query_cmd->add_option("--program", query_args.program, "program file")->required();
    query_cmd->add_option("--query", query_args.query, "query atom, e.g. airspace(X)")->required();
    query_cmd->add_option("--star", query_args.star, "StaR Map archive from 'field'");
    query_cmd->add_option("--at", query_args.at, "single point x,y")->delimiter(',')->expected(2);
    query_cmd->add_option("--resolution", query_args.resolution, "raster nodes per side")->capture_default_str();
    query_cmd->add_option("--extent", query_args.extent, "min_x,min_y,max_x,max_y")->delimiter(',')->expected(4);
    query_cmd->add_option("--method", query_args.method, "auto | exact | mc")->capture_default_str();
    query_cmd->add_option("--mc-samples", query_args.mc_samples, "Monte-Carlo samples");
    query_cmd->add_option("--seed", query_args.seed, "master seed")->capture_default_str();
    query_cmd->add_option("--csv", query_args.csv, "probability raster CSV");
    query_cmd->add_option("--geojson", query_args.geojson, "probability raster GeoJSON");
    query_cmd->add_option("--origin", query_args.origin, "lat,lon for GeoJSON without a source map")->delimiter(',')->expected(2);

    RenderArgs render_args;
    auto* render_cmd = app.add_subcommand("render", "Render a raster CSV as a PPM heatmap");
    render_cmd->add_option("--input", render_args.input, "raster CSV")->required();
    render_cmd->add_option("--output", render_args.output, "PPM file")->required();
    render_cmd->add_option("--seed", render_args.seed, "recorded in metadata");

    BenchArgs bench_args;
    auto* bench_cmd = app.add_subcommand("bench", "Grid-resolution and GP-refinement sweeps against a dense reference");
    add_uam(bench_cmd, bench_args.uam);
    bench_cmd->add_option("--tag", bench_args.tag, "distance tag")->capture_default_str();
    bench_cmd->add_option("--reference", bench_args.reference, "reference nodes per side (512 for the full-size run)")->capture_default_str();
    bench_cmd->add_option("--resolutions", bench_args.resolutions, "grid sweep")->delimiter(',')->capture_default_str();
    bench_cmd->add_option("--seed-points", bench_args.seed_points, "gp seed points")->capture_default_str();
    bench_cmd->add_option("--batch", bench_args.batch, "gp batch")->capture_default_str();
    bench_cmd->add_option("--rounds", bench_args.rounds, "gp rounds")->capture_default_str();
    bench_cmd->add_option("--candidates", bench_args.candidates, "gp candidate grid per side")->capture_default_str();
    bench_cmd->add_flag("--tune", bench_args.tune, "tune the gp kernel");
    bench_cmd->add_option("--samples", bench_args.samples, "sampled maps N")->capture_default_str();
    bench_cmd->add_option("--repeats", bench_args.repeats, "timing repeats per grid (fastest kept)")->capture_default_str();
    bench_cmd->add_option("--seed", bench_args.seed, "master seed")->capture_default_str();
    bench_cmd->add_option("--output", bench_args.output, "CSV file (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Help and version exit 0; usage errors share the input-error code.
        return app.exit(e) == 0 ? kOk : kInputError;
    }

    try {
        if (*ingest_cmd) {
            try {
                return guarded("ingest", [&] { return run_ingest(ingest_args); });
            } catch (const EmptyMapError&) {
                return kEmptyMap;
            } catch (const std::exception&) {
                return kInputError;
            }
        }
        if (*field_cmd) {
            try {
                return guarded("field", [&] { return run_field(field_args); });
            } catch (const std::exception&) {
                return kFieldFailure;
            }
        }
        if (*query_cmd) {
            try {
                return guarded("query", [&] { return run_query(query_args); });
            } catch (const logic::ProgramError&) {
                return kProgramError;
            } catch (const FieldError&) {
                return kMissingField;
            } catch (const MissingTagError&) {
                return kMissingField;
            } catch (const std::exception&) {
                return kInputError;
            }
        }
        if (*render_cmd) {
            try {
                return guarded("render", [&] { return run_render(render_args); });
            } catch (const std::exception&) {
                return kFieldFailure;
            }
        }
        if (*bench_cmd) {
            try {
                return guarded("bench", [&] { return run_bench(bench_args); });
            } catch (const std::exception&) {
                return kFieldFailure;
            }
        }
    } catch (...) {
        return 1;
    }
    return 1;
}
