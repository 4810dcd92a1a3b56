#pragma once

#include <chrono>
#include <limits>
#include <string>
#include <vector>

#include "starmap/fields.hpp"

// Accuracy/cost sweeps of the two field backends against a dense reference raster.
namespace starmap::bench {

struct Row {
    std::string method;        // "grid" or "gp"
    std::size_t resolution;    // grid: nodes per side; gp: 0
    std::size_t round;         // gp refinement round; grid: 0
    std::size_t points;        // sampled locations
    std::size_t relation_samples;  // points x maps
    double seconds;
    double mae;
};

struct Setup {
    Relation relation = Relation::distance;
    Tag tag = "road";
    int param_index = 0;
    BBox extent;
    std::size_t reference_resolution = 256;
    OverOptions over;
};

// Reference raster over the shared collection.
inline ParamField reference_field(const MapCollection& w, const Setup& s) {
    StarMap star = make_star_map(w, s.over);
    build_raster(star, w, s.relation, s.tag, square_grid(s.extent, s.reference_resolution), {false});
    return star.field({s.relation, s.tag, s.param_index});
}

template <typename F>
double seconds_of(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// One row per resolution. Time is the fastest of `repeats` builds; repeats are
// interleaved across resolutions so slow drifts in machine speed hit every
// resolution alike.
inline std::vector<Row> grid_sweep(const MapCollection& w, const Setup& s, const ParamField& reference,
                                   const std::vector<std::size_t>& resolutions, std::size_t repeats = 3) {
    std::vector<double> best(resolutions.size(), std::numeric_limits<double>::infinity());
    std::vector<StarMap> stars(resolutions.size());
    for (std::size_t r = 0; r < std::max<std::size_t>(repeats, 1); ++r) {
        for (std::size_t i = 0; i < resolutions.size(); ++i) {
            stars[i] = make_star_map(w, s.over);
            best[i] = std::min(best[i], seconds_of([&] {
                                   build_raster(stars[i], w, s.relation, s.tag, square_grid(s.extent, resolutions[i]), {false});
                               }));
        }
    }
    std::vector<Row> rows;
    for (std::size_t i = 0; i < resolutions.size(); ++i) {
        const std::size_t k = resolutions[i];
        const double mae = raster_mae(stars[i].field({s.relation, s.tag, s.param_index}), reference);
        rows.push_back({"grid", k, 0, k * k, k * k * w.size(), best[i], mae});
    }
    return rows;
}

struct GpSweepOptions {
    std::size_t seed_points = 256;
    std::uint64_t seed = 0;
    RefineOptions refine{16, 5};
    std::size_t candidate_resolution = 64;
    bool tune = false;
};

// Round 0 is the seed-point fit; each later row follows one refinement round.
// Times are cumulative and exclude MAE evaluation.
inline std::vector<Row> gp_sweep(const MapCollection& w, const Setup& s, const ParamField& reference, const GpSweepOptions& o) {
    std::vector<Row> rows;
    double elapsed = 0.0;
    std::vector<Point> support;
    std::vector<std::vector<double>> params;
    KernelConfig kernel;
    elapsed += seconds_of([&] {
        support = random_points(s.extent, o.seed_points, o.seed);
        params = sample_parameters(w, s.relation, s.tag, support, s.over);
        const auto& targets = params.at(static_cast<std::size_t>(s.param_index));
        kernel = default_kernel(targets, s.extent, o.seed_points);
        if (o.tune) kernel = tune_kernel(support, targets, kernel);
    });
    const FieldKey key{s.relation, s.tag, s.param_index};
    const auto& targets = params.at(static_cast<std::size_t>(s.param_index));
    const auto t_fit = std::chrono::steady_clock::now();
    GpModel model(support, targets, kernel);
    elapsed += std::chrono::duration<double>(std::chrono::steady_clock::now() - t_fit).count();
    const auto record = [&](const GpModel& m, std::size_t round) {
        const ParamField f(key, s.extent, m, "gp sweep");
        rows.push_back({"gp", 0, round, m.size(), m.size() * w.size(), elapsed, raster_mae(f, reference)});
    };
    record(model, 0);
    const auto candidates = square_grid(s.extent, o.candidate_resolution).nodes();
    auto t_round = std::chrono::steady_clock::now();
    gp_refine(model, w, s.relation, s.tag, s.param_index, candidates, o.refine, s.over, [&](const GpModel& m, std::size_t round) {
        const auto now = std::chrono::steady_clock::now();
        elapsed += std::chrono::duration<double>(now - t_round).count();
        record(m, round);
        t_round = std::chrono::steady_clock::now();
    });
    return rows;
}

}  // namespace starmap::bench
