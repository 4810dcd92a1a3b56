#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "starmap/errors.hpp"
#include "starmap/geometry.hpp"
#include "starmap/gp.hpp"
#include "starmap/parallel.hpp"
#include "starmap/raster.hpp"
#include "starmap/relations.hpp"
#include "starmap/uam.hpp"

namespace starmap {

enum class Backend { raster, gp };

inline const char* to_string(Backend b) { return b == Backend::raster ? "raster" : "gp"; }

inline Backend parse_backend(const std::string& s) {
    if (s == "raster") return Backend::raster;
    if (s == "gp") return Backend::gp;
    throw InvalidArgument("unknown backend '" + s + "'");
}

struct FieldKey {
    Relation relation = Relation::distance;
    Tag tag;
    int param_index = 0;

    friend auto operator<=>(const FieldKey&, const FieldKey&) = default;
};

inline std::string to_string(const FieldKey& k) {
    return std::string(to_string(k.relation)) + "/" + k.tag + "/" + parameter_name(k.relation, k.param_index);
}

struct SampleKey {
    Relation relation = Relation::distance;
    Tag tag;
    Point location;

    friend auto operator<=>(const SampleKey&, const SampleKey&) = default;
};

// Scalar field of one distribution parameter of one (relation, tag) pair.
// Bernoulli p is clamped to [0, 1] and variances to >= 0 on evaluation.
class ParamField {
public:
    using Approximator = std::variant<Raster, GpModel>;

    ParamField(FieldKey key, BBox extent, Approximator approximator, std::string provenance = {})
        : key_(std::move(key)), extent_(extent), approximator_(std::move(approximator)), provenance_(std::move(provenance)) {
        if (key_.param_index < 0 || key_.param_index >= parameter_count(key_.relation))
            throw InvalidArgument("parameter index out of range for " + std::string(to_string(key_.relation)));
    }

    const FieldKey& key() const { return key_; }
    Relation relation() const { return key_.relation; }
    const Tag& tag() const { return key_.tag; }
    int param_index() const { return key_.param_index; }
    const BBox& extent() const { return extent_; }
    const std::string& provenance() const { return provenance_; }
    Backend backend() const { return std::holds_alternative<Raster>(approximator_) ? Backend::raster : Backend::gp; }
    const Approximator& approximator() const { return approximator_; }
    const Raster& raster() const { return std::get<Raster>(approximator_); }
    const GpModel& gp() const { return std::get<GpModel>(approximator_); }

    double clamp(double v) const {
        if (signature_of(key_.relation) == Signature::categorical) return std::clamp(v, 0.0, 1.0);
        if (key_.param_index == 1) return std::max(v, 0.0);
        return v;
    }

    double evaluate(Point x) const {
        if (const auto* r = std::get_if<Raster>(&approximator_)) return clamp(r->evaluate(x));
        return clamp(std::get<GpModel>(approximator_).predict(x).mean);
    }

    std::vector<double> evaluate(std::span<const Point> xs) const {
        std::vector<double> out;
        out.reserve(xs.size());
        if (const auto* r = std::get_if<Raster>(&approximator_)) {
            for (const auto& x : xs) out.push_back(clamp(r->evaluate(x)));
        } else {
            for (const double m : std::get<GpModel>(approximator_).predict_mean(xs)) out.push_back(clamp(m));
        }
        return out;
    }

private:
    FieldKey key_;
    BBox extent_;
    Approximator approximator_;
    std::string provenance_;
};

// Statistical relational map: per-location relation samples plus the fitted
// parameter fields. All fields of one StarMap come from one shared MapCollection.
struct StarMap {
    std::map<SampleKey, RelationSamples> sample_sets;
    std::map<FieldKey, ParamField> fields;
    std::shared_ptr<const UncertaintyAnnotatedMap> source;
    std::size_t n_maps = 0;
    std::uint64_t seed = 0;
    OverOptions over;

    bool has_field(const FieldKey& key) const { return fields.contains(key); }

    const ParamField& field(const FieldKey& key) const {
        const auto it = fields.find(key);
        if (it == fields.end()) throw MissingFieldError("no field for " + to_string(key));
        return it->second;
    }

    void put(ParamField f) {
        auto key = f.key();
        fields.insert_or_assign(std::move(key), std::move(f));
    }

    void put(RelationSamples s) {
        SampleKey key{s.relation, s.tag, s.location};
        sample_sets.insert_or_assign(std::move(key), std::move(s));
    }
};

// A StarMap bound to the collection its fields will be fit from.
inline StarMap make_star_map(const MapCollection& w, const OverOptions& over = {}) {
    StarMap s;
    s.source = w.source;
    s.n_maps = w.size();
    s.seed = w.seed;
    s.over = over;
    return s;
}

inline void require_tag(const MapCollection& w, const Tag& tag) {
    if (w.maps.empty()) throw InvalidArgument("map collection is empty");
    if (!w.maps.front().has_tag(tag)) throw MissingTagError(tag);
}

// Moment-matched parameters at each point: result[param][point]. Optionally
// keeps the raw samples.
inline std::vector<std::vector<double>> sample_parameters(const MapCollection& w, Relation relation, const Tag& tag,
                                                          std::span<const Point> points, const OverOptions& over = {},
                                                          std::vector<RelationSamples>* keep = nullptr) {
    require_tag(w, tag);
    if (signature_of(relation) == Signature::quantitative && w.size() < 2)
        throw InvalidArgument("gaussian relations need at least 2 sampled maps");
    const int e = parameter_count(relation);
    std::vector<std::vector<double>> params(static_cast<std::size_t>(e), std::vector<double>(points.size()));
    if (keep) keep->assign(points.size(), RelationSamples{});
    parallel_for(points.size(), [&](std::size_t i) {
        auto samples = sample_relation(relation, points[i], tag, w, over);
        const auto values = parameters(match_moments(samples));
        for (int k = 0; k < e; ++k) params[static_cast<std::size_t>(k)][i] = values[static_cast<std::size_t>(k)];
        if (keep) (*keep)[i] = std::move(samples);
    });
    return params;
}

struct RasterOptions {
    bool keep_samples = true;
};

// Samples the relation at every node of grid over the shared collection and
// stores one raster field per distribution parameter.
inline void build_raster(StarMap& star, const MapCollection& w, Relation relation, const Tag& tag, const GridSpec& grid,
                         const RasterOptions& options = {}) {
    grid.validate();
    const auto nodes = grid.nodes();
    std::vector<RelationSamples> samples;
    const auto params = sample_parameters(w, relation, tag, nodes, star.over, options.keep_samples ? &samples : nullptr);
    const std::string provenance = "raster " + std::to_string(grid.rows) + "x" + std::to_string(grid.cols) + " nodes, N=" +
                                   std::to_string(w.size()) + ", seed=" + std::to_string(w.seed);
    for (int k = 0; k < parameter_count(relation); ++k)
        star.put(ParamField({relation, tag, k}, grid.extent, Raster(grid, params[static_cast<std::size_t>(k)]), provenance));
    for (auto& s : samples) star.put(std::move(s));
}

// Self-contained variant: samples a fresh collection of n_samples maps.
inline StarMap build_raster(std::shared_ptr<const UncertaintyAnnotatedMap> uam, Relation relation, const Tag& tag,
                            const BBox& extent, std::size_t rows, std::size_t cols, std::size_t n_samples, std::uint64_t seed,
                            const OverOptions& over = {}) {
    const auto w = sample_collection(std::move(uam), n_samples, seed);
    StarMap star = make_star_map(w, over);
    build_raster(star, w, relation, tag, GridSpec{extent, rows, cols});
    return star;
}

// Mean absolute difference between field and reference over the reference's
// grid nodes that lie inside the field's extent.
inline double raster_mae(const ParamField& field, const ParamField& reference) {
    if (field.key() != reference.key()) throw InvalidArgument("raster_mae: fields differ in relation, tag or parameter");
    if (reference.backend() != Backend::raster) throw InvalidArgument("raster_mae: reference must be a raster field");
    const Raster& ref = reference.raster();
    const BBox& e = field.extent();
    const double tol = 1e-9 * std::max({1.0, e.width(), e.height()});
    std::vector<Point> pts;
    std::vector<double> truth;
    const auto nodes = ref.grid().nodes();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (e.contains(nodes[i], tol)) {
            pts.push_back(nodes[i]);
            truth.push_back(ref[i]);
        }
    }
    if (pts.empty()) throw InvalidArgument("raster_mae: extents do not overlap");
    const auto est = field.evaluate(pts);
    double sum = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) sum += std::abs(est[i] - truth[i]);
    return sum / static_cast<double>(pts.size());
}

struct RefineOptions {
    std::size_t batch = 16;
    std::size_t rounds = 0;
};

// Indices of the `batch` candidates with the largest predictive stddev; ties go
// to the earlier candidate.
inline std::vector<std::size_t> select_uncertain(const GpModel& model, std::span<const Point> candidates, std::size_t batch) {
    if (candidates.empty()) throw InvalidArgument("refinement needs candidates");
    if (batch == 0) throw InvalidArgument("refinement batch must be >= 1");
    const auto pred = model.predict(candidates);
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t k = std::min(batch, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), [&](std::size_t a, std::size_t b) {
        if (pred[a].stddev != pred[b].stddev) return pred[a].stddev > pred[b].stddev;
        return a < b;
    });
    order.resize(k);
    return order;
}

using RefineObserver = std::function<void(const GpModel&, std::size_t round)>;

// Confidence-guided refinement of one parameter model: each round samples the
// relation at the least certain candidates over the shared collection and
// refits with unchanged hyperparameters. observer sees the model after each round.
inline GpModel gp_refine(GpModel model, const MapCollection& w, Relation relation, const Tag& tag, int param_index,
                         std::span<const Point> candidates, const RefineOptions& options, const OverOptions& over = {},
                         const RefineObserver& observer = {}) {
    if (candidates.empty()) throw InvalidArgument("refinement needs candidates");
    if (options.batch == 0) throw InvalidArgument("refinement batch must be >= 1");
    for (std::size_t round = 1; round <= options.rounds; ++round) {
        const auto chosen = select_uncertain(model, candidates, options.batch);
        std::vector<Point> pts;
        for (const auto i : chosen) pts.push_back(candidates[i]);
        const auto params = sample_parameters(w, relation, tag, pts, over);
        model = model.extended(pts, params.at(static_cast<std::size_t>(param_index)));
        if (observer) observer(model, round);
    }
    return model;
}

struct GpBuildOptions {
    std::size_t seed_points = 256;
    std::uint64_t seed = 0;  // seed-point placement
    RefineOptions refine{16, 0};
    std::size_t candidate_resolution = 64;  // refinement candidates: square grid over the extent
    bool tune = false;                      // marginal-likelihood hyperparameter search
    std::optional<KernelConfig> kernel;     // overrides the defaults for every parameter
};

// Uniform random points in extent from a dedicated stream.
inline std::vector<Point> random_points(const BBox& extent, std::size_t n, std::uint64_t seed) {
    auto rng = substream(seed, 0x5eed);
    std::uniform_real_distribution<double> ux(extent.min_x, extent.max_x);
    std::uniform_real_distribution<double> uy(extent.min_y, extent.max_y);
    std::vector<Point> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = ux(rng);
        out.push_back({x, uy(rng)});
    }
    return out;
}

// Fits one GP field per distribution parameter from random seed points, then
// runs confidence-guided refinement driven by the first parameter's model; new
// support points are shared by every parameter.
inline void build_gp(StarMap& star, const MapCollection& w, Relation relation, const Tag& tag, const BBox& extent,
                     const GpBuildOptions& options = {}) {
    if (options.seed_points < 2) throw InvalidArgument("gp needs at least 2 seed points");
    const int e = parameter_count(relation);
    std::vector<Point> support = random_points(extent, options.seed_points, options.seed);
    std::vector<RelationSamples> samples;
    auto params = sample_parameters(w, relation, tag, support, star.over, &samples);

    std::vector<KernelConfig> kernels;
    for (int k = 0; k < e; ++k) {
        const auto& targets = params[static_cast<std::size_t>(k)];
        KernelConfig cfg = options.kernel ? *options.kernel : default_kernel(targets, extent, options.seed_points);
        if (options.tune) cfg = tune_kernel(support, targets, cfg);
        kernels.push_back(cfg);
    }
    const auto fit = [&](int k) { return GpModel(support, params[static_cast<std::size_t>(k)], kernels[static_cast<std::size_t>(k)]); };

    if (options.refine.rounds > 0) {
        const auto candidates = square_grid(extent, options.candidate_resolution).nodes();
        for (std::size_t round = 0; round < options.refine.rounds; ++round) {
            const auto chosen = select_uncertain(fit(0), candidates, options.refine.batch);
            std::vector<Point> pts;
            for (const auto i : chosen) pts.push_back(candidates[i]);
            std::vector<RelationSamples> fresh;
            const auto more = sample_parameters(w, relation, tag, pts, star.over, &fresh);
            support.insert(support.end(), pts.begin(), pts.end());
            for (int k = 0; k < e; ++k) {
                auto& dst = params[static_cast<std::size_t>(k)];
                const auto& src = more[static_cast<std::size_t>(k)];
                dst.insert(dst.end(), src.begin(), src.end());
            }
            for (auto& s : fresh) samples.push_back(std::move(s));
        }
    }

    const std::string provenance = "gp " + std::to_string(options.seed_points) + " seed points + " +
                                   std::to_string(options.refine.rounds) + "x" + std::to_string(options.refine.batch) +
                                   " refined, N=" + std::to_string(w.size()) + ", seed=" + std::to_string(w.seed);
    for (int k = 0; k < e; ++k) star.put(ParamField({relation, tag, k}, extent, fit(k), provenance));
    for (auto& s : samples) star.put(std::move(s));
}

inline double evaluate_field(const StarMap& star, Relation relation, const Tag& tag, int param_index, Point x) {
    return star.field({relation, tag, param_index}).evaluate(x);
}

inline Gaussian evaluate_gaussian(const StarMap& star, const Tag& tag, Point x) {
    return {evaluate_field(star, Relation::distance, tag, 0, x), evaluate_field(star, Relation::distance, tag, 1, x)};
}

// P(distance to tag `op` threshold) at every node of grid, from the mean and variance fields.
inline Raster threshold_raster(const StarMap& star, const Tag& tag, Comparison op, double threshold, const GridSpec& grid) {
    Raster out(grid);
    const auto nodes = grid.nodes();
    for (std::size_t i = 0; i < nodes.size(); ++i) out[i] = prob_threshold(evaluate_gaussian(star, tag, nodes[i]), op, threshold);
    return out;
}

// Samples any field onto a grid.
inline Raster field_raster(const ParamField& field, const GridSpec& grid) {
    return Raster(grid, field.evaluate(grid.nodes()));
}

}  // namespace starmap
