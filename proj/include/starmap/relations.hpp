#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include "starmap/errors.hpp"
#include "starmap/geometry.hpp"
#include "starmap/uam.hpp"

namespace starmap {

enum class Relation { over, distance };

// over maps to booleans (categorical), distance to reals (quantitative).
enum class Signature { categorical, quantitative };

inline Signature signature_of(Relation r) {
    return r == Relation::over ? Signature::categorical : Signature::quantitative;
}

inline const char* to_string(Relation r) { return r == Relation::over ? "over" : "distance"; }

inline Relation parse_relation(const std::string& s) {
    if (s == "over") return Relation::over;
    if (s == "distance") return Relation::distance;
    throw InvalidArgument("unknown relation '" + s + "'");
}

// Number of distribution parameters e: Bernoulli has p, Gaussian has mean and variance.
inline int parameter_count(Relation r) { return signature_of(r) == Signature::categorical ? 1 : 2; }

inline const char* parameter_name(Relation r, int index) {
    if (signature_of(r) == Signature::categorical) return "p";
    return index == 0 ? "mean" : "variance";
}

// Categorical samples are stored as exactly 0.0 or 1.0.
struct RelationSamples {
    Relation relation = Relation::distance;
    Tag tag;
    Point location;
    std::vector<double> values;

    friend bool operator==(const RelationSamples&, const RelationSamples&) = default;
};

struct Bernoulli {
    double p = 0.0;
    friend bool operator==(const Bernoulli&, const Bernoulli&) = default;
};

struct Gaussian {
    double mean = 0.0;
    double variance = 0.0;

    double stddev() const { return std::sqrt(variance); }
    friend bool operator==(const Gaussian&, const Gaussian&) = default;
};

using DistributionParams = std::variant<Bernoulli, Gaussian>;

inline double eval_relation(Relation kind, Point x, const Tag& tag, const Map& m, const OverOptions& over = {}) {
    if (kind == Relation::over) return map_over(x, tag, m, over) ? 1.0 : 0.0;
    return map_distance(x, tag, m);
}

inline RelationSamples sample_relation(Relation kind, Point x, const Tag& tag, const MapCollection& w,
                                       const OverOptions& over = {}) {
    RelationSamples s{kind, tag, x, {}};
    s.values.reserve(w.size());
    for (const auto& m : w.maps) s.values.push_back(eval_relation(kind, x, tag, m, over));
    return s;
}

inline Bernoulli match_bernoulli(const RelationSamples& s) {
    if (signature_of(s.relation) != Signature::categorical)
        throw InvalidArgument("match_bernoulli needs categorical samples");
    if (s.values.empty()) throw InvalidArgument("match_bernoulli needs at least one sample");
    std::size_t hits = 0;
    for (const double v : s.values) hits += v != 0.0;
    return {static_cast<double>(hits) / static_cast<double>(s.values.size())};
}

// Sample mean and unbiased (N-1) variance. Computed about the first value so that
// constant input yields exactly that mean and variance 0.
inline Gaussian match_gaussian(const RelationSamples& s) {
    if (signature_of(s.relation) != Signature::quantitative)
        throw InvalidArgument("match_gaussian needs quantitative samples");
    const std::size_t n = s.values.size();
    if (n < 2) throw InvalidArgument("match_gaussian needs at least 2 samples");
    const double shift = s.values.front();
    double sum = 0.0;
    for (const double v : s.values) sum += v - shift;
    const double mean = shift + sum / static_cast<double>(n);
    double ss = 0.0;
    for (const double v : s.values) ss += (v - mean) * (v - mean);
    return {mean, ss / static_cast<double>(n - 1)};
}

inline DistributionParams match_moments(const RelationSamples& s) {
    if (signature_of(s.relation) == Signature::categorical) return match_bernoulli(s);
    return match_gaussian(s);
}

// Parameter vector (p) or (mean, variance) of a matched distribution.
inline std::vector<double> parameters(const DistributionParams& d) {
    if (const auto* b = std::get_if<Bernoulli>(&d)) return {b->p};
    const auto& g = std::get<Gaussian>(d);
    return {g.mean, g.variance};
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

enum class Comparison { greater, less };

// P(X > t) or P(X < t) for X ~ N(mean, variance). At variance 0 the step is
// closed from below: X = t counts as "less".
inline double prob_threshold(const Gaussian& g, Comparison op, double threshold) {
    if (!(g.variance >= 0.0)) throw InvalidArgument("prob_threshold needs variance >= 0");
    if (g.variance == 0.0) {
        const double less = g.mean <= threshold ? 1.0 : 0.0;
        return op == Comparison::less ? less : 1.0 - less;
    }
    const double z = (threshold - g.mean) / g.stddev();
    return op == Comparison::less ? normal_cdf(z) : normal_cdf(-z);
}

inline double prob_threshold(const DistributionParams& d, Comparison op, double threshold) {
    const auto* g = std::get_if<Gaussian>(&d);
    if (!g) throw InvalidArgument("prob_threshold needs a gaussian distribution");
    return prob_threshold(*g, op, threshold);
}

}  // namespace starmap
