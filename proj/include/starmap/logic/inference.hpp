#pragma once

#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "starmap/fields.hpp"
#include "starmap/logic/parser.hpp"
#include "starmap/logic/program.hpp"
#include "starmap/parallel.hpp"
#include "starmap/raster.hpp"
#include "starmap/relations.hpp"
#include "starmap/uam.hpp"

namespace starmap::logic {

// A program specialised to one location: every variable is replaced by the
// location constant and every over/distance atom it uses is an explicit fact.
struct GroundedProgram {
    Program program;
    Point location;

    friend bool operator==(const GroundedProgram&, const GroundedProgram&) = default;
};

inline Atom substitute_location(Atom a) {
    for (auto& t : a.args)
        if (is_variable(t)) t = kLocationConstant;
    return a;
}

inline Statement substitute_location(Statement st) {
    std::visit(
        [](auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Rule>) {
                s.head = substitute_location(std::move(s.head));
                for (auto& l : s.body) l.atom = substitute_location(std::move(l.atom));
            } else {
                s.atom = substitute_location(std::move(s.atom));
            }
        },
        st);
    return st;
}

// over(x, tag) / distance(x, tag) are read from the StaR Map.
inline std::optional<Relation> spatial_relation(const Atom& a) {
    if (a.args.size() != 2 || a.args[0] != kLocationConstant) return std::nullopt;
    if (a.predicate == "over") return Relation::over;
    if (a.predicate == "distance") return Relation::distance;
    return std::nullopt;
}

// Substitutes the location and binds the spatial atoms used in rule bodies to
// the StaR Map's fields at x. Facts already present in the program take
// precedence. Bound facts are placed before the original statements, in order
// of first use. Only one location variable is supported: all variables bind to x.
inline GroundedProgram ground_program(const Program& p, const StarMap& star, Point x) {
    Program substituted;
    std::set<Atom> defined;
    for (const auto& st : p.statements) {
        auto s = substitute_location(st);
        std::visit(
            [&](const auto& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, Rule>) {
                    defined.insert(v.head);
                } else {
                    defined.insert(v.atom);
                }
            },
            s);
        substituted.statements.push_back(std::move(s));
    }

    GroundedProgram g{{}, x};
    for (const auto& st : substituted.statements) {
        const auto* r = std::get_if<Rule>(&st);
        if (!r) continue;
        for (const auto& lit : r->body) {
            const auto relation = spatial_relation(lit.atom);
            if (!relation || defined.contains(lit.atom)) continue;
            const Tag& tag = lit.atom.args[1];
            if (*relation == Relation::over) {
                g.program.statements.push_back(ProbabilisticFact{evaluate_field(star, Relation::over, tag, 0, x), lit.atom});
            } else {
                const Gaussian d = evaluate_gaussian(star, tag, x);
                g.program.statements.push_back(DistributionalFact{lit.atom, d.mean, d.stddev()});
            }
            defined.insert(lit.atom);
        }
    }
    for (auto& st : substituted.statements) g.program.statements.push_back(std::move(st));
    return g;
}

enum class Method { automatic, exact, monte_carlo };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::automatic: return "auto";
        case Method::exact: return "exact";
        case Method::monte_carlo: return "monte_carlo";
    }
    return "?";
}

inline Method parse_method(const std::string& s) {
    if (s == "auto" || s == "automatic") return Method::automatic;
    if (s == "exact") return Method::exact;
    if (s == "mc" || s == "monte_carlo") return Method::monte_carlo;
    throw InvalidArgument("unknown inference method '" + s + "'");
}

inline constexpr std::size_t kDefaultQuerySamples = 1'000'000;
inline constexpr std::size_t kDefaultFieldSamples = 10'000;

struct QueryOptions {
    Method method = Method::automatic;
    std::size_t mc_samples = kDefaultQuerySamples;
    std::uint64_t seed = 0;
};

struct QueryResult {
    Atom query;
    double probability = 0.0;
    Method method = Method::exact;  // exact or monte_carlo
    std::size_t mc_samples = 0;
    std::optional<double> mc_stderr;
};

// Proof structure reachable from one query atom, with facts and derived atoms
// numbered densely.
class Circuit {
public:
    struct Fact {
        bool continuous = false;
        double probability = 0.0;  // boolean facts
        double mean = 0.0;         // normal facts
        double stddev = 0.0;
    };
    enum class LitKind { fact, comparison, derived };
    struct Lit {
        LitKind kind;
        std::size_t index;
        Threshold threshold;
    };
    struct Derived {
        std::optional<std::size_t> own_fact;  // a probabilistic fact on the head itself
        std::vector<std::vector<Lit>> bodies;
    };

    Circuit(const Program& program, const Atom& query) {
        for (const auto& st : program.statements) {
            if (const auto* r = std::get_if<Rule>(&st)) {
                rules_[r->head].push_back(r);
            } else if (const auto* d = std::get_if<DistributionalFact>(&st)) {
                dfacts_[d->atom] = d;
            } else {
                const auto& pf = std::get<ProbabilisticFact>(st);
                pfacts_[pf.atom] = &pf;
            }
        }
        const Atom q = substitute_location(query);
        if (dfacts_.contains(q)) throw ProgramError("query " + to_string(q) + " names a continuous fact; compare it against a threshold");
        if (!rules_.contains(q) && !pfacts_.contains(q)) throw ProgramError("undefined atom " + to_string(q));
        root_ = derived(q);
    }

    std::span<const Fact> facts() const { return facts_; }

    // True if no fact occurs more than once across the expanded proof tree.
    bool independent_proofs() const {
        std::vector<std::optional<std::map<std::size_t, std::size_t>>> memo(derived_.size());
        const auto counts = occurrences(root_, memo);
        for (const auto& [_, c] : counts)
            if (c > 1) return false;
        return true;
    }

    double exact() const {
        std::vector<std::optional<double>> memo(derived_.size());
        return exact(root_, memo);
    }

    // One possible world; fact values drawn in index order.
    bool sample(RandomStream& rng, std::vector<double>& values, std::vector<signed char>& memo) const {
        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        std::normal_distribution<double> unit(0.0, 1.0);
        values.resize(facts_.size());
        for (std::size_t i = 0; i < facts_.size(); ++i) {
            const Fact& f = facts_[i];
            values[i] = f.continuous ? f.mean + f.stddev * unit(rng) : (uniform(rng) < f.probability ? 1.0 : 0.0);
        }
        memo.assign(derived_.size(), -1);
        return holds(root_, values, memo);
    }

private:
    std::size_t fact_index(const Atom& a, bool continuous) {
        const auto it = fact_ids_.find(a);
        if (it != fact_ids_.end()) return it->second;
        Fact f;
        f.continuous = continuous;
        if (continuous) {
            const auto* d = dfacts_.at(a);
            f.mean = d->mean;
            f.stddev = d->stddev;
        } else {
            f.probability = pfacts_.at(a)->probability;
        }
        facts_.push_back(f);
        return fact_ids_[a] = facts_.size() - 1;
    }

    std::size_t derived(const Atom& a) {
        if (const auto it = derived_ids_.find(a); it != derived_ids_.end()) return it->second;
        const std::size_t id = derived_.size();
        derived_ids_[a] = id;
        derived_.emplace_back();
        Derived d;
        if (pfacts_.contains(a)) d.own_fact = fact_index(a, false);
        if (const auto it = rules_.find(a); it != rules_.end()) {
            for (const Rule* r : it->second) {
                std::vector<Lit> body;
                for (const auto& l : r->body) body.push_back(literal(l));
                d.bodies.push_back(std::move(body));
            }
        }
        derived_[id] = std::move(d);
        return id;
    }

    Lit literal(const Literal& l) {
        const Atom& a = l.atom;
        const bool continuous = dfacts_.contains(a);
        if (l.threshold) {
            if (!continuous) throw ProgramError("comparison on " + to_string(a) + ", which is not a normal-distributed fact");
            return {LitKind::comparison, fact_index(a, true), *l.threshold};
        }
        if (continuous) throw ProgramError("continuous fact " + to_string(a) + " used without a comparison");
        if (rules_.contains(a)) return {LitKind::derived, derived(a), {}};
        if (pfacts_.contains(a)) return {LitKind::fact, fact_index(a, false), {}};
        throw ProgramError("undefined atom " + to_string(a));
    }

    double literal_probability(const Lit& l, std::vector<std::optional<double>>& memo) const {
        switch (l.kind) {
            case LitKind::fact: return facts_[l.index].probability;
            case LitKind::comparison: {
                const Fact& f = facts_[l.index];
                return prob_threshold(Gaussian{f.mean, f.stddev * f.stddev}, l.threshold.op, l.threshold.value);
            }
            case LitKind::derived: return exact(l.index, memo);
        }
        return 0.0;
    }

    // Independent alternatives combine by noisy-or; body literals by product.
    double exact(std::size_t id, std::vector<std::optional<double>>& memo) const {
        if (memo[id]) return *memo[id];
        const Derived& d = derived_[id];
        double none = 1.0;
        if (d.own_fact) none *= 1.0 - facts_[*d.own_fact].probability;
        for (const auto& body : d.bodies) {
            double all = 1.0;
            for (const auto& l : body) all *= literal_probability(l, memo);
            none *= 1.0 - all;
        }
        const double p = 1.0 - none;
        memo[id] = p;
        return p;
    }

    std::map<std::size_t, std::size_t> occurrences(std::size_t id,
                                                   std::vector<std::optional<std::map<std::size_t, std::size_t>>>& memo) const {
        if (memo[id]) return *memo[id];
        std::map<std::size_t, std::size_t> counts;
        const Derived& d = derived_[id];
        if (d.own_fact) ++counts[*d.own_fact];
        for (const auto& body : d.bodies) {
            for (const auto& l : body) {
                if (l.kind == LitKind::derived) {
                    for (const auto& [f, c] : occurrences(l.index, memo)) counts[f] += c;
                } else {
                    ++counts[l.index];
                }
            }
        }
        memo[id] = counts;
        return counts;
    }

    bool holds(std::size_t id, const std::vector<double>& values, std::vector<signed char>& memo) const {
        if (memo[id] >= 0) return memo[id] != 0;
        const Derived& d = derived_[id];
        bool result = d.own_fact && values[*d.own_fact] != 0.0;
        for (std::size_t b = 0; !result && b < d.bodies.size(); ++b) {
            bool all = true;
            for (const auto& l : d.bodies[b]) {
                switch (l.kind) {
                    case LitKind::fact: all = values[l.index] != 0.0; break;
                    case LitKind::comparison: {
                        // Same tie rule as prob_threshold: a value equal to the threshold is "less".
                        const bool greater = values[l.index] > l.threshold.value;
                        all = l.threshold.op == Comparison::greater ? greater : !greater;
                        break;
                    }
                    case LitKind::derived: all = holds(l.index, values, memo); break;
                }
                if (!all) break;
            }
            result = all;
        }
        memo[id] = result ? 1 : 0;
        return result;
    }

    std::map<Atom, std::vector<const Rule*>> rules_;
    std::map<Atom, const DistributionalFact*> dfacts_;
    std::map<Atom, const ProbabilisticFact*> pfacts_;
    std::vector<Fact> facts_;
    std::map<Atom, std::size_t> fact_ids_;
    std::vector<Derived> derived_;
    std::map<Atom, std::size_t> derived_ids_;
    std::size_t root_ = 0;
};

// Success probability of `atom` under independent facts. Exact evaluation needs
// every fact to occur at most once across the proof tree; automatic falls back
// to Monte-Carlo otherwise, and an explicit exact request is an error.
inline QueryResult query(const GroundedProgram& g, const Atom& atom, const QueryOptions& options = {}) {
    const Circuit circuit(g.program, atom);
    QueryResult result;
    result.query = substitute_location(atom);
    const bool admissible = circuit.independent_proofs();
    if (options.method == Method::exact && !admissible)
        throw ProgramError("exact inference requested but facts are shared between proofs of " + to_string(result.query));
    if (options.method != Method::monte_carlo && admissible) {
        result.method = Method::exact;
        result.probability = std::clamp(circuit.exact(), 0.0, 1.0);
        return result;
    }
    if (options.mc_samples == 0) throw InvalidArgument("monte-carlo inference needs at least one sample");
    auto rng = substream(options.seed, 0);
    std::vector<double> values;
    std::vector<signed char> memo;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < options.mc_samples; ++i) hits += circuit.sample(rng, values, memo);
    const double m = static_cast<double>(options.mc_samples);
    const double p = static_cast<double>(hits) / m;
    result.method = Method::monte_carlo;
    result.probability = p;
    result.mc_samples = options.mc_samples;
    result.mc_stderr = std::sqrt(p * (1.0 - p) / m);
    return result;
}

// Evaluates the query independently at every grid node; Monte-Carlo nodes use
// substream(seed, node index). Node failures are collected and reported
// together, keeping the error category of the first failure.
inline Raster query_field(const Program& p, const StarMap& star, const Atom& atom, const GridSpec& grid,
                          const QueryOptions& options = {Method::automatic, kDefaultFieldSamples, 0}) {
    grid.validate();
    Raster out(grid);
    std::vector<std::exception_ptr> failures(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) {
        try {
            QueryOptions node = options;
            node.seed = substream(options.seed, i)();
            out[i] = query(ground_program(p, star, grid.node(i)), atom, node).probability;
        } catch (const Error&) {
            failures[i] = std::current_exception();
        }
    });
    std::size_t failed = 0;
    std::size_t first = 0;
    for (std::size_t i = failures.size(); i-- > 0;) {
        if (failures[i]) {
            ++failed;
            first = i;
        }
    }
    if (failed == 0) return out;
    const Point at = grid.node(first);
    std::string where = std::to_string(failed) + " of " + std::to_string(grid.size()) + " nodes failed; first at node (" +
                        std::to_string(first / grid.cols) + ", " + std::to_string(first % grid.cols) + ") = (" +
                        std::to_string(at.x) + ", " + std::to_string(at.y) + "): ";
    try {
        std::rethrow_exception(failures[first]);
    } catch (const ProgramError& e) {
        throw ProgramError(where + e.what());
    } catch (const MissingFieldError& e) {
        throw MissingFieldError(where + e.what());
    } catch (const OutOfExtentError& e) {
        throw OutOfExtentError(where + e.what());
    } catch (const FieldError& e) {
        throw FieldError(where + e.what());
    } catch (const MissingTagError& e) {
        throw MissingFieldError(where + e.what());
    } catch (const Error& e) {
        throw Error(where + e.what());
    }
}

}  // namespace starmap::logic
