#pragma once

#include <charconv>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "starmap/errors.hpp"
#include "starmap/relations.hpp"

namespace starmap::logic {

// Terms are identifiers; an identifier starting with an upper-case letter or
// '_' is a variable.
inline bool is_variable(const std::string& term) {
    return !term.empty() && (term[0] == '_' || (term[0] >= 'A' && term[0] <= 'Z'));
}

// Constant that stands for the query location after grounding.
inline const std::string kLocationConstant = "x";

struct Atom {
    std::string predicate;
    std::vector<std::string> args;

    std::string key() const { return predicate + "/" + std::to_string(args.size()); }
    bool is_ground() const {
        for (const auto& a : args)
            if (is_variable(a)) return false;
        return true;
    }

    friend bool operator==(const Atom&, const Atom&) = default;
    friend auto operator<=>(const Atom&, const Atom&) = default;
};

struct Threshold {
    Comparison op = Comparison::less;
    double value = 0.0;

    friend bool operator==(const Threshold&, const Threshold&) = default;
};

// An atom, or a comparison of a continuous atom against a number.
struct Literal {
    Atom atom;
    std::optional<Threshold> threshold;

    friend bool operator==(const Literal&, const Literal&) = default;
};

// atom ~ normal(mean, stddev).
struct DistributionalFact {
    Atom atom;
    double mean = 0.0;
    double stddev = 0.0;

    friend bool operator==(const DistributionalFact&, const DistributionalFact&) = default;
};

// p :: atom.
struct ProbabilisticFact {
    double probability = 1.0;
    Atom atom;

    friend bool operator==(const ProbabilisticFact&, const ProbabilisticFact&) = default;
};

struct Rule {
    Atom head;
    std::vector<Literal> body;

    friend bool operator==(const Rule&, const Rule&) = default;
};

using Statement = std::variant<DistributionalFact, ProbabilisticFact, Rule>;

struct Program {
    std::vector<Statement> statements;

    friend bool operator==(const Program&, const Program&) = default;
};

// Syntax or semantic error in a program, with a 1-based source location when known.
class ProgramError : public Error {
public:
    ProgramError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
        : Error(line ? what + " at line " + std::to_string(line) + ", column " + std::to_string(column) : what),
          line_(line),
          column_(column) {}

    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

// Shortest decimal form that parses back to the same double.
inline std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string to_string(const Atom& a) {
    std::string s = a.predicate + "(";
    for (std::size_t i = 0; i < a.args.size(); ++i) s += (i ? ", " : "") + a.args[i];
    return s + ")";
}

inline std::string to_string(const Literal& l) {
    std::string s = to_string(l.atom);
    if (l.threshold) s += std::string(l.threshold->op == Comparison::less ? " < " : " > ") + format_number(l.threshold->value);
    return s;
}

inline std::string to_string(const Statement& st) {
    return std::visit(
        [](const auto& s) -> std::string {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, DistributionalFact>) {
                return to_string(s.atom) + " ~ normal(" + format_number(s.mean) + ", " + format_number(s.stddev) + ").";
            } else if constexpr (std::is_same_v<T, ProbabilisticFact>) {
                return format_number(s.probability) + "::" + to_string(s.atom) + ".";
            } else {
                std::string out = to_string(s.head) + " :- ";
                for (std::size_t i = 0; i < s.body.size(); ++i) out += (i ? ", " : "") + to_string(s.body[i]);
                return out + ".";
            }
        },
        st);
}

// Canonical text form, one statement per line; parses back to an equal Program.
inline std::string to_string(const Program& p) {
    std::string out;
    for (const auto& st : p.statements) out += to_string(st) + "\n";
    return out;
}

}  // namespace starmap::logic
