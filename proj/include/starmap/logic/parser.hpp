#pragma once

#include <cctype>
#include <charconv>
#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "starmap/logic/program.hpp"

namespace starmap::logic {

namespace detail {

enum class TokenKind { ident, number, tilde, implies, annotate, lparen, rparen, comma, period, less, greater, end };

struct Token {
    TokenKind kind;
    std::string text;
    std::size_t line;
    std::size_t column;
};

inline const char* describe(TokenKind k) {
    switch (k) {
        case TokenKind::ident: return "identifier";
        case TokenKind::number: return "number";
        case TokenKind::tilde: return "'~'";
        case TokenKind::implies: return "':-'";
        case TokenKind::annotate: return "'::'";
        case TokenKind::lparen: return "'('";
        case TokenKind::rparen: return "')'";
        case TokenKind::comma: return "','";
        case TokenKind::period: return "'.'";
        case TokenKind::less: return "'<'";
        case TokenKind::greater: return "'>'";
        case TokenKind::end: return "end of input";
    }
    return "?";
}

class Lexer {
public:
    explicit Lexer(std::string_view text) : text_(text) {}

    std::vector<Token> tokenize() {
        std::vector<Token> out;
        for (;;) {
            skip_space_and_comments();
            const std::size_t line = line_, col = col_;
            if (pos_ >= text_.size()) {
                out.push_back({TokenKind::end, "", line, col});
                return out;
            }
            const char c = text_[pos_];
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                const std::size_t start = pos_;
                while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) advance();
                out.push_back({TokenKind::ident, std::string(text_.substr(start, pos_ - start)), line, col});
            } else if (std::isdigit(static_cast<unsigned char>(c)) || (c == '-' && next_is_digit(1)) || (c == '+' && next_is_digit(1))) {
                out.push_back({TokenKind::number, lex_number(), line, col});
            } else if (c == ':' && peek(1) == '-') {
                advance(2);
                out.push_back({TokenKind::implies, ":-", line, col});
            } else if (c == ':' && peek(1) == ':') {
                advance(2);
                out.push_back({TokenKind::annotate, "::", line, col});
            } else {
                TokenKind k;
                switch (c) {
                    case '~': k = TokenKind::tilde; break;
                    case '(': k = TokenKind::lparen; break;
                    case ')': k = TokenKind::rparen; break;
                    case ',': k = TokenKind::comma; break;
                    case '.': k = TokenKind::period; break;
                    case '<': k = TokenKind::less; break;
                    case '>': k = TokenKind::greater; break;
                    default: throw ProgramError(std::string("unexpected character '") + c + "'", line, col);
                }
                advance();
                out.push_back({k, std::string(1, c), line, col});
            }
        }
    }

private:
    char peek(std::size_t ahead) const { return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0'; }
    bool next_is_digit(std::size_t ahead) const { return std::isdigit(static_cast<unsigned char>(peek(ahead))) != 0; }

    void advance(std::size_t n = 1) {
        for (; n > 0 && pos_ < text_.size(); --n, ++pos_) {
            if (text_[pos_] == '\n') {
                ++line_;
                col_ = 1;
            } else {
                ++col_;
            }
        }
    }

    void skip_space_and_comments() {
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else if (c == '%') {
                while (pos_ < text_.size() && text_[pos_] != '\n') advance();
            } else {
                return;
            }
        }
    }

    // [+-]digits[.digits][(e|E)[+-]digits]; a '.' not followed by a digit ends the number.
    std::string lex_number() {
        const std::size_t start = pos_;
        if (text_[pos_] == '-' || text_[pos_] == '+') advance();
        while (next_is_digit(0)) advance();
        if (peek(0) == '.' && next_is_digit(1)) {
            advance();
            while (next_is_digit(0)) advance();
        }
        if ((peek(0) == 'e' || peek(0) == 'E') && (next_is_digit(1) || ((peek(1) == '-' || peek(1) == '+') && next_is_digit(2)))) {
            advance(2);
            while (next_is_digit(0)) advance();
        }
        return std::string(text_.substr(start, pos_ - start));
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;
};

class Parser {
public:
    explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

    Program parse() {
        Program p;
        while (cur().kind != TokenKind::end) {
            const Token& start = cur();
            p.statements.push_back(statement());
            locations.push_back({start.line, start.column});
        }
        return p;
    }

    std::vector<std::pair<std::size_t, std::size_t>> locations;

private:
    const Token& cur() const { return tokens_[pos_]; }

    const Token& expect(TokenKind k) {
        if (cur().kind != k)
            throw ProgramError(std::string("expected ") + describe(k) + " but found " + describe(cur().kind) +
                                   (cur().text.empty() ? "" : " '" + cur().text + "'"),
                               cur().line, cur().column);
        return tokens_[pos_++];
    }

    bool accept(TokenKind k) {
        if (cur().kind != k) return false;
        ++pos_;
        return true;
    }

    double number() {
        const Token& t = expect(TokenKind::number);
        const char* first = t.text.data();
        if (*first == '+') ++first;
        double v = 0.0;
        const auto res = std::from_chars(first, t.text.data() + t.text.size(), v);
        if (res.ec != std::errc() || res.ptr != t.text.data() + t.text.size())
            throw ProgramError("malformed number '" + t.text + "'", t.line, t.column);
        return v;
    }

    Atom atom() {
        Atom a;
        a.predicate = expect(TokenKind::ident).text;
        expect(TokenKind::lparen);
        a.args.push_back(expect(TokenKind::ident).text);
        while (accept(TokenKind::comma)) a.args.push_back(expect(TokenKind::ident).text);
        expect(TokenKind::rparen);
        return a;
    }

    Literal literal() {
        Literal l{atom(), std::nullopt};
        if (accept(TokenKind::less)) {
            l.threshold = Threshold{Comparison::less, number()};
        } else if (accept(TokenKind::greater)) {
            l.threshold = Threshold{Comparison::greater, number()};
        }
        return l;
    }

    Statement statement() {
        if (cur().kind == TokenKind::number) {
            const Token& at = cur();
            ProbabilisticFact f;
            f.probability = number();
            if (!(f.probability >= 0.0 && f.probability <= 1.0)) throw ProgramError("probability must lie in [0, 1]", at.line, at.column);
            expect(TokenKind::annotate);
            f.atom = atom();
            expect(TokenKind::period);
            return f;
        }
        Atom head = atom();
        if (accept(TokenKind::tilde)) {
            const Token& kw = expect(TokenKind::ident);
            if (kw.text != "normal") throw ProgramError("unsupported distribution '" + kw.text + "'", kw.line, kw.column);
            expect(TokenKind::lparen);
            DistributionalFact f{std::move(head), number(), 0.0};
            expect(TokenKind::comma);
            const Token& sd = cur();
            f.stddev = number();
            if (!(f.stddev >= 0.0)) throw ProgramError("normal stddev must be >= 0", sd.line, sd.column);
            expect(TokenKind::rparen);
            expect(TokenKind::period);
            return f;
        }
        if (accept(TokenKind::implies)) {
            Rule r{std::move(head), {}};
            r.body.push_back(literal());
            while (accept(TokenKind::comma)) r.body.push_back(literal());
            expect(TokenKind::period);
            return r;
        }
        throw ProgramError(std::string("expected '~' or ':-' after atom but found ") + describe(cur().kind), cur().line, cur().column);
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

}  // namespace detail

// Rejects rules whose head predicate depends on itself (directly or transitively)
// and ground atoms defined by more than one fact. `where(i)` gives the source
// location of statement i for error messages.
inline void check_program(const Program& p,
                          const std::function<std::pair<std::size_t, std::size_t>(std::size_t)>& where = {}) {
    const auto loc = [&](std::size_t i) { return where ? where(i) : std::pair<std::size_t, std::size_t>{0, 0}; };

    std::set<Atom> facts;
    std::map<std::string, std::set<std::string>> depends;
    std::map<std::string, std::size_t> first_rule;
    for (std::size_t i = 0; i < p.statements.size(); ++i) {
        const auto& st = p.statements[i];
        if (const auto* r = std::get_if<Rule>(&st)) {
            first_rule.try_emplace(r->head.key(), i);
            auto& deps = depends[r->head.key()];
            for (const auto& l : r->body) deps.insert(l.atom.key());
            continue;
        }
        const Atom& a = std::holds_alternative<DistributionalFact>(st) ? std::get<DistributionalFact>(st).atom
                                                                        : std::get<ProbabilisticFact>(st).atom;
        if (!facts.insert(a).second) {
            const auto [line, col] = loc(i);
            throw ProgramError("duplicate fact " + to_string(a), line, col);
        }
    }

    // Depth-first search for a cycle through rule heads.
    std::map<std::string, int> state;  // 1 = on stack, 2 = done
    std::function<bool(const std::string&)> cyclic = [&](const std::string& pred) {
        const auto it = depends.find(pred);
        if (it == depends.end()) return false;
        int& s = state[pred];
        if (s == 1) return true;
        if (s == 2) return false;
        s = 1;
        for (const auto& d : it->second)
            if (cyclic(d)) return true;
        state[pred] = 2;
        return false;
    };
    for (const auto& [pred, idx] : first_rule) {
        if (cyclic(pred)) {
            const auto [line, col] = loc(idx);
            throw ProgramError("recursive definition of " + pred, line, col);
        }
    }
}

inline Program parse_program(std::string_view text) {
    detail::Parser parser(detail::Lexer(text).tokenize());
    Program p = parser.parse();
    check_program(p, [&](std::size_t i) { return parser.locations[i]; });
    return p;
}

// Parses a single atom such as "airspace(X)".
inline Atom parse_atom(std::string_view text) {
    auto tokens = detail::Lexer(text).tokenize();
    Atom a;
    std::size_t i = 0;
    const auto expect = [&](detail::TokenKind k) -> const detail::Token& {
        if (tokens[i].kind != k)
            throw ProgramError(std::string("expected ") + detail::describe(k) + " in atom", tokens[i].line, tokens[i].column);
        return tokens[i++];
    };
    a.predicate = expect(detail::TokenKind::ident).text;
    expect(detail::TokenKind::lparen);
    a.args.push_back(expect(detail::TokenKind::ident).text);
    while (tokens[i].kind == detail::TokenKind::comma) {
        ++i;
        a.args.push_back(expect(detail::TokenKind::ident).text);
    }
    expect(detail::TokenKind::rparen);
    if (tokens[i].kind == detail::TokenKind::period) ++i;
    expect(detail::TokenKind::end);
    return a;
}

}  // namespace starmap::logic
