#pragma once

// Provenance polynomials over N[X]: multisets of variable products, with two
// optional idempotency laws layered on top (x*x = x, and additionally
// m + m = m). Everything is kept in a sorted canonical form so structural
// equality coincides with equality modulo commutativity.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <iterator>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace provobda {

enum class SemiringMode {
    Free,             // plain N[X]
    MultIdempotent,   // x*x = x: monomials are variable sets
    FullyIdempotent,  // also m + m = m: polynomials are monomial sets
};

inline bool mult_idempotent(SemiringMode m) { return m != SemiringMode::Free; }
inline bool add_idempotent(SemiringMode m) { return m == SemiringMode::FullyIdempotent; }

inline std::string to_string(SemiringMode m) {
    switch (m) {
        case SemiringMode::Free: return "free";
        case SemiringMode::MultIdempotent: return "midem";
        case SemiringMode::FullyIdempotent: return "fidem";
    }
    return "?";
}

// Product of provenance variables; multiplicity by repetition, factors sorted.
// The empty product is the multiplicative identity 1.
struct Monomial {
    std::vector<std::string> factors;

    bool is_one() const { return factors.empty(); }
    auto operator<=>(const Monomial&) const = default;
};

// Sum of monomials; multiplicity by repetition, terms sorted.
// The empty sum is 0.
struct Polynomial {
    std::vector<Monomial> terms;

    bool is_zero() const { return terms.empty(); }
    auto operator<=>(const Polynomial&) const = default;
};

inline Monomial mono_normalize(Monomial m, SemiringMode mode) {
    std::sort(m.factors.begin(), m.factors.end());
    if (mult_idempotent(mode))
        m.factors.erase(std::unique(m.factors.begin(), m.factors.end()), m.factors.end());
    return m;
}

inline Monomial make_mono(std::vector<std::string> factors, SemiringMode mode) {
    return mono_normalize(Monomial{std::move(factors)}, mode);
}

inline Polynomial poly_normalize(Polynomial p, SemiringMode mode) {
    for (auto& m : p.terms) m = mono_normalize(std::move(m), mode);
    std::sort(p.terms.begin(), p.terms.end());
    if (add_idempotent(mode))
        p.terms.erase(std::unique(p.terms.begin(), p.terms.end()), p.terms.end());
    return p;
}

inline Polynomial make_poly(std::vector<Monomial> terms, SemiringMode mode) {
    return poly_normalize(Polynomial{std::move(terms)}, mode);
}

inline Polynomial poly_one() { return Polynomial{{Monomial{}}}; }
inline Polynomial poly_zero() { return Polynomial{}; }

inline Monomial mono_mul(const Monomial& a, const Monomial& b, SemiringMode mode) {
    Monomial out;
    out.factors.reserve(a.factors.size() + b.factors.size());
    std::merge(a.factors.begin(), a.factors.end(), b.factors.begin(), b.factors.end(),
               std::back_inserter(out.factors));
    if (mult_idempotent(mode))
        out.factors.erase(std::unique(out.factors.begin(), out.factors.end()), out.factors.end());
    return out;
}

inline Polynomial poly_add(const Polynomial& a, const Polynomial& b, SemiringMode mode) {
    Polynomial out;
    out.terms.reserve(a.terms.size() + b.terms.size());
    std::merge(a.terms.begin(), a.terms.end(), b.terms.begin(), b.terms.end(),
               std::back_inserter(out.terms));
    if (add_idempotent(mode))
        out.terms.erase(std::unique(out.terms.begin(), out.terms.end()), out.terms.end());
    return out;
}

inline Polynomial poly_mul(const Polynomial& a, const Polynomial& b, SemiringMode mode) {
    Polynomial out;
    out.terms.reserve(a.terms.size() * b.terms.size());
    for (const auto& ma : a.terms)
        for (const auto& mb : b.terms) out.terms.push_back(mono_mul(ma, mb, mode));
    return poly_normalize(std::move(out), mode);
}

// Inputs are canonical, so math equality (equality in the chosen semiring)
// is structural equality.
inline bool math_equal(const Monomial& a, const Monomial& b) { return a == b; }
inline bool math_equal(const Polynomial& a, const Polynomial& b) { return a == b; }

// True iff candidate's terms form a sub-multiset of target's terms, i.e.
// target = candidate + rest for some polynomial rest.
inline bool poly_contains(const Polynomial& target, const Polynomial& candidate) {
    return std::includes(target.terms.begin(), target.terms.end(),
                         candidate.terms.begin(), candidate.terms.end());
}

inline bool mono_contains_var(const Monomial& m, const std::string& v) {
    return std::binary_search(m.factors.begin(), m.factors.end(), v);
}

inline std::size_t mono_count_var(const Monomial& m, const std::string& v) {
    auto [lo, hi] = std::equal_range(m.factors.begin(), m.factors.end(), v);
    return static_cast<std::size_t>(hi - lo);
}

inline std::string render(const Monomial& m) {
    if (m.is_one()) return "1";
    std::string out;
    for (std::size_t i = 0; i < m.factors.size(); ++i) {
        if (i) out += '*';
        out += m.factors[i];
    }
    return out;
}

inline std::string render(const Polynomial& p) {
    if (p.is_zero()) return "0";
    std::string out;
    for (std::size_t i = 0; i < p.terms.size(); ++i) {
        if (i) out += " + ";
        out += render(p.terms[i]);
    }
    return out;
}

// Removes one occurrence of v from m (the occurrence-counting inverse of
// multiplication by v). Throws VariableAbsent when v does not occur.
inline Monomial mono_remove(const Monomial& m, const std::string& v) {
    auto it = std::lower_bound(m.factors.begin(), m.factors.end(), v);
    if (it == m.factors.end() || *it != v)
        throw VariableAbsent("variable '" + v + "' does not occur in " + render(m));
    Monomial out = m;
    out.factors.erase(out.factors.begin() + (it - m.factors.begin()));
    return out;
}

// Adds v only if absent: the idempotent extension used by the star rewriting.
inline Monomial mono_extend_idem(const Monomial& m, const std::string& v) {
    if (mono_contains_var(m, v)) return m;
    Monomial out = m;
    out.factors.insert(std::upper_bound(out.factors.begin(), out.factors.end(), v), v);
    return out;
}

// Multiset versions, used where axiom annotations may be whole monomials.
inline bool mono_contains_mono(const Monomial& m, const Monomial& sub) {
    return std::includes(m.factors.begin(), m.factors.end(),
                         sub.factors.begin(), sub.factors.end());
}

inline Monomial mono_remove_mono(const Monomial& m, const Monomial& sub) {
    Monomial out = m;
    for (const auto& v : sub.factors) out = mono_remove(out, v);
    return out;
}

inline Monomial mono_extend_idem_mono(const Monomial& m, const Monomial& sub) {
    Monomial out = m;
    for (const auto& v : sub.factors) out = mono_extend_idem(out, v);
    return out;
}

namespace detail {

struct PolyParser {
    std::string_view src;
    std::size_t pos = 0;
    int line;
    int col;

    PolyParser(std::string_view s, int line0, int col0) : src(s), line(line0), col(col0) {}

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, line, col); }

    void advance() {
        if (src[pos] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
        ++pos;
    }

    void skip_ws() {
        while (pos < src.size() && (src[pos] == ' ' || src[pos] == '\t' || src[pos] == '\r' ||
                                    src[pos] == '\n'))
            advance();
    }

    bool eof() {
        skip_ws();
        return pos >= src.size();
    }

    char peek() {
        skip_ws();
        return pos < src.size() ? src[pos] : '\0';
    }

    static bool ident_char(char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
               c == '_' || c == '$';
    }

    std::string ident() {
        skip_ws();
        std::size_t start = pos;
        while (pos < src.size() && ident_char(src[pos])) advance();
        if (pos == start) fail("expected a variable, '1', '0' or '('");
        return std::string(src.substr(start, pos - start));
    }

    Polynomial parse_factor(SemiringMode mode) {
        char c = peek();
        if (c == '(') {
            advance();
            Polynomial inner = parse_sum(mode);
            if (peek() != ')') fail("expected ')'");
            advance();
            return inner;
        }
        std::string name = ident();
        if (name == "1") return poly_one();
        if (name == "0") return poly_zero();
        if (name.find_first_not_of("0123456789") == std::string::npos)
            fail("numeric coefficients other than 0 and 1 are not supported");
        return Polynomial{{Monomial{{std::move(name)}}}};
    }

    Polynomial parse_product(SemiringMode mode) {
        Polynomial acc = parse_factor(mode);
        while (peek() == '*') {
            advance();
            acc = poly_mul(acc, parse_factor(mode), mode);
        }
        return acc;
    }

    Polynomial parse_sum(SemiringMode mode) {
        Polynomial acc = parse_product(mode);
        while (peek() == '+') {
            advance();
            acc = poly_add(acc, parse_product(mode), mode);
        }
        return acc;
    }
};

}  // namespace detail

// Parses "+"/"*" expressions with parentheses into canonical form; factors in
// any order. line0/col0 anchor error positions when the text is embedded in a
// larger file.
inline Polynomial parse_polynomial(std::string_view text, SemiringMode mode, int line0 = 1,
                                   int col0 = 1) {
    detail::PolyParser p(text, line0, col0);
    if (p.eof()) p.fail("empty polynomial");
    Polynomial out = p.parse_sum(mode);
    if (!p.eof()) p.fail("trailing input after polynomial");
    return out;
}

inline Monomial parse_monomial(std::string_view text, SemiringMode mode, int line0 = 1,
                               int col0 = 1) {
    Polynomial p = parse_polynomial(text, mode, line0, col0);
    if (p.terms.size() != 1)
        throw ParseError("expected a single monomial, got '" + std::string(text) + "'", line0,
                         col0);
    return p.terms[0];
}

}  // namespace provobda
