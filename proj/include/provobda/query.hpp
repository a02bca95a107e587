#pragma once

// Provenance-annotated conjunctive queries and their evaluation over finite
// annotated interpretations. Queries are atom *lists*: intermediate rewriting
// steps may hold duplicate atoms whose multiplicity matters for provenance,
// so nothing collapses implicitly.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "kb.hpp"
#include "semiring.hpp"

namespace provobda {

struct Term {
    enum Kind { Var, Ind, Blank };

    Kind kind = Var;
    std::string text;  // empty for Blank

    static Term var(std::string t) { return {Var, std::move(t)}; }
    static Term ind(std::string t) { return {Ind, std::move(t)}; }
    static Term blank() { return {Blank, {}}; }

    auto operator<=>(const Term&) const = default;
};

// Provenance position of an atom: a query variable, a ground monomial, or an
// unbound placeholder introduced by rewriting.
struct ProvTerm {
    enum Kind { Var, Mono, Blank };

    Kind kind = Blank;
    std::string var;  // when Var
    Monomial mono;    // when Mono

    static ProvTerm variable(std::string v) { return {Var, std::move(v), {}}; }
    static ProvTerm monomial(Monomial m) { return {Mono, {}, std::move(m)}; }
    static ProvTerm blank() { return {}; }

    auto operator<=>(const ProvTerm&) const = default;
};

struct QueryAtom {
    std::string pred;
    std::vector<Term> terms;  // size 1 (concept) or 2 (role)
    ProvTerm prov;

    bool is_role() const { return terms.size() == 2; }

    auto operator<=>(const QueryAtom&) const = default;
};

struct ProvBCQ {
    std::vector<QueryAtom> atoms;

    auto operator<=>(const ProvBCQ&) const = default;
};

// A query is standard when every provenance position is a distinct variable.
inline bool is_standard(const ProvBCQ& q) {
    std::set<std::string> seen;
    for (const auto& a : q.atoms) {
        if (a.prov.kind != ProvTerm::Var) return false;
        if (!seen.insert(a.prov.var).second) return false;
    }
    return true;
}

inline std::set<std::string> term_variables(const ProvBCQ& q) {
    std::set<std::string> vars;
    for (const auto& a : q.atoms)
        for (const auto& t : a.terms)
            if (t.kind == Term::Var) vars.insert(t.text);
    return vars;
}

inline std::set<std::string> prov_variables(const ProvBCQ& q) {
    std::set<std::string> vars;
    for (const auto& a : q.atoms)
        if (a.prov.kind == ProvTerm::Var) vars.insert(a.prov.var);
    return vars;
}

// ---- finite annotated interpretations -----------------------------------

struct FiniteAnnotatedInterpretation {
    // extensions sorted and deduplicated; one entry per (tuple, monomial)
    std::map<std::string, std::vector<std::pair<std::string, Monomial>>> concepts;
    std::map<std::string, std::vector<std::tuple<std::string, std::string, Monomial>>> roles;

    std::set<std::string> domain;
    std::set<Monomial> monomials;

    std::size_t fact_count() const {
        std::size_t n = 0;
        for (const auto& [p, v] : concepts) n += v.size();
        for (const auto& [p, v] : roles) n += v.size();
        return n;
    }
};

inline FiniteAnnotatedInterpretation interp_of_assertions(
    const std::vector<AnnotatedAssertion>& assertions) {
    FiniteAnnotatedInterpretation interp;
    for (const auto& a : assertions) {
        if (a.args.size() == 1) {
            interp.concepts[a.pred].emplace_back(a.args[0], a.annotation);
        } else if (a.args.size() == 2) {
            interp.roles[a.pred].emplace_back(a.args[0], a.args[1], a.annotation);
        } else {
            throw ArityMismatch("assertion over '" + a.pred + "' has arity " +
                                std::to_string(a.args.size()) + ", expected 1 or 2");
        }
        for (const auto& arg : a.args) interp.domain.insert(arg);
        interp.monomials.insert(a.annotation);
    }
    for (auto& [p, v] : interp.concepts) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    for (auto& [p, v] : interp.roles) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    return interp;
}

// ---- matching ------------------------------------------------------------

struct Match {
    std::map<std::string, std::string> term_binding;
    std::map<std::string, Monomial> prov_binding;
    std::vector<Monomial> atom_annotations;  // parallel to query atoms
};

namespace detail {

template <typename Fn>
inline bool match_atoms(const ProvBCQ& q, const FiniteAnnotatedInterpretation& interp,
                        std::size_t idx, Match& partial, Fn&& emit) {
    if (idx == q.atoms.size()) return emit(partial);

    const QueryAtom& atom = q.atoms[idx];

    auto try_fact = [&](const std::vector<std::string>& args, const Monomial& ann) -> bool {
        std::vector<std::string> new_terms;
        bool new_prov = false;
        bool ok = true;
        for (std::size_t i = 0; i < atom.terms.size() && ok; ++i) {
            const Term& t = atom.terms[i];
            switch (t.kind) {
                case Term::Blank: break;
                case Term::Ind:
                    ok = (t.text == args[i]);
                    break;
                case Term::Var: {
                    auto [pos, inserted] = partial.term_binding.emplace(t.text, args[i]);
                    if (inserted)
                        new_terms.push_back(t.text);
                    else
                        ok = (pos->second == args[i]);
                    break;
                }
            }
        }
        if (ok) {
            switch (atom.prov.kind) {
                case ProvTerm::Blank: break;
                case ProvTerm::Mono:
                    ok = math_equal(atom.prov.mono, ann);
                    break;
                case ProvTerm::Var: {
                    auto [pos, inserted] = partial.prov_binding.emplace(atom.prov.var, ann);
                    if (inserted)
                        new_prov = true;
                    else
                        ok = math_equal(pos->second, ann);
                    break;
                }
            }
        }
        bool stop = false;
        if (ok) {
            partial.atom_annotations.push_back(ann);
            stop = match_atoms(q, interp, idx + 1, partial, emit);
            partial.atom_annotations.pop_back();
        }
        for (const auto& v : new_terms) partial.term_binding.erase(v);
        if (new_prov) partial.prov_binding.erase(atom.prov.var);
        return stop;
    };

    if (atom.is_role()) {
        auto it = interp.roles.find(atom.pred);
        if (it == interp.roles.end()) return false;
        for (const auto& [a, b, ann] : it->second)
            if (try_fact({a, b}, ann)) return true;
    } else {
        auto it = interp.concepts.find(atom.pred);
        if (it == interp.concepts.end()) return false;
        for (const auto& [a, ann] : it->second)
            if (try_fact({a}, ann)) return true;
    }
    return false;
}

}  // namespace detail

// All homomorphisms of q into interp, in a deterministic DFS order. Shared
// term variables must map to the same individual and shared provenance
// variables to math-equal monomials.
inline std::vector<Match> enumerate_matches(const ProvBCQ& q,
                                            const FiniteAnnotatedInterpretation& interp) {
    std::vector<Match> out;
    Match partial;
    detail::match_atoms(q, interp, 0, partial, [&](const Match& m) {
        out.push_back(m);
        return false;
    });
    return out;
}

inline bool has_match(const ProvBCQ& q, const FiniteAnnotatedInterpretation& interp) {
    Match partial;
    return detail::match_atoms(q, interp, 0, partial, [](const Match&) { return true; });
}

// Provenance of a BCQ over a finite interpretation: the sum over all matches
// of the product of the matched facts' annotations.
inline Polynomial provenance_on(const ProvBCQ& q, const FiniteAnnotatedInterpretation& interp,
                                SemiringMode mode) {
    Polynomial result;
    Match partial;
    detail::match_atoms(q, interp, 0, partial, [&](const Match& m) {
        Monomial prod;
        for (const auto& ann : m.atom_annotations) prod = mono_mul(prod, ann, mode);
        result.terms.push_back(std::move(prod));
        return false;
    });
    return poly_normalize(std::move(result), mode);
}

// (q, p) holds in interp iff p is contained in the provenance of q. The zero
// target is contained in everything.
inline bool satisfies_with(const ProvBCQ& q, const Polynomial& p,
                           const FiniteAnnotatedInterpretation& interp, SemiringMode mode) {
    if (p.is_zero()) return true;
    return poly_contains(provenance_on(q, interp, mode), p);
}

// ---- rendering -------------------------------------------------------------

inline std::string render(const Term& t) {
    switch (t.kind) {
        case Term::Blank: return "_";
        default: return t.text;
    }
}

inline std::string render(const ProvTerm& p) {
    switch (p.kind) {
        case ProvTerm::Blank: return "_";
        case ProvTerm::Var: return p.var;
        default: return render(p.mono);
    }
}

inline std::string render(const QueryAtom& a) {
    std::string out = a.pred + "(";
    for (const auto& t : a.terms) out += render(t) + ", ";
    out += "@" + render(a.prov) + ")";
    return out;
}

// ASK form; declared variables in first-occurrence order.
inline std::string render(const ProvBCQ& q) {
    std::vector<std::string> vars;
    std::set<std::string> seen;
    auto note = [&](const std::string& v) {
        if (seen.insert(v).second) vars.push_back(v);
    };
    for (const auto& a : q.atoms) {
        for (const auto& t : a.terms)
            if (t.kind == Term::Var) note(t.text);
        if (a.prov.kind == ProvTerm::Var) note(a.prov.var);
    }
    std::string out = "ASK ";
    for (std::size_t i = 0; i < vars.size(); ++i) {
        if (i) out += ", ";
        out += vars[i];
    }
    out += ": ";
    for (std::size_t i = 0; i < q.atoms.size(); ++i) {
        if (i) out += " AND ";
        out += render(q.atoms[i]);
    }
    return out;
}

}  // namespace provobda
