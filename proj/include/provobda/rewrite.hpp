#pragma once

// Query rewriting machinery shared by entailment checking and provenance
// computation: atom rewriting against positive inclusions (either consuming
// annotation occurrences or extending them idempotently), unification of
// atom pairs, and the saturation loop with canonical-form deduplication.

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "kb.hpp"
#include "query.hpp"
#include "semiring.hpp"

namespace provobda {

inline std::vector<AnnotatedAxiom> positive_inclusions(const std::vector<AnnotatedAxiom>& onto) {
    std::vector<AnnotatedAxiom> out;
    for (const auto& ax : onto)
        if (ax.axiom.positive()) out.push_back(ax);
    return out;
}

inline std::vector<AnnotatedAxiom> negative_inclusions(const std::vector<AnnotatedAxiom>& onto) {
    std::vector<AnnotatedAxiom> out;
    for (const auto& ax : onto)
        if (!ax.axiom.positive()) out.push_back(ax);
    return out;
}

// Variables with a single occurrence across the query are replaced by blanks;
// applies to term positions and provenance positions independently.
inline ProvBCQ tau(ProvBCQ q) {
    std::map<std::string, int> term_count, prov_count;
    for (const auto& a : q.atoms) {
        for (const auto& t : a.terms)
            if (t.kind == Term::Var) ++term_count[t.text];
        if (a.prov.kind == ProvTerm::Var) ++prov_count[a.prov.var];
    }
    for (auto& a : q.atoms) {
        for (auto& t : a.terms)
            if (t.kind == Term::Var && term_count[t.text] == 1) t = Term::blank();
        if (a.prov.kind == ProvTerm::Var && prov_count[a.prov.var] == 1)
            a.prov = ProvTerm::blank();
    }
    return q;
}

namespace detail {

// Order-insensitive fingerprint of an atom ignoring variable names, used to
// seed the canonical ordering before variables are renamed.
inline std::string atom_shape(const QueryAtom& a) {
    std::string key = a.pred;
    for (const auto& t : a.terms) {
        switch (t.kind) {
            case Term::Var: key += "|v"; break;
            case Term::Blank: key += "|_"; break;
            case Term::Ind: key += "|i:" + t.text; break;
        }
    }
    switch (a.prov.kind) {
        case ProvTerm::Var: key += "|pv"; break;
        case ProvTerm::Blank: key += "|p_"; break;
        case ProvTerm::Mono: key += "|pm:" + render(a.prov.mono); break;
    }
    return key;
}

inline ProvBCQ rename_first_encounter(const ProvBCQ& q) {
    std::map<std::string, std::string> tmap, pmap;
    for (const auto& a : q.atoms) {
        for (const auto& t : a.terms)
            if (t.kind == Term::Var && !tmap.count(t.text))
                tmap.emplace(t.text, "v" + std::to_string(tmap.size()));
        if (a.prov.kind == ProvTerm::Var && !pmap.count(a.prov.var))
            pmap.emplace(a.prov.var, "w" + std::to_string(pmap.size()));
    }
    ProvBCQ out = q;
    for (auto& a : out.atoms) {
        for (auto& t : a.terms)
            if (t.kind == Term::Var) t.text = tmap.at(t.text);
        if (a.prov.kind == ProvTerm::Var) a.prov.var = pmap.at(a.prov.var);
    }
    return out;
}

}  // namespace detail

// Canonical representative of q modulo variable renaming and atom order:
// tau-normalize, then alternate first-encounter renaming with sorting until
// stable. Distinct queries never collide; renamings of the same query almost
// always do, which is all deduplication needs.
inline ProvBCQ canonical_query(ProvBCQ q) {
    q = tau(std::move(q));
    std::stable_sort(q.atoms.begin(), q.atoms.end(), [](const QueryAtom& a, const QueryAtom& b) {
        return detail::atom_shape(a) < detail::atom_shape(b);
    });
    for (int round = 0; round < 4; ++round) {
        ProvBCQ next = detail::rename_first_encounter(q);
        std::sort(next.atoms.begin(), next.atoms.end());
        if (next == q) break;
        q = std::move(next);
    }
    return q;
}

// ---- atom rewriting -------------------------------------------------------

enum class RewriteVariant {
    Consume,  // remove the axiom's annotation occurrences from the atom
    Extend,   // add them idempotently (the star rewriting)
};

namespace detail {

inline bool annotation_applicable(const ProvTerm& prov, const Monomial& ann,
                                  RewriteVariant variant) {
    if (variant == RewriteVariant::Extend) return true;
    // relaxed for variables and blanks: the classical applicability test
    if (prov.kind != ProvTerm::Mono) return true;
    return mono_contains_mono(prov.mono, ann);
}

inline ProvTerm rewritten_annotation(const ProvTerm& prov, const Monomial& ann,
                                     RewriteVariant variant) {
    if (prov.kind != ProvTerm::Mono) return prov;
    if (variant == RewriteVariant::Consume)
        return ProvTerm::monomial(mono_remove_mono(prov.mono, ann));
    return ProvTerm::monomial(mono_extend_idem_mono(prov.mono, ann));
}

// Atom produced by applying the axiom's left-hand side to subject t.
inline QueryAtom atom_of_concept(const ConceptExpr& c, const Term& t, ProvTerm prov) {
    if (c.kind == ConceptExpr::Atomic) return {c.name, {t}, std::move(prov)};
    if (!c.inverse) return {c.name, {t, Term::blank()}, std::move(prov)};
    return {c.name, {Term::blank(), t}, std::move(prov)};
}

}  // namespace detail

// Applies one backward-resolution step of g against I, if I's right-hand side
// can be responsible for g. Both terms of a role atom count as bound unless
// they are blanks, so callers must tau-normalize first.
inline std::optional<QueryAtom> try_rewrite_atom(const QueryAtom& g, const AnnotatedAxiom& I,
                                                 RewriteVariant variant) {
    const Axiom& ax = I.axiom;
    if (ax.rhs_negated) return std::nullopt;
    if (!detail::annotation_applicable(g.prov, I.annotation, variant)) return std::nullopt;
    ProvTerm prov = detail::rewritten_annotation(g.prov, I.annotation, variant);

    if (!g.is_role()) {
        if (ax.kind != Axiom::ConceptInclusion) return std::nullopt;
        if (ax.rhs_c.kind != ConceptExpr::Atomic || ax.rhs_c.name != g.pred) return std::nullopt;
        return detail::atom_of_concept(ax.lhs_c, g.terms[0], std::move(prov));
    }

    if (ax.kind == Axiom::ConceptInclusion) {
        // (B sub exists R): applicable when the generated end of the R-atom
        // is unbound
        if (ax.rhs_c.kind != ConceptExpr::Exists || ax.rhs_c.name != g.pred) return std::nullopt;
        const Term& subject = ax.rhs_c.inverse ? g.terms[1] : g.terms[0];
        const Term& generated = ax.rhs_c.inverse ? g.terms[0] : g.terms[1];
        if (generated.kind != Term::Blank) return std::nullopt;
        return detail::atom_of_concept(ax.lhs_c, subject, std::move(prov));
    }

    if (ax.rhs_r.name != g.pred) return std::nullopt;
    // orientation flips once per inverse marker
    bool flip = ax.rhs_r.inverse != ax.lhs_r.inverse;
    const Term& t1 = flip ? g.terms[1] : g.terms[0];
    const Term& t2 = flip ? g.terms[0] : g.terms[1];
    return QueryAtom{ax.lhs_r.name, {t1, t2}, std::move(prov)};
}

inline bool applicable(const AnnotatedAxiom& I, const QueryAtom& g,
                       RewriteVariant variant = RewriteVariant::Consume) {
    return try_rewrite_atom(g, I, variant).has_value();
}

inline QueryAtom rewrite_atom(const QueryAtom& g, const AnnotatedAxiom& I,
                              RewriteVariant variant = RewriteVariant::Consume) {
    auto out = try_rewrite_atom(g, I, variant);
    if (!out) throw Error("axiom is not applicable to atom '" + g.pred + "'");
    return *out;
}

// ---- unification (the reduce step) ---------------------------------------

namespace detail {

struct Unifier {
    std::map<std::string, Term> term_sub;
    std::map<std::string, ProvTerm> prov_sub;

    Term resolve(Term t) const {
        while (t.kind == Term::Var) {
            auto it = term_sub.find(t.text);
            if (it == term_sub.end()) break;
            t = it->second;
        }
        return t;
    }
    ProvTerm resolve(ProvTerm p) const {
        while (p.kind == ProvTerm::Var) {
            auto it = prov_sub.find(p.var);
            if (it == prov_sub.end()) break;
            p = it->second;
        }
        return p;
    }

    bool unify(const Term& a, const Term& b) {
        Term ra = resolve(a), rb = resolve(b);
        if (ra == rb) return true;
        if (ra.kind == Term::Var) {
            term_sub.emplace(ra.text, rb);
            return true;
        }
        if (rb.kind == Term::Var) {
            term_sub.emplace(rb.text, ra);
            return true;
        }
        return false;  // two distinct individuals
    }

    bool unify(const ProvTerm& a, const ProvTerm& b) {
        ProvTerm ra = resolve(a), rb = resolve(b);
        if (ra.kind == ProvTerm::Var && rb.kind == ProvTerm::Var && ra.var == rb.var) return true;
        if (ra.kind == ProvTerm::Var) {
            prov_sub.emplace(ra.var, rb);
            return true;
        }
        if (rb.kind == ProvTerm::Var) {
            prov_sub.emplace(rb.var, ra);
            return true;
        }
        return math_equal(ra.mono, rb.mono);
    }
};

// Blanks stand for anonymous fresh variables; give them names so the unifier
// can bind them.
struct BlankNamer {
    std::set<std::string> used;
    int counter = 0;

    explicit BlankNamer(const ProvBCQ& q) {
        for (const auto& a : q.atoms) {
            for (const auto& t : a.terms)
                if (t.kind == Term::Var) used.insert(t.text);
            if (a.prov.kind == ProvTerm::Var) used.insert(a.prov.var);
        }
    }
    std::string next() {
        std::string name;
        do name = "_blank" + std::to_string(counter++);
        while (used.count(name));
        return name;
    }
    void name_blanks(QueryAtom& a) {
        for (auto& t : a.terms)
            if (t.kind == Term::Blank) t = Term::var(next());
        if (a.prov.kind == ProvTerm::Blank) a.prov = ProvTerm::variable(next());
    }
};

}  // namespace detail

// Unifies atoms i and j of q with their most general unifier and merges them;
// returns the reduced query (not canonicalized) or nullopt if they do not
// unify. Provenance positions unify only when math-equal.
inline std::optional<ProvBCQ> try_reduce(const ProvBCQ& q, std::size_t i, std::size_t j) {
    const QueryAtom& ai = q.atoms[i];
    const QueryAtom& aj = q.atoms[j];
    if (ai.pred != aj.pred || ai.terms.size() != aj.terms.size()) return std::nullopt;

    ProvBCQ work = q;
    detail::BlankNamer namer(work);
    namer.name_blanks(work.atoms[i]);
    namer.name_blanks(work.atoms[j]);

    detail::Unifier u;
    for (std::size_t k = 0; k < work.atoms[i].terms.size(); ++k)
        if (!u.unify(work.atoms[i].terms[k], work.atoms[j].terms[k])) return std::nullopt;
    if (!u.unify(work.atoms[i].prov, work.atoms[j].prov)) return std::nullopt;

    for (auto& a : work.atoms) {
        for (auto& t : a.terms) t = u.resolve(t);
        a.prov = u.resolve(a.prov);
    }
    work.atoms.erase(work.atoms.begin() + j);
    return tau(std::move(work));
}

// ---- saturation -----------------------------------------------------------

struct RewriteCaps {
    std::size_t max_queries = 100000;
    std::size_t max_iterations = 1000000;
};

// The rewriting closure of q0 over the positive inclusions: repeatedly apply
// single-atom rewriting and pairwise reduction until no new canonical query
// appears. Deterministic insertion (BFS) order.
inline std::vector<ProvBCQ> perfect_ref_core(const ProvBCQ& q0,
                                             const std::vector<AnnotatedAxiom>& positive,
                                             RewriteVariant variant,
                                             const RewriteCaps& caps = {}) {
    std::vector<ProvBCQ> out;
    std::set<ProvBCQ> seen;
    std::size_t iterations = 0;

    auto insert = [&](ProvBCQ q) {
        q = canonical_query(std::move(q));
        if (seen.insert(q).second) {
            if (out.size() >= caps.max_queries)
                throw CapExceeded("rewriting exceeds " + std::to_string(caps.max_queries) +
                                  " queries");
            out.push_back(std::move(q));
        }
    };
    auto tick = [&] {
        if (++iterations > caps.max_iterations)
            throw CapExceeded("rewriting exceeds " + std::to_string(caps.max_iterations) +
                              " iterations");
    };

    insert(q0);
    for (std::size_t idx = 0; idx < out.size(); ++idx) {
        // out may reallocate while we append, so copy the query under work
        const ProvBCQ q = out[idx];
        for (std::size_t pos = 0; pos < q.atoms.size(); ++pos) {
            for (const auto& ax : positive) {
                tick();
                if (auto atom = try_rewrite_atom(q.atoms[pos], ax, variant)) {
                    ProvBCQ next = q;
                    next.atoms[pos] = std::move(*atom);
                    insert(std::move(next));
                }
            }
        }
        for (std::size_t i = 0; i + 1 < q.atoms.size(); ++i) {
            for (std::size_t j = i + 1; j < q.atoms.size(); ++j) {
                tick();
                if (auto reduced = try_reduce(q, i, j)) insert(std::move(*reduced));
            }
        }
    }
    return out;
}

// Provenance-aware rewriting of a query whose provenance positions carry
// ground monomials (or inert variables/blanks).
inline std::vector<ProvBCQ> perfect_ref(const ProvBCQ& q,
                                        const std::vector<AnnotatedAxiom>& positive,
                                        const RewriteCaps& caps = {}) {
    return perfect_ref_core(q, positive, RewriteVariant::Consume, caps);
}

}  // namespace provobda
