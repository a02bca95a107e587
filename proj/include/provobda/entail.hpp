#pragma once

// Deciding whether an annotated instance entails a query with a target
// polynomial: satisfiability via clash queries, the translation of a target
// polynomial into provenance-annotated conjuncts, dagger preimage
// enumeration over the marked instance, and the end-to-end pipeline.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "kb.hpp"
#include "marking.hpp"
#include "query.hpp"
#include "rewrite.hpp"
#include "semiring.hpp"

namespace provobda {

// ---- satisfiability --------------------------------------------------------

namespace detail {

inline QueryAtom clash_atom(const ConceptExpr& c, const Term& subject) {
    if (c.kind == ConceptExpr::Atomic) return {c.name, {subject}, ProvTerm::blank()};
    if (!c.inverse) return {c.name, {subject, Term::blank()}, ProvTerm::blank()};
    return {c.name, {Term::blank(), subject}, ProvTerm::blank()};
}

inline QueryAtom clash_atom(const RoleExpr& r, const Term& x, const Term& y) {
    if (!r.inverse) return {r.name, {x, y}, ProvTerm::blank()};
    return {r.name, {y, x}, ProvTerm::blank()};
}

// One boolean query per negative inclusion whose match witnesses a clash.
inline std::vector<ProvBCQ> clash_queries(const std::vector<AnnotatedAxiom>& onto) {
    std::vector<ProvBCQ> out;
    for (const auto& ax : onto) {
        if (ax.axiom.positive()) continue;
        ProvBCQ q;
        if (ax.axiom.kind == Axiom::ConceptInclusion) {
            Term x = Term::var("x");
            q.atoms.push_back(clash_atom(ax.axiom.lhs_c, x));
            q.atoms.push_back(clash_atom(ax.axiom.rhs_c, x));
        } else {
            Term x = Term::var("x"), y = Term::var("y");
            q.atoms.push_back(clash_atom(ax.axiom.lhs_r, x, y));
            q.atoms.push_back(clash_atom(ax.axiom.rhs_r, x, y));
        }
        out.push_back(std::move(q));
    }
    return out;
}

}  // namespace detail

// Classical consistency: annotations play no role, so each negative inclusion
// is turned into a clash query, rewritten over the positive inclusions and
// evaluated over M(D).
inline bool check_satisfiability(const AnnotatedOBDAInstance& inst, const RewriteCaps& caps = {}) {
    const std::vector<AnnotatedAxiom>& onto = inst.ontology;
    std::vector<AnnotatedAxiom> positive = positive_inclusions(onto);
    FiniteAnnotatedInterpretation interp = interp_of_assertions(apply_mappings(inst));
    for (const auto& clash : detail::clash_queries(onto)) {
        for (const auto& q : perfect_ref_core(clash, positive, RewriteVariant::Consume, caps))
            if (has_match(q, interp)) return false;
    }
    return true;
}

// ---- target polynomial translation ------------------------------------------

namespace detail {

struct AtomConstraint {
    int group = -1;                     // atoms sharing a provenance variable share a group
    std::optional<Monomial> fixed;      // ground monomial constraint
};

struct Occurrences {
    std::vector<std::pair<std::string, int>> entries;  // (variable, multiplicity), sorted

    static Occurrences of(const Monomial& m) {
        Occurrences occ;
        for (const auto& v : m.factors) {
            if (!occ.entries.empty() && occ.entries.back().first == v)
                ++occ.entries.back().second;
            else
                occ.entries.emplace_back(v, 1);
        }
        return occ;
    }
};

// Enumerates ordered factorizations of one copy's monomial into per-atom
// nonempty parts subject to the constraints; emit receives the parts vector.
struct CopyFactorizer {
    const std::vector<AtomConstraint>& constraints;
    Occurrences occ;
    std::vector<int> remaining;            // parallel to occ.entries
    std::map<int, Monomial> assigned;      // group -> chosen part
    std::vector<Monomial> parts;
    const std::function<bool(const std::vector<Monomial>&)>& emit;
    bool stopped = false;

    CopyFactorizer(const std::vector<AtomConstraint>& cs, const Monomial& m,
                   const std::function<bool(const std::vector<Monomial>&)>& fn)
        : constraints(cs), occ(Occurrences::of(m)), emit(fn) {
        remaining.reserve(occ.entries.size());
        for (const auto& [v, c] : occ.entries) remaining.push_back(c);
    }

    bool take(const Monomial& part) {
        std::size_t e = 0;
        std::vector<std::pair<std::size_t, int>> taken;
        for (const auto& f : part.factors) {
            while (e < occ.entries.size() && occ.entries[e].first < f) ++e;
            if (e >= occ.entries.size() || occ.entries[e].first != f || remaining[e] == 0) {
                for (auto [idx, n] : taken) remaining[idx] += n;
                return false;
            }
            --remaining[e];
            if (!taken.empty() && taken.back().first == e)
                ++taken.back().second;
            else
                taken.emplace_back(e, 1);
        }
        return true;
    }
    void give_back(const Monomial& part) {
        std::size_t e = 0;
        for (const auto& f : part.factors) {
            while (occ.entries[e].first < f) ++e;
            ++remaining[e];
        }
    }

    void run(std::size_t j) {
        if (stopped) return;
        if (j == constraints.size()) {
            bool leftover = false;
            for (int r : remaining)
                if (r) leftover = true;
            if (!leftover && !emit(parts)) stopped = true;
            return;
        }
        const AtomConstraint& c = constraints[j];
        auto it = assigned.find(c.group);
        if (it != assigned.end()) {
            with_part(j, it->second, false);
            return;
        }
        if (c.fixed) {
            with_part(j, *c.fixed, true);
            return;
        }
        // free part: any nonempty sub-multiset of the remaining occurrences
        Monomial part;
        enumerate_subsets(j, 0, part);
    }

    void with_part(std::size_t j, const Monomial& part, bool record_group) {
        if (part.is_one()) return;  // parts must be nonempty
        if (!take(part)) return;
        parts.push_back(part);
        if (record_group) assigned.emplace(constraints[j].group, part);
        run(j + 1);
        if (record_group) assigned.erase(constraints[j].group);
        parts.pop_back();
        give_back(part);
    }

    void enumerate_subsets(std::size_t j, std::size_t e, Monomial& part) {
        if (stopped) return;
        if (e == occ.entries.size()) {
            if (!part.is_one()) {
                Monomial chosen = part;  // already sorted by construction
                with_part(j, chosen, true);
            }
            return;
        }
        for (int take_n = 0; take_n <= remaining[e]; ++take_n) {
            for (int i = 0; i < take_n; ++i) part.factors.push_back(occ.entries[e].first);
            enumerate_subsets(j, e + 1, part);
            for (int i = 0; i < take_n; ++i) part.factors.pop_back();
            if (stopped) return;
        }
    }
};

inline std::vector<AtomConstraint> atom_constraints(const ProvBCQ& q) {
    std::vector<AtomConstraint> cs(q.atoms.size());
    std::map<std::string, int> var_group;
    int next_group = 0;
    for (std::size_t j = 0; j < q.atoms.size(); ++j) {
        const ProvTerm& p = q.atoms[j].prov;
        if (p.kind == ProvTerm::Var) {
            auto [it, inserted] = var_group.emplace(p.var, next_group);
            if (inserted) ++next_group;
            cs[j].group = it->second;
        } else {
            cs[j].group = next_group++;
            if (p.kind == ProvTerm::Mono) cs[j].fixed = p.mono;
        }
    }
    return cs;
}

inline QueryAtom copy_atom(const QueryAtom& a, std::size_t copy_idx, const Monomial& part) {
    QueryAtom out = a;
    for (auto& t : out.terms)
        if (t.kind == Term::Var) t.text = "c" + std::to_string(copy_idx) + "__" + t.text;
    out.prov = ProvTerm::monomial(part);
    return out;
}

}  // namespace detail

// Streams the conjunctive translations of (q, p): one fresh-variable copy of
// q per monomial of p, each copy's provenance positions holding one part of
// an ordered factorization of its monomial. Ground provenance positions pin
// their part; repeated provenance variables force equal parts within a copy.
// fn returns false to stop early; the return value is false iff it did.
template <typename Fn>
inline bool for_each_translation(const ProvBCQ& q, const Polynomial& p, Fn&& fn) {
    for (std::size_t i = 0; i + 1 < p.terms.size(); ++i)
        if (p.terms[i] == p.terms[i + 1])
            throw DuplicateMonomials("target polynomial has math-equal monomials: " +
                                     render(p.terms[i]));

    if (p.is_zero()) return fn(ProvBCQ{});

    std::vector<detail::AtomConstraint> cs = detail::atom_constraints(q);
    std::vector<std::vector<Monomial>> copy_parts(p.terms.size());
    bool keep_going = true;

    std::function<void(std::size_t)> per_copy = [&](std::size_t i) {
        if (!keep_going) return;
        if (i == p.terms.size()) {
            ProvBCQ out;
            out.atoms.reserve(q.atoms.size() * p.terms.size());
            for (std::size_t c = 0; c < p.terms.size(); ++c)
                for (std::size_t j = 0; j < q.atoms.size(); ++j)
                    out.atoms.push_back(detail::copy_atom(q.atoms[j], c, copy_parts[c][j]));
            if (!fn(out)) keep_going = false;
            return;
        }
        std::function<bool(const std::vector<Monomial>&)> emit =
            [&](const std::vector<Monomial>& parts) {
                copy_parts[i] = parts;
                per_copy(i + 1);
                return keep_going;
            };
        detail::CopyFactorizer fact(cs, p.terms[i], emit);
        fact.run(0);
    };
    per_copy(0);
    return keep_going;
}

// Materialized translation set, deduplicated modulo variable renaming.
inline std::vector<ProvBCQ> translate_tr(const ProvBCQ& q, const Polynomial& p) {
    std::vector<ProvBCQ> out;
    std::set<ProvBCQ> seen;
    for_each_translation(q, p, [&](const ProvBCQ& t) {
        ProvBCQ canon = canonical_query(t);
        if (seen.insert(canon).second) out.push_back(std::move(canon));
        return true;
    });
    return out;
}

// ---- dagger preimages -------------------------------------------------------

namespace detail {

template <typename T, typename Fn>
inline bool cross_product(const std::vector<std::vector<T>>& choices, std::vector<T>& current,
                          std::size_t idx, Fn&& fn) {
    if (idx == choices.size()) return fn(current);
    for (const auto& c : choices[idx]) {
        current.push_back(c);
        if (!cross_product(choices, current, idx + 1, fn)) return false;
        current.pop_back();
    }
    return true;
}

}  // namespace detail

// All marked monomials whose dagger image equals m. Under the free semiring
// dagger preserves occurrence counts, so each occurrence independently picks
// one preimage variable; under idempotent multiplication a single original
// occurrence may stand for several distinct fresh variables, so each variable
// picks a nonempty subset instead.
inline std::vector<Monomial> monomial_preimages(const Monomial& m, const DaggerMap& dag,
                                                SemiringMode mode,
                                                std::size_t cap = 200000) {
    std::vector<std::vector<std::vector<std::string>>> choices;  // per slot: list of factor blocks
    auto options_for = [&](const std::string& v) {
        auto it = dag.var_preimages.find(v);
        return it == dag.var_preimages.end() ? std::vector<std::string>{v} : it->second;
    };
    if (!mult_idempotent(mode)) {
        for (const auto& v : m.factors) {
            std::vector<std::vector<std::string>> blocks;
            for (const auto& f : options_for(v)) blocks.push_back({f});
            choices.push_back(std::move(blocks));
        }
    } else {
        std::vector<std::string> distinct = m.factors;  // already unique under idempotency
        for (const auto& v : distinct) {
            std::vector<std::string> opts = options_for(v);
            std::vector<std::vector<std::string>> blocks;
            for (std::size_t mask = 1; mask < (std::size_t(1) << opts.size()); ++mask) {
                std::vector<std::string> block;
                for (std::size_t b = 0; b < opts.size(); ++b)
                    if (mask & (std::size_t(1) << b)) block.push_back(opts[b]);
                blocks.push_back(std::move(block));
            }
            choices.push_back(std::move(blocks));
        }
    }

    std::set<Monomial> seen;
    std::vector<std::vector<std::string>> current;
    detail::cross_product(choices, current, 0, [&](const std::vector<std::vector<std::string>>& c) {
        std::vector<std::string> factors;
        for (const auto& block : c) factors.insert(factors.end(), block.begin(), block.end());
        seen.insert(make_mono(std::move(factors), mode));
        if (seen.size() > cap)
            throw CapExceeded("monomial preimage enumeration exceeds " + std::to_string(cap));
        return true;
    });
    return {seen.begin(), seen.end()};
}

inline std::vector<Polynomial> poly_preimages(const Polynomial& p, const DaggerMap& dag,
                                              SemiringMode mode, std::size_t cap = 200000) {
    std::vector<std::vector<Monomial>> per_term;
    per_term.reserve(p.terms.size());
    for (const auto& m : p.terms) per_term.push_back(monomial_preimages(m, dag, mode, cap));

    std::set<Polynomial> seen;
    std::vector<Monomial> current;
    detail::cross_product(per_term, current, 0, [&](const std::vector<Monomial>& terms) {
        seen.insert(make_poly(terms, mode));
        if (seen.size() > cap)
            throw CapExceeded("polynomial preimage enumeration exceeds " + std::to_string(cap));
        return true;
    });
    return {seen.begin(), seen.end()};
}

// All queries over the marked vocabulary whose dagger image is q: role atoms
// may use any pair-specialized copy of their role, ground provenance
// monomials any of their preimages.
inline std::vector<ProvBCQ> query_preimages(const ProvBCQ& q, const DaggerMap& dag,
                                            SemiringMode mode, std::size_t cap = 200000) {
    std::vector<std::vector<QueryAtom>> per_atom;
    per_atom.reserve(q.atoms.size());
    for (const auto& a : q.atoms) {
        std::vector<QueryAtom> variants;
        std::vector<std::string> preds{a.pred};
        if (a.is_role()) {
            auto it = dag.role_aliases.find(a.pred);
            if (it != dag.role_aliases.end())
                preds.insert(preds.end(), it->second.begin(), it->second.end());
        }
        std::vector<Monomial> monos;
        if (a.prov.kind == ProvTerm::Mono) monos = monomial_preimages(a.prov.mono, dag, mode, cap);
        for (const auto& pred : preds) {
            QueryAtom v = a;
            v.pred = pred;
            if (a.prov.kind != ProvTerm::Mono) {
                variants.push_back(v);
                continue;
            }
            for (const auto& m : monos) {
                v.prov = ProvTerm::monomial(m);
                variants.push_back(v);
            }
        }
        per_atom.push_back(std::move(variants));
    }

    std::vector<ProvBCQ> out;
    std::vector<QueryAtom> current;
    detail::cross_product(per_atom, current, 0, [&](const std::vector<QueryAtom>& atoms) {
        out.push_back(ProvBCQ{atoms});
        if (out.size() > cap)
            throw CapExceeded("query preimage enumeration exceeds " + std::to_string(cap));
        return true;
    });
    return out;
}

// ---- entailment ---------------------------------------------------------------

struct EntailOptions {
    RewriteCaps caps{};
    std::size_t preimage_cap = 200000;
    bool want_witness = false;
};

struct EntailOutcome {
    bool entailed = false;
    std::string witness;
};

namespace detail {

inline std::string describe_match(const Match& m) {
    std::string out;
    for (const auto& [v, ind] : m.term_binding) out += "  " + v + " -> " + ind + "\n";
    return out;
}

}  // namespace detail

// Decides (P, D) |= (q, p). Unsatisfiable instances entail everything. The
// instance is marked, every dagger preimage of (q, p) is translated into
// annotated conjuncts, and each translation is rewritten over the marked
// positive inclusions and evaluated over the marked M(D).
inline EntailOutcome entails_full(const AnnotatedOBDAInstance& inst, const ProvBCQ& q,
                                  const Polynomial& p, const EntailOptions& opt = {}) {
    EntailOutcome res;
    if (!check_satisfiability(inst, opt.caps)) {
        res.entailed = true;
        res.witness = "instance is unsatisfiable; every annotated query is entailed";
        return res;
    }
    if (p.is_zero()) {
        res.entailed = true;
        res.witness = "the zero polynomial is contained in every provenance";
        return res;
    }

    MarkedInstance marked = mark_instance(inst);
    const SemiringMode mode = inst.mode;

    FiniteAnnotatedInterpretation interp =
        interp_of_assertions(apply_mappings(marked.instance));
    std::vector<AnnotatedAxiom> positive = positive_inclusions(marked.instance.ontology);

    std::vector<ProvBCQ> qms = query_preimages(q, marked.dagger, mode, opt.preimage_cap);
    std::vector<Polynomial> pms = poly_preimages(p, marked.dagger, mode, opt.preimage_cap);

    std::set<ProvBCQ> seen_translations;
    for (const ProvBCQ& qm : qms) {
        for (const Polynomial& pm : pms) {
            // the translation needs pairwise distinct monomials; marking makes
            // dagger preimages distinct whenever the original terms are
            bool distinct = true;
            for (std::size_t i = 0; i + 1 < pm.terms.size(); ++i)
                if (pm.terms[i] == pm.terms[i + 1]) distinct = false;
            if (!distinct) continue;

            bool completed = for_each_translation(qm, pm, [&](const ProvBCQ& tr) {
                ProvBCQ canon = canonical_query(tr);
                if (!seen_translations.insert(canon).second) return true;
                for (const auto& rq :
                     perfect_ref_core(canon, positive, RewriteVariant::Consume, opt.caps)) {
                    if (has_match(rq, interp)) {
                        if (opt.want_witness) {
                            auto matches = enumerate_matches(rq, interp);
                            res.witness = "preimage query: " + render(qm) + "\n" +
                                          "preimage polynomial: " + render(pm) + "\n" +
                                          "translation: " + render(canon) + "\n" +
                                          "rewriting: " + render(rq) + "\n" +
                                          (matches.empty()
                                               ? std::string()
                                               : "match:\n" + detail::describe_match(matches[0]));
                        }
                        return false;
                    }
                }
                return true;
            });
            if (!completed) {
                res.entailed = true;
                return res;
            }
        }
    }
    return res;
}

inline bool entails(const AnnotatedOBDAInstance& inst, const ProvBCQ& q, const Polynomial& p,
                    const EntailOptions& opt = {}) {
    return entails_full(inst, q, p, opt).entailed;
}

// Certain-answer check for queries whose provenance positions are ground
// monomials, blanks or non-repeated variables: direct provenance-aware
// rewriting over the unmarked instance. Repeated provenance variables would
// need the translation machinery, so they are rejected.
inline bool entails_plain(const AnnotatedOBDAInstance& inst, const ProvBCQ& q,
                          const RewriteCaps& caps = {}) {
    std::map<std::string, int> prov_count;
    for (const auto& a : q.atoms)
        if (a.prov.kind == ProvTerm::Var) ++prov_count[a.prov.var];
    for (const auto& [v, n] : prov_count)
        if (n > 1)
            throw NotStandard("provenance variable '" + v +
                              "' is repeated; such queries need an explicit target polynomial");

    if (!check_satisfiability(inst, caps)) return true;
    FiniteAnnotatedInterpretation interp = interp_of_assertions(apply_mappings(inst));
    std::vector<AnnotatedAxiom> positive = positive_inclusions(inst.ontology);
    for (const auto& rq : perfect_ref_core(q, positive, RewriteVariant::Consume, caps))
        if (has_match(rq, interp)) return true;
    return false;
}

}  // namespace provobda
