#pragma once

// Computing the full provenance polynomial of a standard query under the
// fully idempotent semiring: substitute the reserved star variable for the
// query's provenance variables, saturate with the extending rewriting, then
// evaluate every closure member over M(D) and fold the star away.

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "kb.hpp"
#include "query.hpp"
#include "rewrite.hpp"
#include "semiring.hpp"

namespace provobda {

// Internal placeholder; not expressible as an identifier in query files, so
// it can never collide with user variables.
inline const std::string kStarVariable = "$";

// Replaces every provenance variable of a standard query by the star.
inline ProvBCQ star_substitute(const ProvBCQ& q) {
    if (!is_standard(q))
        throw NotStandard(
            "provenance computation needs a standard query: pairwise distinct "
            "provenance variables, no ground annotations");
    ProvBCQ out = q;
    for (auto& a : out.atoms) a.prov = ProvTerm::monomial(Monomial{{kStarVariable}});
    return out;
}

inline bool applicable_star(const AnnotatedAxiom& I, const QueryAtom& g) {
    return applicable(I, g, RewriteVariant::Extend);
}

inline QueryAtom rewrite_atom_star(const QueryAtom& g, const AnnotatedAxiom& I) {
    return rewrite_atom(g, I, RewriteVariant::Extend);
}

// Star-variant closure: like the plain rewriting but annotations only ever
// grow (idempotent extension), which keeps the closure finite without any
// occurrence bookkeeping.
inline std::vector<ProvBCQ> perfect_ref_star(const ProvBCQ& q_star,
                                             const std::vector<AnnotatedAxiom>& positive,
                                             const RewriteCaps& caps = {}) {
    return perfect_ref_core(q_star, positive, RewriteVariant::Extend, caps);
}

namespace detail {

// The monomial with the star replaced by a concrete annotation, under set
// semantics.
inline Monomial star_replace(const Monomial& m, const Monomial& annotation) {
    Monomial out = mono_remove(m, kStarVariable);
    return mono_extend_idem_mono(out, annotation);
}

}  // namespace detail

// The provenance polynomial of q0 over inst: the sum, over all star-closure
// members and all their matches in M(D), of the product of the matched
// monomials substituted into the member's annotations. Only defined for the
// fully idempotent semiring.
inline Polynomial compute_prov(const ProvBCQ& q0, const AnnotatedOBDAInstance& inst,
                               const RewriteCaps& caps = {}) {
    if (inst.mode != SemiringMode::FullyIdempotent)
        throw ModeError("provenance computation is only defined for the fully idempotent mode");
    const SemiringMode mode = inst.mode;

    FiniteAnnotatedInterpretation interp = interp_of_assertions(apply_mappings(inst));
    std::vector<AnnotatedAxiom> positive = positive_inclusions(inst.ontology);

    std::vector<ProvBCQ> closure = perfect_ref_star(star_substitute(q0), positive, caps);

    // evaluate each closure member with its annotations re-variabilized, then
    // substitute each match's annotations for the star; distinct substituted
    // queries survive, unmatched ones are dropped
    std::set<ProvBCQ> substituted;
    for (const ProvBCQ& q : closure) {
        ProvBCQ q_y = q;
        for (std::size_t j = 0; j < q_y.atoms.size(); ++j)
            q_y.atoms[j].prov = ProvTerm::variable("__match" + std::to_string(j));
        for (const Match& m : enumerate_matches(q_y, interp)) {
            ProvBCQ inst_q = q;
            for (std::size_t j = 0; j < inst_q.atoms.size(); ++j)
                inst_q.atoms[j].prov = ProvTerm::monomial(
                    detail::star_replace(inst_q.atoms[j].prov.mono, m.atom_annotations[j]));
            substituted.insert(canonical_query(std::move(inst_q)));
        }
    }

    Polynomial result;
    for (const ProvBCQ& q : substituted) {
        Monomial prod;
        for (const auto& a : q.atoms) prod = mono_mul(prod, a.prov.mono, mode);
        result.terms.push_back(std::move(prod));
    }
    return poly_normalize(std::move(result), mode);
}

}  // namespace provobda
