#pragma once

// Model-construction oracle: a provenance-aware restricted chase over the
// positive inclusions, used as an independent ground truth for the rewriting
// pipelines. Free-semiring chases are bounded by derivation depth and report
// truncation; idempotent chases saturate (finitely many set-monomials over a
// finite variable pool).

#include <deque>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "entail.hpp"
#include "kb.hpp"
#include "marking.hpp"
#include "query.hpp"
#include "rewrite.hpp"
#include "semiring.hpp"

namespace provobda {

struct ChaseConfig {
    std::size_t depth_bound = 0;    // 0 = unbounded; required > 0 for the free mode
    std::size_t max_facts = 500000; // hard safety net, reported via `truncated`
};

struct ChaseFact {
    std::string pred;
    std::vector<std::string> args;  // size 1 or 2
    Monomial annotation;
    std::size_t level = 0;  // 0 for M(D) facts, premise level + 1 otherwise

    auto operator<=>(const ChaseFact&) const = default;
};

struct ChaseModel {
    std::vector<ChaseFact> facts;  // insertion (FIFO) order
    bool depth_truncated = false;  // some derivation went past the depth bound
    bool cap_truncated = false;    // the hard fact cap stopped the chase

    bool truncated() const { return depth_truncated || cap_truncated; }

    FiniteAnnotatedInterpretation interp() const {
        std::vector<AnnotatedAssertion> assertions;
        assertions.reserve(facts.size());
        for (const auto& f : facts) assertions.push_back({f.pred, f.args, f.annotation});
        return interp_of_assertions(assertions);
    }
};

namespace detail {

struct ChaseState {
    SemiringMode mode;
    ChaseConfig cfg;
    std::vector<ChaseFact> facts;
    std::set<std::tuple<std::string, std::vector<std::string>, Monomial>> seen;
    // witness guards for existential heads: (role, end individual, annotation)
    std::set<std::tuple<std::string, std::string, Monomial>> subject_witness;
    std::set<std::tuple<std::string, std::string, Monomial>> object_witness;
    std::set<std::string> domain;
    int fresh_counter = 0;
    bool depth_truncated = false;
    bool cap_truncated = false;

    std::string fresh_individual() {
        std::string name;
        do name = "_e" + std::to_string(fresh_counter++);
        while (domain.count(name));
        domain.insert(name);
        return name;
    }

    void add(ChaseFact f) {
        if (cfg.depth_bound && f.level > cfg.depth_bound) {
            depth_truncated = true;
            return;
        }
        if (facts.size() >= cfg.max_facts) {
            cap_truncated = true;
            return;
        }
        if (!seen.emplace(f.pred, f.args, f.annotation).second) return;
        for (const auto& a : f.args) domain.insert(a);
        if (f.args.size() == 2) {
            subject_witness.emplace(f.pred, f.args[0], f.annotation);
            object_witness.emplace(f.pred, f.args[1], f.annotation);
        }
        facts.push_back(std::move(f));
    }

    // subject of the axiom's left-hand side in fact f, if f matches it
    bool premise_subject(const Axiom& ax, const ChaseFact& f, std::string& subject) const {
        if (ax.kind == Axiom::ConceptInclusion) {
            const ConceptExpr& lhs = ax.lhs_c;
            if (lhs.kind == ConceptExpr::Atomic) {
                if (f.args.size() != 1 || f.pred != lhs.name) return false;
                subject = f.args[0];
                return true;
            }
            if (f.args.size() != 2 || f.pred != lhs.name) return false;
            subject = lhs.inverse ? f.args[1] : f.args[0];
            return true;
        }
        return false;
    }

    void apply(const AnnotatedAxiom& aax, const ChaseFact& f) {
        const Axiom& ax = aax.axiom;
        if (ax.rhs_negated) return;
        Monomial ann = mono_mul(f.annotation, aax.annotation, mode);
        std::size_t level = f.level + 1;

        if (ax.kind == Axiom::ConceptInclusion) {
            std::string subject;
            if (!premise_subject(ax, f, subject)) return;
            const ConceptExpr& rhs = ax.rhs_c;
            if (rhs.kind == ConceptExpr::Atomic) {
                add({rhs.name, {subject}, ann, level});
                return;
            }
            // existential head: only create a witness if none exists with
            // this exact annotation
            if (!rhs.inverse) {
                if (subject_witness.count({rhs.name, subject, ann})) return;
                if (cfg.depth_bound && level > cfg.depth_bound) {
                    depth_truncated = true;
                    return;
                }
                add({rhs.name, {subject, fresh_individual()}, ann, level});
            } else {
                if (object_witness.count({rhs.name, subject, ann})) return;
                if (cfg.depth_bound && level > cfg.depth_bound) {
                    depth_truncated = true;
                    return;
                }
                add({rhs.name, {fresh_individual(), subject}, ann, level});
            }
            return;
        }

        // role inclusion
        if (f.args.size() != 2 || f.pred != ax.lhs_r.name) return;
        std::string x = ax.lhs_r.inverse ? f.args[1] : f.args[0];
        std::string y = ax.lhs_r.inverse ? f.args[0] : f.args[1];
        if (ax.rhs_r.inverse) std::swap(x, y);
        add({ax.rhs_r.name, {x, y}, ann, level});
    }
};

}  // namespace detail

// Restricted chase of the instance's M(D) with its positive inclusions.
// Deterministic: facts are processed first-in-first-out.
inline ChaseModel chase(const AnnotatedOBDAInstance& inst, const ChaseConfig& cfg = {}) {
    if (inst.mode == SemiringMode::Free && cfg.depth_bound == 0)
        throw ModeError("free-mode chase needs a depth bound to terminate");

    detail::ChaseState st;
    st.mode = inst.mode;
    st.cfg = cfg;

    for (const auto& a : apply_mappings(inst)) st.add({a.pred, a.args, a.annotation, 0});

    std::vector<AnnotatedAxiom> positive = positive_inclusions(inst.ontology);
    for (std::size_t idx = 0; idx < st.facts.size(); ++idx) {
        const ChaseFact f = st.facts[idx];  // copy: st.facts may reallocate
        for (const auto& ax : positive) st.apply(ax, f);
    }

    ChaseModel model;
    model.facts = std::move(st.facts);
    model.depth_truncated = st.depth_truncated;
    model.cap_truncated = st.cap_truncated;
    return model;
}

// ---- oracle counterparts of the two pipelines ---------------------------------

enum class OracleAnswer { True, False, Indeterminate };

inline std::string to_string(OracleAnswer a) {
    switch (a) {
        case OracleAnswer::True: return "true";
        case OracleAnswer::False: return "false";
        case OracleAnswer::Indeterminate: return "indeterminate";
    }
    return "?";
}

// In the free semiring every chase step multiplies a nonempty axiom
// annotation in, and M(D) facts start with at least two occurrences, so a
// fact at level L carries at least L + 2 occurrences. A depth bound of the
// target's longest monomial therefore cannot cut off any fact that could
// take part in a witnessing match.
inline std::size_t sufficient_free_depth(const Polynomial& p) {
    std::size_t max_occ = 0;
    for (const auto& m : p.terms) max_occ = std::max(max_occ, m.factors.size());
    return max_occ;
}

// Entailment via the chase of the marked instance: (q, p) holds iff some
// dagger preimage is satisfied in the (possibly truncated) canonical model.
inline OracleAnswer oracle_entails(const AnnotatedOBDAInstance& inst, const ProvBCQ& q,
                                   const Polynomial& p, ChaseConfig cfg = {},
                                   std::size_t preimage_cap = 200000) {
    if (!check_satisfiability(inst)) return OracleAnswer::True;
    if (p.is_zero()) return OracleAnswer::True;

    MarkedInstance marked = mark_instance(inst);

    if (cfg.depth_bound == 0 && inst.mode == SemiringMode::Free)
        cfg.depth_bound = sufficient_free_depth(p);

    ChaseModel model = chase(marked.instance, cfg);
    FiniteAnnotatedInterpretation interp = model.interp();

    for (const ProvBCQ& qm : query_preimages(q, marked.dagger, inst.mode, preimage_cap))
        for (const Polynomial& pm : poly_preimages(p, marked.dagger, inst.mode, preimage_cap))
            if (satisfies_with(qm, pm, interp, inst.mode)) return OracleAnswer::True;

    if (model.cap_truncated) return OracleAnswer::Indeterminate;
    if (model.depth_truncated) {
        // free-mode preimages preserve occurrence counts, so a deep-enough
        // bound makes the negative answer definitive
        bool deep_enough =
            inst.mode == SemiringMode::Free && cfg.depth_bound >= sufficient_free_depth(p);
        if (!deep_enough) return OracleAnswer::Indeterminate;
    }
    return OracleAnswer::False;
}

// Provenance via the chase: evaluate the standard query over the saturated
// canonical model. Only defined for the fully idempotent mode, where the
// chase terminates on its own.
inline Polynomial oracle_prov(const ProvBCQ& q0, const AnnotatedOBDAInstance& inst,
                              const ChaseConfig& cfg = {}) {
    if (inst.mode != SemiringMode::FullyIdempotent)
        throw ModeError("provenance computation is only defined for the fully idempotent mode");
    if (!is_standard(q0))
        throw NotStandard("provenance computation needs a standard query");
    ChaseModel model = chase(inst, cfg);
    if (model.truncated()) throw CapExceeded("chase hit the fact cap before saturating");
    return provenance_on(q0, model.interp(), inst.mode);
}

}  // namespace provobda
