#pragma once

// Marked instances: a provenance-preserving transformation that makes every
// annotation variable globally unique and specializes role information per
// individual pair, so that target polynomials can be rewritten under the
// pairwise-distinct-monomials requirement of the query translation. The
// dagger map records how to fold marked names back onto the original ones.

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

struct DaggerMap {
    std::map<std::string, std::string> var_to_original;   // fresh annotation var -> original
    std::map<std::string, std::string> role_to_original;  // pair-specialized role -> original
    std::set<std::string> copy_axiom_vars;                // variables of pair-copied axioms

    // inverses, built by finalize()
    std::map<std::string, std::vector<std::string>> var_preimages;
    std::map<std::string, std::vector<std::string>> role_aliases;

    const std::string& original_var(const std::string& v) const {
        auto it = var_to_original.find(v);
        return it == var_to_original.end() ? v : it->second;
    }
    const std::string& original_role(const std::string& r) const {
        auto it = role_to_original.find(r);
        return it == role_to_original.end() ? r : it->second;
    }

    Monomial dagger(const Monomial& m, SemiringMode mode) const {
        std::vector<std::string> factors;
        factors.reserve(m.factors.size());
        for (const auto& f : m.factors) factors.push_back(original_var(f));
        return make_mono(std::move(factors), mode);
    }
    Polynomial dagger(const Polynomial& p, SemiringMode mode) const {
        Polynomial out;
        out.terms.reserve(p.terms.size());
        for (const auto& m : p.terms) out.terms.push_back(dagger(m, mode));
        return poly_normalize(std::move(out), mode);
    }

    void finalize() {
        var_preimages.clear();
        role_aliases.clear();
        for (const auto& [fresh, orig] : var_to_original) var_preimages[orig].push_back(fresh);
        for (const auto& [alias, orig] : role_to_original) role_aliases[orig].push_back(alias);
    }
};

struct MarkedInstance {
    AnnotatedOBDAInstance instance;
    DaggerMap dagger;
};

namespace detail {

// Pairs produced in the head of one role rule, i.e. the head bindings of its
// body homomorphisms.
inline std::set<std::pair<std::string, std::string>> produced_pairs(
    const AnnotatedRule& rule, const AnnotatedDataInstance& data) {
    std::set<std::pair<std::string, std::string>> pairs;
    std::map<std::string, std::string> binding;
    std::vector<const DataTuple*> chosen;
    for_each_homomorphism(rule, data, 0, binding, chosen,
                          [&](const std::map<std::string, std::string>& b,
                              const std::vector<const DataTuple*>&) {
                              auto value = [&](const RuleTerm& t) {
                                  return t.kind == RuleTerm::Individual ? t.text : b.at(t.text);
                              };
                              pairs.emplace(value(rule.head_args[0]), value(rule.head_args[1]));
                          });
    return pairs;
}

}  // namespace detail

// Builds the marked companion of inst:
//   1. each role rule is specialized per pair it produces, with the head role
//      renamed to a pair-specific copy;
//   2. each positive axiom whose left side mentions a role gets one copy per
//      pair occurring in M(D), with the role(s) renamed accordingly;
//   3. every axiom, rule and tuple annotation is replaced by a globally
//      unique fresh variable.
// Negative inclusions are kept (renamed) but never copied.
inline MarkedInstance mark_instance(const AnnotatedOBDAInstance& inst) {
    for (const auto& ax : inst.ontology)
        if (ax.annotation.factors.size() != 1)
            throw Error("marking requires single-variable axiom annotations, got '" +
                        render(ax.annotation) + "'");

    MarkedInstance marked;
    marked.instance.schema = inst.schema;
    marked.instance.mode = inst.mode;

    std::set<std::string> used_vars = prov_variables(inst);
    std::set<std::string> used_preds = predicate_names(inst);

    int var_counter = 0;
    auto fresh_var = [&] {
        std::string v;
        do v = "_f" + std::to_string(var_counter++);
        while (used_vars.count(v));
        used_vars.insert(v);
        return v;
    };

    // every pair occurring in a role assertion of M(D), shared across roles
    std::vector<AnnotatedAssertion> md = apply_mappings(inst);
    std::set<std::pair<std::string, std::string>> pair_set;
    for (const auto& a : md)
        if (a.is_role()) pair_set.emplace(a.args[0], a.args[1]);

    std::map<std::tuple<std::string, std::string, std::string>, std::string> alias_names;
    auto alias_for = [&](const std::string& role, const std::string& a, const std::string& b) {
        auto key = std::make_tuple(role, a, b);
        auto it = alias_names.find(key);
        if (it != alias_names.end()) return it->second;
        std::string name = fresh_name(role + "__" + a + "__" + b, used_preds);
        alias_names.emplace(key, name);
        marked.dagger.role_to_original.emplace(name, role);
        return name;
    };

    // condition 1: specialize role rules per produced pair
    for (const auto& rule : inst.mapping) {
        if (rule.head_args.size() != 2) {
            marked.instance.mapping.push_back(rule);
            continue;
        }
        auto pairs = detail::produced_pairs(rule, inst.data);
        if (pairs.empty()) {
            marked.instance.mapping.push_back(rule);
            continue;
        }
        for (const auto& [a, b] : pairs) {
            AnnotatedRule spec = rule;
            std::map<std::string, std::string> sigma;
            if (rule.head_args[0].kind == RuleTerm::Variable) sigma[rule.head_args[0].text] = a;
            if (rule.head_args[1].kind == RuleTerm::Variable) sigma[rule.head_args[1].text] = b;
            spec.head_pred = alias_for(rule.head_pred, a, b);
            spec.head_args = {RuleTerm::ind(a), RuleTerm::ind(b)};
            for (auto& atom : spec.body)
                for (auto& t : atom.args)
                    if (t.kind == RuleTerm::Variable) {
                        auto it = sigma.find(t.text);
                        if (it != sigma.end()) t = RuleTerm::ind(it->second);
                    }
            marked.instance.mapping.push_back(std::move(spec));
        }
    }

    // originals first, then the pair copies (conditions 2 and 3)
    std::vector<std::pair<AnnotatedAxiom, bool>> axioms;  // (axiom, is_copy)
    for (const auto& ax : inst.ontology) axioms.emplace_back(ax, false);
    for (const auto& ax : inst.ontology) {
        if (!ax.axiom.positive()) continue;
        if (ax.axiom.kind == Axiom::ConceptInclusion) {
            const ConceptExpr& lhs = ax.axiom.lhs_c;
            if (lhs.kind != ConceptExpr::Exists) continue;
            for (const auto& [a, b] : pair_set) {
                AnnotatedAxiom copy = ax;
                copy.axiom.lhs_c = ConceptExpr::exists(alias_for(lhs.name, a, b), lhs.inverse);
                axioms.emplace_back(std::move(copy), true);
            }
        } else {
            for (const auto& [a, b] : pair_set) {
                AnnotatedAxiom copy = ax;
                copy.axiom.lhs_r = {alias_for(ax.axiom.lhs_r.name, a, b),
                                    ax.axiom.lhs_r.inverse};
                copy.axiom.rhs_r = {alias_for(ax.axiom.rhs_r.name, a, b),
                                    ax.axiom.rhs_r.inverse};
                axioms.emplace_back(std::move(copy), true);
            }
        }
    }

    // condition 4: fresh annotation variables everywhere
    for (auto& [ax, is_copy] : axioms) {
        std::string original = ax.annotation.factors[0];
        std::string fresh = fresh_var();
        ax.annotation = Monomial{{fresh}};
        marked.dagger.var_to_original.emplace(fresh, original);
        if (is_copy) marked.dagger.copy_axiom_vars.insert(fresh);
        marked.instance.ontology.push_back(std::move(ax));
    }
    for (auto& rule : marked.instance.mapping) {
        std::string fresh = fresh_var();
        marked.dagger.var_to_original.emplace(fresh, rule.annotation);
        rule.annotation = fresh;
    }
    for (const auto& [rel, rows] : inst.data.relations) {
        auto& out_rows = marked.instance.data.relations[rel];
        out_rows.reserve(rows.size());
        for (const auto& row : rows) {
            std::string fresh = fresh_var();
            marked.dagger.var_to_original.emplace(fresh, row.annotation);
            out_rows.push_back({row.args, fresh});
        }
    }

    marked.dagger.finalize();
    return marked;
}

}  // namespace provobda
