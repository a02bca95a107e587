#pragma once

// Annotated knowledge bases: DL-Lite ontologies with monomial-annotated
// axioms, GAV mappings with provenance positions, annotated data, and the
// virtual instance M(D) they induce.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "semiring.hpp"

namespace provobda {

struct RoleExpr {
    std::string name;
    bool inverse = false;

    auto operator<=>(const RoleExpr&) const = default;
};

struct ConceptExpr {
    enum Kind { Atomic, Exists };

    Kind kind = Atomic;
    std::string name;      // concept name (Atomic) or role name (Exists)
    bool inverse = false;  // only meaningful for Exists

    static ConceptExpr atomic(std::string n) { return {Atomic, std::move(n), false}; }
    static ConceptExpr exists(std::string role, bool inv = false) {
        return {Exists, std::move(role), inv};
    }

    auto operator<=>(const ConceptExpr&) const = default;
};

// B1 sub (not)? B2  or  S1 subrole (not)? S2.
struct Axiom {
    enum Kind { ConceptInclusion, RoleInclusion };

    Kind kind = ConceptInclusion;
    ConceptExpr lhs_c, rhs_c;  // used when ConceptInclusion
    RoleExpr lhs_r, rhs_r;     // used when RoleInclusion
    bool rhs_negated = false;

    static Axiom concept_inc(ConceptExpr lhs, ConceptExpr rhs, bool neg = false) {
        Axiom a;
        a.kind = ConceptInclusion;
        a.lhs_c = std::move(lhs);
        a.rhs_c = std::move(rhs);
        a.rhs_negated = neg;
        return a;
    }
    static Axiom role_inc(RoleExpr lhs, RoleExpr rhs, bool neg = false) {
        Axiom a;
        a.kind = RoleInclusion;
        a.lhs_r = std::move(lhs);
        a.rhs_r = std::move(rhs);
        a.rhs_negated = neg;
        return a;
    }

    bool positive() const { return !rhs_negated; }

    auto operator<=>(const Axiom&) const = default;
};

struct AnnotatedAxiom {
    Axiom axiom;
    Monomial annotation;  // in the files always a single variable

    auto operator<=>(const AnnotatedAxiom&) const = default;
};

// predicate name -> arity (1 for concepts, 2 for roles on the ontology side;
// arbitrary for source relations).
struct Schema {
    std::map<std::string, int> arity;

    bool has(const std::string& p) const { return arity.count(p) != 0; }

    void require(const std::string& p, int n) {
        auto [it, inserted] = arity.emplace(p, n);
        if (!inserted && it->second != n)
            throw ArityMismatch("predicate '" + p + "' used with arity " + std::to_string(n) +
                                " but previously with arity " + std::to_string(it->second));
    }
};

struct DataTuple {
    std::vector<std::string> args;
    std::string annotation;  // one provenance variable per stored tuple

    auto operator<=>(const DataTuple&) const = default;
};

struct AnnotatedDataInstance {
    std::map<std::string, std::vector<DataTuple>> relations;

    std::size_t tuple_count() const {
        std::size_t n = 0;
        for (const auto& [name, rows] : relations) n += rows.size();
        return n;
    }
};

struct RuleTerm {
    enum Kind { Variable, Individual };

    Kind kind = Variable;
    std::string text;

    static RuleTerm var(std::string t) { return {Variable, std::move(t)}; }
    static RuleTerm ind(std::string t) { return {Individual, std::move(t)}; }

    auto operator<=>(const RuleTerm&) const = default;
};

struct RuleAtom {
    std::string pred;
    std::vector<RuleTerm> args;  // ordinary positions only
    std::string prov_var;        // variable bound to the matched tuple's annotation

    auto operator<=>(const RuleAtom&) const = default;
};

// head(x...) <- body @ m. The head predicate is a concept (1 arg) or role
// (2 args); each body atom carries its own provenance variable.
struct AnnotatedRule {
    std::string head_pred;
    std::vector<RuleTerm> head_args;
    std::vector<RuleAtom> body;
    std::string annotation;

    auto operator<=>(const AnnotatedRule&) const = default;
};

// Ground concept/role fact of the virtual instance, with its monomial.
struct AnnotatedAssertion {
    std::string pred;
    std::vector<std::string> args;
    Monomial annotation;

    bool is_role() const { return args.size() == 2; }

    auto operator<=>(const AnnotatedAssertion&) const = default;
};

struct AnnotatedOBDAInstance {
    std::vector<AnnotatedAxiom> ontology;
    std::vector<AnnotatedRule> mapping;
    Schema schema;
    AnnotatedDataInstance data;
    SemiringMode mode = SemiringMode::Free;
};

// ---- vocabulary helpers ------------------------------------------------

// Every provenance variable mentioned anywhere in the instance; used to pick
// collision-free fresh names.
inline std::set<std::string> prov_variables(const AnnotatedOBDAInstance& inst) {
    std::set<std::string> vars;
    for (const auto& ax : inst.ontology)
        vars.insert(ax.annotation.factors.begin(), ax.annotation.factors.end());
    for (const auto& rule : inst.mapping) {
        vars.insert(rule.annotation);
        for (const auto& atom : rule.body) vars.insert(atom.prov_var);
    }
    for (const auto& [rel, rows] : inst.data.relations)
        for (const auto& row : rows) vars.insert(row.annotation);
    return vars;
}

inline std::set<std::string> predicate_names(const AnnotatedOBDAInstance& inst) {
    std::set<std::string> names;
    for (const auto& ax : inst.ontology) {
        if (ax.axiom.kind == Axiom::ConceptInclusion) {
            for (const ConceptExpr* c : {&ax.axiom.lhs_c, &ax.axiom.rhs_c}) names.insert(c->name);
        } else {
            names.insert(ax.axiom.lhs_r.name);
            names.insert(ax.axiom.rhs_r.name);
        }
    }
    for (const auto& rule : inst.mapping) {
        names.insert(rule.head_pred);
        for (const auto& atom : rule.body) names.insert(atom.pred);
    }
    for (const auto& [rel, rows] : inst.data.relations) names.insert(rel);
    for (const auto& [rel, n] : inst.schema.arity) names.insert(rel);
    return names;
}

inline std::string fresh_name(const std::string& base, std::set<std::string>& used) {
    std::string candidate = base;
    for (int k = 2; used.count(candidate); ++k) candidate = base + "_" + std::to_string(k);
    used.insert(candidate);
    return candidate;
}

// ---- inverse elimination -----------------------------------------------

// Replaces every occurrence of inv(R) by a fresh role name and adds the two
// annotated inclusions that tie the fresh role to R's inverse. Axioms that
// never mention an inverse are returned untouched.
inline std::vector<AnnotatedAxiom> normalize_inverses(const std::vector<AnnotatedAxiom>& ontology) {
    // first-occurrence order of roles appearing inverted
    std::vector<std::string> inverted;
    std::set<std::string> seen;
    auto note_concept = [&](const ConceptExpr& c) {
        if (c.kind == ConceptExpr::Exists && c.inverse && seen.insert(c.name).second)
            inverted.push_back(c.name);
    };
    auto note_role = [&](const RoleExpr& r) {
        if (r.inverse && seen.insert(r.name).second) inverted.push_back(r.name);
    };
    for (const auto& ax : ontology) {
        if (ax.axiom.kind == Axiom::ConceptInclusion) {
            note_concept(ax.axiom.lhs_c);
            note_concept(ax.axiom.rhs_c);
        } else {
            note_role(ax.axiom.lhs_r);
            note_role(ax.axiom.rhs_r);
        }
    }
    if (inverted.empty()) return ontology;

    std::set<std::string> used_preds;
    std::set<std::string> used_vars;
    for (const auto& ax : ontology) {
        used_vars.insert(ax.annotation.factors.begin(), ax.annotation.factors.end());
        if (ax.axiom.kind == Axiom::ConceptInclusion) {
            used_preds.insert(ax.axiom.lhs_c.name);
            used_preds.insert(ax.axiom.rhs_c.name);
        } else {
            used_preds.insert(ax.axiom.lhs_r.name);
            used_preds.insert(ax.axiom.rhs_r.name);
        }
    }

    std::map<std::string, std::string> alias;  // R -> fresh name standing for inv(R)
    int var_counter = 0;
    auto fresh_var = [&] {
        std::string v;
        do v = "_inv" + std::to_string(var_counter++);
        while (used_vars.count(v));
        used_vars.insert(v);
        return v;
    };

    std::vector<AnnotatedAxiom> extra;
    for (const auto& role : inverted) {
        std::string name = fresh_name(role + "__inv", used_preds);
        alias[role] = name;
        // inv(R) sub alias and alias sub inv(R), each with its own fresh variable
        extra.push_back({Axiom::role_inc({role, true}, {name, false}),
                         Monomial{{fresh_var()}}});
        extra.push_back({Axiom::role_inc({name, false}, {role, true}),
                         Monomial{{fresh_var()}}});
    }

    auto fix_concept = [&](ConceptExpr c) {
        if (c.kind == ConceptExpr::Exists && c.inverse) {
            c.name = alias.at(c.name);
            c.inverse = false;
        }
        return c;
    };
    auto fix_role = [&](RoleExpr r) {
        if (r.inverse) {
            r.name = alias.at(r.name);
            r.inverse = false;
        }
        return r;
    };

    std::vector<AnnotatedAxiom> out;
    out.reserve(ontology.size() + extra.size());
    for (auto ax : ontology) {
        if (ax.axiom.kind == Axiom::ConceptInclusion) {
            ax.axiom.lhs_c = fix_concept(ax.axiom.lhs_c);
            ax.axiom.rhs_c = fix_concept(ax.axiom.rhs_c);
        } else {
            ax.axiom.lhs_r = fix_role(ax.axiom.lhs_r);
            ax.axiom.rhs_r = fix_role(ax.axiom.rhs_r);
        }
        out.push_back(std::move(ax));
    }
    for (auto& ax : extra) out.push_back(std::move(ax));
    return out;
}

inline bool ontology_mentions_inverse(const std::vector<AnnotatedAxiom>& ontology) {
    for (const auto& ax : ontology) {
        if (ax.axiom.kind == Axiom::ConceptInclusion) {
            if ((ax.axiom.lhs_c.kind == ConceptExpr::Exists && ax.axiom.lhs_c.inverse) ||
                (ax.axiom.rhs_c.kind == ConceptExpr::Exists && ax.axiom.rhs_c.inverse))
                return true;
        } else if (ax.axiom.lhs_r.inverse || ax.axiom.rhs_r.inverse) {
            return true;
        }
    }
    return false;
}

// ---- mapping application -----------------------------------------------

inline void validate_rule(const AnnotatedRule& rule, const Schema& schema) {
    if (rule.head_args.empty() || rule.head_args.size() > 2)
        throw ArityMismatch("rule head '" + rule.head_pred + "' must have 1 or 2 arguments");
    if (rule.body.empty()) throw Error("rule for '" + rule.head_pred + "' has an empty body");

    std::set<std::string> body_vars;
    std::set<std::string> prov_vars;
    for (const auto& atom : rule.body) {
        if (!schema.has(atom.pred))
            throw UnknownPredicate("mapping body uses unknown source relation '" + atom.pred +
                                   "'");
        int expected = schema.arity.at(atom.pred);
        if (static_cast<int>(atom.args.size()) != expected)
            throw ArityMismatch("relation '" + atom.pred + "' has arity " +
                                std::to_string(expected) + " but the rule uses " +
                                std::to_string(atom.args.size()) + " ordinary positions");
        for (const auto& t : atom.args)
            if (t.kind == RuleTerm::Variable) body_vars.insert(t.text);
        if (!prov_vars.insert(atom.prov_var).second)
            throw Error("provenance variable '" + atom.prov_var +
                        "' appears on two body atoms of rule for '" + rule.head_pred + "'");
    }
    for (const auto& t : rule.head_args)
        if (t.kind == RuleTerm::Variable && !body_vars.count(t.text))
            throw Error("head variable '" + t.text + "' of rule for '" + rule.head_pred +
                        "' is not bound by the body");
    for (const auto& t : rule.head_args)
        if (t.kind == RuleTerm::Variable && prov_vars.count(t.text))
            throw Error("variable '" + t.text + "' used both as ordinary and provenance variable");
}

namespace detail {

template <typename Fn>
inline void for_each_homomorphism(const AnnotatedRule& rule, const AnnotatedDataInstance& data,
                                  std::size_t atom_idx,
                                  std::map<std::string, std::string>& binding,
                                  std::vector<const DataTuple*>& chosen, Fn&& emit) {
    if (atom_idx == rule.body.size()) {
        emit(binding, chosen);
        return;
    }
    const RuleAtom& atom = rule.body[atom_idx];
    auto it = data.relations.find(atom.pred);
    if (it == data.relations.end()) return;
    for (const DataTuple& row : it->second) {
        std::vector<std::string> newly_bound;
        bool ok = true;
        for (std::size_t i = 0; i < atom.args.size(); ++i) {
            const RuleTerm& t = atom.args[i];
            const std::string& val = row.args[i];
            if (t.kind == RuleTerm::Individual) {
                if (t.text != val) {
                    ok = false;
                    break;
                }
                continue;
            }
            auto [pos, inserted] = binding.emplace(t.text, val);
            if (inserted) {
                newly_bound.push_back(t.text);
            } else if (pos->second != val) {
                ok = false;
                break;
            }
        }
        if (ok) {
            chosen.push_back(&row);
            for_each_homomorphism(rule, data, atom_idx + 1, binding, chosen, emit);
            chosen.pop_back();
        }
        for (const auto& v : newly_bound) binding.erase(v);
    }
}

}  // namespace detail

// M(D): every homomorphism from a rule body into the data yields one head
// assertion annotated with rule variable times the matched tuples'
// annotations. Result is sorted; assertions equal up to math-equal
// annotations are collapsed, same fact with different monomials is kept.
inline std::vector<AnnotatedAssertion> apply_mappings(const std::vector<AnnotatedRule>& mapping,
                                                      const AnnotatedDataInstance& data,
                                                      const Schema& schema, SemiringMode mode) {
    std::set<AnnotatedAssertion> out;
    for (const auto& rule : mapping) {
        validate_rule(rule, schema);
        std::map<std::string, std::string> binding;
        std::vector<const DataTuple*> chosen;
        detail::for_each_homomorphism(
            rule, data, 0, binding, chosen,
            [&](const std::map<std::string, std::string>& b,
                const std::vector<const DataTuple*>& rows) {
                AnnotatedAssertion a;
                a.pred = rule.head_pred;
                for (const auto& t : rule.head_args)
                    a.args.push_back(t.kind == RuleTerm::Individual ? t.text : b.at(t.text));
                std::vector<std::string> factors{rule.annotation};
                for (const DataTuple* row : rows) factors.push_back(row->annotation);
                a.annotation = make_mono(std::move(factors), mode);
                out.insert(std::move(a));
            });
    }
    return {out.begin(), out.end()};
}

inline std::vector<AnnotatedAssertion> apply_mappings(const AnnotatedOBDAInstance& inst) {
    return apply_mappings(inst.mapping, inst.data, inst.schema, inst.mode);
}

}  // namespace provobda
