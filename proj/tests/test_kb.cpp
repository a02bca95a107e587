#include <algorithm>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "provobda/io.hpp"
#include "provobda/kb.hpp"
#include "provobda/marking.hpp"
#include "support/gen.hpp"

using namespace provobda;

namespace {

const char* kMayorOnto = "exists headGov sub Mayor @ s\n";
const char* kMayorMap =
    "City(Y) <- Mayors(X, Y, @Z) @ m\n"
    "headGov(X, Y) <- Mayors(X, Y, @Z) @ n\n";
const char* kMayorData =
    "Mayors, Renier, Venice, @p\n"
    "Mayors, Brugnaro, Venice, @q\n";

AnnotatedOBDAInstance mayors(SemiringMode mode) {
    return make_instance(parse_ontology(kMayorOnto, mode), parse_mapping(kMayorMap),
                         parse_data(kMayorData).first, parse_data(kMayorData).second,
                         mode);
}

AnnotatedAssertion assertion(std::string pred, std::vector<std::string> args, std::string mono,
                             SemiringMode mode = SemiringMode::Free) {
    return {std::move(pred), std::move(args), parse_monomial(mono, mode)};
}

}  // namespace

TEST_CASE("virtual assertions of the city hall instance") {
    auto md = apply_mappings(mayors(SemiringMode::Free));
    std::vector<AnnotatedAssertion> expected{
        assertion("City", {"Venice"}, "m*p"),
        assertion("City", {"Venice"}, "m*q"),
        assertion("headGov", {"Brugnaro", "Venice"}, "n*q"),
        assertion("headGov", {"Renier", "Venice"}, "n*p"),
    };
    CHECK(md == expected);
}

TEST_CASE("joins bind shared variables and multiply every matched tuple") {
    SemiringMode mode = SemiringMode::Free;
    auto mapping = parse_mapping("Reach(X, Z) <- Edge(X, Y, @P1), Edge(Y, Z, @P2) @ r\n");
    auto [data, schema] = parse_data(
        "Edge, a, b, @u\n"
        "Edge, b, c, @v\n");
    auto md = apply_mappings(mapping, data, schema, mode);
    REQUIRE(md.size() == 1);
    CHECK(md[0] == assertion("Reach", {"a", "c"}, "r*u*v"));
}

TEST_CASE("one tuple matched twice contributes its variable twice under free") {
    SemiringMode mode = SemiringMode::Free;
    auto mapping = parse_mapping("Loop(X, X) <- Edge(X, Y, @P1), Edge(X, Y, @P2) @ r\n");
    auto [data, schema] = parse_data("Edge, a, a, @u\n");
    auto md = apply_mappings(mapping, data, schema, mode);
    REQUIRE(md.size() == 1);
    CHECK(render(md[0].annotation) == "r*u*u");

    auto collapsed = apply_mappings(mapping, data, schema, SemiringMode::FullyIdempotent);
    REQUIRE(collapsed.size() == 1);
    CHECK(render(collapsed[0].annotation) == "r*u");
}

TEST_CASE("rule label absorbs an equal row label under idempotent product") {
    SemiringMode mode = SemiringMode::FullyIdempotent;
    auto mapping = parse_mapping("headGov(X, Y) <- GovRegisterA(X, Y, @Z) @ u\n");
    auto [data, schema] = parse_data("GovRegisterA, Renier, Venice, @u\n");
    auto md = apply_mappings(mapping, data, schema, mode);
    REQUIRE(md.size() == 1);
    CHECK(render(md[0].annotation) == "u");
}

TEST_CASE("equal facts with math-equal annotations collapse, distinct ones stay") {
    SemiringMode mode = SemiringMode::Free;
    auto mapping = parse_mapping(
        "A(X) <- R(X, @Z) @ m\n"
        "A(X) <- R(X, @Z) @ m\n"
        "A(X) <- S(X, @Z) @ m\n");
    auto [data, schema] = parse_data(
        "R, a, @u\n"
        "S, a, @v\n");
    auto md = apply_mappings(mapping, data, schema, mode);
    std::vector<AnnotatedAssertion> expected{
        assertion("A", {"a"}, "m*u"),
        assertion("A", {"a"}, "m*v"),
    };
    CHECK(md == expected);
}

TEST_CASE("individuals in rule bodies filter rows") {
    // the file grammar writes variables only; ground positions arise
    // internally when rules get specialized per produced pair
    SemiringMode mode = SemiringMode::Free;
    AnnotatedRule rule{"Local",
                       {RuleTerm::var("X")},
                       {{"Mayors", {RuleTerm::var("X"), RuleTerm::ind("Venice")}, "Z"}},
                       "m"};
    auto [data, schema] = parse_data(
        "Mayors, Renier, Venice, @p\n"
        "Mayors, Sala, Milan, @q\n");
    auto md = apply_mappings({rule}, data, schema, mode);
    REQUIRE(md.size() == 1);
    CHECK(md[0] == assertion("Local", {"Renier"}, "m*p"));
}

TEST_CASE("individuals in rule heads are kept in place") {
    SemiringMode mode = SemiringMode::Free;
    AnnotatedRule rule{"locatedIn",
                       {RuleTerm::var("X"), RuleTerm::ind("italy")},
                       {{"Mayors", {RuleTerm::var("X"), RuleTerm::var("Y")}, "Z"}},
                       "m"};
    auto [data, schema] = parse_data("Mayors, Renier, Venice, @p\n");
    auto md = apply_mappings({rule}, data, schema, mode);
    REQUIRE(md.size() == 1);
    CHECK(md[0] == assertion("locatedIn", {"Renier", "italy"}, "m*p"));
}

TEST_CASE("rule validation rejects malformed rules") {
    Schema schema;
    schema.require("T", 2);

    auto rule = [](std::string text) { return parse_mapping(text)[0]; };

    CHECK_THROWS_AS(validate_rule(rule("A(X) <- Missing(X, Y, @Z) @ m\n"), schema), UnknownPredicate);
    CHECK_THROWS_AS(validate_rule(rule("A(X) <- T(X, Y, Z, @W) @ m\n"), schema), ArityMismatch);
    CHECK_THROWS_AS(validate_rule(rule("A(Z) <- T(X, Y, @W) @ m\n"), schema), Error);

    AnnotatedRule dup = rule("R(X, Y) <- T(X, Y, @W1), T(Y, X, @W2) @ m\n");
    dup.body[1].prov_var = dup.body[0].prov_var;
    CHECK_THROWS_AS(validate_rule(dup, schema), Error);

    AnnotatedRule wide = rule("R(X, Y) <- T(X, Y, @W) @ m\n");
    wide.head_args.push_back(RuleTerm::var("X"));
    CHECK_THROWS_AS(validate_rule(wide, schema), ArityMismatch);
}

TEST_CASE("schema arity conflicts are reported") {
    Schema s;
    s.require("P", 2);
    s.require("P", 2);
    CHECK_THROWS_AS(s.require("P", 3), ArityMismatch);
}

TEST_CASE("fresh_name skips taken candidates") {
    std::set<std::string> used{"R", "R_2"};
    CHECK(fresh_name("R", used) == "R_3");
    CHECK(fresh_name("S", used) == "S");
    CHECK(used.count("R_3") == 1);
}

TEST_CASE("normalize_inverses leaves inverse-free ontologies untouched") {
    auto onto = parse_ontology("A sub B @ u\nR subrole S @ v\n", SemiringMode::Free);
    CHECK(normalize_inverses(onto) == onto);
    CHECK_FALSE(ontology_mentions_inverse(onto));
}

TEST_CASE("normalize_inverses introduces one alias per inverted role") {
    auto onto = parse_ontology(
        "worksFor subrole inv(employs) @ w1\n"
        "exists inv(worksFor) sub Employer @ e1\n",
        SemiringMode::Free);
    REQUIRE(ontology_mentions_inverse(onto));

    auto norm = normalize_inverses(onto);
    // two rewritten axioms plus two tie-in axioms per inverted role; the
    // rewritten originals are inverse free, only the tie-ins keep inv(R)
    REQUIRE(norm.size() == 6);
    for (std::size_t i = 0; i < onto.size(); ++i)
        CHECK_FALSE(ontology_mentions_inverse({norm[i]}));

    CHECK(norm[0].axiom.rhs_r == RoleExpr{"employs__inv", false});
    CHECK(norm[1].axiom.lhs_c == ConceptExpr::exists("worksFor__inv"));
    CHECK(norm[0].annotation == onto[0].annotation);
    CHECK(norm[1].annotation == onto[1].annotation);

    // employs__inv is tied to inv(employs) in both directions
    CHECK(norm[2].axiom == Axiom::role_inc({"employs", true}, {"employs__inv", false}));
    CHECK(norm[3].axiom == Axiom::role_inc({"employs__inv", false}, {"employs", true}));
    CHECK(norm[4].axiom == Axiom::role_inc({"worksFor", true}, {"worksFor__inv", false}));
    CHECK(norm[5].axiom == Axiom::role_inc({"worksFor__inv", false}, {"worksFor", true}));

    // the four tie-in annotations are fresh pairwise distinct variables
    std::set<std::string> fresh;
    for (std::size_t i = 2; i < norm.size(); ++i) {
        REQUIRE(norm[i].annotation.factors.size() == 1);
        fresh.insert(norm[i].annotation.factors[0]);
    }
    CHECK(fresh.size() == 4);
    CHECK(fresh.count("w1") == 0);
    CHECK(fresh.count("e1") == 0);
}

TEST_CASE("normalize_inverses avoids colliding with existing names") {
    auto onto = parse_ontology(
        "R__inv subrole T @ a\n"
        "S subrole inv(R) @ _inv0\n",
        SemiringMode::Free);
    auto norm = normalize_inverses(onto);
    // the alias cannot reuse R__inv, and fresh variables cannot reuse _inv0
    REQUIRE(norm.size() == 4);
    CHECK(norm[1].axiom.rhs_r.name == "R__inv_2");
    std::set<std::string> vars;
    for (const auto& ax : norm)
        for (const auto& f : ax.annotation.factors) vars.insert(f);
    CHECK(vars == std::set<std::string>{"a", "_inv0", "_inv1", "_inv2"});
}

TEST_CASE("vocabulary helpers collect every name") {
    auto inst = mayors(SemiringMode::Free);
    auto vars = prov_variables(inst);
    CHECK(vars == std::set<std::string>{"m", "n", "p", "q", "s",
                                        inst.mapping[0].body[0].prov_var,
                                        inst.mapping[1].body[0].prov_var});
    auto preds = predicate_names(inst);
    CHECK(preds.count("Mayor") == 1);
    CHECK(preds.count("Mayors") == 1);
    CHECK(preds.count("headGov") == 1);
    CHECK(preds.count("City") == 1);
}

TEST_CASE("apply_mappings is invariant under tuple order") {
    gen::Rng rng(gen::env_seed());
    auto inst = mayors(SemiringMode::Free);
    auto [data, schema] = parse_data(kMayorData);
    auto baseline = apply_mappings(inst.mapping, data, schema, SemiringMode::Free);
    for (int round = 0; round < 20; ++round) {
        AnnotatedDataInstance shuffled = data;
        for (auto& [rel, rows] : shuffled.relations) std::shuffle(rows.begin(), rows.end(), rng);
        CHECK(apply_mappings(inst.mapping, shuffled, schema, SemiringMode::Free) == baseline);
    }
}

TEST_CASE("marking specializes role rules per produced pair") {
    auto marked = mark_instance(mayors(SemiringMode::Free));
    const auto& mapping = marked.instance.mapping;
    REQUIRE(mapping.size() == 3);
    CHECK(mapping[0].head_pred == "City");

    CHECK(mapping[1].head_pred == "headGov__Brugnaro__Venice");
    CHECK(mapping[1].head_args ==
          std::vector<RuleTerm>{RuleTerm::ind("Brugnaro"), RuleTerm::ind("Venice")});
    REQUIRE(mapping[1].body.size() == 1);
    CHECK(mapping[1].body[0].args ==
          std::vector<RuleTerm>{RuleTerm::ind("Brugnaro"), RuleTerm::ind("Venice")});

    CHECK(mapping[2].head_pred == "headGov__Renier__Venice");
    CHECK(mapping[2].head_args ==
          std::vector<RuleTerm>{RuleTerm::ind("Renier"), RuleTerm::ind("Venice")});
}

TEST_CASE("marking copies role-premise axioms per pair, originals first") {
    auto marked = mark_instance(mayors(SemiringMode::Free));
    const auto& onto = marked.instance.ontology;
    REQUIRE(onto.size() == 3);
    CHECK(onto[0].axiom.lhs_c == ConceptExpr::exists("headGov", false));
    CHECK(onto[1].axiom.lhs_c == ConceptExpr::exists("headGov__Brugnaro__Venice", false));
    CHECK(onto[2].axiom.lhs_c == ConceptExpr::exists("headGov__Renier__Venice", false));
    for (const auto& ax : onto) CHECK(ax.axiom.rhs_c == ConceptExpr::atomic("Mayor"));

    CHECK_FALSE(marked.dagger.copy_axiom_vars.count(onto[0].annotation.factors[0]));
    CHECK(marked.dagger.copy_axiom_vars.count(onto[1].annotation.factors[0]) == 1);
    CHECK(marked.dagger.copy_axiom_vars.count(onto[2].annotation.factors[0]) == 1);
}

TEST_CASE("marking gives every annotation a globally unique fresh variable") {
    auto inst = mayors(SemiringMode::Free);
    auto marked = mark_instance(inst);

    // body placeholders like Z are binders, not annotations; they stay put
    std::set<std::string> vars;
    for (const auto& ax : marked.instance.ontology)
        vars.insert(ax.annotation.factors.begin(), ax.annotation.factors.end());
    for (const auto& rule : marked.instance.mapping) vars.insert(rule.annotation);
    for (const auto& [rel, rows] : marked.instance.data.relations)
        for (const auto& row : rows) vars.insert(row.annotation);

    CHECK(vars.size() == 8);  // 3 axioms + 3 rules + 2 tuples
    for (const auto& v : vars) CHECK(v.rfind("_f", 0) == 0);
    CHECK(marked.dagger.var_to_original.size() == 8);

    CHECK(marked.dagger.var_preimages.at("s").size() == 3);
    CHECK(marked.dagger.var_preimages.at("n").size() == 2);
    CHECK(marked.dagger.var_preimages.at("m").size() == 1);
    CHECK(marked.dagger.role_aliases.at("headGov") ==
          std::vector<std::string>{"headGov__Brugnaro__Venice", "headGov__Renier__Venice"});
}

TEST_CASE("the dagger map folds the marked instance back onto the original") {
    SemiringMode mode = SemiringMode::Free;
    auto inst = mayors(mode);
    auto marked = mark_instance(inst);

    std::vector<AnnotatedAxiom> rebuilt;
    for (const auto& ax : marked.instance.ontology) {
        if (marked.dagger.copy_axiom_vars.count(ax.annotation.factors[0])) continue;
        rebuilt.push_back({ax.axiom, marked.dagger.dagger(ax.annotation, mode)});
    }
    CHECK(rebuilt == inst.ontology);

    AnnotatedDataInstance data;
    for (const auto& [rel, rows] : marked.instance.data.relations)
        for (const auto& row : rows)
            data.relations[rel].push_back({row.args, marked.dagger.original_var(row.annotation)});
    CHECK(data.relations == inst.data.relations);

    std::vector<AnnotatedAssertion> folded;
    for (const auto& a : apply_mappings(marked.instance))
        folded.push_back({marked.dagger.original_role(a.pred), a.args,
                          marked.dagger.dagger(a.annotation, mode)});
    std::sort(folded.begin(), folded.end());
    CHECK(folded == apply_mappings(inst));
}

TEST_CASE("marking a concept-only instance renames without aliasing") {
    SemiringMode mode = SemiringMode::Free;
    auto inst = make_instance(parse_ontology("A sub B @ u\n", mode),
                              parse_mapping("A(X) <- T(X, @Z) @ m\n"),
                              parse_data("T, a, @d\n").first, parse_data("T, a, @d\n").second,
                              mode);
    auto marked = mark_instance(inst);
    CHECK(marked.instance.ontology.size() == 1);
    CHECK(marked.instance.mapping.size() == 1);
    CHECK(marked.dagger.role_to_original.empty());
    CHECK(marked.dagger.copy_axiom_vars.empty());
    CHECK(marked.dagger.var_to_original.size() == 3);
}

TEST_CASE("marking rejects compound axiom annotations") {
    SemiringMode mode = SemiringMode::Free;
    auto inst = mayors(mode);
    inst.ontology[0].annotation = parse_monomial("s*s2", mode);
    CHECK_THROWS_AS(mark_instance(inst), Error);
}
