#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "provobda/entail.hpp"
#include "provobda/io.hpp"
#include "provobda/rewrite.hpp"
#include "support/gen.hpp"

using namespace provobda;

namespace {

constexpr SemiringMode kFree = SemiringMode::Free;

ProvBCQ ask(std::string text, SemiringMode mode = kFree) {
    return parse_query(text, mode).query;
}

std::vector<AnnotatedAxiom> axioms(std::string text) { return parse_ontology(text, kFree); }

AnnotatedOBDAInstance mayors(SemiringMode mode = kFree) {
    return make_instance(
        parse_ontology("exists headGov sub Mayor @ s\n", mode),
        parse_mapping("City(Y) <- Mayors(X, Y, @Z) @ m\n"
                      "headGov(X, Y) <- Mayors(X, Y, @Z) @ n\n"),
        parse_data("Mayors, Renier, Venice, @p\nMayors, Brugnaro, Venice, @q\n").first,
        parse_data("Mayors, Renier, Venice, @p\nMayors, Brugnaro, Venice, @q\n").second, mode);
}

AnnotatedOBDAInstance clashing(SemiringMode mode = kFree) {
    return make_instance(
        parse_ontology("Employee sub not Retired @ c\nexists worksFor sub Employee @ w\n", mode),
        parse_mapping("worksFor(X, Y) <- Contracts(X, Y, @Z) @ m1\n"
                      "Retired(X) <- Pensions(X, @Z) @ m2\n"),
        parse_data("Contracts, ada, acme, @d1\nPensions, ada, @d2\n").first,
        parse_data("Contracts, ada, acme, @d1\nPensions, ada, @d2\n").second, mode);
}

std::set<ProvBCQ> as_set(const std::vector<ProvBCQ>& qs) { return {qs.begin(), qs.end()}; }

}  // namespace

TEST_CASE("tau blanks variables with a single occurrence") {
    auto q = tau(ask("ASK x, y, z, w: R(x, y, @z) AND A(y, @w)"));
    CHECK(q.atoms[0].terms[0] == Term::blank());
    CHECK(q.atoms[0].terms[1] == Term::var("y"));
    CHECK(q.atoms[0].prov == ProvTerm::blank());
    CHECK(q.atoms[1].terms[0] == Term::var("y"));
    CHECK(q.atoms[1].prov == ProvTerm::blank());
}

TEST_CASE("canonical form ignores variable names and atom order") {
    auto a = canonical_query(ask("ASK x, y, z, w: R(x, y, @z) AND A(y, @w)"));
    auto b = canonical_query(ask("ASK u2, u1, t2, t1: A(u1, @t1) AND R(u2, u1, @t2)"));
    CHECK(a == b);
    CHECK(canonical_query(ask("ASK x, z: R(x, x, @z)")) !=
          canonical_query(ask("ASK x, y, z: R(x, y, @z)")));
    CHECK(canonical_query(ask("ASK x: A(x, @u)")) != canonical_query(ask("ASK x: A(x, @v)")));
}

TEST_CASE("inclusion splitters separate polarities") {
    auto onto = axioms("A sub B @ u\nA sub not B @ v\nR subrole S @ w\n");
    CHECK(positive_inclusions(onto).size() == 2);
    REQUIRE(negative_inclusions(onto).size() == 1);
    CHECK(negative_inclusions(onto)[0].annotation == parse_monomial("v", kFree));
}

TEST_CASE("atomic concept inclusions rewrite concept atoms") {
    auto I = axioms("A1 sub A @ v\n")[0];
    QueryAtom g{"A", {Term::var("x")}, ProvTerm::monomial(parse_monomial("m*v", kFree))};

    auto got = try_rewrite_atom(g, I, RewriteVariant::Consume);
    REQUIRE(got);
    CHECK(*got == QueryAtom{"A1", {Term::var("x")}, ProvTerm::monomial(parse_monomial("m", kFree))});

    // consuming requires the annotation to occur in the atom's monomial
    QueryAtom bare{"A", {Term::var("x")}, ProvTerm::monomial(parse_monomial("m", kFree))};
    CHECK_FALSE(try_rewrite_atom(bare, I, RewriteVariant::Consume));
    auto extended = try_rewrite_atom(bare, I, RewriteVariant::Extend);
    REQUIRE(extended);
    CHECK(extended->prov == ProvTerm::monomial(parse_monomial("m*v", kFree)));

    // variable and blank provenance positions are inert on both variants
    QueryAtom var{"A", {Term::var("x")}, ProvTerm::variable("z")};
    CHECK(try_rewrite_atom(var, I, RewriteVariant::Consume)->prov == ProvTerm::variable("z"));
    CHECK(try_rewrite_atom(var, I, RewriteVariant::Extend)->prov == ProvTerm::variable("z"));
}

TEST_CASE("existential inclusions rewrite concept atoms into role atoms") {
    auto I = axioms("exists headGov sub Mayor @ s\n")[0];
    QueryAtom g{"Mayor", {Term::var("x")}, ProvTerm::monomial(parse_monomial("p*n*s", kFree))};
    auto got = try_rewrite_atom(g, I, RewriteVariant::Consume);
    REQUIRE(got);
    CHECK(*got == QueryAtom{"headGov",
                            {Term::var("x"), Term::blank()},
                            ProvTerm::monomial(parse_monomial("n*p", kFree))});

    auto inv = axioms("exists inv(R) sub A @ u\n")[0];
    QueryAtom h{"A", {Term::var("x")}, ProvTerm::monomial(parse_monomial("u", kFree))};
    auto via = try_rewrite_atom(h, inv, RewriteVariant::Consume);
    REQUIRE(via);
    CHECK(*via == QueryAtom{"R", {Term::blank(), Term::var("x")}, ProvTerm::monomial({})});
}

TEST_CASE("role atoms with an unbound generated end fold into the subject concept") {
    auto I = axioms("B sub exists R @ u\n")[0];
    QueryAtom open{"R", {Term::var("x"), Term::blank()}, ProvTerm::monomial(parse_monomial("u", kFree))};
    auto got = try_rewrite_atom(open, I, RewriteVariant::Consume);
    REQUIRE(got);
    CHECK(*got == QueryAtom{"B", {Term::var("x")}, ProvTerm::monomial({})});

    // a bound generated end blocks the step
    QueryAtom closed{"R", {Term::var("x"), Term::var("y")},
                     ProvTerm::monomial(parse_monomial("u", kFree))};
    CHECK_FALSE(try_rewrite_atom(closed, I, RewriteVariant::Consume));

    auto inv = axioms("B sub exists inv(R) @ u\n")[0];
    QueryAtom mirrored{"R", {Term::blank(), Term::var("y")},
                       ProvTerm::monomial(parse_monomial("u", kFree))};
    auto via = try_rewrite_atom(mirrored, inv, RewriteVariant::Consume);
    REQUIRE(via);
    CHECK(*via == QueryAtom{"B", {Term::var("y")}, ProvTerm::monomial({})});
    CHECK_FALSE(try_rewrite_atom(open, inv, RewriteVariant::Consume));
}

TEST_CASE("role inclusions rewrite role atoms, flipping once per inverse") {
    QueryAtom g{"R2", {Term::var("x"), Term::var("y")},
                ProvTerm::monomial(parse_monomial("v*w", kFree))};

    auto plain = try_rewrite_atom(g, axioms("R1 subrole R2 @ v\n")[0], RewriteVariant::Consume);
    REQUIRE(plain);
    CHECK(*plain == QueryAtom{"R1", {Term::var("x"), Term::var("y")},
                              ProvTerm::monomial(parse_monomial("w", kFree))});

    auto lhs_inv =
        try_rewrite_atom(g, axioms("inv(R1) subrole R2 @ v\n")[0], RewriteVariant::Consume);
    REQUIRE(lhs_inv);
    CHECK(lhs_inv->terms == std::vector<Term>{Term::var("y"), Term::var("x")});

    auto rhs_inv =
        try_rewrite_atom(g, axioms("R1 subrole inv(R2) @ v\n")[0], RewriteVariant::Consume);
    REQUIRE(rhs_inv);
    CHECK(rhs_inv->terms == std::vector<Term>{Term::var("y"), Term::var("x")});

    auto both =
        try_rewrite_atom(g, axioms("inv(R1) subrole inv(R2) @ v\n")[0], RewriteVariant::Consume);
    REQUIRE(both);
    CHECK(both->terms == std::vector<Term>{Term::var("x"), Term::var("y")});
}

TEST_CASE("inapplicable axioms are refused") {
    QueryAtom concept_atom{"A", {Term::var("x")}, ProvTerm::blank()};
    QueryAtom role_atom{"R", {Term::var("x"), Term::var("y")}, ProvTerm::blank()};

    CHECK_FALSE(try_rewrite_atom(concept_atom, axioms("A sub not B @ u\n")[0], RewriteVariant::Consume));
    CHECK_FALSE(try_rewrite_atom(concept_atom, axioms("B1 sub B @ u\n")[0], RewriteVariant::Consume));
    CHECK_FALSE(try_rewrite_atom(role_atom, axioms("B1 sub B @ u\n")[0], RewriteVariant::Consume));
    CHECK_FALSE(try_rewrite_atom(concept_atom, axioms("R1 subrole R @ u\n")[0], RewriteVariant::Consume));
    CHECK(applicable(axioms("A1 sub A @ u\n")[0], concept_atom));
    CHECK_THROWS_AS(rewrite_atom(role_atom, axioms("A1 sub A @ u\n")[0]), Error);
}

TEST_CASE("reduction merges unifiable atoms") {
    auto merged = try_reduce(ask("ASK x, y, w1, w2: R(x, y, @w1) AND R(x, x, @w2)"), 0, 1);
    REQUIRE(merged);
    CHECK(*merged == tau(ask("ASK x, w: R(x, x, @w)")));

    // provenance positions only unify when math-equal
    CHECK_FALSE(try_reduce(ask("ASK x, y: A(x, @u*u) AND A(y, @u)"), 0, 1));
    auto ground = try_reduce(ask("ASK x, y: A(x, @u*v) AND A(y, @v*u)"), 0, 1);
    REQUIRE(ground);
    CHECK(ground->atoms.size() == 1);

    // a variable absorbs a ground monomial
    auto mixed = try_reduce(ask("ASK x, y, w: A(x, @w) AND A(y, @u)"), 0, 1);
    REQUIRE(mixed);
    CHECK(mixed->atoms[0].prov == ProvTerm::monomial(parse_monomial("u", kFree)));

    CHECK_FALSE(try_reduce(ask("ASK : A(ada, @_) AND A(bo, @_)"), 0, 1));
    CHECK_FALSE(try_reduce(ask("ASK x, y: A(x, @_) AND R(x, y, @_)"), 0, 1));
}

TEST_CASE("rewriting closure without axioms is the query itself") {
    auto q = ask("ASK x, z: Mayor(x, @z)");
    auto pr = perfect_ref(q, {});
    REQUIRE(pr.size() == 1);
    CHECK(pr[0] == canonical_query(q));
}

TEST_CASE("rewriting walks inclusion chains and consumes annotations") {
    auto onto = axioms("B sub A @ v\nC sub B @ u\n");
    auto pr = perfect_ref(ask("ASK x: A(x, @u*v)"), positive_inclusions(onto));
    CHECK(as_set(pr) == std::set<ProvBCQ>{
                            canonical_query(ask("ASK : A(_, @u*v)")),
                            canonical_query(ask("ASK : B(_, @u)")),
                            canonical_query(ask("ASK : C(_, @1)")),
                        });
}

TEST_CASE("rewriting the mayor query exposes the underlying role") {
    auto inst = mayors();
    auto pr = perfect_ref(ask("ASK x: Mayor(x, @p*n*s)"), positive_inclusions(inst.ontology));
    CHECK(as_set(pr) == std::set<ProvBCQ>{
                            canonical_query(ask("ASK : Mayor(_, @p*n*s)")),
                            canonical_query(ask("ASK : headGov(_, _, @p*n)")),
                        });
}

TEST_CASE("rewriting caps turn blowups into errors") {
    auto onto = axioms("B sub A @ v\nC sub B @ u\n");
    CHECK_THROWS_AS(perfect_ref(ask("ASK x: A(x, @u*v)"), positive_inclusions(onto),
                                RewriteCaps{.max_queries = 1, .max_iterations = 1000000}),
                    CapExceeded);
    CHECK_THROWS_AS(perfect_ref(ask("ASK x: A(x, @u*v)"), positive_inclusions(onto),
                                RewriteCaps{.max_queries = 100000, .max_iterations = 1}),
                    CapExceeded);
}

TEST_CASE("single-copy translations pin the whole monomial") {
    auto q = ask("ASK x, w: A(x, @w)");
    auto got = translate_tr(q, parse_polynomial("u*v", kFree));
    REQUIRE(got.size() == 1);
    CHECK(got[0] == canonical_query(ask("ASK : A(_, @u*v)")));

    auto two = translate_tr(q, parse_polynomial("u*v + u", kFree));
    REQUIRE(two.size() == 1);
    CHECK(two[0] == canonical_query(ask("ASK : A(_, @u*v) AND A(_, @u)")));
}

TEST_CASE("translations enumerate ordered occurrence-exact factorizations") {
    auto q = ask("ASK x, w1, w2: A(x, @w1) AND B(x, @w2)");
    auto got = translate_tr(q, parse_polynomial("a*b*c", kFree));
    CHECK(got.size() == 6);
    auto set = as_set(got);
    CHECK(set.count(canonical_query(ask("ASK x: A(x, @a) AND B(x, @b*c)"))) == 1);
    CHECK(set.count(canonical_query(ask("ASK x: A(x, @b*c) AND B(x, @a)"))) == 1);

    // fewer occurrences than atoms leaves nothing to distribute
    CHECK(translate_tr(q, parse_polynomial("a", kFree)).empty());
}

TEST_CASE("repeated provenance variables force equal parts") {
    auto q = ask("ASK x, w: A(x, @w) AND B(x, @w)");
    auto got = translate_tr(q, parse_polynomial("u*u", kFree));
    REQUIRE(got.size() == 1);
    CHECK(got[0] == canonical_query(ask("ASK x: A(x, @u) AND B(x, @u)")));
    CHECK(translate_tr(q, parse_polynomial("u*v", kFree)).empty());
}

TEST_CASE("ground provenance positions pin their part") {
    auto q = ask("ASK x, w: A(x, @u) AND B(x, @w)");
    auto got = translate_tr(q, parse_polynomial("t*u", kFree));
    REQUIRE(got.size() == 1);
    CHECK(got[0] == canonical_query(ask("ASK x: A(x, @u) AND B(x, @t)")));
    CHECK(translate_tr(q, parse_polynomial("t*t", kFree)).empty());
}

TEST_CASE("translation edge cases") {
    auto q = ask("ASK x, w: A(x, @w)");
    CHECK_THROWS_AS(translate_tr(q, parse_polynomial("u + u", kFree)), DuplicateMonomials);

    auto zero = translate_tr(q, Polynomial{});
    REQUIRE(zero.size() == 1);
    CHECK(zero[0].atoms.empty());

    // streaming stops as soon as the callback declines
    int seen = 0;
    bool completed = for_each_translation(ask("ASK x, w1, w2: A(x, @w1) AND B(x, @w2)"),
                                          parse_polynomial("a*b*c", kFree), [&](const ProvBCQ&) {
                                              ++seen;
                                              return false;
                                          });
    CHECK_FALSE(completed);
    CHECK(seen == 1);
}

TEST_CASE("monomial preimages invert the dagger") {
    DaggerMap dag;
    dag.var_to_original = {{"f1", "s"}, {"f2", "s"}, {"g1", "t"}};
    dag.finalize();

    auto free_pre = monomial_preimages(parse_monomial("s*s", kFree), dag, kFree);
    CHECK(free_pre == std::vector<Monomial>{parse_monomial("f1*f1", kFree),
                                            parse_monomial("f1*f2", kFree),
                                            parse_monomial("f2*f2", kFree)});
    for (const auto& m : free_pre) CHECK(dag.dagger(m, kFree) == parse_monomial("s*s", kFree));

    SemiringMode fidem = SemiringMode::FullyIdempotent;
    auto idem_pre = monomial_preimages(parse_monomial("s*t", fidem), dag, fidem);
    CHECK(idem_pre == std::vector<Monomial>{parse_monomial("f1*f2*g1", fidem),
                                            parse_monomial("f1*g1", fidem),
                                            parse_monomial("f2*g1", fidem)});
    for (const auto& m : idem_pre) CHECK(dag.dagger(m, fidem) == parse_monomial("s*t", fidem));

    // unknown variables are their own preimage
    CHECK(monomial_preimages(parse_monomial("x", kFree), dag, kFree) ==
          std::vector<Monomial>{parse_monomial("x", kFree)});
    CHECK_THROWS_AS(monomial_preimages(parse_monomial("s*s", kFree), dag, kFree, 2), CapExceeded);
}

TEST_CASE("polynomial and query preimages combine per-position choices") {
    DaggerMap dag;
    dag.var_to_original = {{"f1", "s"}, {"f2", "s"}, {"g1", "t"}};
    dag.role_to_original = {{"R__a__b", "R"}, {"R__c__d", "R"}};
    dag.finalize();

    auto polys = poly_preimages(parse_polynomial("s + t", kFree), dag, kFree);
    CHECK(polys == std::vector<Polynomial>{parse_polynomial("f1 + g1", kFree),
                                           parse_polynomial("f2 + g1", kFree)});

    auto qs = query_preimages(ask("ASK x, y, w: R(x, y, @w) AND A(x, @s)"), dag, kFree);
    CHECK(qs.size() == 6);
    std::set<std::string> role_preds;
    for (const auto& q : qs) {
        role_preds.insert(q.atoms[0].pred);
        CHECK(q.atoms[1].pred == "A");
        CHECK(dag.original_role(q.atoms[0].pred) == "R");
        CHECK(dag.dagger(q.atoms[1].prov.mono, kFree) == parse_monomial("s", kFree));
    }
    CHECK(role_preds == std::set<std::string>{"R", "R__a__b", "R__c__d"});
}

TEST_CASE("satisfiability checks negative inclusions over the rewriting") {
    CHECK(check_satisfiability(mayors()));
    CHECK_FALSE(check_satisfiability(clashing()));
}

TEST_CASE("the mayor polynomial is entailed") {
    auto inst = mayors();
    auto q = ask("ASK x, z: Mayor(x, @z)");
    CHECK(entails(inst, q, parse_polynomial("n*p*s + n*q*s", kFree)));
    CHECK(entails(inst, q, parse_polynomial("n*p*s", kFree)));
    CHECK(entails(inst, ask("ASK z: Mayor(Brugnaro, @z)"), parse_polynomial("n*q*s", kFree)));
    CHECK_FALSE(entails(inst, ask("ASK z: Mayor(Brugnaro, @z)"), parse_polynomial("n*p*s", kFree)));
    CHECK_FALSE(entails(inst, q, parse_polynomial("n*p*s + n*p", kFree)));

    auto witnessed = entails_full(inst, q, parse_polynomial("n*p*s", kFree),
                                  EntailOptions{.caps = {}, .preimage_cap = 200000,
                                                .want_witness = true});
    CHECK(witnessed.entailed);
    CHECK(witnessed.witness.find("translation:") != std::string::npos);
}

TEST_CASE("unsatisfiable instances entail everything, zero always holds") {
    auto inst = clashing();
    auto outcome = entails_full(inst, ask("ASK x, z: Anything(x, @z)"),
                                parse_polynomial("whatever", kFree));
    CHECK(outcome.entailed);
    CHECK(outcome.witness.find("unsatisfiable") != std::string::npos);
    CHECK(entails(mayors(), ask("ASK x, z: Mayor(x, @z)"), Polynomial{}));
}

TEST_CASE("marking refuses compound axiom annotations") {
    auto inst = make_instance(parse_ontology("A sub B @ u*v\n", kFree),
                              parse_mapping("A(X) <- T(X, @Z) @ m\n"),
                              parse_data("T, a, @d\n").first, parse_data("T, a, @d\n").second,
                              kFree);
    CHECK_THROWS_AS(entails(inst, ask("ASK x, z: B(x, @z)"), parse_polynomial("d*m*u*v", kFree)),
                    Error);
}

TEST_CASE("certain answers go through the plain rewriting") {
    auto inst = mayors();
    CHECK(entails_plain(inst, ask("ASK x, z: Mayor(x, @z)")));
    CHECK(entails_plain(inst, ask("ASK x: Mayor(x, @p*n*s)")));
    CHECK_FALSE(entails_plain(inst, ask("ASK : Mayor(Brugnaro, @p*n*s)")));
    CHECK_FALSE(entails_plain(inst, ask("ASK x, z: Retired(x, @z)")));
    CHECK(entails_plain(clashing(), ask("ASK x, z: Anything(x, @z)")));
    CHECK_THROWS_AS(entails_plain(inst, ask("ASK x, y, z: Mayor(x, @z) AND City(y, @z)")),
                    NotStandard);
}

TEST_CASE("inverse axioms keep provenance free of helper variables") {
    auto inst = make_instance(
        parse_ontology("worksFor subrole inv(employs) @ w1\n"
                       "exists inv(worksFor) sub Employer @ e1\n",
                       kFree),
        parse_mapping("worksFor(X, Y) <- Contracts(X, Y, @Z) @ mw\n"),
        parse_data("Contracts, ada, acme, @d\n").first,
        parse_data("Contracts, ada, acme, @d\n").second, kFree);

    CHECK(entails_plain(inst, ask("ASK : Employer(acme, @d*mw*e1)")));
    CHECK(entails_plain(inst, ask("ASK z: employs(acme, ada, @z)")));
    CHECK_FALSE(entails_plain(inst, ask("ASK z: employs(ada, acme, @z)")));

    CHECK(entails(inst, ask("ASK z: employs(acme, ada, @z)"),
                  parse_polynomial("d*mw*w1", kFree)));
    CHECK_FALSE(entails(inst, ask("ASK z: employs(acme, ada, @z)"),
                        parse_polynomial("d*mw", kFree)));
    CHECK(entails(inst, ask("ASK z: Employer(acme, @z)"), parse_polynomial("d*e1*mw", kFree)));
}

TEST_CASE("tight caps propagate out of entailment") {
    auto inst = mayors();
    CHECK_THROWS_AS(entails(inst, ask("ASK x, z: Mayor(x, @z)"),
                            parse_polynomial("n*p*s", kFree),
                            EntailOptions{.caps = {.max_queries = 100000, .max_iterations = 2},
                                          .preimage_cap = 200000,
                                          .want_witness = false}),
                    CapExceeded);
}
