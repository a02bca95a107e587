#pragma once

// Text formats: ontology, mapping, data and query files, plus instance
// assembly with schema inference. All parse errors carry line/column.

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "kb.hpp"
#include "query.hpp"
#include "semiring.hpp"

namespace provobda {

namespace detail {

struct Token {
    enum Kind { Ident, LParen, RParen, Comma, Colon, At, Star, Plus, Underscore, Arrow, End };

    Kind kind = End;
    std::string text;
    int line = 1;
    int col = 1;
};

inline bool ident_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '$';
}

struct Lexer {
    std::string_view src;
    std::size_t pos = 0;
    int line = 1;
    int col = 1;
    std::optional<Token> lookahead;

    explicit Lexer(std::string_view s) : src(s) {}

    [[noreturn]] void fail(const std::string& msg, const Token& at) const {
        throw ParseError(msg, at.line, at.col);
    }
    [[noreturn]] void fail_here(const std::string& msg) const { throw ParseError(msg, line, col); }

    void advance() {
        if (src[pos] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
        ++pos;
    }

    void skip_ws_and_comments() {
        while (pos < src.size()) {
            char c = src[pos];
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                advance();
            } else if (c == '#') {
                while (pos < src.size() && src[pos] != '\n') advance();
            } else {
                break;
            }
        }
    }

    Token lex() {
        skip_ws_and_comments();
        Token t;
        t.line = line;
        t.col = col;
        if (pos >= src.size()) return t;  // End
        char c = src[pos];
        auto single = [&](Token::Kind k) {
            advance();
            t.kind = k;
            t.text = std::string(1, c);
            return t;
        };
        switch (c) {
            case '(': return single(Token::LParen);
            case ')': return single(Token::RParen);
            case ',': return single(Token::Comma);
            case ':': return single(Token::Colon);
            case '@': return single(Token::At);
            case '*': return single(Token::Star);
            case '+': return single(Token::Plus);
            case '<':
                if (pos + 1 < src.size() && src[pos + 1] == '-') {
                    advance();
                    advance();
                    t.kind = Token::Arrow;
                    t.text = "<-";
                    return t;
                }
                fail_here("unexpected '<'");
        }
        if (ident_char(c)) {
            std::size_t start = pos;
            while (pos < src.size() && ident_char(src[pos])) advance();
            t.text = std::string(src.substr(start, pos - start));
            t.kind = t.text == "_" ? Token::Underscore : Token::Ident;
            return t;
        }
        fail_here(std::string("unexpected character '") + c + "'");
    }

    Token next() {
        if (lookahead) {
            Token t = *lookahead;
            lookahead.reset();
            return t;
        }
        return lex();
    }
    const Token& peek() {
        if (!lookahead) lookahead = lex();
        return *lookahead;
    }

    Token expect(Token::Kind k, const std::string& what) {
        Token t = next();
        if (t.kind != k) fail("expected " + what, t);
        return t;
    }

    std::string expect_name(const std::string& what) {
        Token t = next();
        if (t.kind != Token::Ident) fail("expected " + what, t);
        return t.text;
    }
};

inline bool valid_variable_name(const std::string& s) {
    if (s.empty()) return false;
    char c = s[0];
    if (!((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_')) return false;
    return s.find('$') == std::string::npos;
}

inline std::string expect_variable(Lexer& lx, const std::string& what) {
    Token t = lx.next();
    if (t.kind != Token::Ident || !valid_variable_name(t.text))
        lx.fail("expected " + what + " (a name starting with a letter or '_')", t);
    return t.text;
}

// IDENT ('*' IDENT)*, or the literal 1
inline Monomial parse_mono_tokens(Lexer& lx, SemiringMode mode) {
    std::vector<std::string> factors;
    while (true) {
        Token t = lx.next();
        if (t.kind != Token::Ident) lx.fail("expected a provenance variable", t);
        if (t.text == "0") lx.fail("the zero polynomial is not a monomial", t);
        if (t.text != "1") factors.push_back(t.text);
        if (lx.peek().kind != Token::Star) break;
        lx.next();
    }
    return make_mono(std::move(factors), mode);
}

// full polynomial grammar with parentheses, on tokens
inline Polynomial parse_poly_tokens(Lexer& lx, SemiringMode mode);

inline Polynomial parse_poly_factor(Lexer& lx, SemiringMode mode) {
    if (lx.peek().kind == Token::LParen) {
        lx.next();
        Polynomial inner = parse_poly_tokens(lx, mode);
        lx.expect(Token::RParen, "')'");
        return inner;
    }
    Token t = lx.next();
    if (t.kind != Token::Ident) lx.fail("expected a provenance variable, '1', '0' or '('", t);
    if (t.text == "1") return poly_one();
    if (t.text == "0") return poly_zero();
    if (t.text.find_first_not_of("0123456789") == std::string::npos)
        lx.fail("numeric coefficients other than 0 and 1 are not supported", t);
    return Polynomial{{Monomial{{t.text}}}};
}

inline Polynomial parse_poly_product(Lexer& lx, SemiringMode mode) {
    Polynomial acc = parse_poly_factor(lx, mode);
    while (lx.peek().kind == Token::Star) {
        lx.next();
        acc = poly_mul(acc, parse_poly_factor(lx, mode), mode);
    }
    return acc;
}

inline Polynomial parse_poly_tokens(Lexer& lx, SemiringMode mode) {
    Polynomial acc = parse_poly_product(lx, mode);
    while (lx.peek().kind == Token::Plus) {
        lx.next();
        acc = poly_add(acc, parse_poly_product(lx, mode), mode);
    }
    return acc;
}

}  // namespace detail

// ---- ontology ---------------------------------------------------------------

// One axiom per statement:
//   City sub exists headGov @ v
//   exists headGov sub Mayor @ s
//   A sub not B @ w
//   R subrole inv(S) @ u
inline std::vector<AnnotatedAxiom> parse_ontology(std::string_view text,
                                                  SemiringMode mode = SemiringMode::Free) {
    detail::Lexer lx(text);
    std::vector<AnnotatedAxiom> out;

    struct Side {
        bool is_concept;
        ConceptExpr c;
        RoleExpr r;
    };
    auto parse_role = [&]() -> RoleExpr {
        detail::Token t = lx.next();
        if (t.kind != detail::Token::Ident) lx.fail("expected a role name or inv(...)", t);
        if (t.text == "inv") {
            lx.expect(detail::Token::LParen, "'(' after inv");
            std::string name = lx.expect_name("role name");
            lx.expect(detail::Token::RParen, "')'");
            return {name, true};
        }
        return {t.text, false};
    };
    auto parse_side = [&]() -> Side {
        const detail::Token& t = lx.peek();
        if (t.kind != detail::Token::Ident) lx.fail("expected a concept or role expression", t);
        if (t.text == "exists") {
            lx.next();
            RoleExpr r = parse_role();
            return {true, ConceptExpr::exists(r.name, r.inverse), {}};
        }
        if (t.text == "inv") {
            RoleExpr r = parse_role();
            return {false, {}, r};
        }
        std::string name = lx.expect_name("name");
        // plain name: concept or role, disambiguated by the inclusion keyword
        Side s;
        s.is_concept = true;
        s.c = ConceptExpr::atomic(name);
        s.r = {name, false};
        return s;
    };

    while (lx.peek().kind != detail::Token::End) {
        Side lhs = parse_side();
        detail::Token kw = lx.next();
        if (kw.kind != detail::Token::Ident || (kw.text != "sub" && kw.text != "subrole"))
            lx.fail("expected 'sub' or 'subrole'", kw);
        bool role_inc = kw.text == "subrole";

        bool negated = false;
        if (lx.peek().kind == detail::Token::Ident && lx.peek().text == "not") {
            lx.next();
            negated = true;
        }
        Side rhs = parse_side();

        detail::Token at = lx.next();
        if (at.kind != detail::Token::At) lx.fail("expected '@' before the axiom annotation", at);
        Monomial ann = detail::parse_mono_tokens(lx, mode);
        if (ann.is_one()) throw ParseError("axiom annotation must not be empty", at.line, at.col);

        if (role_inc) {
            if (lhs.c.kind == ConceptExpr::Exists || rhs.c.kind == ConceptExpr::Exists)
                lx.fail("'subrole' connects role expressions, not concepts", kw);
            out.push_back({Axiom::role_inc(lhs.r, rhs.r, negated), std::move(ann)});
        } else {
            if (!lhs.is_concept || !rhs.is_concept)
                lx.fail("'sub' connects concept expressions; use subrole for roles", kw);
            out.push_back({Axiom::concept_inc(lhs.c, rhs.c, negated), std::move(ann)});
        }
    }
    return out;
}

// ---- mapping ------------------------------------------------------------------

// One rule per statement:
//   City(Y) <- Mayors(X, Y, @Z) @ m
//   headGov(X, Y) <- HG1(X, Y, @W) @ n
inline std::vector<AnnotatedRule> parse_mapping(std::string_view text) {
    detail::Lexer lx(text);
    std::vector<AnnotatedRule> out;

    auto parse_terms = [&](std::vector<RuleTerm>& into) {
        // inside the parens of a body atom, up to the @ position
        while (true) {
            detail::Token t = lx.next();
            if (t.kind != detail::Token::Ident) lx.fail("expected a term", t);
            into.push_back(detail::valid_variable_name(t.text) ? RuleTerm::var(t.text)
                                                               : RuleTerm::ind(t.text));
            detail::Token sep = lx.next();
            if (sep.kind != detail::Token::Comma)
                lx.fail("expected ',' between terms or before '@'", sep);
            if (lx.peek().kind == detail::Token::At) {
                lx.next();
                return;
            }
        }
    };

    while (lx.peek().kind != detail::Token::End) {
        AnnotatedRule rule;
        rule.head_pred = lx.expect_name("head predicate");
        lx.expect(detail::Token::LParen, "'('");
        while (true) {
            std::string v = detail::expect_variable(lx, "head variable");
            rule.head_args.push_back(RuleTerm::var(v));
            detail::Token t = lx.next();
            if (t.kind == detail::Token::RParen) break;
            if (t.kind != detail::Token::Comma) lx.fail("expected ',' or ')'", t);
        }
        lx.expect(detail::Token::Arrow, "'<-'");
        while (true) {
            RuleAtom atom;
            atom.pred = lx.expect_name("source relation");
            lx.expect(detail::Token::LParen, "'('");
            parse_terms(atom.args);
            atom.prov_var = detail::expect_variable(lx, "provenance variable");
            lx.expect(detail::Token::RParen, "')'");
            rule.body.push_back(std::move(atom));
            if (lx.peek().kind == detail::Token::Comma) {
                lx.next();
                continue;
            }
            break;
        }
        detail::Token at = lx.expect(detail::Token::At, "'@' before the rule annotation");
        (void)at;
        rule.annotation = detail::expect_variable(lx, "rule annotation variable");
        out.push_back(std::move(rule));
    }
    return out;
}

// ---- data -----------------------------------------------------------------------

// One tuple per statement: Mayors, Renier, Venice, @p
inline std::pair<AnnotatedDataInstance, Schema> parse_data(std::string_view text) {
    detail::Lexer lx(text);
    AnnotatedDataInstance data;
    Schema schema;
    while (lx.peek().kind != detail::Token::End) {
        detail::Token name = lx.next();
        if (name.kind != detail::Token::Ident) lx.fail("expected a relation name", name);
        DataTuple row;
        while (true) {
            lx.expect(detail::Token::Comma, "','");
            if (lx.peek().kind == detail::Token::At) {
                lx.next();
                break;
            }
            row.args.push_back(lx.expect_name("a constant"));
        }
        row.annotation = detail::expect_variable(lx, "tuple annotation variable");
        if (row.args.empty())
            throw ParseError("a tuple needs at least one ordinary position", name.line, name.col);
        schema.require(name.text, static_cast<int>(row.args.size()));
        data.relations[name.text].push_back(std::move(row));
    }
    return {std::move(data), std::move(schema)};
}

// ---- query ----------------------------------------------------------------------

struct ParsedQuery {
    ProvBCQ query;
    std::vector<std::string> ask_vars;
    std::optional<Polynomial> with;
};

// ASK x, z: Mayor(x, @z)            [WITH n*p*s + n*q*s]
// '@' positions hold a declared variable, '_' or a ground monomial.
inline ParsedQuery parse_query(std::string_view text, SemiringMode mode = SemiringMode::Free) {
    detail::Lexer lx(text);
    ParsedQuery out;

    detail::Token ask = lx.next();
    if (ask.kind != detail::Token::Ident || ask.text != "ASK") lx.fail("expected 'ASK'", ask);
    std::set<std::string> declared;
    while (lx.peek().kind != detail::Token::Colon) {
        detail::Token v = lx.next();
        if (v.kind != detail::Token::Ident || !detail::valid_variable_name(v.text))
            lx.fail("expected a variable name in the ASK list", v);
        if (!declared.insert(v.text).second) lx.fail("variable declared twice", v);
        out.ask_vars.push_back(v.text);
        if (lx.peek().kind == detail::Token::Comma) lx.next();
    }
    lx.expect(detail::Token::Colon, "':'");

    std::set<std::string> used_term, used_prov;
    while (true) {
        QueryAtom atom;
        atom.pred = lx.expect_name("a concept or role name");
        detail::Token open = lx.expect(detail::Token::LParen, "'('");
        while (lx.peek().kind != detail::Token::At) {
            detail::Token t = lx.next();
            if (t.kind == detail::Token::Underscore) {
                atom.terms.push_back(Term::blank());
            } else if (t.kind == detail::Token::Ident) {
                if (declared.count(t.text)) {
                    atom.terms.push_back(Term::var(t.text));
                    used_term.insert(t.text);
                } else {
                    atom.terms.push_back(Term::ind(t.text));
                }
            } else {
                lx.fail("expected a term", t);
            }
            lx.expect(detail::Token::Comma, "','");
        }
        lx.next();  // '@'
        if (lx.peek().kind == detail::Token::Underscore) {
            lx.next();
            atom.prov = ProvTerm::blank();
        } else {
            detail::Token first = lx.peek();
            Monomial m = detail::parse_mono_tokens(lx, mode);
            if (m.factors.size() == 1 && declared.count(m.factors[0])) {
                atom.prov = ProvTerm::variable(m.factors[0]);
                used_prov.insert(m.factors[0]);
            } else {
                for (const auto& f : m.factors)
                    if (declared.count(f))
                        throw ParseError("provenance position mixes the variable '" + f +
                                             "' into a ground monomial",
                                         first.line, first.col);
                atom.prov = ProvTerm::monomial(std::move(m));
            }
        }
        lx.expect(detail::Token::RParen, "')'");
        if (atom.terms.empty() || atom.terms.size() > 2)
            throw ParseError("atoms have one or two ordinary positions", open.line, open.col);
        for (const auto& prev : out.query.atoms)
            if (prev == atom)
                throw ParseError("atom repeated in the query", open.line, open.col);
        out.query.atoms.push_back(std::move(atom));

        if (lx.peek().kind == detail::Token::Ident && lx.peek().text == "AND") {
            lx.next();
            continue;
        }
        break;
    }

    if (lx.peek().kind == detail::Token::Ident && lx.peek().text == "WITH") {
        lx.next();
        out.with = detail::parse_poly_tokens(lx, mode);
    }
    detail::Token end = lx.next();
    if (end.kind != detail::Token::End) lx.fail("unexpected trailing input", end);

    for (const auto& v : out.ask_vars) {
        if (used_term.count(v) && used_prov.count(v))
            throw ParseError("variable '" + v + "' used both as term and provenance variable", 1,
                             1);
        if (!used_term.count(v) && !used_prov.count(v))
            throw ParseError("declared variable '" + v + "' never occurs in the query", 1, 1);
    }

    std::map<std::string, int> arity;
    for (const auto& a : out.query.atoms) {
        auto [it, inserted] = arity.emplace(a.pred, static_cast<int>(a.terms.size()));
        if (!inserted && it->second != static_cast<int>(a.terms.size()))
            throw ArityMismatch("predicate '" + a.pred + "' used with two different arities");
    }
    return out;
}

// ---- assembly ---------------------------------------------------------------------

inline AnnotatedOBDAInstance make_instance(std::vector<AnnotatedAxiom> ontology,
                                           std::vector<AnnotatedRule> mapping,
                                           AnnotatedDataInstance data, Schema schema,
                                           SemiringMode mode) {
    AnnotatedOBDAInstance inst;
    inst.ontology = std::move(ontology);
    inst.mapping = std::move(mapping);
    inst.data = std::move(data);
    inst.schema = std::move(schema);
    inst.mode = mode;
    // mapping bodies extend the schema: relations without data are legal
    for (const auto& rule : inst.mapping) {
        for (const auto& atom : rule.body)
            inst.schema.require(atom.pred, static_cast<int>(atom.args.size()));
        validate_rule(rule, inst.schema);
    }

    // ontology-side vocabulary must use each name consistently
    std::map<std::string, int> pred_arity;
    auto require_pred = [&](const std::string& name, int n) {
        auto [it, inserted] = pred_arity.emplace(name, n);
        if (!inserted && it->second != n)
            throw ArityMismatch("'" + name + "' is used both as a concept and as a role");
    };
    for (const auto& ax : inst.ontology) {
        if (ax.axiom.kind == Axiom::ConceptInclusion) {
            for (const ConceptExpr* c : {&ax.axiom.lhs_c, &ax.axiom.rhs_c})
                require_pred(c->name, c->kind == ConceptExpr::Atomic ? 1 : 2);
        } else {
            require_pred(ax.axiom.lhs_r.name, 2);
            require_pred(ax.axiom.rhs_r.name, 2);
        }
    }
    for (const auto& rule : inst.mapping)
        require_pred(rule.head_pred, static_cast<int>(rule.head_args.size()));
    return inst;
}

// ---- rendering (inverse of the parsers) ---------------------------------------

inline std::string render(const RoleExpr& r) {
    return r.inverse ? "inv(" + r.name + ")" : r.name;
}

inline std::string render(const ConceptExpr& c) {
    if (c.kind == ConceptExpr::Atomic) return c.name;
    return "exists " + render(RoleExpr{c.name, c.inverse});
}

inline std::string render(const AnnotatedAxiom& ax) {
    std::string out;
    if (ax.axiom.kind == Axiom::ConceptInclusion)
        out = render(ax.axiom.lhs_c) + " sub " + (ax.axiom.rhs_negated ? "not " : "") +
              render(ax.axiom.rhs_c);
    else
        out = render(ax.axiom.lhs_r) + " subrole " + (ax.axiom.rhs_negated ? "not " : "") +
              render(ax.axiom.rhs_r);
    return out + " @ " + render(ax.annotation);
}

inline std::string render(const AnnotatedRule& rule) {
    std::string out = rule.head_pred + "(";
    for (std::size_t i = 0; i < rule.head_args.size(); ++i) {
        if (i) out += ", ";
        out += rule.head_args[i].text;
    }
    out += ") <- ";
    for (std::size_t i = 0; i < rule.body.size(); ++i) {
        if (i) out += ", ";
        out += rule.body[i].pred + "(";
        for (const auto& t : rule.body[i].args) out += t.text + ", ";
        out += "@" + rule.body[i].prov_var + ")";
    }
    return out + " @ " + rule.annotation;
}

inline std::string render_data(const AnnotatedDataInstance& data) {
    std::string out;
    for (const auto& [rel, rows] : data.relations)
        for (const auto& row : rows) {
            out += rel;
            for (const auto& a : row.args) out += ", " + a;
            out += ", @" + row.annotation + "\n";
        }
    return out;
}

inline std::string render_ontology(const std::vector<AnnotatedAxiom>& onto) {
    std::string out;
    for (const auto& ax : onto) out += render(ax) + "\n";
    return out;
}

inline std::string render_mapping(const std::vector<AnnotatedRule>& mapping) {
    std::string out;
    for (const auto& rule : mapping) out += render(rule) + "\n";
    return out;
}

inline std::string render(const ParsedQuery& pq) {
    std::string out = render(pq.query);
    if (pq.with) out += " WITH " + render(*pq.with);
    return out;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline AnnotatedOBDAInstance load_instance(const std::string& ontology_path,
                                           const std::string& mapping_path,
                                           const std::string& data_path, SemiringMode mode) {
    std::vector<AnnotatedAxiom> onto = parse_ontology(read_file(ontology_path), mode);
    std::vector<AnnotatedRule> mapping = parse_mapping(read_file(mapping_path));
    auto [data, schema] = parse_data(read_file(data_path));
    return make_instance(std::move(onto), std::move(mapping), std::move(data), std::move(schema),
                         mode);
}

}  // namespace provobda
