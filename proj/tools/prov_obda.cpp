// prov-obda: provenance-annotated OBDA over DL-Lite from the command line.
//
//   prov-obda check     --ontology O --mapping M --data D
//   prov-obda entail    --ontology O --mapping M --data D --query Q [--explain]
//   prov-obda prov      --ontology O --mapping M --data D --query Q
//   prov-obda translate --query Q
//   prov-obda rewrite   --ontology O --query Q
//   prov-obda chase     --ontology O --mapping M --data D [--depth N]
//
// Exit status: 0 success / satisfiable / entailed, 1 unsatisfiable / not
// entailed, 2 any error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "provobda/provobda.hpp"

namespace {

using nlohmann::json;
using namespace provobda;

struct Session {
    std::string ontology_path, mapping_path, data_path, query_path;
    std::string mode_str;  // empty = command default
    std::string format = "text";
    std::size_t max_pr = 100000;
    std::size_t depth = 0;
    std::size_t max_facts = 500000;
    std::uint64_t seed = 0;  // reserved for harnesses; the CLI itself is deterministic
    bool explain = false;

    bool json_out() const { return format == "json"; }

    SemiringMode mode(SemiringMode fallback) const {
        if (mode_str.empty()) return fallback;
        if (mode_str == "free") return SemiringMode::Free;
        if (mode_str == "midem") return SemiringMode::MultIdempotent;
        if (mode_str == "fidem") return SemiringMode::FullyIdempotent;
        throw Error("unknown mode '" + mode_str + "' (use free, midem or fidem)");
    }

    RewriteCaps caps() const {
        RewriteCaps c;
        c.max_queries = max_pr;
        return c;
    }

    AnnotatedOBDAInstance instance(SemiringMode mode) const {
        return load_instance(ontology_path, mapping_path, data_path, mode);
    }
};

void add_common(CLI::App* cmd, Session& s, bool needs_instance, bool needs_query) {
    if (needs_instance) {
        cmd->add_option("--ontology", s.ontology_path, "ontology file")->required();
        cmd->add_option("--mapping", s.mapping_path, "mapping file")->required();
        cmd->add_option("--data", s.data_path, "data file")->required();
    }
    if (needs_query) cmd->add_option("--query", s.query_path, "query file")->required();
    cmd->add_option("--mode", s.mode_str, "semiring mode: free | midem | fidem");
    cmd->add_option("--format", s.format, "output format: text | json")
        ->check(CLI::IsMember({"text", "json"}));
    cmd->add_option("--max-pr", s.max_pr, "cap on rewriting closure size");
    cmd->add_option("--seed", s.seed, "seed (reserved; accepted for harness symmetry)");
}

void emit(const Session& s, const json& j, const std::string& text) {
    if (s.json_out())
        std::cout << j.dump(2) << "\n";
    else
        std::cout << text;
}

int cmd_check(const Session& s) {
    AnnotatedOBDAInstance inst = s.instance(s.mode(SemiringMode::Free));
    bool sat = check_satisfiability(inst, s.caps());
    emit(s, json{{"satisfiable", sat}}, sat ? "SAT\n" : "UNSAT\n");
    return sat ? 0 : 1;
}

int cmd_entail(const Session& s) {
    SemiringMode mode = s.mode(SemiringMode::Free);
    AnnotatedOBDAInstance inst = s.instance(mode);
    ParsedQuery pq = parse_query(read_file(s.query_path), mode);

    bool entailed = false;
    std::string witness;
    std::string route;

    std::optional<Polynomial> target = pq.with;
    if (!target) {
        bool all_ground = true;
        std::map<std::string, int> var_count;
        for (const auto& a : pq.query.atoms) {
            if (a.prov.kind != ProvTerm::Mono) all_ground = false;
            if (a.prov.kind == ProvTerm::Var) ++var_count[a.prov.var];
        }
        for (const auto& [v, n] : var_count)
            if (n > 1)
                throw Error("provenance variable '" + v +
                            "' is repeated; add an explicit WITH target polynomial");
        if (all_ground) {
            // implied target: the product of the query's ground annotations
            Monomial prod;
            for (const auto& a : pq.query.atoms) prod = mono_mul(prod, a.prov.mono, mode);
            target = Polynomial{{std::move(prod)}};
        }
    }

    if (target) {
        route = "target";
        EntailOptions opt;
        opt.caps = s.caps();
        opt.want_witness = s.explain;
        EntailOutcome out = entails_full(inst, pq.query, *target, opt);
        entailed = out.entailed;
        witness = std::move(out.witness);
    } else {
        route = "certain-answer";
        entailed = entails_plain(inst, pq.query, s.caps());
    }

    json j{{"entailed", entailed}, {"route", route}};
    std::string text = entailed ? "ENTAILED\n" : "NOT ENTAILED\n";
    if (s.explain && !witness.empty()) {
        j["witness"] = witness;
        text += witness;
        if (text.back() != '\n') text += '\n';
    }
    emit(s, j, text);
    return entailed ? 0 : 1;
}

int cmd_prov(const Session& s) {
    SemiringMode mode = s.mode(SemiringMode::FullyIdempotent);
    if (mode != SemiringMode::FullyIdempotent)
        throw ModeError("prov requires --mode fidem (provenance is computed under full idempotency)");
    AnnotatedOBDAInstance inst = s.instance(mode);
    ParsedQuery pq = parse_query(read_file(s.query_path), mode);
    if (pq.with) throw Error("prov computes the full polynomial; WITH targets belong to entail");

    Polynomial p = compute_prov(pq.query, inst, s.caps());
    json monos = json::array();
    for (const auto& m : p.terms) monos.push_back(m.factors);
    emit(s, json{{"text", render(p)}, {"monomials", monos}}, render(p) + "\n");
    return 0;
}

int cmd_translate(const Session& s) {
    SemiringMode mode = s.mode(SemiringMode::Free);
    ParsedQuery pq = parse_query(read_file(s.query_path), mode);

    std::optional<Polynomial> target = pq.with;
    if (!target) {
        bool all_ground = true;
        for (const auto& a : pq.query.atoms)
            if (a.prov.kind != ProvTerm::Mono) all_ground = false;
        if (!all_ground)
            throw Error("translate needs WITH or fully ground provenance positions");
        Monomial prod;
        for (const auto& a : pq.query.atoms) prod = mono_mul(prod, a.prov.mono, mode);
        target = Polynomial{{std::move(prod)}};
    }

    std::vector<ProvBCQ> out = translate_tr(pq.query, *target);
    json queries = json::array();
    std::string text;
    for (const auto& q : out) {
        queries.push_back(render(q));
        text += render(q) + "\n";
    }
    emit(s, json{{"queries", queries}}, text);
    return 0;
}

int cmd_rewrite(const Session& s) {
    SemiringMode mode = s.mode(SemiringMode::Free);
    std::vector<AnnotatedAxiom> onto = parse_ontology(read_file(s.ontology_path), mode);
    ParsedQuery pq = parse_query(read_file(s.query_path), mode);
    std::vector<AnnotatedAxiom> positive = positive_inclusions(onto);

    std::vector<ProvBCQ> closure;
    if (is_standard(pq.query))
        closure = perfect_ref_star(star_substitute(pq.query), positive, s.caps());
    else
        closure = perfect_ref(pq.query, positive, s.caps());

    json queries = json::array();
    std::string text;
    for (const auto& q : closure) {
        queries.push_back(render(q));
        text += render(q) + "\n";
    }
    emit(s, json{{"queries", queries}}, text);
    return 0;
}

int cmd_chase(const Session& s) {
    SemiringMode mode = s.mode(SemiringMode::Free);
    AnnotatedOBDAInstance inst = s.instance(mode);
    ChaseConfig cfg;
    cfg.depth_bound = s.depth;
    cfg.max_facts = s.max_facts;
    ChaseModel model = chase(inst, cfg);

    json facts = json::array();
    std::string text;
    for (const auto& f : model.facts) {
        facts.push_back(
            {{"pred", f.pred}, {"args", f.args}, {"annotation", render(f.annotation)}});
        text += f.pred + "(";
        for (std::size_t i = 0; i < f.args.size(); ++i) {
            if (i) text += ", ";
            text += f.args[i];
        }
        text += ") @ " + render(f.annotation) + "\n";
    }
    if (model.truncated()) text += "# truncated\n";
    emit(s, json{{"facts", facts}, {"truncated", model.truncated()}}, text);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"provenance-annotated ontology-based data access over DL-Lite"};
    app.require_subcommand(1);

    Session s;
    CLI::App* check = app.add_subcommand("check", "decide satisfiability of the instance");
    add_common(check, s, true, false);
    CLI::App* entail = app.add_subcommand("entail", "decide entailment of an annotated query");
    add_common(entail, s, true, true);
    entail->add_flag("--explain", s.explain, "print the witnessing trace");
    CLI::App* prov = app.add_subcommand("prov", "compute the provenance polynomial of a query");
    add_common(prov, s, true, true);
    CLI::App* translate = app.add_subcommand("translate", "dump the target-polynomial translation");
    add_common(translate, s, false, true);
    CLI::App* rewrite = app.add_subcommand("rewrite", "dump the rewriting closure");
    add_common(rewrite, s, false, true);
    rewrite->add_option("--ontology", s.ontology_path, "ontology file")->required();
    CLI::App* chase_cmd = app.add_subcommand("chase", "dump the chase of the instance");
    add_common(chase_cmd, s, true, false);
    chase_cmd->add_option("--depth", s.depth, "derivation depth bound (required for free mode)");
    chase_cmd->add_option("--max-facts", s.max_facts, "hard cap on chase size");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (check->parsed()) return cmd_check(s);
        if (entail->parsed()) return cmd_entail(s);
        if (prov->parsed()) return cmd_prov(s);
        if (translate->parsed()) return cmd_translate(s);
        if (rewrite->parsed()) return cmd_rewrite(s);
        if (chase_cmd->parsed()) return cmd_chase(s);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
