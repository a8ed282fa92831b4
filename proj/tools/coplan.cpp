// Command-line front end: formula translation, DFA decomposition, grid
// construction, task solving, option synthesis and composition, product-level
// planning, and the full reproduction harness.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "coplan/harness.hpp"

namespace fs = std::filesystem;
using namespace coplan;

namespace {

void add_solver_opts(CLI::App* cmd, SolverParams& p) {
    cmd->add_option("--gamma", p.gamma, "discount factor")->capture_default_str();
    cmd->add_option("--tau", p.tau, "entropy temperature")->capture_default_str();
    cmd->add_option("--alpha", p.alpha, "goal reward scale")->capture_default_str();
    cmd->add_option("--tol", p.tol, "sup-norm residual tolerance")->capture_default_str();
    cmd->add_option("--max-iter", p.max_iter, "iteration cap")->capture_default_str();
}

// "tasks.json#3" -> (tasks.json, 3); a missing fragment picks entry 0
std::pair<fs::path, int> split_task_ref(const std::string& ref) {
    auto hash = ref.rfind('#');
    if (hash == std::string::npos) return {ref, 0};
    return {ref.substr(0, hash), std::stoi(ref.substr(hash + 1))};
}

void check_same_alphabet(const Alphabet& tasks_ap, const Mdp& m, const std::string& what) {
    if (tasks_ap.names != m.alphabet.names)
        throw std::runtime_error(what + ": alphabet does not match the MDP's atoms");
}

PlannerKind parse_planner(const std::string& name) {
    if (name == "optimal") return PlannerKind::Optimal;
    if (name == "action") return PlannerKind::Action;
    if (name == "option") return PlannerKind::Option;
    if (name == "mixed") return PlannerKind::Mixed;
    throw std::runtime_error("unknown planner '" + name + "'");
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
}

int run(int argc, char** argv) {
    CLI::App app{"policy planning for syntactically co-safe LTL objectives"};
    app.require_subcommand(1);

    // translate ------------------------------------------------------------
    std::string tr_formula, tr_ap, tr_out;
    auto* tr = app.add_subcommand("translate", "compile an sc-LTL formula to a minimal DFA");
    tr->add_option("--formula", tr_formula, "sc-LTL formula")->required();
    tr->add_option("--ap", tr_ap, "comma-separated atomic propositions")->required();
    tr->add_option("--out", tr_out, "output dfa.json")->required();
    tr->callback([&] {
        Alphabet ap = Alphabet::parse_list(tr_ap);
        FormulaSet fsave;
        int root = parse_formula(fsave, tr_formula, ap);
        Dfa d = to_dfa(fsave, root, ap);
        save_dfa(d, tr_out);
        std::cout << "dfa: " << d.num_states << " states, initial " << d.initial << ", sink "
                  << d.sink << "\n";
    });

    // decompose ------------------------------------------------------------
    std::string de_dfa, de_out;
    auto* de = app.add_subcommand("decompose", "rank a DFA and extract its option recipes");
    de->add_option("--dfa", de_dfa, "input dfa.json")->required();
    de->add_option("--out", de_out, "output tasks.json")->required();
    de->callback([&] {
        Dfa d = load_dfa(de_dfa);
        Decomposition dec = decompose(d);
        print_warnings(dec.warnings);
        save_tasks(dec, de_out);
        std::cout << "tasks: " << dec.inventory.size() << " recipes ("
                  << dec.num_primitives() << " primitive)\n";
    });

    // build-grid -----------------------------------------------------------
    std::string bg_spec, bg_out;
    auto* bg = app.add_subcommand("build-grid", "expand a grid spec into an explicit MDP");
    bg->add_option("--spec", bg_spec, "input grid.json")->required();
    bg->add_option("--out", bg_out, "output mdp.json")->required();
    bg->callback([&] {
        GridSpec g = load_grid(bg_spec);
        Mdp m = build_grid(g);
        save_mdp(m, grid_action_names(), bg_out);
        std::cout << "mdp: " << m.num_states << " states, atoms";
        for (const std::string& n : m.alphabet.names) std::cout << " " << n;
        std::cout << "\n";
    });

    // solve ----------------------------------------------------------------
    std::string sv_task, sv_mdp, sv_op = "softmax", sv_out = ".";
    SolverParams sv_params;
    auto* sv = app.add_subcommand("solve", "solve one task's reach-avoid problem directly");
    sv->add_option("--task", sv_task, "tasks.json#k (entry index after '#')")->required();
    sv->add_option("--mdp", sv_mdp, "input mdp.json")->required();
    sv->add_option("--operator", sv_op, "softmax|hardmax")
        ->check(CLI::IsMember({"softmax", "hardmax"}));
    sv->add_option("--out", sv_out, "output directory")->capture_default_str();
    add_solver_opts(sv, sv_params);
    sv->callback([&] {
        auto [path, k] = split_task_ref(sv_task);
        MdpFile mf = load_mdp(sv_mdp);
        TasksFile tf = load_tasks(path);
        check_same_alphabet(tf.ap, mf.mdp, "tasks " + path.string());
        if (k < 0 || k >= (int)tf.inventory.size())
            throw std::runtime_error("task index " + std::to_string(k) + " out of range");
        const OptionRecipe& r = tf.inventory[k];
        TaskMdp task = bind_task(mf.mdp, r.goal, r.unsafe);
        SolveResult res = sv_op == "softmax" ? solve_softmax(task, sv_params)
                                             : solve_hardmax(task, sv_params);
        fs::create_directories(sv_out);
        write_value_csv(fs::path(sv_out) / "value.csv", res.value);
        write_policy_csv(fs::path(sv_out) / "policy.csv", res.policy);
        write_trace_csv(fs::path(sv_out) / "trace.csv", res.trace);
        std::cout << "solved '" << r.label << "' (" << sv_op << "): " << res.iterations
                  << " iterations, residual " << format_double(res.residual) << "\n";
    });

    // synth-options ----------------------------------------------------------
    std::string so_mdp, so_tasks, so_out;
    SolverParams so_params;
    ComposeDefaults so_etas;
    auto* so = app.add_subcommand("synth-options", "synthesize every option in a task inventory");
    so->add_option("--mdp", so_mdp, "input mdp.json")->required();
    so->add_option("--tasks", so_tasks, "input tasks.json")->required();
    so->add_option("--out", so_out, "output options directory")->required();
    so->add_option("--eta-or", so_etas.eta_or, "OR sharpness")->capture_default_str();
    so->add_option("--eta-and", so_etas.eta_and, "AND sharpness")->capture_default_str();
    add_solver_opts(so, so_params);
    so->callback([&] {
        MdpFile mf = load_mdp(so_mdp);
        TasksFile tf = load_tasks(so_tasks);
        check_same_alphabet(tf.ap, mf.mdp, "tasks " + so_tasks);
        so_etas.eta_minus = std::abs(so_etas.eta_or);
        std::vector<OptionPolicy> pool = realize_recipes(mf.mdp, tf.inventory, so_params, so_etas);
        for (const OptionPolicy& o : pool) print_warnings(o.warnings);
        save_options(pool, tf.inventory, so_out);
        std::cout << "synthesized " << pool.size() << " options into " << so_out << "\n";
    });

    // compose ----------------------------------------------------------------
    std::string co_mdp, co_options, co_op, co_out;
    std::vector<int> co_operands, co_neg;
    std::vector<double> co_weights;
    double co_eta = 0.0;
    SolverParams co_params;
    auto* co = app.add_subcommand("compose", "combine synthesized options with a GCD operator");
    co->add_option("--mdp", co_mdp, "input mdp.json")->required();
    co->add_option("--options", co_options, "options directory")->required();
    co->add_option("--op", co_op, "or|and|minus")
        ->required()
        ->check(CLI::IsMember({"or", "and", "minus"}));
    co->add_option("--operands", co_operands, "option indices")->required()->delimiter(',');
    co->add_option("--neg-operands", co_neg, "excluded indices (minus only)")->delimiter(',');
    co->add_option("--weights", co_weights, "operand weights")->delimiter(',');
    auto* co_eta_opt = co->add_option("--eta", co_eta, "sharpness (default +10 or, -10 and)");
    co->add_option("--out", co_out, "output options directory")->required();
    add_solver_opts(co, co_params);
    co->callback([&] {
        MdpFile mf = load_mdp(co_mdp);
        std::vector<OptionPolicy> pool = load_options(co_options, mf.mdp);
        CompositionSpec spec;
        spec.op = co_op == "or"    ? CompositionSpec::Op::Or
                  : co_op == "and" ? CompositionSpec::Op::And
                                   : CompositionSpec::Op::Minus;
        spec.operands = co_operands;
        spec.neg_operands = co_neg;
        spec.weights = co_weights;
        spec.eta = *co_eta_opt          ? co_eta
                   : co_op == "and"     ? -10.0
                                        : 10.0;
        OptionPolicy made = compose(mf.mdp, spec, pool, co_params);
        print_warnings(made.warnings);
        save_options({made}, {}, co_out);
        std::cout << "composed '" << made.label << "' into " << co_out << "\n";
    });

    // plan -------------------------------------------------------------------
    std::string pl_mdp, pl_formula, pl_planner = "mixed", pl_options, pl_out = "run";
    SolverParams pl_params;
    auto* pl = app.add_subcommand("plan", "plan a formula on the product of an MDP and its DFA");
    pl->add_option("--mdp", pl_mdp, "input mdp.json")->required();
    pl->add_option("--formula", pl_formula, "sc-LTL formula over the MDP's atoms")->required();
    pl->add_option("--planner", pl_planner, "optimal|action|option|mixed")
        ->check(CLI::IsMember({"optimal", "action", "option", "mixed"}))
        ->capture_default_str();
    pl->add_option("--options", pl_options, "pre-synthesized options directory (else built here)");
    pl->add_option("--out", pl_out, "output directory")->capture_default_str();
    add_solver_opts(pl, pl_params);
    pl->callback([&] {
        MdpFile mf = load_mdp(pl_mdp);
        const Mdp& m = mf.mdp;
        FormulaSet fsave;
        int root = parse_formula(fsave, pl_formula, m.alphabet);
        Dfa dfa = to_dfa(fsave, root, m.alphabet);
        std::vector<OptionPolicy> pool;
        if (!pl_options.empty()) {
            pool = load_options(pl_options, m);
        } else {
            Decomposition dec = decompose(dfa);
            print_warnings(dec.warnings);
            ComposeDefaults etas;
            pool = realize_recipes(m, dec.inventory, pl_params, etas);
            for (const OptionPolicy& o : pool) print_warnings(o.warnings);
        }
        std::vector<OptionPolicy> macros;
        for (const OptionPolicy& o : pool)
            if (!o.task.empty_goal) macros.push_back(o);
        ProductModel pm = build_product(m, dfa, pl_params.alpha);
        MacroModel mm = build_macro_model(pm, macros, pl_params.gamma);
        PlannerKind kind = parse_planner(pl_planner);
        auto t0 = std::chrono::steady_clock::now();
        PlanResult pr = plan(pm, mm, kind, pl_params);
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        double p = satisfaction_probability(pm, mm, macros, pr.policy);

        fs::create_directories(pl_out);
        std::vector<std::vector<std::string>> rows;
        for (int i = 0; i < pm.num_states(); ++i)
            rows.push_back({std::to_string(pm.states[i].first),
                            std::to_string(pm.states[i].second), format_double(pr.value[i])});
        write_csv(fs::path(pl_out) / "values.csv", "s,q,V", rows);
        write_trace_csv(fs::path(pl_out) / "trace.csv", pr.trace);

        Json pol;
        Json cols = Json::array();
        for (const std::string& a : mf.actions) cols.push_back(a);
        for (const OptionPolicy& o : macros) cols.push_back("option:" + o.label);
        pol["columns"] = cols;
        Json prow = Json::array();
        for (int i = 0; i < pm.num_states(); ++i)
            prow.push_back(Json{{"s", pm.states[i].first},
                                {"q", pm.states[i].second},
                                {"p", pr.policy[i]}});
        pol["rows"] = prow;
        write_json_file(fs::path(pl_out) / "policy.json", pol);

        Json summary{{"planner", pl_planner}, {"formula", pl_formula},        {"p", p},
                     {"n", pr.iterations},    {"t", secs},                    {"residual", pr.residual}};
        write_json_file(fs::path(pl_out) / "summary.json", summary);
        std::cout << "planner " << pl_planner << ": p = " << format_double(p) << ", n = "
                  << pr.iterations << ", t = " << format_double(secs) << "s\n";
    });

    // reproduce ----------------------------------------------------------------
    std::string rp_config, rp_out = "results";
    auto* rp = app.add_subcommand("reproduce", "run the three studies and gate the results");
    rp->add_option("--config", rp_config, "experiment.json")->required();
    rp->add_option("--out", rp_out, "output directory")->capture_default_str();
    rp->callback([&] {
        ExperimentConfig cfg = load_experiment(rp_config);
        RunReport rep = run_all(cfg, rp_out);
        for (const Gate& g : rep.gates)
            std::cout << (g.pass ? "PASS " : "FAIL ") << g.name << ": " << g.detail << "\n";
        std::cout << (rep.pass ? "reproduce: all gates passed\n"
                               : "reproduce: some gates FAILED\n");
        if (!rep.pass) throw CLI::RuntimeError(1);
    });

    CLI11_PARSE(app, argc, argv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
