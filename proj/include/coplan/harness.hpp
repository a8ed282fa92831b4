#pragma once

// Experiment harness: runs the composition-error study, the four-planner
// comparison, and the policy-deviation table on a labeled grid, writing CSV
// and JSON artifacts plus a Markdown summary. Every gated artifact is a pure
// function of the config, so identical configs produce byte-identical
// report.json and CSV files; wall-clock timings go to a separate timings.txt
// and are never asserted.

#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "coplan/io.hpp"
#include "coplan/product.hpp"

namespace coplan {

struct Gate {
    std::string name;
    bool pass = false;
    std::string detail;
};

inline Json gates_to_json(const std::vector<Gate>& gates) {
    Json arr = Json::array();
    for (const auto& g : gates)
        arr.push_back(Json{{"name", g.name}, {"pass", g.pass}, {"detail", g.detail}});
    return arr;
}

/// ‖v − ref‖/‖ref‖ in the 2-norm and the sup norm.
inline std::pair<double, double> relative_gap(const std::vector<double>& v,
                                              const std::vector<double>& ref) {
    if (v.size() != ref.size()) throw std::invalid_argument("relative_gap: length mismatch");
    double d2 = 0, di = 0, r2 = 0, ri = 0;
    for (size_t i = 0; i < v.size(); ++i) {
        double d = v[i] - ref[i];
        d2 += d * d;
        di = std::max(di, std::abs(d));
        r2 += ref[i] * ref[i];
        ri = std::max(ri, std::abs(ref[i]));
    }
    if (r2 == 0) throw std::invalid_argument("relative_gap: zero reference");
    return {std::sqrt(d2) / std::sqrt(r2), di / ri};
}

// ---------------------------------------------------------------------------
// Shared context: everything the studies need, solved once.

/// One task prepared for planning. The executable macro set keeps only options
/// with nonempty goal sets; the rest stay in the inventory as composition
/// operands but cannot terminate, so they never become macros.
struct TaskSetup {
    std::string name;
    std::string formula;
    Dfa dfa;
    Decomposition dec;
    std::vector<OptionPolicy> inventory;
    std::vector<OptionPolicy> macros;
    ProductModel pm;
    MacroModel mm;
};

struct ExperimentContext {
    ExperimentConfig config;
    GridSpec grid;
    Mdp mdp;
    SolverParams params;
    ComposeDefaults etas;
    PrimitiveCache primitives;
    std::vector<TaskSetup> tasks;

    // ProductModel and TaskMdp point back into this object; no copies.
    ExperimentContext() = default;
    ExperimentContext(const ExperimentContext&) = delete;
    ExperimentContext& operator=(const ExperimentContext&) = delete;
};

/// Loads the grid and prepares every task in the config. Relative grid paths
/// resolve against `grid_dir` (typically the config file's directory).
inline void prepare_experiment(const ExperimentConfig& c, ExperimentContext& ctx,
                               const std::filesystem::path& grid_dir = {}) {
    ctx.config = c;
    std::filesystem::path gp = c.grid;
    if (gp.is_relative() && !grid_dir.empty()) gp = grid_dir / gp;
    ctx.grid = load_grid(gp);
    ctx.mdp = build_grid(ctx.grid);
    ctx.params.gamma = c.gamma;
    ctx.params.tau = c.tau;
    ctx.params.alpha = c.alpha;
    ctx.params.tol = c.tol;
    ctx.params.max_iter = c.max_iter;
    ctx.etas.eta_or = c.eta_or;
    ctx.etas.eta_and = c.eta_and;
    ctx.etas.eta_minus = std::abs(c.eta_or);
    // Reserve up front: each ProductModel points at the Dfa inside its own
    // TaskSetup, so elements must never relocate.
    ctx.tasks.reserve(c.tasks.size());
    for (const auto& [name, formula] : c.tasks) {
        ctx.tasks.emplace_back();
        TaskSetup& t = ctx.tasks.back();
        t.name = name;
        t.formula = formula;
        FormulaSet fs;
        int root = parse_formula(fs, formula, ctx.mdp.alphabet);
        t.dfa = to_dfa(fs, root, ctx.mdp.alphabet);
        t.dec = decompose(t.dfa);
        t.inventory = realize_inventory(ctx.mdp, t.dec, ctx.params, ctx.etas, &ctx.primitives);
        for (const auto& o : t.inventory)
            if (!o.task.empty_goal) t.macros.push_back(o);
        t.pm = build_product(ctx.mdp, t.dfa, ctx.params.alpha);
        t.mm = build_macro_model(t.pm, t.macros, ctx.params.gamma);
    }
}

// ---------------------------------------------------------------------------
// Composition study: compose O(s2) with O(s3) under OR and AND, compare the
// mixture's entropy-free value against a directly synthesized softmax policy
// for the combined goal, and write the four value heatmaps.

struct OperatorErrors {
    double e2 = 0, einf = 0;            // composed vs direct softmax policy value
    double e2_hard = 0, einf_hard = 0;  // composed vs hardmax policy value, informational
};

struct CompositionResult {
    OperatorErrors or_errors, and_errors;
    std::vector<Gate> gates;
};

inline CompositionResult run_composition_study(ExperimentContext& ctx,
                                               const std::filesystem::path& out) {
    std::filesystem::create_directories(out);
    save_experiment(ctx.config, out / "config.json");

    const Mdp& m = ctx.mdp;
    const Alphabet& ap = m.alphabet;
    const int a2 = ap.index("s2"), a3 = ap.index("s3"), ac = ap.index("C");
    if (a2 < 0 || a3 < 0 || ac < 0)
        throw std::runtime_error("composition study: grid must label regions s2, s3 and C");

    auto syms = [&](auto keep) {
        SymbolSet set;
        for (Symbol s = 0; s < ap.num_symbols(); ++s)
            if (keep(s)) set.push_back(s);
        return set;
    };
    SymbolSet unsafe = syms([&](Symbol s) { return ap.has(s, ac); });
    SymbolSet g2 = syms([&](Symbol s) { return ap.has(s, a2) && !ap.has(s, ac); });
    SymbolSet g3 = syms([&](Symbol s) { return ap.has(s, a3) && !ap.has(s, ac); });
    SymbolSet g_or = syms([&](Symbol s) { return (ap.has(s, a2) || ap.has(s, a3)) && !ap.has(s, ac); });
    SymbolSet g_and = syms([&](Symbol s) { return ap.has(s, a2) && ap.has(s, a3) && !ap.has(s, ac); });

    auto cached = [&](const SymbolSet& goal, const std::string& label) {
        auto key = std::make_pair(goal, unsafe);
        auto it = ctx.primitives.find(key);
        if (it == ctx.primitives.end())
            it = ctx.primitives
                     .emplace(key, make_primitive_option(m, goal, unsafe, ctx.params, label))
                     .first;
        return it->second;
    };
    std::vector<OptionPolicy> pool{cached(g2, "s2"), cached(g3, "s3")};

    CompositionSpec or_spec, and_spec;
    or_spec.op = CompositionSpec::Op::Or;
    or_spec.operands = {0, 1};
    or_spec.eta = ctx.etas.eta_or;
    and_spec.op = CompositionSpec::Op::And;
    and_spec.operands = {0, 1};
    and_spec.eta = ctx.etas.eta_and;
    OptionPolicy comp_or = compose(m, or_spec, pool, ctx.params);
    OptionPolicy comp_and = compose(m, and_spec, pool, ctx.params);

    TaskMdp t_or = bind_task(m, g_or, unsafe);
    TaskMdp t_and = bind_task(m, g_and, unsafe);
    SolveResult d_or = solve_softmax(t_or, ctx.params);
    SolveResult d_and = solve_softmax(t_and, ctx.params);
    std::vector<double> v_or = policy_eval(t_or, d_or.policy, ctx.params);
    std::vector<double> v_and = policy_eval(t_and, d_and.policy, ctx.params);
    SolveResult h_or = solve_hardmax(t_or, ctx.params);
    SolveResult h_and = solve_hardmax(t_and, ctx.params);

    CompositionResult res;
    std::tie(res.or_errors.e2, res.or_errors.einf) = relative_gap(v_or, comp_or.value);
    std::tie(res.and_errors.e2, res.and_errors.einf) = relative_gap(v_and, comp_and.value);
    std::tie(res.or_errors.e2_hard, res.or_errors.einf_hard) =
        relative_gap(h_or.value, comp_or.value);
    std::tie(res.and_errors.e2_hard, res.and_errors.einf_hard) =
        relative_gap(h_and.value, comp_and.value);

    // Heatmaps show alpha at goal cells (the solver pins absorbing states at
    // zero internally) so the displayed surface spans [0, alpha].
    auto heat = [&](const std::vector<double>& v, const TaskMdp& t) {
        std::vector<double> disp(v);
        for (int s = 0; s < m.num_states; ++s)
            if (t.goal[s]) disp[s] = ctx.params.alpha;
        return disp;
    };
    const int w = ctx.grid.width, h = ctx.grid.height;
    write_matrix_csv(out / "fig3_or_composed.csv", w, h, heat(comp_or.value, comp_or.task));
    write_matrix_csv(out / "fig3_or_direct.csv", w, h, heat(v_or, t_or));
    write_matrix_csv(out / "fig3_and_composed.csv", w, h, heat(comp_and.value, comp_and.task));
    write_matrix_csv(out / "fig3_and_direct.csv", w, h, heat(v_and, t_and));

    auto max_on_goal = [&](const std::vector<double>& v, const TaskMdp& t) {
        double best = 0;
        for (double x : v) best = std::max(best, x);
        for (int s = 0; s < m.num_states; ++s)
            if (v[s] >= best - 1e-9 && !t.goal[s]) return false;
        return true;
    };
    auto gate = [&](std::string name, bool pass, std::string detail) {
        res.gates.push_back({std::move(name), pass, std::move(detail)});
    };
    gate("composition.or.e2", res.or_errors.e2 <= 1e-2,
         "e2 = " + format_double(res.or_errors.e2) + " (limit 0.01)");
    gate("composition.or.einf", res.or_errors.einf <= 1e-2,
         "einf = " + format_double(res.or_errors.einf) + " (limit 0.01)");
    gate("composition.and.e2", res.and_errors.e2 <= 5e-2,
         "e2 = " + format_double(res.and_errors.e2) + " (limit 0.05)");
    gate("composition.and.einf", res.and_errors.einf <= 5e-2,
         "einf = " + format_double(res.and_errors.einf) + " (limit 0.05)");
    gate("composition.or.heatmap_max",
         max_on_goal(heat(comp_or.value, comp_or.task), comp_or.task),
         "largest OR values sit on cells labeled s2 or s3");
    gate("composition.and.heatmap_max",
         max_on_goal(heat(comp_and.value, comp_and.task), comp_and.task),
         "largest AND values sit on cells labeled both s2 and s3");
    return res;
}

// ---------------------------------------------------------------------------
// Planner comparison: for each task and planner, run the product-level plan,
// evaluate the policy's satisfaction probability by gamma=1 linear solve, and
// record per-iteration traces.

struct PlannerRun {
    std::string planner;
    double p = 0;        // satisfaction probability of the executed policy
    int iterations = 0;
    double seconds = 0;  // informational; kept out of report.json and CSVs
};

struct PlannerTaskResult {
    std::string task;
    double reach_bound = 0;  // alpha=1, gamma=1 hardmax optimum at the initial state
    std::vector<PlannerRun> runs;  // optimal, action, option, mixed
};

struct PlannerResult {
    std::vector<PlannerTaskResult> tasks;
    std::vector<Gate> gates;
};

inline PlannerResult run_planner_comparison(ExperimentContext& ctx,
                                            const std::filesystem::path& out) {
    std::filesystem::create_directories(out);
    save_experiment(ctx.config, out / "config.json");

    PlannerResult res;
    std::vector<std::vector<std::string>> table1;
    std::string timings = "# wall-clock seconds per planner run, informational only\n";
    const std::array<PlannerKind, 4> kinds{PlannerKind::Optimal, PlannerKind::Action,
                                           PlannerKind::Option, PlannerKind::Mixed};
    for (TaskSetup& t : ctx.tasks) {
        PlannerTaskResult tr;
        tr.task = t.name;
        // Exact reachability optimum: undiscounted hardmax on the unscaled product.
        ProductModel unit = build_product(ctx.mdp, t.dfa, 1.0);
        SolverParams bp = ctx.params;
        bp.gamma = 1.0;
        bp.tol = 1e-12;
        bp.max_iter = 1000000;
        tr.reach_bound = plan(unit, MacroModel{}, PlannerKind::Optimal, bp).value[unit.initial];

        std::vector<std::vector<std::string>> fig4;
        for (PlannerKind k : kinds) {
            auto t0 = std::chrono::steady_clock::now();
            PlanResult pr = plan(t.pm, t.mm, k, ctx.params);
            double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            PlannerRun run;
            run.planner = planner_name(k);
            run.p = satisfaction_probability(t.pm, t.mm, t.macros, pr.policy);
            run.iterations = pr.iterations;
            run.seconds = secs;
            table1.push_back(
                {t.name, run.planner, format_double(run.p), std::to_string(run.iterations)});
            for (size_t i = 0; i < pr.trace.size(); ++i)
                fig4.push_back({run.planner, std::to_string(i + 1),
                                format_double(pr.trace[i].first),
                                format_double(pr.trace[i].second)});
            timings += t.name + " " + run.planner + " " + format_double(secs) + "\n";
            tr.runs.push_back(std::move(run));
        }
        write_csv(out / ("fig4_" + t.name + ".csv"), "planner,iteration,v_init,residual", fig4);
        res.tasks.push_back(std::move(tr));
    }
    write_csv(out / "table1.csv", "task,planner,p,iterations", table1);
    write_text_file(out / "timings.txt", timings);

    auto gate = [&](std::string name, bool pass, std::string detail) {
        res.gates.push_back({std::move(name), pass, std::move(detail)});
    };
    for (const PlannerTaskResult& tr : res.tasks) {
        const PlannerRun& opt = tr.runs[0];
        const PlannerRun& act = tr.runs[1];
        const PlannerRun& optn = tr.runs[2];
        const PlannerRun& mix = tr.runs[3];
        gate("planners." + tr.task + ".iteration_order",
             optn.iterations < mix.iterations && mix.iterations < act.iterations,
             "option " + std::to_string(optn.iterations) + " < mixed " +
                 std::to_string(mix.iterations) + " < action " + std::to_string(act.iterations));
        bool in_range = true;
        double worst = 0;
        for (const PlannerRun& r : tr.runs) {
            in_range = in_range && r.p >= -1e-12 && r.p <= 1 + 1e-12;
            worst = std::max(worst, r.p);
        }
        gate("planners." + tr.task + ".p_range", in_range,
             "all satisfaction probabilities within [0,1]");
        gate("planners." + tr.task + ".bound_dominates", worst <= tr.reach_bound + 1e-9,
             "optimum " + format_double(tr.reach_bound) + " covers best planner p " +
                 format_double(worst));
        if (tr.task == "phi1")
            gate("planners.phi1.option_within_15pct", optn.p >= 0.85 * opt.p,
                 "option p = " + format_double(optn.p) + " vs 0.85 * optimal p = " +
                     format_double(0.85 * opt.p));
    }
    return res;
}

// ---------------------------------------------------------------------------
// Policy deviation: entropy-free product values of the action, option, and
// mixed policies (macro steps expanded to their micro chains), compared as
// relative errors against the action planner.

struct DeviationRow {
    std::string task;
    std::string comparison;  // "option_vs_action" or "mixed_vs_action"
    double norm2 = 0;
    double norminf = 0;
};

struct DeviationResult {
    std::vector<DeviationRow> rows;
    std::vector<Gate> gates;
};

inline DeviationResult run_policy_deviation(ExperimentContext& ctx,
                                            const std::filesystem::path& out) {
    std::filesystem::create_directories(out);
    save_experiment(ctx.config, out / "config.json");

    DeviationResult res;
    std::vector<std::vector<std::string>> table2;
    for (TaskSetup& t : ctx.tasks) {
        PlanResult r_act = plan(t.pm, t.mm, PlannerKind::Action, ctx.params);
        PlanResult r_optn = plan(t.pm, t.mm, PlannerKind::Option, ctx.params);
        PlanResult r_mix = plan(t.pm, t.mm, PlannerKind::Mixed, ctx.params);
        std::vector<double> v_act = flat_value(t.pm, t.mm, t.macros, r_act.policy, ctx.params);
        std::vector<double> v_optn = flat_value(t.pm, t.mm, t.macros, r_optn.policy, ctx.params);
        std::vector<double> v_mix = flat_value(t.pm, t.mm, t.macros, r_mix.policy, ctx.params);

        DeviationRow row_o{t.name, "option_vs_action", 0, 0};
        std::tie(row_o.norm2, row_o.norminf) = relative_gap(v_optn, v_act);
        DeviationRow row_m{t.name, "mixed_vs_action", 0, 0};
        std::tie(row_m.norm2, row_m.norminf) = relative_gap(v_mix, v_act);
        table2.push_back({row_o.task, row_o.comparison, format_double(row_o.norm2),
                          format_double(row_o.norminf)});
        table2.push_back({row_m.task, row_m.comparison, format_double(row_m.norm2),
                          format_double(row_m.norminf)});

        res.gates.push_back({"deviation." + t.name + ".mixed_tighter",
                             row_m.norminf < row_o.norminf,
                             "mixed einf " + format_double(row_m.norminf) + " < option einf " +
                                 format_double(row_o.norminf)});
        double largest = std::max(std::max(row_o.norm2, row_o.norminf),
                                  std::max(row_m.norm2, row_m.norminf));
        res.gates.push_back({"deviation." + t.name + ".magnitude", largest < 0.2,
                             "largest deviation " + format_double(largest) + " (limit 0.2)"});
        res.rows.push_back(row_o);
        res.rows.push_back(row_m);
    }
    write_csv(out / "table2.csv", "task,comparison,norm2,norminf", table2);
    return res;
}

// ---------------------------------------------------------------------------
// Full run: the three studies, a combined report, and a Markdown summary.

struct RunReport {
    CompositionResult composition;
    PlannerResult planners;
    DeviationResult deviation;
    std::vector<Gate> gates;
    bool pass = false;
};

inline Json report_to_json(const ExperimentConfig& c, const RunReport& r) {
    auto op_json = [](const OperatorErrors& e) {
        return Json{{"e2", e.e2},
                    {"einf", e.einf},
                    {"e2_hardmax_ref", e.e2_hard},
                    {"einf_hardmax_ref", e.einf_hard}};
    };
    Json planners = Json::array();
    for (const PlannerTaskResult& tr : r.planners.tasks) {
        Json runs = Json::array();
        for (const PlannerRun& run : tr.runs)
            runs.push_back(Json{{"planner", run.planner},
                                {"p", run.p},
                                {"iterations", run.iterations}});
        planners.push_back(
            Json{{"task", tr.task}, {"reach_bound", tr.reach_bound}, {"runs", runs}});
    }
    Json deviation = Json::array();
    for (const DeviationRow& row : r.deviation.rows)
        deviation.push_back(Json{{"task", row.task},
                                 {"comparison", row.comparison},
                                 {"norm2", row.norm2},
                                 {"norminf", row.norminf}});
    return Json{{"config", experiment_to_json(c)},
                {"composition",
                 Json{{"or", op_json(r.composition.or_errors)},
                      {"and", op_json(r.composition.and_errors)}}},
                {"planners", planners},
                {"deviation", deviation},
                {"gates", gates_to_json(r.gates)},
                {"pass", r.pass}};
}

inline std::string summary_markdown(const ExperimentConfig& c, const RunReport& r) {
    std::string s = "# Reproduction summary\n\n";
    s += "Grid `" + c.grid + "`, gamma " + format_double(c.gamma) + ", tau " +
         format_double(c.tau) + ", alpha " + format_double(c.alpha) + ", tol " +
         format_double(c.tol) + ".\n\n";
    s += "## Composition errors\n\n";
    s += "| operator | e2 | einf | e2 (hardmax ref) | einf (hardmax ref) |\n";
    s += "|---|---|---|---|---|\n";
    auto op_row = [&](const char* name, const OperatorErrors& e) {
        s += std::string("| ") + name + " | " + format_double(e.e2) + " | " +
             format_double(e.einf) + " | " + format_double(e.e2_hard) + " | " +
             format_double(e.einf_hard) + " |\n";
    };
    op_row("or", r.composition.or_errors);
    op_row("and", r.composition.and_errors);
    s += "\n## Planner comparison\n\n";
    s += "| task | planner | p | iterations |\n|---|---|---|---|\n";
    for (const PlannerTaskResult& tr : r.planners.tasks)
        for (const PlannerRun& run : tr.runs)
            s += "| " + tr.task + " | " + run.planner + " | " + format_double(run.p) + " | " +
                 std::to_string(run.iterations) + " |\n";
    s += "\nReachability optima: ";
    for (size_t i = 0; i < r.planners.tasks.size(); ++i) {
        if (i) s += ", ";
        s += r.planners.tasks[i].task + " " + format_double(r.planners.tasks[i].reach_bound);
    }
    s += ".\n\n## Policy deviation\n\n";
    s += "| task | comparison | 2-norm | inf-norm |\n|---|---|---|---|\n";
    for (const DeviationRow& row : r.deviation.rows)
        s += "| " + row.task + " | " + row.comparison + " | " + format_double(row.norm2) +
             " | " + format_double(row.norminf) + " |\n";
    s += "\n## Gates\n\n";
    for (const Gate& g : r.gates)
        s += std::string("- ") + (g.pass ? "PASS" : "FAIL") + " `" + g.name + "`: " + g.detail +
             "\n";
    s += "\nWall-clock timings live in `planners/timings.txt`; they are informational only and "
         "never gated.\n";
    return s;
}

/// Runs all three studies under `out`, mirrors the headline CSVs at the top
/// level, and writes report.json plus summary.md. Returns the report; callers
/// map `pass` to the exit code.
inline RunReport run_all(const ExperimentConfig& c, const std::filesystem::path& out,
                         const std::filesystem::path& grid_dir = {}) {
    ExperimentContext ctx;
    prepare_experiment(c, ctx, grid_dir);
    std::filesystem::create_directories(out);
    save_experiment(ctx.config, out / "config.json");

    RunReport rep;
    rep.composition = run_composition_study(ctx, out / "composition");
    rep.planners = run_planner_comparison(ctx, out / "planners");
    rep.deviation = run_policy_deviation(ctx, out / "deviation");
    for (const Gate& g : rep.composition.gates) rep.gates.push_back(g);
    for (const Gate& g : rep.planners.gates) rep.gates.push_back(g);
    for (const Gate& g : rep.deviation.gates) rep.gates.push_back(g);
    rep.pass = true;
    for (const Gate& g : rep.gates) rep.pass = rep.pass && g.pass;

    const auto copy = [&](const std::filesystem::path& from) {
        std::filesystem::copy_file(from, out / from.filename(),
                                   std::filesystem::copy_options::overwrite_existing);
    };
    copy(out / "composition" / "fig3_or_composed.csv");
    copy(out / "composition" / "fig3_or_direct.csv");
    copy(out / "composition" / "fig3_and_composed.csv");
    copy(out / "composition" / "fig3_and_direct.csv");
    copy(out / "planners" / "table1.csv");
    for (const PlannerTaskResult& tr : rep.planners.tasks)
        copy(out / "planners" / ("fig4_" + tr.task + ".csv"));
    copy(out / "deviation" / "table2.csv");

    write_text_file(out / "report.json", report_to_json(c, rep).dump(2) + "\n");
    write_text_file(out / "summary.md", summary_markdown(c, rep));
    return rep;
}

}  // namespace coplan
