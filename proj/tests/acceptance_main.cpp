// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Tolerances and time limits are pinned here on purpose.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "coplan/harness.hpp"

using namespace coplan;
namespace fs = std::filesystem;

namespace {

const fs::path kDataDir = COPLAN_DATA_DIR;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SymbolSet syms_with(const Alphabet& ap, std::initializer_list<const char*> any,
                    std::initializer_list<const char*> none = {}) {
    SymbolSet out;
    for (Symbol s = 0; s < ap.num_symbols(); ++s) {
        bool hit = false;
        for (const char* name : any)
            if (s & (1u << ap.index(name))) hit = true;
        for (const char* name : none)
            if (s & (1u << ap.index(name))) hit = false;
        if (hit) out.push_back(s);
    }
    return out;
}

ExperimentConfig bundled_config() {
    ExperimentConfig c;
    c.tasks = default_task_formulas();
    return c;
}

// ---------------------------------------------------------------------------
// 1. DFA acceptance agrees with brute-force word evaluation.

bool criterion_automata(std::string& detail) {
    const std::vector<std::string> formulas = {
        "!c U (a & !c & X(!c U (b & !c)))",           // phi1 restricted to two phases
        "!c U ((a | b) & !c & (!c U (b & !c)))",      // phi2 restricted
        "!c U ((a | b) & !c & (!c U (a & b & !c)))",  // phi3 restricted
        "F a",
        "true",
        "a",
        "!a U b",
        "X a",
        "a U (b U c)",
        "F (a & F (b & F c))",
        "F a & F b",
        "F (a & b) | F c",
        "F (a \\ b)",
        "X X a",
        "F (a & X b)",
        "(a | b) U (a & b)",
    };
    Alphabet ap = Alphabet::parse_list("a,b,c");
    long checked = 0;
    for (const std::string& text : formulas) {
        FormulaSet fset;
        int root = parse_formula(fset, text, ap);
        Dfa d = to_dfa(fset, root, ap);
        std::vector<Symbol> word;
        std::function<bool(int)> walk = [&](int remaining) {
            if (d.accepts(word) != eval_word(fset, root, word)) return false;
            ++checked;
            if (remaining == 0) return true;
            for (Symbol s = 0; s < ap.num_symbols(); ++s) {
                word.push_back(s);
                bool ok = walk(remaining - 1);
                word.pop_back();
                if (!ok) return false;
            }
            return true;
        };
        if (!walk(6)) {
            detail = "formula '" + text + "' disagrees with the word evaluator";
            return false;
        }
    }
    detail = std::to_string(formulas.size()) + " formulas, " + std::to_string(checked) +
             " words of length <= 6, exact agreement";
    return true;
}

// ---------------------------------------------------------------------------
// 2. Sequential three-region task: ranking levels 1/3/1 and exactly the three
//    single-region primitives.

bool criterion_decomposition(std::string& detail) {
    Alphabet ap = Alphabet::parse_list("s1,s2,s3,C");
    FormulaSet fset;
    int root = parse_formula(fset, bundled_config().tasks[0].second, ap);
    Dfa d = to_dfa(fset, root, ap);
    Decomposition dec = decompose(d);

    std::map<int64_t, int> level_sizes;
    int accepting = -1;
    for (int q = 0; q < d.num_states; ++q) {
        if (q == d.sink) continue;
        level_sizes[dec.rank[q]] += 1;
        if (d.accepting[q]) accepting = q;
    }
    if (accepting < 0 || dec.rank[accepting] != 0 || dec.rank[d.initial] != 2 ||
        level_sizes != std::map<int64_t, int>{{0, 1}, {1, 3}, {2, 1}}) {
        detail = "ranking levels are not {accepting}, three middle states, {initial}";
        return false;
    }

    std::vector<std::pair<SymbolSet, SymbolSet>> prims;
    for (const OptionRecipe& r : dec.inventory)
        if (r.comb == OptionRecipe::Comb::Primitive) prims.emplace_back(r.goal, r.unsafe);
    SymbolSet unsafe = syms_with(ap, {"C"});
    std::vector<std::pair<SymbolSet, SymbolSet>> want = {
        {syms_with(ap, {"s1"}, {"C"}), unsafe},
        {syms_with(ap, {"s2"}, {"C"}), unsafe},
        {syms_with(ap, {"s3"}, {"C"}), unsafe},
    };
    std::sort(prims.begin(), prims.end());
    std::sort(want.begin(), want.end());
    if (prims != want) {
        detail = "primitive set is not exactly {reach s1, reach s2, reach s3 avoiding C}";
        return false;
    }
    detail = "levels 1/3/1, primitives = reach s1|s2|s3 avoiding C";
    return true;
}

// ---------------------------------------------------------------------------
// 3. Hardmax value iteration at alpha=1, gamma=1 equals the linear-solve
//    reach probability of its own greedy policy.

bool criterion_reach_oracle(std::string& detail) {
    std::mt19937_64 rng(20260814);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 5, na = 3;
        Mdp m;
        m.num_states = n;
        m.num_actions = na;
        m.label.assign(n, 0);
        m.trans.assign(n, std::vector<SparseRow>(na));
        for (int s = 0; s < n; ++s)
            for (int a = 0; a < na; ++a) {
                double total = 0.0;
                std::vector<double> w(n);
                for (int t = 0; t < n; ++t) {
                    w[t] = -std::log(1.0 - uni(rng));
                    total += w[t];
                }
                for (int t = 0; t < n; ++t) m.trans[s][a].push_back({t, w[t] / total});
            }
        m.validate();
        std::vector<char> goal(n, 0), unsafe(n, 0);
        goal[(int)(uni(rng) * n) % n] = 1;
        if (trial % 2) {
            int u = (int)(uni(rng) * n) % n;
            if (!goal[u]) unsafe[u] = 1;
        }
        TaskMdp task = bind_task_states(m, goal, unsafe);

        SolverParams p;
        p.alpha = 1.0;
        p.gamma = 1.0;
        p.tau = 1.0;
        p.tol = 1e-12;
        p.max_iter = 1000000;
        SolveResult res = solve_hardmax(task, p);

        // linear solve of the greedy policy's absorption-in-goal probability
        std::vector<int> idx(n, -1);
        std::vector<int> live;
        for (int s = 0; s < n; ++s)
            if (!task.absorbing[s]) {
                idx[s] = (int)live.size();
                live.push_back(s);
            }
        std::vector<SparseRow> rows(live.size());
        std::vector<double> b(live.size(), 0.0);
        for (size_t i = 0; i < live.size(); ++i) {
            int s = live[i];
            std::map<int, double> agg;
            for (int a = 0; a < na; ++a) {
                double pa = res.policy[s][a];
                if (pa == 0.0) continue;
                b[i] += pa * task.goal_mass(s, a);
                for (auto [t, pr] : m.trans[s][a])
                    if (idx[t] >= 0) agg[idx[t]] += pa * pr;
            }
            for (auto [j, w] : agg) rows[i].push_back({j, w});
        }
        std::vector<double> x = solve_fixed_point(rows, b);
        for (size_t i = 0; i < live.size(); ++i)
            worst = std::max(worst, std::abs(x[i] - res.value[live[i]]));
    }
    detail = "10 random 5-state MDPs, worst |VI - linear solve| = " + format_double(worst) +
             " (limit 1e-6)";
    return worst < 1e-6;
}

// ---------------------------------------------------------------------------
// 4. Softmax fixed point on the bundled grid's three primitive tasks.

bool criterion_softmax_fixed_point(std::string& detail) {
    GridSpec g = load_grid(kDataDir / "gridworld_6x8.json");
    Mdp m = build_grid(g);
    SolverParams p;
    p.tol = 1e-8;
    p.max_iter = 100000;
    double worst = 0.0;
    for (const char* atom : {"s1", "s2", "s3"}) {
        TaskMdp task =
            bind_task(m, syms_with(m.alphabet, {atom}, {"C"}), syms_with(m.alphabet, {"C"}));
        SolveResult res = solve_softmax(task, p);
        worst = std::max(worst, soft_bellman_residual(task, res.value, p));
    }
    detail = "worst softmax Bellman residual " + format_double(worst) + " (limit 1e-6)";
    return worst < 1e-6;
}

// ---------------------------------------------------------------------------
// 5. Composition quality on the bundled layout.

bool criterion_composition(ExperimentContext& ctx, const fs::path& tmp, std::string& detail) {
    CompositionResult res = run_composition_study(ctx, tmp / "composition");
    const OperatorErrors& o = res.or_errors;
    const OperatorErrors& a = res.and_errors;
    detail = "or e2/einf = " + format_double(o.e2) + "/" + format_double(o.einf) +
             " (limit 0.01), and e2/einf = " + format_double(a.e2) + "/" +
             format_double(a.einf) + " (limit 0.05)";
    return o.e2 <= 1e-2 && o.einf <= 1e-2 && a.e2 <= 5e-2 && a.einf <= 5e-2;
}

// ---------------------------------------------------------------------------
// 6. GCD limits: eta = +-200 reproduces max/min on separated inputs.

bool criterion_gcd_limits(std::string& detail) {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + trial % 4;
        std::vector<double> xs;
        while ((int)xs.size() < n) {
            double x = uni(rng);
            bool fits = true;
            for (double y : xs) fits = fits && std::abs(x - y) >= 0.05;
            if (fits) xs.push_back(x);
        }
        double lo = xs[0], hi = xs[0];
        for (double x : xs) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        worst = std::max(worst, std::abs(gcd_value(xs, 200.0) - hi));
        worst = std::max(worst, std::abs(gcd_value(xs, -200.0) - lo));
    }
    detail = "100 inputs separated >= 0.05, worst |gcd - max/min| = " + format_double(worst) +
             " (limit 1e-6)";
    return worst < 1e-6;
}

// ---------------------------------------------------------------------------
// 7. Macro outcome kernels: undiscounted masses sum to one; discounted masses
//    match Monte-Carlo rollouts.

bool criterion_macro_kernels(ExperimentContext& ctx, std::string& detail) {
    TaskSetup& t = ctx.tasks[0];
    const Mdp& m = ctx.mdp;
    const Dfa& d = t.dfa;

    MacroModel mm1 = build_macro_model(t.pm, t.macros, 1.0);
    double worst_sum = 0.0;
    for (int i = 0; i < t.pm.num_states(); ++i)
        for (int o = 0; o < mm1.num_options; ++o) {
            if (!mm1.admissible[i][o]) continue;
            double sum = 0.0;
            for (auto [j, mass] : mm1.trans[i][o]) sum += mass;
            worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
        }
    if (worst_sum > 1e-9) {
        detail = "undiscounted outcome mass deviates from 1 by " + format_double(worst_sum);
        return false;
    }

    std::vector<std::pair<int, int>> admissible;
    for (int i = 0; i < t.pm.num_states(); ++i)
        for (int o = 0; o < t.mm.num_options; ++o)
            if (t.mm.admissible[i][o]) admissible.emplace_back(i, o);
    std::vector<std::pair<int, int>> picks;
    for (int k = 0; k < 10; ++k) picks.push_back(admissible[k * admissible.size() / 10]);

    std::mt19937_64 rng(ctx.config.seed);
    const int rollouts = 100000;
    const double gamma = ctx.params.gamma;
    for (auto [i, o] : picks) {
        auto [s0, q] = t.pm.states[i];
        const OptionPolicy& opt = t.macros[o];
        std::map<int, double> sum1, sum2;
        for (int r = 0; r < rollouts; ++r) {
            int s = s0;
            double disc = 1.0;
            int outcome = -1;
            for (int step = 0; step < 1000000; ++step) {
                int a = sample_dense(opt.policy[s], rng);
                s = sample_row(m.trans[s][a], rng);
                disc *= gamma;
                int q2 = d.delta[q][m.label[s]];
                if (q2 != q || opt.beta[s]) {
                    outcome = t.pm.state_of(s, q2);
                    break;
                }
            }
            if (outcome < 0) {
                detail = "rollout never terminated";
                return false;
            }
            sum1[outcome] += disc;
            sum2[outcome] += disc * disc;
        }
        std::map<int, double> model;
        for (auto [j, mass] : t.mm.trans[i][o]) model[j] = mass;
        for (auto [j, s1] : sum1)
            if (!model.count(j)) {
                detail = "sampled an outcome the kernel gives zero mass";
                return false;
            }
        for (auto [j, mass] : model) {
            double mean = sum1[j] / rollouts;
            double var = std::max(0.0, sum2[j] / rollouts - mean * mean);
            // The sampled quantity lives in [0,1], so Var <= E[x^2] <= E[x]:
            // `mass` floors the variance estimate, which collapses to zero
            // when a tiny-mass outcome draws no hits at all.
            double se = std::sqrt(std::max(var, mass) / rollouts);
            if (std::abs(mass - mean) > 3.0 * se + 1e-12) {
                detail = "outcome mass " + format_double(mass) + " vs MC " + format_double(mean) +
                         " exceeds 3 SE (" + format_double(se) + ")";
                return false;
            }
        }
    }
    detail = "masses sum to 1 within 1e-9; 10 kernels match " + std::to_string(rollouts) +
             "-rollout MC within 3 SE";
    return true;
}

// ---------------------------------------------------------------------------
// 8. Planner comparison: iteration ordering, reachability dominance, and the
//    option planner's satisfaction within 15% of the optimal planner's.

bool criterion_planners(ExperimentContext& ctx, const fs::path& tmp, std::string& detail) {
    PlannerResult res = run_planner_comparison(ctx, tmp / "planners");
    std::string parts;
    for (const PlannerTaskResult& tr : res.tasks) {
        const PlannerRun& opt = tr.runs[0];
        const PlannerRun& act = tr.runs[1];
        const PlannerRun& optn = tr.runs[2];
        const PlannerRun& mix = tr.runs[3];
        if (!(optn.iterations < mix.iterations && mix.iterations < act.iterations)) {
            detail = tr.task + ": iteration ordering option < mixed < action violated (" +
                     std::to_string(optn.iterations) + "/" + std::to_string(mix.iterations) +
                     "/" + std::to_string(act.iterations) + ")";
            return false;
        }
        for (const PlannerRun& r : tr.runs)
            if (r.p > tr.reach_bound + 1e-9) {
                detail = tr.task + ": " + r.planner + " p " + format_double(r.p) +
                         " exceeds the reachability optimum " + format_double(tr.reach_bound);
                return false;
            }
        if (tr.task == "phi1" && optn.p < 0.85 * opt.p) {
            detail = "phi1: option p " + format_double(optn.p) + " below 85% of optimal p " +
                     format_double(opt.p);
            return false;
        }
        if (!parts.empty()) parts += "; ";
        parts += tr.task + " iters " + std::to_string(optn.iterations) + "<" +
                 std::to_string(mix.iterations) + "<" + std::to_string(act.iterations);
    }
    detail = parts + "; dominance and the phi1 15% bound hold";
    return true;
}

// ---------------------------------------------------------------------------
// 9. Hardmax mixed-planner values dominate hardmax action-planner values.

bool criterion_mixed_dominates(ExperimentContext& ctx, std::string& detail) {
    SolverParams hp = ctx.params;
    hp.tol = 1e-12;
    hp.max_iter = 1000000;
    double worst = 0.0;
    for (TaskSetup& t : ctx.tasks) {
        PlanResult mix = plan(t.pm, t.mm, PlannerKind::Mixed, hp, false);
        PlanResult act = plan(t.pm, t.mm, PlannerKind::Action, hp, false);
        for (int i = 0; i < t.pm.num_states(); ++i)
            worst = std::max(worst, act.value[i] - mix.value[i]);
    }
    detail = "worst action-over-mixed excess " + format_double(worst) + " (limit 1e-9)";
    return worst <= 1e-9;
}

// ---------------------------------------------------------------------------
// 10. Policy deviation table: mixed sits closer to action than option does,
//     and every deviation stays below 0.2.

bool criterion_deviation(ExperimentContext& ctx, const fs::path& tmp, std::string& detail) {
    DeviationResult res = run_policy_deviation(ctx, tmp / "deviation");
    double largest = 0.0;
    for (size_t k = 0; k + 1 < res.rows.size(); k += 2) {
        const DeviationRow& optn = res.rows[k];
        const DeviationRow& mix = res.rows[k + 1];
        if (mix.norminf >= optn.norminf) {
            detail = optn.task + ": mixed inf-norm " + format_double(mix.norminf) +
                     " not below option inf-norm " + format_double(optn.norminf);
            return false;
        }
        largest = std::max({largest, optn.norm2, optn.norminf, mix.norm2, mix.norminf});
    }
    detail = "mixed < option in the inf-norm on all tasks; largest deviation " +
             format_double(largest) + " (limit 0.2)";
    return largest < 0.2;
}

// ---------------------------------------------------------------------------
// 11. Reproduction determinism: two runs, byte-identical report.json.

bool criterion_determinism(const fs::path& tmp, std::string& detail) {
    RunReport r1 = run_all(bundled_config(), tmp / "repro_a", kDataDir);
    RunReport r2 = run_all(bundled_config(), tmp / "repro_b", kDataDir);
    std::string a = slurp(tmp / "repro_a" / "report.json");
    std::string b = slurp(tmp / "repro_b" / "report.json");
    if (a.empty() || a != b) {
        detail = "report.json differs between two identical runs";
        return false;
    }
    if (!r1.pass || !r2.pass) {
        detail = "reproduction gates failed";
        return false;
    }
    detail = "two runs, report.json byte-identical (" + std::to_string(a.size()) + " bytes)";
    return true;
}

}  // namespace

int main() {
    fs::path tmp = fs::temp_directory_path() / "coplan_acceptance";
    std::error_code ec;
    fs::remove_all(tmp, ec);
    fs::create_directories(tmp);

    ExperimentContext ctx;
    prepare_experiment(bundled_config(), ctx, kDataDir);

    struct Entry {
        const char* name;
        double limit;
        std::function<bool(std::string&)> fn;
    };
    const std::vector<Entry> criteria = {
        {"automaton language agreement", 30.0, criterion_automata},
        {"sequential task decomposition", 1.0, criterion_decomposition},
        {"hardmax reach oracle", 5.0, criterion_reach_oracle},
        {"softmax fixed point", 10.0, criterion_softmax_fixed_point},
        {"composition quality", 30.0,
         [&](std::string& d) { return criterion_composition(ctx, tmp, d); }},
        {"gcd max/min limits", 1.0, criterion_gcd_limits},
        {"macro outcome kernels", 60.0,
         [&](std::string& d) { return criterion_macro_kernels(ctx, d); }},
        {"planner comparison", 120.0,
         [&](std::string& d) { return criterion_planners(ctx, tmp, d); }},
        {"hardmax mixed dominance", 30.0,
         [&](std::string& d) { return criterion_mixed_dominates(ctx, d); }},
        {"policy deviation", 60.0,
         [&](std::string& d) { return criterion_deviation(ctx, tmp, d); }},
        {"reproduction determinism", 240.0,
         [&](std::string& d) { return criterion_determinism(tmp, d); }},
    };

    int failures = 0;
    for (size_t k = 0; k < criteria.size(); ++k) {
        std::string detail;
        bool ok = false;
        auto t0 = std::chrono::steady_clock::now();
        try {
            ok = criteria[k].fn(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        bool timely = secs < criteria[k].limit;
        bool pass = ok && timely;
        failures += pass ? 0 : 1;
        std::printf("criterion %02zu %s %-32s [%6.2fs < %3.0fs] %s%s\n", k + 1,
                    pass ? "PASS" : "FAIL", criteria[k].name, secs, criteria[k].limit,
                    detail.c_str(), !timely && ok ? " (over the time limit)" : "");
    }
    std::printf("%s: %d/%zu criteria passed\n", failures ? "FAIL" : "PASS",
                (int)(criteria.size() - failures), criteria.size());
    fs::remove_all(tmp, ec);
    return failures ? 1 : 0;
}
