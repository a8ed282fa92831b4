#pragma once

// Product of a labeled MDP with a task DFA, extended with macro actions.
//
// Micro transitions move the MDP one step and feed the arrival label to the
// automaton. A macro action hands control to an option's policy until the
// automaton moves or the option's termination fires; the semi-MDP model folds
// the per-outcome expected discount into the transition masses (multi-time
// model) and accumulates the product reward along the way. Planners run value
// iteration over micro actions, macro actions, or both; policies are evaluated
// exactly on the flattened chain that expands macro steps into micro steps.

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "coplan/dfa.hpp"
#include "coplan/mdp.hpp"
#include "coplan/numeric.hpp"
#include "coplan/options.hpp"
#include "coplan/solver.hpp"

namespace coplan {

struct ProductModel {
    const Mdp* base = nullptr;
    const Dfa* dfa = nullptr;
    double alpha = 100.0;

    std::vector<std::pair<int, int>> states;  // (s, q), reachable only
    std::map<std::pair<int, int>, int> index;
    int initial = -1;  // (s0, delta(q0, L(s0))): the start cell's label fires immediately
    std::vector<char> absorbing;  // q accepting or q the rejecting sink
    std::vector<char> accepting;
    std::vector<std::vector<SparseRow>> trans;    // [state][action] over product indices
    std::vector<std::vector<double>> reward;      // [state][action] = alpha * P(arrive in F)

    int num_states() const { return (int)states.size(); }
    int num_actions() const { return base->num_actions; }
    int state_of(int s, int q) const {
        auto it = index.find({s, q});
        if (it == index.end()) throw std::out_of_range("product: state (s,q) is not reachable");
        return it->second;
    }
};

inline ProductModel build_product(const Mdp& m, const Dfa& d, double alpha = 100.0) {
    if (d.alphabet.names != m.alphabet.names)
        throw std::invalid_argument("build_product: MDP and DFA use different alphabets");

    ProductModel pm;
    pm.base = &m;
    pm.dfa = &d;
    pm.alpha = alpha;

    auto intern = [&](int s, int q) {
        auto it = pm.index.find({s, q});
        if (it != pm.index.end()) return it->second;
        int id = (int)pm.states.size();
        pm.index.emplace(std::make_pair(s, q), id);
        pm.states.emplace_back(s, q);
        bool acc = d.accepting[q];
        pm.accepting.push_back(acc);
        pm.absorbing.push_back(acc || q == d.sink);
        return id;
    };

    pm.initial = intern(m.initial, d.delta[d.initial][m.label[m.initial]]);
    for (int i = 0; i < (int)pm.states.size(); ++i) {  // grows during the scan
        pm.trans.emplace_back(m.num_actions);
        pm.reward.emplace_back(m.num_actions, 0.0);
        if (pm.absorbing[i]) continue;
        auto [s, q] = pm.states[i];
        for (int a = 0; a < m.num_actions; ++a) {
            std::map<int, double> row;
            double hit = 0.0;
            for (auto [t, pr] : m.trans[s][a]) {
                int q2 = d.delta[q][m.label[t]];
                if (d.accepting[q2]) hit += pr;
                row[intern(t, q2)] += pr;
            }
            pm.reward[i][a] = alpha * hit;
            for (auto [j, pr] : row) pm.trans[i][a].emplace_back(j, pr);
        }
    }
    return pm;
}

/// Semi-MDP model of every (product state, option) pair: discounted outcome
/// masses over product states and the expected discounted product reward
/// accumulated while the option runs. An option is admissible where its
/// termination has not already fired (zero-duration macros are dropped).
struct MacroModel {
    int num_options = 0;
    std::vector<std::vector<char>> admissible;  // [product state][option]
    std::vector<std::vector<SparseRow>> trans;  // [product state][option]
    std::vector<std::vector<double>> reward;
};

inline MacroModel build_macro_model(const ProductModel& pm,
                                    const std::vector<OptionPolicy>& options, double gamma) {
    const Mdp& m = *pm.base;
    const Dfa& d = *pm.dfa;
    const int n = pm.num_states(), no = (int)options.size();
    for (const auto& o : options)
        if (o.task.base != pm.base)
            throw std::invalid_argument("build_macro_model: option bound to a different MDP");

    MacroModel mm;
    mm.num_options = no;
    mm.admissible.assign(n, std::vector<char>(no, 0));
    mm.trans.assign(n, std::vector<SparseRow>(no));
    mm.reward.assign(n, std::vector<double>(no, 0.0));

    // group reachable non-absorbing product states by automaton state
    std::map<int, std::vector<int>> by_q;
    for (int i = 0; i < n; ++i)
        if (!pm.absorbing[i]) by_q[pm.states[i].second].push_back(i);

    for (auto& [q, members] : by_q) {
        for (int oid = 0; oid < no; ++oid) {
            const OptionPolicy& opt = options[oid];

            // continuation states: the automaton would stay put and the
            // option keeps running
            std::vector<int> cont;            // MDP state ids
            std::vector<int> slot(m.num_states, -1);
            for (int i : members) {
                int s = pm.states[i].first;
                if (d.delta[q][m.label[s]] == q && !opt.beta[s]) {
                    slot[s] = (int)cont.size();
                    cont.push_back(s);
                }
            }

            // expected one-step behavior of the option's policy from s
            auto step = [&](int s) {
                std::map<int, double> mass;
                double rew = 0.0;
                int i = pm.state_of(s, q);
                for (int a = 0; a < m.num_actions; ++a) {
                    double w = opt.policy[s][a];
                    if (w == 0.0) continue;
                    rew += w * pm.reward[i][a];
                    for (auto [t, pr] : m.trans[s][a]) mass[t] += w * pr;
                }
                return std::make_pair(mass, rew);
            };

            const int k = (int)cont.size();
            std::vector<std::map<int, double>> cont_mass(k);
            std::vector<double> cont_rew(k);
            for (int c = 0; c < k; ++c) std::tie(cont_mass[c], cont_rew[c]) = step(cont[c]);

            // Assumption check: every continuation state must be able to
            // leave the continuation set under the option's own support
            {
                std::vector<char> can_exit(k, 0);
                std::vector<int> stack;
                for (int c = 0; c < k; ++c)
                    for (auto [t, pr] : cont_mass[c])
                        if (slot[t] < 0) {
                            can_exit[c] = 1;
                            stack.push_back(c);
                            break;
                        }
                std::vector<std::vector<int>> rev(k);
                for (int c = 0; c < k; ++c)
                    for (auto [t, pr] : cont_mass[c])
                        if (slot[t] >= 0 && slot[t] != c) rev[slot[t]].push_back(c);
                while (!stack.empty()) {
                    int c = stack.back();
                    stack.pop_back();
                    for (int b : rev[c])
                        if (!can_exit[b]) {
                            can_exit[b] = 1;
                            stack.push_back(b);
                        }
                }
                for (int c = 0; c < k; ++c)
                    if (!can_exit[c])
                        throw std::runtime_error(
                            "build_macro_model: option '" + opt.label + "' at automaton state " +
                            std::to_string(q) + " never terminates from MDP state " +
                            std::to_string(cont[c]) + " (recurrent continuation class)");
            }

            // absorb the continuation chain: X = (I - gamma P_cc)^{-1} applied
            // to the per-outcome one-step masses and to the running reward
            std::vector<double> rsol;                    // accumulated reward per slot
            std::vector<std::map<int, double>> xsol(k);  // outcome masses per slot
            if (k > 0) {
                DenseLU lu = [&] {
                    std::vector<double> a(k * k, 0.0);
                    for (int c = 0; c < k; ++c) {
                        a[c * k + c] = 1.0;
                        for (auto [t, pr] : cont_mass[c])
                            if (slot[t] >= 0) a[c * k + slot[t]] -= gamma * pr;
                    }
                    return DenseLU(std::move(a), k);
                }();
                rsol = lu.solve(cont_rew);
                // one linear solve per outcome MDP state
                std::map<int, std::vector<double>> outcome_b;
                for (int c = 0; c < k; ++c)
                    for (auto [t, pr] : cont_mass[c])
                        if (slot[t] < 0) {
                            auto& col = outcome_b[t];
                            if (col.empty()) col.assign(k, 0.0);
                            col[c] += gamma * pr;
                        }
                for (auto& [t, b] : outcome_b) {
                    std::vector<double> x = lu.solve(b);
                    for (int c = 0; c < k; ++c)
                        if (x[c] != 0.0) xsol[c][t] = x[c];
                }
            }

            for (int i : members) {
                int s = pm.states[i].first;
                if (opt.beta[s]) continue;  // zero duration, not admissible
                mm.admissible[i][oid] = 1;

                auto [mass, rew] = slot[s] >= 0 ? std::make_pair(cont_mass[slot[s]], cont_rew[slot[s]])
                                                : step(s);
                double total_rew = rew;
                std::map<int, double> outcome;  // product index -> discounted mass
                for (auto [t, pr] : mass) {
                    if (slot[t] >= 0) {
                        total_rew += gamma * pr * rsol[slot[t]];
                        for (auto& [w, x] : xsol[slot[t]])
                            outcome[pm.state_of(w, d.delta[q][m.label[w]])] += gamma * pr * x;
                    } else {
                        outcome[pm.state_of(t, d.delta[q][m.label[t]])] += gamma * pr;
                    }
                }
                mm.reward[i][oid] = total_rew;
                for (auto [j, pr] : outcome) mm.trans[i][oid].emplace_back(j, pr);
            }
        }
    }
    return mm;
}

enum class PlannerKind { Optimal, Action, Option, Mixed };

inline const char* planner_name(PlannerKind k) {
    switch (k) {
        case PlannerKind::Optimal: return "optimal";
        case PlannerKind::Action: return "action";
        case PlannerKind::Option: return "option";
        default: return "mixed";
    }
}

/// Product-level plan. Policy rows hold micro actions first, then macro slots
/// (num_actions + num_options wide); inadmissible slots carry probability 0.
struct PlanResult {
    std::vector<double> value;
    Policy policy;
    int iterations = 0;
    double residual = 0.0;
    std::vector<std::pair<double, double>> trace;  // (V(initial), residual) per sweep
    bool softmax = true;
};

/// Value iteration over the planner's action set. The kind picks the slots
/// (optimal/action: micro, option: macro, mixed: both); softmax_backup picks
/// the backup operator. Absorbing product states stay pinned at zero.
inline PlanResult plan(const ProductModel& pm, const MacroModel& mm, PlannerKind kind,
                       const SolverParams& p, bool softmax_backup) {
    const int n = pm.num_states(), na = pm.num_actions(), no = mm.num_options;
    const bool use_micro = kind != PlannerKind::Option;
    const bool use_macro = kind == PlannerKind::Option || kind == PlannerKind::Mixed;
    const bool softmax = softmax_backup;
    if (use_macro && no == 0)
        throw std::invalid_argument("plan: macro planner requested but the macro model is empty");

    PlanResult out;
    out.softmax = softmax;
    out.value.assign(n, 0.0);
    std::vector<double> next(n, 0.0);
    std::vector<double> qbuf;
    std::vector<int> slots;

    auto state_slots = [&](int i, std::vector<int>& into) {
        into.clear();
        if (use_micro)
            for (int a = 0; a < na; ++a) into.push_back(a);
        if (use_macro)
            for (int o = 0; o < no; ++o)
                if (mm.admissible[i][o]) into.push_back(na + o);
    };
    auto slot_q = [&](int i, int slot, const std::vector<double>& v) {
        if (slot < na) {
            double q = pm.reward[i][slot];
            for (auto [j, pr] : pm.trans[i][slot]) q += p.gamma * pr * v[j];
            return q;
        }
        int o = slot - na;
        double q = mm.reward[i][o];
        for (auto [j, pr] : mm.trans[i][o]) q += pr * v[j];  // masses already discounted
        return q;
    };

    int it = 0;
    double res = 0.0;
    for (it = 1; it <= p.max_iter; ++it) {
        res = 0.0;
        for (int i = 0; i < n; ++i) {
            if (pm.absorbing[i]) continue;
            state_slots(i, slots);
            double v;
            if (slots.empty()) {
                v = 0.0;
            } else if (softmax) {
                qbuf.clear();
                for (int sl : slots) qbuf.push_back(slot_q(i, sl, out.value) / p.tau);
                v = p.tau * log_sum_exp(qbuf);
            } else {
                v = -kInf;
                for (int sl : slots) v = std::max(v, slot_q(i, sl, out.value));
            }
            next[i] = v;
            res = std::max(res, std::abs(v - out.value[i]));
        }
        std::swap(out.value, next);
        out.trace.emplace_back(out.value[pm.initial], res);
        if (res < p.tol) break;
    }
    out.iterations = std::min(it, p.max_iter);
    out.residual = res;
    if (res >= p.tol)
        throw std::runtime_error("plan: no convergence within max_iter (residual " +
                                 std::to_string(res) + ")");

    out.policy.assign(n, std::vector<double>(na + no, 0.0));
    for (int i = 0; i < n; ++i) {
        state_slots(i, slots);
        if (pm.absorbing[i] || slots.empty()) {
            // never acted upon; keep a well-defined row for the flattened chain
            for (int a = 0; a < na; ++a) out.policy[i][a] = 1.0 / na;
            continue;
        }
        if (softmax) {
            qbuf.clear();
            for (int sl : slots) qbuf.push_back(slot_q(i, sl, out.value) / p.tau);
            double z = log_sum_exp(qbuf);
            for (size_t c = 0; c < slots.size(); ++c)
                out.policy[i][slots[c]] = std::exp(qbuf[c] - z);
            double sum = 0.0;
            for (double w : out.policy[i]) sum += w;
            for (double& w : out.policy[i]) w /= sum;
        } else {
            int best = slots[0];
            double bq = slot_q(i, best, out.value);
            for (int sl : slots) {
                double q = slot_q(i, sl, out.value);
                if (q > bq + 1e-12) {
                    bq = q;
                    best = sl;
                }
            }
            out.policy[i][best] = 1.0;
        }
    }
    return out;
}

/// Default operator per planner: the optimal planner is greedy, the rest
/// smooth their backups.
inline PlanResult plan(const ProductModel& pm, const MacroModel& mm, PlannerKind kind,
                       const SolverParams& p) {
    return plan(pm, mm, kind, p, kind != PlannerKind::Optimal);
}

/// Flattened execution chain of a product-level policy: macro selections hand
/// control to the option's micro policy until the automaton moves or the
/// option terminates. Extended states are the product states (a fresh
/// selection happens there) followed by (product state, running option) pairs.
struct FlatChain {
    int fresh = 0;
    std::vector<std::pair<int, int>> running;  // (product state, option)
    std::map<std::pair<int, int>, int> running_index;
    std::vector<SparseRow> rows;        // discounted one-step masses; empty at terminals
    std::vector<double> rewards;        // expected product reward of the step
    std::vector<char> terminal_accept;  // terminal and accepting
    std::vector<char> terminal;
};

inline FlatChain build_flat_chain(const ProductModel& pm, const MacroModel& mm,
                                  const std::vector<OptionPolicy>& options, const Policy& policy,
                                  double gamma) {
    const Mdp& m = *pm.base;
    const Dfa& d = *pm.dfa;
    const int n = pm.num_states(), na = pm.num_actions(), no = mm.num_options;
    if ((int)policy.size() != n || (n > 0 && (int)policy[0].size() != na + no))
        throw std::invalid_argument("build_flat_chain: policy shape does not match the product");

    FlatChain fc;
    fc.fresh = n;
    for (int i = 0; i < n; ++i)
        for (int o = 0; o < no; ++o)
            if (mm.admissible[i][o]) {
                fc.running_index[{i, o}] = n + (int)fc.running.size();
                fc.running.emplace_back(i, o);
            }
    const int total = n + (int)fc.running.size();
    fc.rows.resize(total);
    fc.rewards.assign(total, 0.0);
    fc.terminal.assign(total, 0);
    fc.terminal_accept.assign(total, 0);

    for (int i = 0; i < n; ++i) {
        if (pm.absorbing[i]) {
            fc.terminal[i] = 1;
            fc.terminal_accept[i] = pm.accepting[i];
            continue;
        }
        std::map<int, double> row;
        for (int a = 0; a < na; ++a) {
            double w = policy[i][a];
            if (w == 0.0) continue;
            fc.rewards[i] += w * pm.reward[i][a];
            for (auto [j, pr] : pm.trans[i][a]) row[j] += gamma * w * pr;
        }
        for (int o = 0; o < no; ++o) {
            double w = policy[i][na + o];
            if (w == 0.0) continue;
            if (!mm.admissible[i][o])
                throw std::invalid_argument("build_flat_chain: policy uses an inadmissible macro");
            row[fc.running_index.at({i, o})] += w;  // instantaneous hand-off
        }
        for (auto [j, w] : row) fc.rows[i].emplace_back(j, w);
    }

    for (size_t r = 0; r < fc.running.size(); ++r) {
        auto [i, o] = fc.running[r];
        auto [s, q] = pm.states[i];
        const OptionPolicy& opt = options[o];
        std::map<int, double> row;
        for (int a = 0; a < na; ++a) {
            double w = opt.policy[s][a];
            if (w == 0.0) continue;
            fc.rewards[n + r] += w * pm.reward[i][a];
            for (auto [t, pr] : m.trans[s][a]) {
                int q2 = d.delta[q][m.label[t]];
                int j = pm.state_of(t, q2);
                if (q2 != q || opt.beta[t]) row[j] += gamma * w * pr;  // interrupted: fresh
                else row[fc.running_index.at({j, o})] += gamma * w * pr;
            }
        }
        for (auto [j, w] : row) fc.rows[n + r].emplace_back(j, w);
    }
    return fc;
}

/// Entropy-free expected discounted product reward of a plan's policy, per
/// product state, with macro steps expanded through the option policies.
inline std::vector<double> flat_value(const ProductModel& pm, const MacroModel& mm,
                                      const std::vector<OptionPolicy>& options,
                                      const Policy& policy, const SolverParams& p) {
    FlatChain fc = build_flat_chain(pm, mm, options, policy, p.gamma);
    const int total = (int)fc.rows.size();
    std::vector<int> slot(total, -1);
    std::vector<int> live;
    for (int x = 0; x < total; ++x)
        if (!fc.terminal[x]) {
            slot[x] = (int)live.size();
            live.push_back(x);
        }
    std::vector<SparseRow> rows(live.size());
    std::vector<double> b(live.size());
    for (size_t c = 0; c < live.size(); ++c) {
        b[c] = fc.rewards[live[c]];
        for (auto [j, w] : fc.rows[live[c]])
            if (slot[j] >= 0) rows[c].emplace_back(slot[j], w);
    }
    std::vector<double> x = solve_fixed_point(rows, b);
    std::vector<double> v(pm.num_states(), 0.0);
    for (size_t c = 0; c < live.size(); ++c)
        if (live[c] < fc.fresh) v[live[c]] = x[c];
    return v;
}

/// Probability of ever entering an accepting product state under the policy
/// (undiscounted linear solve on the flattened chain). Restricted to extended
/// states that can reach acceptance through the policy's support.
inline std::vector<double> flat_reach(const ProductModel& pm, const MacroModel& mm,
                                      const std::vector<OptionPolicy>& options,
                                      const Policy& policy) {
    FlatChain fc = build_flat_chain(pm, mm, options, policy, 1.0);
    const int total = (int)fc.rows.size();

    std::vector<std::vector<int>> rev(total);
    for (int x = 0; x < total; ++x)
        for (auto [j, w] : fc.rows[x]) rev[j].push_back(x);
    std::vector<char> can(total, 0);
    std::vector<int> stack;
    for (int x = 0; x < total; ++x)
        if (fc.terminal_accept[x]) {
            can[x] = 1;
            stack.push_back(x);
        }
    while (!stack.empty()) {
        int x = stack.back();
        stack.pop_back();
        for (int y : rev[x])
            if (!can[y] && !fc.terminal[y]) {
                can[y] = 1;
                stack.push_back(y);
            }
    }

    std::vector<int> slot(total, -1);
    std::vector<int> live;
    for (int x = 0; x < total; ++x)
        if (can[x] && !fc.terminal[x]) {
            slot[x] = (int)live.size();
            live.push_back(x);
        }
    std::vector<SparseRow> rows(live.size());
    std::vector<double> b(live.size(), 0.0);
    for (size_t c = 0; c < live.size(); ++c)
        for (auto [j, w] : fc.rows[live[c]]) {
            if (fc.terminal_accept[j]) b[c] += w;
            else if (slot[j] >= 0) rows[c].emplace_back(slot[j], w);
        }
    std::vector<double> x = solve_fixed_point(rows, b);
    std::vector<double> out(pm.num_states(), 0.0);
    for (int i = 0; i < pm.num_states(); ++i)
        if (fc.terminal_accept[i]) out[i] = 1.0;
    for (size_t c = 0; c < live.size(); ++c)
        if (live[c] < fc.fresh) out[live[c]] = x[c];
    return out;
}

inline double satisfaction_probability(const ProductModel& pm, const MacroModel& mm,
                                       const std::vector<OptionPolicy>& options,
                                       const Policy& policy) {
    return flat_reach(pm, mm, options, policy)[pm.initial];
}

}  // namespace coplan
