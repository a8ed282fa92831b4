#pragma once

// Options: softmax-optimal policies for conditional-reachability tasks packaged
// with a termination set, plus composition of options by generalized
// conjunction/disjunction (GCD) and exclusion.
//
// A composed option never re-plans. Its policy mixes the operand policies with
// state-dependent selection probabilities computed from cross evaluations
// Q_i(s, o_j) (task i's value of option j's policy), so composition costs a few
// linear solves instead of a fresh value iteration.

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "coplan/decomp.hpp"
#include "coplan/mdp.hpp"
#include "coplan/numeric.hpp"
#include "coplan/solver.hpp"

namespace coplan {

/// Generalized conjunction/disjunction of truth levels:
///   lambda(x | eta, W) = (1/eta) log sum_i W_i exp(eta x_i).
/// eta > 0 leans disjunctive (-> max as eta -> +inf), eta < 0 conjunctive
/// (-> min). Weights default to 1 and are not normalized.
inline double gcd_value(const std::vector<double>& xs, double eta,
                        const std::vector<double>& weights = {}) {
    if (xs.empty()) throw std::invalid_argument("gcd_value: no inputs");
    if (eta == 0.0) throw std::invalid_argument("gcd_value: eta must be nonzero");
    if (!weights.empty() && weights.size() != xs.size())
        throw std::invalid_argument("gcd_value: weight count does not match input count");
    std::vector<double> terms(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) {
        double lw = 0.0;
        if (!weights.empty()) {
            if (weights[i] <= 0.0) throw std::invalid_argument("gcd_value: weights must be positive");
            lw = std::log(weights[i]);
        }
        terms[i] = eta * xs[i] + lw;
    }
    return log_sum_exp(terms) / eta;
}

/// Exclusion value from the disjunctive identity
/// exp(|eta| q1) = exp(|eta| q12) + exp(|eta| Q): solved for Q,
///   Q = (1/|eta|) log(exp(|eta| q1) - exp(|eta| q12)).
/// q1 is the value toward the positive goal, q12 the value toward the
/// positive-and-excluded intersection, both under the same policy (so q1 >=
/// q12 pathwise). Clamped to zero when the exp-space difference falls below
/// 1e-12; small positive differences may legitimately yield negative Q, which
/// is kept so the identity stays invertible.
inline double exclusion_q(double q1, double q12, double eta) {
    double h = std::abs(eta);
    if (h == 0.0) throw std::invalid_argument("exclusion_q: eta must be nonzero");
    double d = q1 - q12;
    if (d <= 0.0) return 0.0;
    // log(e^{h q1} - e^{h q12}) = h q1 + log(1 - e^{-h d})
    double log_diff = h * q1 + std::log1p(-std::exp(-h * d));
    // the exponential difference can land below 1 (or vanish entirely, eps
    // 1e-12); truth values are never negative, so clamp at zero
    return log_diff > 0.0 ? log_diff / h : 0.0;
}

/// An option: a stationary policy with initiation everywhere and a 0/1
/// termination indicator on the task's goal and unsafe states. `value` is the
/// entropy-free expected discounted reward of the stored policy; `soft_value`
/// keeps the regularized fixed point when the option came out of value
/// iteration.
struct OptionPolicy {
    TaskMdp task;
    Policy policy;
    std::vector<double> value;
    std::vector<double> soft_value;
    std::vector<std::vector<double>> q_table;  // action values consistent with `value`
    std::vector<char> beta;
    std::string label;
    int iterations = 0;
    std::vector<std::string> warnings;
};

/// Solve a bound task with softmax value iteration and package the result.
inline OptionPolicy synth_option(TaskMdp t, const SolverParams& p, std::string label) {
    OptionPolicy o;
    o.task = std::move(t);
    SolveResult rs = solve_softmax(o.task, p);
    o.policy = std::move(rs.policy);
    o.soft_value = std::move(rs.value);
    o.iterations = rs.iterations;
    o.value = policy_eval(o.task, o.policy, p);
    o.q_table = action_values(o.task, o.value, p);
    o.beta = o.task.absorbing;
    o.label = std::move(label);
    if (o.task.empty_goal)
        o.warnings.push_back("option '" + o.label + "': goal set is empty, value is zero everywhere");
    return o;
}

inline OptionPolicy make_primitive_option(const Mdp& m, const SymbolSet& goal_syms,
                                          const SymbolSet& unsafe_syms, const SolverParams& p,
                                          std::string label) {
    return synth_option(bind_task(m, goal_syms, unsafe_syms), p, std::move(label));
}

/// Recipe for combining already-synthesized options. eta carries the andness:
/// disjunction requires eta > 0, conjunction eta < 0; exclusion uses |eta|.
/// Weights W_i default to 1 (unnormalized).
struct CompositionSpec {
    enum class Op { Or, And, Minus };
    Op op = Op::Or;
    std::vector<int> operands;      // pool ids; for Minus these are the positive parts
    std::vector<int> neg_operands;  // Minus only: the excluded parts
    double eta = 10.0;
    std::vector<double> weights;
};

/// Compose operand options into a new option over the combined task.
///
/// Or/And: selection probabilities follow
///   pi^o(s)[j] = sum_i W_i exp(eta Q_i(s,o_j)) / sum_k sum_i W_i exp(eta Q_i(s,o_k)),
/// with Q rescaled to [0,1] (divide by alpha) before exponentiation. Minus:
/// each positive part j is scored by its exclusion value Q_x,j(s) and selected
/// with weight W_j exp(|eta| Q_x,j(s)). The composed option executes the
/// mixture pi(a|s) = sum_j pi^o(s)[j] pi_j(a|s), re-selecting every step, and
/// terminates on the combined goal (union for Or, intersection for And,
/// difference for Minus) plus the shared unsafe set.
///
/// selection_out, when given, receives pi^o(s) for every state.
inline OptionPolicy compose(const Mdp& m, const CompositionSpec& spec,
                            const std::vector<OptionPolicy>& pool, const SolverParams& p,
                            Policy* selection_out = nullptr) {
    using Op = CompositionSpec::Op;
    if (spec.operands.empty()) throw std::invalid_argument("compose: no operands");
    if (spec.op == Op::Or && !(spec.eta > 0.0))
        throw std::invalid_argument("compose: disjunction requires eta > 0");
    if (spec.op == Op::And && !(spec.eta < 0.0))
        throw std::invalid_argument("compose: conjunction requires eta < 0");
    if (spec.op == Op::Minus && spec.eta == 0.0)
        throw std::invalid_argument("compose: eta must be nonzero");
    if (spec.op == Op::Minus && spec.neg_operands.empty())
        throw std::invalid_argument("compose: exclusion needs at least one excluded operand");
    if (spec.op != Op::Minus && !spec.neg_operands.empty())
        throw std::invalid_argument("compose: excluded operands only make sense for exclusion");
    if (!spec.weights.empty() && spec.weights.size() != spec.operands.size())
        throw std::invalid_argument("compose: weight count does not match operand count");

    auto at = [&](int id) -> const OptionPolicy& {
        if (id < 0 || id >= (int)pool.size())
            throw std::out_of_range("compose: operand id outside the pool");
        return pool[id];
    };

    const int n = m.num_states, na = m.num_actions;
    const int k = (int)spec.operands.size();

    const auto& unsafe0 = at(spec.operands[0]).task.unsafe;
    for (int id : spec.operands)
        if (at(id).task.unsafe != unsafe0)
            throw std::invalid_argument("compose: operands disagree on the unsafe set");
    for (int id : spec.neg_operands)
        if (at(id).task.unsafe != unsafe0)
            throw std::invalid_argument("compose: operands disagree on the unsafe set");

    // Combined goal from the operand goal sets.
    std::vector<char> pos_goal(n, 0);
    for (int s = 0; s < n; ++s) {
        if (spec.op == Op::Or) {
            for (int id : spec.operands) pos_goal[s] |= at(id).task.goal[s];
        } else {
            pos_goal[s] = 1;
            for (int id : spec.operands) pos_goal[s] &= at(id).task.goal[s];
        }
    }
    std::vector<char> goal = pos_goal;
    std::vector<char> both_goal(n, 0);
    if (spec.op == Op::Minus) {
        for (int s = 0; s < n; ++s) {
            char neg = 0;
            for (int id : spec.neg_operands) neg |= at(id).task.goal[s];
            both_goal[s] = pos_goal[s] & neg;
            goal[s] = pos_goal[s] & !neg;
        }
    }

    std::vector<double> log_w(k, 0.0);
    if (!spec.weights.empty())
        for (int j = 0; j < k; ++j) {
            if (spec.weights[j] <= 0.0) throw std::invalid_argument("compose: weights must be positive");
            log_w[j] = std::log(spec.weights[j]);
        }

    // Per-state selection logits over the operands.
    std::vector<std::vector<double>> logit(n, std::vector<double>(k, 0.0));
    if (spec.op == Op::Minus) {
        TaskMdp pos_task = bind_task_states(m, pos_goal, unsafe0);
        TaskMdp both_task = bind_task_states(m, both_goal, unsafe0);
        double h = std::abs(spec.eta);
        for (int j = 0; j < k; ++j) {
            const Policy& pj = at(spec.operands[j]).policy;
            std::vector<double> q1 = policy_eval(pos_task, pj, p);
            std::vector<double> q12 = policy_eval(both_task, pj, p);
            for (int s = 0; s < n; ++s)
                logit[s][j] = h * exclusion_q(q1[s] / p.alpha, q12[s] / p.alpha, h) + log_w[j];
        }
    } else {
        // Cross table x[i][j](s) = Q_i(s, o_j) / alpha.
        std::vector<std::vector<std::vector<double>>> x(k);
        for (int i = 0; i < k; ++i) {
            x[i].resize(k);
            const TaskMdp& ti = at(spec.operands[i]).task;
            for (int j = 0; j < k; ++j) {
                if (i == j) {
                    x[i][j] = at(spec.operands[i]).value;
                } else {
                    x[i][j] = cross_q(ti, at(spec.operands[j]).policy, p);
                }
                for (double& v : x[i][j]) v /= p.alpha;
            }
        }
        std::vector<double> terms(k);
        for (int s = 0; s < n; ++s)
            for (int j = 0; j < k; ++j) {
                for (int i = 0; i < k; ++i) terms[i] = spec.eta * x[i][j][s] + log_w[i];
                logit[s][j] = log_sum_exp(terms);
            }
    }

    Policy sel(n, std::vector<double>(k, 0.0));
    for (int s = 0; s < n; ++s) {
        double z = log_sum_exp(logit[s]);
        for (int j = 0; j < k; ++j) sel[s][j] = std::exp(logit[s][j] - z);
    }

    OptionPolicy o;
    o.task = bind_task_states(m, goal, unsafe0);
    o.policy.assign(n, std::vector<double>(na, 0.0));
    for (int s = 0; s < n; ++s) {
        if (o.task.absorbing[s]) {
            for (int a = 0; a < na; ++a) o.policy[s][a] = 1.0 / na;
            continue;
        }
        for (int j = 0; j < k; ++j) {
            const Policy& pj = at(spec.operands[j]).policy;
            for (int a = 0; a < na; ++a) o.policy[s][a] += sel[s][j] * pj[s][a];
        }
    }
    o.value = policy_eval(o.task, o.policy, p);
    o.soft_value = o.value;
    o.q_table = action_values(o.task, o.value, p);
    o.beta = o.task.absorbing;

    const char* joiner = spec.op == Op::Or ? " | " : spec.op == Op::And ? " & " : " & ";
    std::string lbl;
    for (int j = 0; j < k; ++j) {
        if (j) lbl += joiner;
        lbl += at(spec.operands[j]).label;
    }
    if (spec.op == Op::Minus) {
        if (k > 1) lbl = "(" + lbl + ")";
        for (size_t j = 0; j < spec.neg_operands.size(); ++j)
            lbl += " \\ " + at(spec.neg_operands[j]).label;
    } else if (k > 1) {
        lbl = "(" + lbl + ")";
    }
    o.label = lbl;

    if (spec.op == Op::And && o.task.empty_goal)
        o.warnings.push_back("conjunction '" + o.label +
                             "': goal intersection is empty, the mixture may alternate forever");
    for (int id : spec.operands)
        for (const auto& w : at(id).warnings) o.warnings.push_back(w);

    if (selection_out) *selection_out = std::move(sel);
    return o;
}

/// Default andness degrees used when realizing a decomposition's inventory.
struct ComposeDefaults {
    double eta_or = 10.0;
    double eta_and = -10.0;
    double eta_minus = 10.0;
};

/// Solved primitives keyed by their (goal, unsafe) symbol sets; tasks sharing
/// primitives reuse the solutions instead of iterating again.
using PrimitiveCache = std::map<std::pair<SymbolSet, SymbolSet>, OptionPolicy>;

/// Synthesize every recipe in order: primitives by value iteration,
/// compositions by GCD over the already-built parts (recipes order parts
/// before the compositions that use them).
inline std::vector<OptionPolicy> realize_recipes(const Mdp& m,
                                                 const std::vector<OptionRecipe>& recipes,
                                                 const SolverParams& p,
                                                 const ComposeDefaults& cd = {},
                                                 PrimitiveCache* cache = nullptr) {
    std::vector<OptionPolicy> pool;
    pool.reserve(recipes.size());
    for (const auto& r : recipes) {
        if (r.comb == OptionRecipe::Comb::Primitive) {
            if (cache) {
                auto it = cache->find({r.goal, r.unsafe});
                if (it == cache->end())
                    it = cache->emplace(std::make_pair(r.goal, r.unsafe),
                                        make_primitive_option(m, r.goal, r.unsafe, p, r.label))
                             .first;
                pool.push_back(it->second);
            } else {
                pool.push_back(make_primitive_option(m, r.goal, r.unsafe, p, r.label));
            }
            continue;
        }
        CompositionSpec spec;
        spec.operands = r.pos_parts;
        spec.neg_operands = r.neg_parts;
        switch (r.comb) {
            case OptionRecipe::Comb::And:
                spec.op = CompositionSpec::Op::And;
                spec.eta = cd.eta_and;
                break;
            case OptionRecipe::Comb::Or:
                spec.op = CompositionSpec::Op::Or;
                spec.eta = cd.eta_or;
                break;
            default:
                spec.op = CompositionSpec::Op::Minus;
                spec.eta = cd.eta_minus;
                break;
        }
        pool.push_back(compose(m, spec, pool, p));
        pool.back().label = r.label;  // keep the decomposition's naming
    }
    return pool;
}

inline std::vector<OptionPolicy> realize_inventory(const Mdp& m, const Decomposition& d,
                                                   const SolverParams& p,
                                                   const ComposeDefaults& cd = {},
                                                   PrimitiveCache* cache = nullptr) {
    return realize_recipes(m, d.inventory, p, cd, cache);
}

}  // namespace coplan
