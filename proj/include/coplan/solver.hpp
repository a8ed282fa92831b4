#pragma once

// Value iteration for bound tasks, entropy-regularized (softmax) or hard.
// Absorbing states are pinned at value zero: the one-step reward already pays
// alpha on arrival at a goal, so nothing accrues afterwards. Policy
// evaluation and absorption probabilities are exact linear solves.

#include <cmath>
#include <utility>
#include <vector>

#include "coplan/mdp.hpp"
#include "coplan/numeric.hpp"

namespace coplan {

struct SolverParams {
    double gamma = 0.9;
    double tau = 1.0;     // entropy temperature
    double alpha = 100.0; // goal-entry reward scale
    double tol = 1e-3;    // sup-norm residual target
    int max_iter = 10000;
};

using Policy = std::vector<std::vector<double>>;

struct SolveResult {
    std::vector<double> value;
    Policy policy;
    int iterations = 0;
    double residual = 0.0;
    std::vector<std::pair<double, double>> trace;  // (initial-state value, residual) per sweep
};

/// Jacobi sweeps of the (soft) Bellman operator until the sup-norm residual
/// drops below tol. The returned policy is greedy (one-hot, lowest action id
/// on ties) or the Boltzmann distribution exp((Q - V)/tau).
inline SolveResult solve_task(const TaskMdp& t, const SolverParams& p, bool softmax) {
    const Mdp& m = *t.base;
    const int n = m.num_states, na = m.num_actions;

    std::vector<std::vector<double>> rew(n);
    for (int s = 0; s < n; ++s) {
        if (t.absorbing[s]) continue;
        rew[s].resize(na);
        for (int a = 0; a < na; ++a) rew[s][a] = p.alpha * t.goal_mass(s, a);
    }

    SolveResult out;
    std::vector<double> v(n, 0.0), nv(n, 0.0), q(na);
    auto backup = [&](int s, const std::vector<double>& from) {
        for (int a = 0; a < na; ++a) {
            double acc = rew[s][a];
            for (auto [u, pr] : m.trans[s][a]) acc += p.gamma * pr * from[u];
            q[a] = acc;
        }
    };

    for (int it = 1; it <= p.max_iter; ++it) {
        double res = 0.0;
        for (int s = 0; s < n; ++s) {
            if (t.absorbing[s]) continue;
            backup(s, v);
            double vs;
            if (softmax) {
                std::vector<double> scaled(na);
                for (int a = 0; a < na; ++a) scaled[a] = q[a] / p.tau;
                vs = p.tau * log_sum_exp(scaled);
            } else {
                vs = q[0];
                for (int a = 1; a < na; ++a)
                    if (q[a] > vs) vs = q[a];
            }
            nv[s] = vs;
            double d = std::abs(nv[s] - v[s]);
            if (d > res) res = d;
        }
        std::swap(v, nv);
        out.iterations = it;
        out.residual = res;
        out.trace.emplace_back(v[m.initial], res);
        if (res < p.tol) break;
    }

    out.policy.assign(n, std::vector<double>(na, 1.0 / na));
    for (int s = 0; s < n; ++s) {
        if (t.absorbing[s]) continue;
        backup(s, v);
        auto& row = out.policy[s];
        if (softmax) {
            std::vector<double> scaled(na);
            for (int a = 0; a < na; ++a) scaled[a] = q[a] / p.tau;
            double lse = log_sum_exp(scaled);
            double norm = 0.0;
            for (int a = 0; a < na; ++a) norm += row[a] = std::exp(scaled[a] - lse);
            for (int a = 0; a < na; ++a) row[a] /= norm;
        } else {
            int best = 0;
            for (int a = 1; a < na; ++a)
                if (q[a] > q[best]) best = a;
            row.assign(na, 0.0);
            row[best] = 1.0;
        }
    }
    out.value = std::move(v);
    return out;
}

inline SolveResult solve_softmax(const TaskMdp& t, const SolverParams& p) {
    return solve_task(t, p, true);
}

inline SolveResult solve_hardmax(const TaskMdp& t, const SolverParams& p) {
    return solve_task(t, p, false);
}

/// Exact value of a fixed policy on a task: V = r_pi + gamma P_pi V on
/// non-absorbing states, zero elsewhere. Entropy-free, so this is also the
/// cross evaluation Q_i(s, o_j) of option j's policy under task i's reward.
inline std::vector<double> policy_eval(const TaskMdp& t, const Policy& pi,
                                       const SolverParams& p) {
    const Mdp& m = *t.base;
    const int n = m.num_states, na = m.num_actions;
    std::vector<int> slot(n, -1);
    std::vector<int> states;
    for (int s = 0; s < n; ++s)
        if (!t.absorbing[s]) {
            slot[s] = (int)states.size();
            states.push_back(s);
        }
    const int k = (int)states.size();
    std::vector<SparseRow> rows(k);
    std::vector<double> b(k, 0.0);
    for (int i = 0; i < k; ++i) {
        int s = states[i];
        std::map<int, double> mass;
        for (int a = 0; a < na; ++a) {
            double w = pi[s][a];
            if (w == 0.0) continue;
            b[i] += w * p.alpha * t.goal_mass(s, a);
            for (auto [u, pr] : m.trans[s][a])
                if (slot[u] >= 0) mass[slot[u]] += w * pr * p.gamma;
        }
        for (auto [j, w] : mass) rows[i].emplace_back(j, w);
    }
    std::vector<double> x = solve_fixed_point(rows, b);
    std::vector<double> v(n, 0.0);
    for (int i = 0; i < k; ++i) v[states[i]] = x[i];
    return v;
}

/// Probability of absorption at a goal state (rather than an unsafe state or
/// never) under a fixed policy. Restricted to states that can reach a goal
/// through the policy's support; elsewhere the probability is zero.
inline std::vector<double> reach_probability(const TaskMdp& t, const Policy& pi) {
    const Mdp& m = *t.base;
    const int n = m.num_states, na = m.num_actions;

    std::vector<std::vector<int>> rev(n);
    for (int s = 0; s < n; ++s) {
        if (t.absorbing[s]) continue;
        for (int a = 0; a < na; ++a) {
            if (pi[s][a] == 0.0) continue;
            for (auto [u, pr] : m.trans[s][a])
                if (pr > 0.0) rev[u].push_back(s);
        }
    }
    std::vector<char> can(n, 0);
    std::vector<int> frontier;
    for (int s = 0; s < n; ++s)
        if (t.goal[s]) { can[s] = 1; frontier.push_back(s); }
    for (size_t head = 0; head < frontier.size(); ++head)
        for (int s : rev[frontier[head]])
            if (!can[s]) { can[s] = 1; frontier.push_back(s); }

    std::vector<int> slot(n, -1), states;
    for (int s = 0; s < n; ++s)
        if (can[s] && !t.absorbing[s]) {
            slot[s] = (int)states.size();
            states.push_back(s);
        }
    const int k = (int)states.size();
    std::vector<SparseRow> rows(k);
    std::vector<double> b(k, 0.0);
    for (int i = 0; i < k; ++i) {
        int s = states[i];
        std::map<int, double> mass;
        for (int a = 0; a < na; ++a) {
            double w = pi[s][a];
            if (w == 0.0) continue;
            for (auto [u, pr] : m.trans[s][a]) {
                if (t.goal[u]) b[i] += w * pr;
                else if (slot[u] >= 0) mass[slot[u]] += w * pr;
            }
        }
        for (auto [j, w] : mass) rows[i].emplace_back(j, w);
    }
    std::vector<double> x = solve_fixed_point(rows, b);
    std::vector<double> out(n, 0.0);
    for (int s = 0; s < n; ++s)
        if (t.goal[s]) out[s] = 1.0;
    for (int i = 0; i < k; ++i) out[states[i]] = x[i];
    return out;
}

/// Cross evaluation Q_i(s, o_j): the value of option j's policy measured
/// against task i's reward. Same linear solve as policy_eval, named for the
/// role it plays in composition.
inline std::vector<double> cross_q(const TaskMdp& task_i, const Policy& pi_j,
                                   const SolverParams& p) {
    return policy_eval(task_i, pi_j, p);
}

/// Action values of a fixed-policy value function: q(s,a) = r(s,a) +
/// gamma E[v(s')], zero rows at absorbing states.
inline std::vector<std::vector<double>> action_values(const TaskMdp& t,
                                                      const std::vector<double>& v,
                                                      const SolverParams& p) {
    const Mdp& m = *t.base;
    std::vector<std::vector<double>> q(m.num_states, std::vector<double>(m.num_actions, 0.0));
    for (int s = 0; s < m.num_states; ++s) {
        if (t.absorbing[s]) continue;
        for (int a = 0; a < m.num_actions; ++a) {
            double acc = p.alpha * t.goal_mass(s, a);
            for (auto [u, pr] : m.trans[s][a]) acc += p.gamma * pr * v[u];
            q[s][a] = acc;
        }
    }
    return q;
}

/// Max-norm residual of the softmax Bellman identity V = tau LSE(Q/tau);
/// independent check of a converged soft value function.
inline double soft_bellman_residual(const TaskMdp& t, const std::vector<double>& v,
                                    const SolverParams& p) {
    const Mdp& m = *t.base;
    double worst = 0.0;
    std::vector<double> scaled(m.num_actions);
    for (int s = 0; s < m.num_states; ++s) {
        if (t.absorbing[s]) continue;
        for (int a = 0; a < m.num_actions; ++a) {
            double q = p.alpha * t.goal_mass(s, a);
            for (auto [u, pr] : m.trans[s][a]) q += p.gamma * pr * v[u];
            scaled[a] = q / p.tau;
        }
        worst = std::max(worst, std::abs(p.tau * log_sum_exp(scaled) - v[s]));
    }
    return worst;
}

/// Max-norm Bellman residual of a value function under a fixed policy;
/// independent check used by the tests.
inline double bellman_residual(const TaskMdp& t, const Policy& pi,
                               const std::vector<double>& v, const SolverParams& p) {
    const Mdp& m = *t.base;
    double worst = 0.0;
    for (int s = 0; s < m.num_states; ++s) {
        if (t.absorbing[s]) continue;
        double acc = 0.0;
        for (int a = 0; a < m.num_actions; ++a) {
            double w = pi[s][a];
            if (w == 0.0) continue;
            double q = p.alpha * t.goal_mass(s, a);
            for (auto [u, pr] : m.trans[s][a]) q += p.gamma * pr * v[u];
            acc += w * q;
        }
        worst = std::max(worst, std::abs(acc - v[s]));
    }
    return worst;
}

}  // namespace coplan
