#pragma once

// Labeled MDP core: sparse transition model, the slippery gridworld builder,
// and conditional-reachability task binding (goal and unsafe symbol sets over
// total label assignments, both made absorbing).

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "coplan/formula.hpp"
#include "coplan/numeric.hpp"

namespace coplan {

struct Mdp {
    int num_states = 0;
    int num_actions = 0;
    int initial = 0;
    std::vector<std::vector<SparseRow>> trans;  // [state][action] -> (next, prob)
    std::vector<Symbol> label;                  // total assignment per state
    Alphabet alphabet;

    const SparseRow& row(int s, int a) const { return trans[s][a]; }

    void validate() const {
        if ((int)trans.size() != num_states || (int)label.size() != num_states)
            throw std::invalid_argument("mdp: table sizes disagree with num_states");
        for (int s = 0; s < num_states; ++s) {
            if ((int)trans[s].size() != num_actions)
                throw std::invalid_argument("mdp: missing action rows");
            for (int a = 0; a < num_actions; ++a) {
                double sum = 0;
                for (auto [t, p] : trans[s][a]) {
                    if (t < 0 || t >= num_states)
                        throw std::invalid_argument("mdp: transition target out of range");
                    if (p < 0)
                        throw std::invalid_argument("mdp: negative probability");
                    sum += p;
                }
                if (std::abs(sum - 1.0) > 1e-9)
                    throw std::invalid_argument("mdp: row for state " + std::to_string(s) +
                                                " action " + std::to_string(a) +
                                                " sums to " + std::to_string(sum));
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Slippery gridworld. Cell (x, y) has index y*width + x. An action puts mass
// `slip` on the intended direction and (1-slip)/4 on each of: the other three
// directions and staying put; any mass aimed off the grid stays put instead.

struct GridSpec {
    int width = 0, height = 0;
    double slip = 0.7;
    int init_x = 0, init_y = 0;
    std::map<int, std::vector<std::pair<int, int>>> regions;  // key -> cells, atom "s<key>"
    std::vector<std::pair<int, int>> obstacles;               // atom "C"
};

enum GridAction { Up = 0, Down = 1, Left = 2, Right = 3 };

inline Mdp build_grid(const GridSpec& g) {
    if (g.width <= 0 || g.height <= 0)
        throw std::invalid_argument("grid: non-positive dimensions");
    if (g.slip < 0 || g.slip > 1)
        throw std::invalid_argument("grid: slip outside [0,1]");

    Mdp m;
    m.num_states = g.width * g.height;
    m.num_actions = 4;
    for (const auto& [key, cells] : g.regions)
        m.alphabet.names.push_back("s" + std::to_string(key));
    m.alphabet.names.push_back("C");
    const int c_bit = m.alphabet.size() - 1;

    auto cell_index = [&](int x, int y, const char* what) {
        if (x < 0 || x >= g.width || y < 0 || y >= g.height)
            throw std::invalid_argument(std::string("grid: ") + what + " cell (" +
                                        std::to_string(x) + "," + std::to_string(y) +
                                        ") outside the grid");
        return y * g.width + x;
    };

    m.label.assign(m.num_states, 0);
    int bit = 0;
    for (const auto& [key, cells] : g.regions) {
        for (auto [x, y] : cells) m.label[cell_index(x, y, "region")] |= 1u << bit;
        ++bit;
    }
    for (auto [x, y] : g.obstacles) m.label[cell_index(x, y, "obstacle")] |= 1u << c_bit;
    m.initial = cell_index(g.init_x, g.init_y, "initial");

    const int dx[4] = {0, 0, -1, 1};
    const int dy[4] = {-1, 1, 0, 0};
    const double side = (1.0 - g.slip) / 4.0;
    m.trans.assign(m.num_states, std::vector<SparseRow>(4));
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x) {
            int s = y * g.width + x;
            for (int a = 0; a < 4; ++a) {
                std::map<int, double> mass;
                auto deposit = [&](int tx, int ty, double p) {
                    bool inside = tx >= 0 && tx < g.width && ty >= 0 && ty < g.height;
                    mass[inside ? ty * g.width + tx : s] += p;
                };
                deposit(x + dx[a], y + dy[a], g.slip);
                for (int d = 0; d < 4; ++d)
                    if (d != a) deposit(x + dx[d], y + dy[d], side);
                mass[s] += side;  // the stay-put slot
                SparseRow& row = m.trans[s][a];
                for (auto [t, p] : mass) row.emplace_back(t, p);
            }
        }
    m.validate();
    return m;
}

// ---------------------------------------------------------------------------
// Task binding. A task is (goal symbols, unsafe symbols); states whose label
// falls in either set become absorbing. Unsafe wins on overlap. Binding does
// not rewrite the transition table; solvers pin absorbing states at value 0
// and pay the goal-entry reward on arrival.

struct TaskMdp {
    const Mdp* base = nullptr;
    std::vector<char> goal, unsafe, absorbing;
    bool empty_goal = false;

    int num_states() const { return base->num_states; }
    int num_actions() const { return base->num_actions; }

    /// Probability of landing on a goal state in one step; the solver's
    /// one-step reward is alpha times this.
    double goal_mass(int s, int a) const {
        double sum = 0;
        for (auto [t, p] : base->trans[s][a])
            if (goal[t]) sum += p;
        return sum;
    }
};

/// Bind from explicit per-state membership masks. Unsafe wins on overlap.
inline TaskMdp bind_task_states(const Mdp& m, const std::vector<char>& goal_states,
                                const std::vector<char>& unsafe_states) {
    if ((int)goal_states.size() != m.num_states || (int)unsafe_states.size() != m.num_states)
        throw std::invalid_argument("bind_task_states: mask size does not match the state count");
    TaskMdp t;
    t.base = &m;
    t.goal.assign(m.num_states, 0);
    t.unsafe.assign(m.num_states, 0);
    t.absorbing.assign(m.num_states, 0);
    bool any_goal = false;
    for (int s = 0; s < m.num_states; ++s) {
        if (unsafe_states[s]) t.unsafe[s] = 1;
        else if (goal_states[s]) t.goal[s] = 1, any_goal = true;
        t.absorbing[s] = t.goal[s] || t.unsafe[s];
    }
    t.empty_goal = !any_goal;
    return t;
}

inline TaskMdp bind_task(const Mdp& m, const SymbolSet& goal_syms,
                         const SymbolSet& unsafe_syms) {
    std::vector<char> in_goal(m.alphabet.num_symbols(), 0), in_unsafe(m.alphabet.num_symbols(), 0);
    for (Symbol s : goal_syms) {
        if (s >= m.alphabet.num_symbols())
            throw std::invalid_argument("bind_task: goal symbol outside the alphabet");
        in_goal[s] = 1;
    }
    for (Symbol s : unsafe_syms) {
        if (s >= m.alphabet.num_symbols())
            throw std::invalid_argument("bind_task: unsafe symbol outside the alphabet");
        in_unsafe[s] = 1;
    }
    std::vector<char> gs(m.num_states, 0), us(m.num_states, 0);
    for (int s = 0; s < m.num_states; ++s) {
        gs[s] = in_goal[m.label[s]];
        us[s] = in_unsafe[m.label[s]];
    }
    return bind_task_states(m, gs, us);
}

}  // namespace coplan
