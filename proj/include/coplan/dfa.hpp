#pragma once

// Deterministic finite automaton over total label assignments, built by
// formula progression. States are residual formulas; the construction merges
// every state that cannot reach acceptance into a single rejecting sink.

#include <deque>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "coplan/formula.hpp"

namespace coplan {

struct Dfa {
    int num_states = 0;
    int initial = 0;
    int sink = -1;  // rejecting trap, -1 if the language never strands
    uint32_t num_symbols = 0;
    std::vector<std::vector<int>> delta;   // [state][symbol]
    std::vector<char> accepting;
    std::vector<int> state_formula;        // residual formula id per state
    Alphabet alphabet;

    int step(int q, Symbol sym) const { return delta[q][sym]; }

    bool accepts(const std::vector<Symbol>& word) const {
        int q = initial;
        for (Symbol s : word) q = delta[q][s];
        return accepting[q];
    }
};

/// Progression automaton for formula `root`. States are interned residuals,
/// explored breadth-first so numbering is reproducible; acceptance is
/// empty-word satisfaction of the residual.
inline Dfa to_dfa(FormulaSet& fs, int root, const Alphabet& ap, int max_states = 100000) {
    Dfa d;
    d.alphabet = ap;
    d.num_symbols = ap.num_symbols();

    std::map<int, int> index;  // formula id -> state
    std::vector<int> formulas;
    std::deque<int> queue;
    auto get = [&](int f) {
        auto it = index.find(f);
        if (it != index.end()) return it->second;
        int q = (int)formulas.size();
        if (q >= max_states)
            throw std::runtime_error("to_dfa: state budget exceeded (" +
                                     std::to_string(max_states) + ")");
        index.emplace(f, q);
        formulas.push_back(f);
        queue.push_back(f);
        return q;
    };

    int start = fs.normalize(root);
    get(start);
    std::vector<std::vector<int>> delta;
    while (!queue.empty()) {
        int f = queue.front();
        queue.pop_front();
        std::vector<int> row(d.num_symbols);
        for (Symbol s = 0; s < d.num_symbols; ++s) row[s] = get(fs.progress(f, s));
        delta.push_back(std::move(row));
    }

    const int n = (int)formulas.size();
    // co-accessibility: backward reachability from accepting states
    std::vector<char> acc(n), coacc(n, 0);
    for (int q = 0; q < n; ++q) acc[q] = fs.empty_sat(formulas[q]);
    std::vector<std::vector<int>> rev(n);
    for (int q = 0; q < n; ++q)
        for (Symbol s = 0; s < d.num_symbols; ++s) rev[delta[q][s]].push_back(q);
    std::deque<int> bfs;
    for (int q = 0; q < n; ++q)
        if (acc[q]) { coacc[q] = 1; bfs.push_back(q); }
    while (!bfs.empty()) {
        int q = bfs.front();
        bfs.pop_front();
        for (int p : rev[q])
            if (!coacc[p]) { coacc[p] = 1; bfs.push_back(p); }
    }
    if (!coacc[0])
        throw std::runtime_error("to_dfa: formula is unsatisfiable");

    // renumber co-accessible states in BFS discovery order, then the sink
    std::vector<int> remap(n, -1);
    int next = 0;
    bool has_sink = false;
    for (int q = 0; q < n; ++q) {
        if (coacc[q]) remap[q] = next++;
        else has_sink = true;
    }
    d.num_states = next + (has_sink ? 1 : 0);
    d.sink = has_sink ? next : -1;
    d.initial = remap[0];
    d.delta.assign(d.num_states, std::vector<int>(d.num_symbols, d.sink));
    d.accepting.assign(d.num_states, 0);
    d.state_formula.assign(d.num_states, fs.false_id());
    for (int q = 0; q < n; ++q) {
        if (!coacc[q]) continue;
        d.accepting[remap[q]] = acc[q];
        d.state_formula[remap[q]] = formulas[q];
        for (Symbol s = 0; s < d.num_symbols; ++s) {
            int t = delta[q][s];
            d.delta[remap[q]][s] = coacc[t] ? remap[t] : d.sink;
        }
    }
    if (has_sink)
        for (Symbol s = 0; s < d.num_symbols; ++s) d.delta[d.sink][s] = d.sink;
    return d;
}

}  // namespace coplan
