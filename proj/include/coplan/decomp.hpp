#pragma once

// Task decomposition of a progression automaton. Every non-accepting state
// induces a conditional-reachability task (progressing symbols under the
// state's unsafe symbols), and every lateral edge bundle induces one more.
// Symbol-set goals are pruned to atom expressions so that each task is either
// a primitive (single atom) or a conjunction/disjunction/exclusion over
// primitives, which is what the policy composition layer consumes. Bundles
// with no such expression fall back to a union of product terms, each term an
// inventory entry of its own.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "coplan/dfa.hpp"

namespace coplan {

constexpr int64_t kRankInf = std::numeric_limits<int64_t>::max();

/// Distance to acceptance for every state; the rejecting sink gets kRankInf.
inline std::vector<int64_t> dfa_ranks(const Dfa& d) {
    std::vector<int64_t> rank(d.num_states, -1);
    std::vector<std::vector<int>> rev(d.num_states);
    for (int q = 0; q < d.num_states; ++q)
        for (Symbol s = 0; s < d.num_symbols; ++s) rev[d.delta[q][s]].push_back(q);
    std::vector<int> frontier;
    for (int q = 0; q < d.num_states; ++q)
        if (d.accepting[q]) { rank[q] = 0; frontier.push_back(q); }
    for (size_t head = 0; head < frontier.size(); ++head) {
        int q = frontier[head];
        for (int p : rev[q])
            if (rank[p] < 0) { rank[p] = rank[q] + 1; frontier.push_back(p); }
    }
    if (d.sink >= 0) rank[d.sink] = kRankInf;
    for (int q = 0; q < d.num_states; ++q)
        if (rank[q] < 0) throw std::logic_error("dfa_ranks: state cannot reach acceptance");
    return rank;
}

enum class EdgeClass { Progressing, Neutral, Lateral, Unsafe };

/// A symbol progresses when it strictly lowers the rank (by construction the
/// drop is exactly one), strands when it hits the sink, and moves laterally
/// when it lands on a different state without lowering the rank.
inline EdgeClass classify_edge(const Dfa& d, const std::vector<int64_t>& rank, int q,
                               Symbol sym) {
    int t = d.delta[q][sym];
    if (t == d.sink) return EdgeClass::Unsafe;
    if (t == q) return EdgeClass::Neutral;
    if (rank[t] < rank[q]) return EdgeClass::Progressing;
    return EdgeClass::Lateral;
}

struct GoalExpr {
    enum class Kind { None, Atom, And, Or, Minus };
    Kind kind = Kind::None;
    std::vector<int> pos;  // atom indices
    std::vector<int> neg;  // Minus only

    std::string to_string(const Alphabet& ap) const {
        auto join = [&](const std::vector<int>& xs, const char* sep) {
            std::string out;
            for (size_t i = 0; i < xs.size(); ++i) {
                if (i) out += sep;
                out += ap.names[xs[i]];
            }
            return out;
        };
        switch (kind) {
            case Kind::None: return "none";
            case Kind::Atom: return ap.names[pos[0]];
            case Kind::And: return pos.empty() ? "true" : join(pos, " & ");
            case Kind::Or: return join(pos, " | ");
            case Kind::Minus: {
                std::string l = join(pos, " & "), r = join(neg, " | ");
                if (pos.size() > 1) l = "(" + l + ")";
                if (neg.size() > 1) r = "(" + r + ")";
                return l + " \\ " + r;
            }
        }
        return "?";
    }
};

/// Finds an atom expression whose denotation, minus the unsafe symbols,
/// equals the goal set exactly. Tries a conjunction (single atoms included),
/// then a disjunction, then a conjunction excluding a disjunction; Kind::None
/// signals that no such expression exists.
inline GoalExpr synthesize_goal_expr(const SymbolSet& goal, const SymbolSet& unsafe,
                                     const Alphabet& ap) {
    if (goal.empty()) throw std::invalid_argument("synthesize_goal_expr: empty goal");
    const uint32_t m = ap.num_symbols();
    std::vector<char> in_goal(m, 0), in_unsafe(m, 0);
    for (Symbol s : goal) in_goal[s] = 1;
    for (Symbol s : unsafe) in_unsafe[s] = 1;

    auto matches = [&](auto&& member) {
        for (Symbol s = 0; s < m; ++s)
            if ((member(s) && !in_unsafe[s]) != (bool)in_goal[s]) return false;
        return true;
    };
    auto to_atoms = [&](uint32_t mask) {
        std::vector<int> xs;
        for (int a = 0; a < ap.size(); ++a)
            if ((mask >> a) & 1u) xs.push_back(a);
        return xs;
    };

    // conjunction: the atoms common to every goal symbol, then greedily shrunk
    uint32_t all = m - 1;
    uint32_t conj = all;
    for (Symbol s : goal) conj &= s;
    auto conj_member = [&](uint32_t p) {
        return [&, p](Symbol s) { return (s & p) == p; };
    };
    if (matches(conj_member(conj))) {
        for (int a = 0; a < ap.size(); ++a) {
            uint32_t probe = conj & ~(1u << a);
            if (probe != conj && matches(conj_member(probe))) conj = probe;
        }
        GoalExpr e;
        e.pos = to_atoms(conj);
        e.kind = e.pos.size() == 1 ? GoalExpr::Kind::Atom : GoalExpr::Kind::And;
        return e;
    }

    // disjunction: every atom whose safe denotation stays inside the goal
    uint32_t disj = 0;
    for (int a = 0; a < ap.size(); ++a) {
        bool safe = true;
        for (Symbol s = 0; s < m && safe; ++s)
            if (((s >> a) & 1u) && !in_unsafe[s] && !in_goal[s]) safe = false;
        if (safe) disj |= 1u << a;
    }
    auto disj_member = [&](uint32_t p) {
        return [&, p](Symbol s) { return (s & p) != 0; };
    };
    if (disj && matches(disj_member(disj))) {
        for (int a = 0; a < ap.size(); ++a) {
            uint32_t probe = disj & ~(1u << a);
            if (probe != disj && probe && matches(disj_member(probe))) disj = probe;
        }
        GoalExpr e;
        e.pos = to_atoms(disj);
        e.kind = e.pos.size() == 1 ? GoalExpr::Kind::Atom : GoalExpr::Kind::Or;
        return e;
    }

    // conjunction minus disjunction: require every goal symbol to avoid the
    // excluded atoms entirely
    uint32_t neg = all;
    for (Symbol s : goal) neg &= ~s;
    auto minus_member = [&](uint32_t p, uint32_t nm) {
        return [&, p, nm](Symbol s) { return (s & p) == p && (s & nm) == 0; };
    };
    uint32_t pc = all;
    for (Symbol s : goal) pc &= s;
    if (neg && matches(minus_member(pc, neg))) {
        for (int a = 0; a < ap.size(); ++a) {
            uint32_t probe = neg & ~(1u << a);
            if (probe != neg && probe && matches(minus_member(pc, probe))) neg = probe;
        }
        for (int a = 0; a < ap.size(); ++a) {
            uint32_t probe = pc & ~(1u << a);
            if (probe != pc && matches(minus_member(probe, neg))) pc = probe;
        }
        GoalExpr e;
        e.kind = GoalExpr::Kind::Minus;
        e.pos = to_atoms(pc);
        e.neg = to_atoms(neg);
        return e;
    }
    return GoalExpr{};
}

/// Product-term cover of a goal set: Quine-McCluskey primes with the unsafe
/// symbols as don't-cares, then essential-first greedy selection. Each term
/// comes back as an Atom/And/Minus expression; the union of their denotations,
/// restricted to the safe symbols, equals the goal exactly.
inline std::vector<GoalExpr> cover_goal(const SymbolSet& goal, const SymbolSet& unsafe,
                                        const Alphabet& ap) {
    if (goal.empty()) throw std::invalid_argument("cover_goal: empty goal");
    const uint32_t m = ap.num_symbols();
    std::vector<char> on(m, 0), dc(m, 0);
    for (Symbol s : goal) on[s] = 1;
    for (Symbol s : unsafe) dc[s] = 1;

    // merge pass: an implicant is (value, care); two merge when they share the
    // care mask and differ in exactly one cared bit
    using Imp = std::pair<uint32_t, uint32_t>;
    std::set<Imp> level, primes;
    for (Symbol s = 0; s < m; ++s)
        if (on[s] || dc[s]) level.insert({s, m - 1});
    while (!level.empty()) {
        std::set<Imp> next;
        std::map<Imp, bool> merged;
        for (const Imp& e : level) merged[e] = false;
        for (auto it = level.begin(); it != level.end(); ++it)
            for (auto jt = std::next(it); jt != level.end(); ++jt) {
                if (it->second != jt->second) continue;
                uint32_t diff = it->first ^ jt->first;
                if (std::popcount(diff) != 1) continue;
                next.insert({it->first & ~diff, it->second & ~diff});
                merged[*it] = merged[*jt] = true;
            }
        for (const auto& [e, was] : merged)
            if (!was) primes.insert(e);
        level = std::move(next);
    }

    // keep primes that reach the goal at all, with their goal coverage
    std::vector<std::pair<Imp, std::vector<Symbol>>> cand;
    for (const Imp& pr : primes) {
        std::vector<Symbol> cov;
        for (Symbol s : goal)
            if ((s & pr.second) == pr.first) cov.push_back(s);
        if (!cov.empty()) cand.push_back({pr, std::move(cov)});
    }

    std::vector<char> covered(m, 0);
    std::vector<Imp> chosen;
    auto take = [&](size_t i) {
        chosen.push_back(cand[i].first);
        for (Symbol s : cand[i].second) covered[s] = 1;
    };
    // essential primes: a goal symbol only one candidate reaches
    for (Symbol s : goal) {
        size_t hit = cand.size(), hits = 0;
        for (size_t i = 0; i < cand.size() && hits < 2; ++i)
            for (Symbol c : cand[i].second)
                if (c == s) { hit = i; ++hits; break; }
        if (hits == 1 && !covered[s]) take(hit);
    }
    for (;;) {
        size_t best = cand.size(), best_gain = 0;
        for (size_t i = 0; i < cand.size(); ++i) {
            size_t gain = 0;
            for (Symbol s : cand[i].second) gain += !covered[s];
            if (gain > best_gain) { best = i; best_gain = gain; }
        }
        if (best == cand.size()) break;
        take(best);
    }
    for (Symbol s : goal)
        if (!covered[s]) throw std::logic_error("cover_goal: uncovered goal symbol");

    std::sort(chosen.begin(), chosen.end());
    std::vector<GoalExpr> out;
    for (const Imp& pr : chosen) {
        GoalExpr e;
        for (int a = 0; a < ap.size(); ++a) {
            if (!((pr.second >> a) & 1u)) continue;
            ((pr.first >> a) & 1u ? e.pos : e.neg).push_back(a);
        }
        if (e.neg.empty())
            e.kind = e.pos.size() == 1 ? GoalExpr::Kind::Atom : GoalExpr::Kind::And;
        else
            e.kind = GoalExpr::Kind::Minus;
        out.push_back(std::move(e));
    }
    return out;
}

/// One entry of the option inventory: a conditional-reachability task plus
/// the recipe for realizing its policy (directly for primitives, by value
/// composition over primitive parts otherwise).
struct OptionRecipe {
    enum class Comb { Primitive, And, Or, Minus };
    Comb comb = Comb::Primitive;
    GoalExpr expr;
    SymbolSet goal;      // task goal symbols (already excludes unsafe)
    SymbolSet unsafe;
    SymbolSet goal_pos;  // Minus: goal of the positive conjunction alone
    SymbolSet goal_both; // Minus: positive conjunction restricted to excluded atoms
    std::vector<int> pos_parts;  // primitive inventory indices
    std::vector<int> neg_parts;
    std::string label;
};

struct Decomposition {
    Dfa dfa;
    std::vector<int64_t> rank;
    std::vector<SymbolSet> goal_at;    // progressing symbols per state
    std::vector<SymbolSet> unsafe_at;  // stranding symbols per state
    std::vector<std::vector<int>> options_at;  // inventory indices per state
    std::vector<OptionRecipe> inventory;
    std::vector<std::string> warnings;

    int num_primitives() const {
        int n = 0;
        for (const auto& r : inventory) n += r.comb == OptionRecipe::Comb::Primitive;
        return n;
    }
};

/// Full pipeline: ranks, per-state symbol sets, expression synthesis, and a
/// deduplicated option inventory. Bundles that no single atom expression
/// matches become unions over a product-term cover.
inline Decomposition decompose(const Dfa& d) {
    Decomposition out;
    out.dfa = d;
    out.rank = dfa_ranks(d);
    const Alphabet& ap = d.alphabet;
    const uint32_t m = d.num_symbols;
    out.goal_at.resize(d.num_states);
    out.unsafe_at.resize(d.num_states);
    out.options_at.resize(d.num_states);

    std::map<std::pair<int, SymbolSet>, int> prim_index;
    std::map<std::tuple<int, std::vector<int>, std::vector<int>>, int> comb_index;

    auto atom_goal = [&](int atom, const SymbolSet& unsafe) {
        std::vector<char> bad(m, 0);
        for (Symbol s : unsafe) bad[s] = 1;
        SymbolSet g;
        for (Symbol s = 0; s < m; ++s)
            if (!bad[s] && (atom < 0 || ((s >> atom) & 1u))) g.push_back(s);
        return g;
    };

    auto add_primitive = [&](int atom, const SymbolSet& unsafe) {
        auto key = std::make_pair(atom, unsafe);
        auto it = prim_index.find(key);
        if (it != prim_index.end()) return it->second;
        OptionRecipe r;
        r.comb = OptionRecipe::Comb::Primitive;
        r.expr.kind = atom < 0 ? GoalExpr::Kind::And : GoalExpr::Kind::Atom;
        if (atom >= 0) r.expr.pos = {atom};
        r.unsafe = unsafe;
        r.goal = atom_goal(atom, unsafe);
        r.label = r.expr.to_string(ap);
        int idx = (int)out.inventory.size();
        out.inventory.push_back(std::move(r));
        prim_index.emplace(key, idx);
        return idx;
    };

    auto expr_goal = [&](const GoalExpr& e, const SymbolSet& unsafe) {
        std::vector<char> bad(m, 0);
        for (Symbol s : unsafe) bad[s] = 1;
        auto member = [&](Symbol s) {
            switch (e.kind) {
                case GoalExpr::Kind::Atom: return ((s >> e.pos[0]) & 1u) != 0u;
                case GoalExpr::Kind::And: {
                    for (int a : e.pos)
                        if (!((s >> a) & 1u)) return false;
                    return true;
                }
                case GoalExpr::Kind::Or: {
                    for (int a : e.pos)
                        if ((s >> a) & 1u) return true;
                    return false;
                }
                case GoalExpr::Kind::Minus: {
                    for (int a : e.pos)
                        if (!((s >> a) & 1u)) return false;
                    for (int a : e.neg)
                        if ((s >> a) & 1u) return false;
                    return true;
                }
                default: return false;
            }
        };
        SymbolSet g;
        for (Symbol s = 0; s < m; ++s)
            if (!bad[s] && member(s)) g.push_back(s);
        return g;
    };

    // realizes an expression as an inventory index, registering primitives
    // for its atoms and one composition entry when it is not a lone atom
    auto realize = [&](const GoalExpr& e, const SymbolSet& unsafe) -> int {
        if (e.kind == GoalExpr::Kind::Atom) return add_primitive(e.pos[0], unsafe);
        if (e.kind == GoalExpr::Kind::And && e.pos.empty())
            return add_primitive(-1, unsafe);
        std::vector<int> parts;
        for (int a : e.pos) parts.push_back(add_primitive(a, unsafe));
        if (parts.empty()) parts.push_back(add_primitive(-1, unsafe));
        std::vector<int> neg_parts;
        if (e.kind == GoalExpr::Kind::Minus)
            for (int a : e.neg) neg_parts.push_back(add_primitive(a, unsafe));
        int comb = e.kind == GoalExpr::Kind::And ? 0 : e.kind == GoalExpr::Kind::Or ? 1 : 2;
        auto key = std::make_tuple(comb, parts, e.neg);
        auto it = comb_index.find(key);
        if (it != comb_index.end()) return it->second;
        OptionRecipe r;
        r.comb = e.kind == GoalExpr::Kind::And   ? OptionRecipe::Comb::And
                 : e.kind == GoalExpr::Kind::Or ? OptionRecipe::Comb::Or
                                                : OptionRecipe::Comb::Minus;
        r.expr = e;
        r.unsafe = unsafe;
        r.goal = expr_goal(e, unsafe);
        r.pos_parts = parts;
        r.neg_parts = neg_parts;
        if (e.kind == GoalExpr::Kind::Minus) {
            GoalExpr pos_only;
            pos_only.kind = e.pos.size() == 1 ? GoalExpr::Kind::Atom : GoalExpr::Kind::And;
            pos_only.pos = e.pos;
            r.goal_pos = expr_goal(pos_only, unsafe);
            // positive conjunction that also touches an excluded atom
            SymbolSet both;
            std::vector<char> in_diff(m, 0);
            for (Symbol s : r.goal) in_diff[s] = 1;
            for (Symbol s : r.goal_pos)
                if (!in_diff[s]) both.push_back(s);
            r.goal_both = both;
        }
        r.label = e.to_string(ap);
        int idx = (int)out.inventory.size();
        out.inventory.push_back(std::move(r));
        comb_index.emplace(key, idx);
        return idx;
    };

    // realizes a symbol bundle: directly when one atom expression matches it,
    // otherwise as a union over a product-term cover
    auto realize_bundle = [&](const SymbolSet& syms, const SymbolSet& unsafe) -> int {
        GoalExpr e = synthesize_goal_expr(syms, unsafe, ap);
        if (e.kind != GoalExpr::Kind::None) return realize(e, unsafe);
        std::vector<int> parts;
        for (const GoalExpr& term : cover_goal(syms, unsafe, ap))
            parts.push_back(realize(term, unsafe));
        if (parts.size() == 1) return parts[0];
        auto key = std::make_tuple(1, parts, std::vector<int>{});
        auto it = comb_index.find(key);
        if (it != comb_index.end()) return it->second;
        OptionRecipe r;
        r.comb = OptionRecipe::Comb::Or;
        r.unsafe = unsafe;
        r.goal = syms;
        r.pos_parts = parts;
        for (size_t i = 0; i < parts.size(); ++i) {
            const OptionRecipe& part = out.inventory[parts[i]];
            if (i) r.label += " | ";
            r.label += part.comb == OptionRecipe::Comb::Primitive ? part.label
                                                                  : "(" + part.label + ")";
        }
        int idx = (int)out.inventory.size();
        out.inventory.push_back(std::move(r));
        comb_index.emplace(key, idx);
        return idx;
    };

    for (int q = 0; q < d.num_states; ++q) {
        if (q == d.sink || d.accepting[q]) continue;
        SymbolSet goal, unsafe;
        std::map<int, SymbolSet> lateral;
        for (Symbol s = 0; s < m; ++s) {
            switch (classify_edge(d, out.rank, q, s)) {
                case EdgeClass::Progressing: goal.push_back(s); break;
                case EdgeClass::Unsafe: unsafe.push_back(s); break;
                case EdgeClass::Lateral: lateral[d.delta[q][s]].push_back(s); break;
                case EdgeClass::Neutral: break;
            }
        }
        out.goal_at[q] = goal;
        out.unsafe_at[q] = unsafe;
        if (goal.empty())
            throw std::runtime_error("decompose: state " + std::to_string(q) +
                                     " has no progressing symbol");

        out.options_at[q].push_back(realize_bundle(goal, unsafe));
        for (const auto& [dest, syms] : lateral)
            out.options_at[q].push_back(realize_bundle(syms, unsafe));
    }
    return out;
}

}  // namespace coplan
