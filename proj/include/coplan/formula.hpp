#pragma once

// Syntactically co-safe LTL over finite words. Formulas are interned in a
// FormulaSet arena; And/Or construction canonicalizes (flatten, sort, boolean
// absorption, until-subsumption) so that progression produces a small set of
// distinct residuals. Negation exists only on atoms.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace coplan {

using Symbol = uint32_t;  // bit i set <=> atom i holds
using SymbolSet = std::vector<Symbol>;  // sorted, unique

struct Alphabet {
    std::vector<std::string> names;

    int size() const { return (int)names.size(); }
    uint32_t num_symbols() const { return 1u << names.size(); }

    int index(const std::string& s) const {
        for (int i = 0; i < (int)names.size(); ++i)
            if (names[i] == s) return i;
        return -1;
    }

    bool has(Symbol sym, int atom) const { return (sym >> atom) & 1u; }

    std::string symbol_to_string(Symbol sym) const {
        std::string out = "{";
        bool first = true;
        for (int i = 0; i < size(); ++i)
            if (has(sym, i)) {
                if (!first) out += ",";
                out += names[i];
                first = false;
            }
        return out + "}";
    }

    /// Parses a comma-separated atom list such as "a,b,c".
    static Alphabet parse_list(const std::string& csv) {
        Alphabet ap;
        std::string cur;
        auto flush = [&] {
            if (cur.empty()) return;
            if (ap.index(cur) >= 0) throw std::invalid_argument("duplicate atom: " + cur);
            ap.names.push_back(cur);
            cur.clear();
        };
        for (char c : csv) {
            if (c == ',') flush();
            else if (!std::isspace((unsigned char)c)) cur += c;
        }
        flush();
        if (ap.names.empty()) throw std::invalid_argument("empty alphabet");
        if (ap.size() > 20) throw std::invalid_argument("alphabet too large (max 20 atoms)");
        return ap;
    }
};

enum class FKind : uint8_t { True, False, Atom, NegAtom, And, Or, Next, Until };

struct FormulaNode {
    FKind kind;
    int atom = -1;       // Atom / NegAtom
    int lhs = -1;        // And/Or/Until left, Next child
    int rhs = -1;        // And/Or/Until right
    bool empty_sat = false;  // satisfied by the empty word
};

struct ParseError : std::runtime_error {
    size_t pos;
    ParseError(const std::string& msg, size_t p)
        : std::runtime_error(msg + " (at position " + std::to_string(p) + ")"), pos(p) {}
};

class FormulaSet {
public:
    FormulaSet() {
        true_ = intern({FKind::True, -1, -1, -1, true});
        false_ = intern({FKind::False, -1, -1, -1, false});
    }

    int true_id() const { return true_; }
    int false_id() const { return false_; }
    const FormulaNode& node(int id) const { return nodes_[id]; }
    FKind kind(int id) const { return nodes_[id].kind; }
    bool empty_sat(int id) const { return nodes_[id].empty_sat; }

    int atom(int ap) { return intern({FKind::Atom, ap, -1, -1, false}); }
    int neg_atom(int ap) { return intern({FKind::NegAtom, ap, -1, -1, false}); }
    int f_next(int f) { return intern({FKind::Next, -1, f, -1, false}); }

    // Note: l U true is NOT collapsed to true; the empty word satisfies true
    // but no until, and acceptance of a residual is exactly empty_sat.
    int f_until(int l, int r) {
        if (r == false_) return false_;
        return intern({FKind::Until, -1, l, r, false});
    }

    int f_eventually(int f) { return f_until(true_, f); }

    int f_and(int a, int b) { return build(FKind::And, {a, b}); }
    int f_or(int a, int b) { return build(FKind::Or, {a, b}); }

    /// Negation is only defined on atoms and on and/or combinations of atoms
    /// (needed by the exclusion sugar); anything temporal is rejected.
    int f_not(int f) {
        const FormulaNode& n = nodes_[f];
        switch (n.kind) {
            case FKind::Atom: return neg_atom(n.atom);
            case FKind::NegAtom: return atom(n.atom);
            case FKind::Or: return f_and(f_not(n.lhs), f_not(n.rhs));
            case FKind::And: return f_or(f_not(n.lhs), f_not(n.rhs));
            default:
                throw std::invalid_argument("negation applied to a non-atom");
        }
    }

    bool is_atom_disjunction(int f) const {
        const FormulaNode& n = nodes_[f];
        if (n.kind == FKind::Atom) return true;
        if (n.kind == FKind::Or)
            return is_atom_disjunction(n.lhs) && is_atom_disjunction(n.rhs);
        return false;
    }

    /// Residual after consuming one symbol.
    int progress(int f, Symbol sym) {
        const FormulaNode n = nodes_[f];
        switch (n.kind) {
            case FKind::True: return true_;
            case FKind::False: return false_;
            case FKind::Atom: return ((sym >> n.atom) & 1u) ? true_ : false_;
            case FKind::NegAtom: return ((sym >> n.atom) & 1u) ? false_ : true_;
            case FKind::And: return f_and(progress(n.lhs, sym), progress(n.rhs, sym));
            case FKind::Or: return f_or(progress(n.lhs, sym), progress(n.rhs, sym));
            case FKind::Next: return n.lhs;
            case FKind::Until:
                return f_or(progress(n.rhs, sym), f_and(progress(n.lhs, sym), f));
        }
        throw std::logic_error("progress: bad node");
    }

    /// Structural rebuild; a no-op for formulas built through this arena.
    int normalize(int f) {
        const FormulaNode& n = nodes_[f];
        switch (n.kind) {
            case FKind::True: case FKind::False: return f;
            case FKind::Atom: return atom(n.atom);
            case FKind::NegAtom: return neg_atom(n.atom);
            case FKind::And: return f_and(normalize(n.lhs), normalize(n.rhs));
            case FKind::Or: return f_or(normalize(n.lhs), normalize(n.rhs));
            case FKind::Next: return f_next(normalize(n.lhs));
            case FKind::Until: return f_until(normalize(n.lhs), normalize(n.rhs));
        }
        throw std::logic_error("normalize: bad node");
    }

    std::string to_string(int f, const Alphabet& ap) const {
        const FormulaNode& n = nodes_[f];
        switch (n.kind) {
            case FKind::True: return "true";
            case FKind::False: return "false";
            case FKind::Atom: return ap.names[n.atom];
            case FKind::NegAtom: return "!" + ap.names[n.atom];
            case FKind::And:
                return "(" + to_string(n.lhs, ap) + " & " + to_string(n.rhs, ap) + ")";
            case FKind::Or:
                return "(" + to_string(n.lhs, ap) + " | " + to_string(n.rhs, ap) + ")";
            case FKind::Next: return "X " + to_string(n.lhs, ap);
            case FKind::Until:
                return "(" + to_string(n.lhs, ap) + " U " + to_string(n.rhs, ap) + ")";
        }
        return "?";
    }

private:
    int intern(FormulaNode n) {
        auto key = std::make_tuple(n.kind, n.atom, n.lhs, n.rhs);
        auto it = table_.find(key);
        if (it != table_.end()) return it->second;
        if (n.kind == FKind::And) n.empty_sat = nodes_[n.lhs].empty_sat && nodes_[n.rhs].empty_sat;
        if (n.kind == FKind::Or) n.empty_sat = nodes_[n.lhs].empty_sat || nodes_[n.rhs].empty_sat;
        int id = (int)nodes_.size();
        nodes_.push_back(n);
        table_.emplace(key, id);
        return id;
    }

    void flatten(FKind op, int f, std::vector<int>& out) const {
        const FormulaNode& n = nodes_[f];
        if (n.kind == op) {
            flatten(op, n.lhs, out);
            flatten(op, n.rhs, out);
        } else {
            out.push_back(f);
        }
    }

    /// Canonical n-ary conjunction/disjunction: flatten, sort, dedupe, then
    /// apply unit/complement/absorption/subsumption rules until stable.
    int build(FKind op, std::vector<int> in) {
        const bool is_and = (op == FKind::And);
        std::vector<int> set;
        for (int f : in) flatten(op, f, set);
        std::sort(set.begin(), set.end());
        set.erase(std::unique(set.begin(), set.end()), set.end());

        const int unit = is_and ? true_ : false_;
        const int zero = is_and ? false_ : true_;
        std::vector<char> dead(set.size(), 0);
        for (size_t i = 0; i < set.size(); ++i) {
            if (set[i] == zero) return zero;
            if (set[i] == unit) dead[i] = 1;
        }
        if (is_and) {
            // complementary literals annihilate: p & !p = false on every word
            for (size_t i = 0; i < set.size(); ++i) {
                const FormulaNode& a = nodes_[set[i]];
                if (a.kind != FKind::Atom) continue;
                for (size_t j = 0; j < set.size(); ++j) {
                    const FormulaNode& b = nodes_[set[j]];
                    if (b.kind == FKind::NegAtom && b.atom == a.atom) return false_;
                }
            }
        }

        auto contains = [&](size_t skip, int f) {
            for (size_t i = 0; i < set.size(); ++i)
                if (!dead[i] && i != skip && set[i] == f) return true;
            return false;
        };

        bool changed = true;
        while (changed) {
            changed = false;
            for (size_t i = 0; i < set.size(); ++i) {
                if (dead[i]) continue;
                const FormulaNode& n = nodes_[set[i]];
                // absorption: in an Or-set a conjunction containing another
                // member is redundant (dually for And-sets).
                if (n.kind == (is_and ? FKind::Or : FKind::And)) {
                    std::vector<int> parts;
                    flatten(is_and ? FKind::Or : FKind::And, set[i], parts);
                    for (int p : parts)
                        if (contains(i, p)) { dead[i] = 1; changed = true; break; }
                    if (dead[i]) continue;
                }
                // until-subsumption: r implies (l U r) on nonempty words, so
                // Or{r, l U r} keeps the until and And{r, l U r} keeps r.
                // Only valid when r is not empty-word-satisfiable.
                if (n.kind == FKind::Until && !nodes_[n.rhs].empty_sat && contains(i, n.rhs)) {
                    if (is_and) { dead[i] = 1; changed = true; }
                    else {
                        for (size_t j = 0; j < set.size(); ++j)
                            if (!dead[j] && set[j] == n.rhs) { dead[j] = 1; changed = true; }
                    }
                }
            }
        }

        std::vector<int> kept;
        for (size_t i = 0; i < set.size(); ++i)
            if (!dead[i]) kept.push_back(set[i]);
        if (kept.empty()) return unit;
        int acc = kept.back();
        for (int i = (int)kept.size() - 2; i >= 0; --i)
            acc = intern({op, -1, kept[i], acc, false});
        return acc;
    }

    int true_ = 0, false_ = 0;
    std::vector<FormulaNode> nodes_;
    std::map<std::tuple<FKind, int, int, int>, int> table_;
};

// ---------------------------------------------------------------------------
// Finite-word evaluation (backward dynamic program over positions).

inline void collect_subformulas(const FormulaSet& fs, int f, std::vector<int>& order,
                                std::vector<char>& seen) {
    if (seen[f]) return;
    seen[f] = 1;
    const FormulaNode& n = fs.node(f);
    if (n.lhs >= 0) collect_subformulas(fs, n.lhs, order, seen);
    if (n.rhs >= 0) collect_subformulas(fs, n.rhs, order, seen);
    order.push_back(f);
}

/// True iff the word satisfies f. The empty word satisfies only formulas that
/// are empty-word-satisfiable (true and boolean combinations reducing to it);
/// X on the last position is false; U needs its right side within the word.
inline bool eval_word(const FormulaSet& fs, int f, const std::vector<Symbol>& word) {
    if (word.empty()) return fs.empty_sat(f);
    const int n = (int)word.size();
    std::vector<int> order;
    // arena ids are topological: every subformula of f has id <= f
    std::vector<char> seen(f + 1, 0);
    collect_subformulas(fs, f, order, seen);

    std::vector<int> slot(seen.size(), -1);
    for (int i = 0; i < (int)order.size(); ++i) slot[order[i]] = i;
    // sat[i][t]: subformula order[i] holds at position t
    std::vector<std::vector<char>> sat(order.size(), std::vector<char>(n, 0));
    for (int t = n - 1; t >= 0; --t) {
        for (int i = 0; i < (int)order.size(); ++i) {
            const FormulaNode& nd = fs.node(order[i]);
            char v = 0;
            switch (nd.kind) {
                case FKind::True: v = 1; break;
                case FKind::False: v = 0; break;
                case FKind::Atom: v = (word[t] >> nd.atom) & 1u; break;
                case FKind::NegAtom: v = !((word[t] >> nd.atom) & 1u); break;
                case FKind::And: v = sat[slot[nd.lhs]][t] && sat[slot[nd.rhs]][t]; break;
                case FKind::Or: v = sat[slot[nd.lhs]][t] || sat[slot[nd.rhs]][t]; break;
                case FKind::Next: v = (t + 1 < n) && sat[slot[nd.lhs]][t + 1]; break;
                case FKind::Until:
                    v = sat[slot[nd.rhs]][t] ||
                        (sat[slot[nd.lhs]][t] && t + 1 < n && sat[i][t + 1]);
                    break;
            }
            sat[i][t] = v;
        }
    }
    return sat[slot[f]][0];
}

// ---------------------------------------------------------------------------
// Parser. Grammar (binding tightens downward, U right-associative):
//   or    := and ('|' and)*
//   and   := until (('&' | '\') until)*
//   until := unary ('U' until)?
//   unary := '!' primary | 'X' unary | 'F' unary | primary
//   primary := 'true' | IDENT | '(' or ')'
// The exclusion sugar a\b requires b to be an atom or disjunction of atoms.

class FormulaParser {
public:
    FormulaParser(FormulaSet& fs, const std::string& text, const Alphabet& ap)
        : fs_(fs), text_(text), ap_(ap) {}

    int parse() {
        int f = parse_or();
        skip_ws();
        if (pos_ != text_.size()) throw ParseError("unexpected trailing input", pos_);
        return f;
    }

private:
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace((unsigned char)text_[pos_])) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) { ++pos_; return true; }
        return false;
    }

    std::optional<std::string> peek_ident() {
        skip_ws();
        size_t p = pos_;
        if (p >= text_.size()) return std::nullopt;
        if (!std::isalpha((unsigned char)text_[p]) && text_[p] != '_') return std::nullopt;
        size_t e = p;
        while (e < text_.size() &&
               (std::isalnum((unsigned char)text_[e]) || text_[e] == '_')) ++e;
        return text_.substr(p, e - p);
    }

    bool eat_keyword(const std::string& kw) {
        auto id = peek_ident();
        if (id && *id == kw) { skip_ws(); pos_ += kw.size(); return true; }
        return false;
    }

    int parse_or() {
        int f = parse_and();
        while (true) {
            skip_ws();
            if (!eat('|')) return f;
            f = fs_.f_or(f, parse_and());
        }
    }

    int parse_and() {
        int f = parse_until();
        while (true) {
            skip_ws();
            if (eat('&')) { f = fs_.f_and(f, parse_until()); continue; }
            if (pos_ < text_.size() && text_[pos_] == '\\') {
                size_t at = pos_;
                ++pos_;
                int rhs = parse_until();
                if (!fs_.is_atom_disjunction(rhs))
                    throw ParseError("exclusion right side must be an atom or disjunction of atoms", at);
                f = fs_.f_and(f, fs_.f_not(rhs));
                continue;
            }
            return f;
        }
    }

    int parse_until() {
        int f = parse_unary();
        if (eat_keyword("U")) return fs_.f_until(f, parse_until());
        return f;
    }

    int parse_unary() {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == '!') {
            size_t at = pos_;
            ++pos_;
            int f = parse_primary();
            if (fs_.kind(f) != FKind::Atom && !fs_.is_atom_disjunction(f))
                throw ParseError("negation applied to a non-atom", at);
            return fs_.f_not(f);
        }
        if (eat_keyword("X")) return fs_.f_next(parse_unary());
        if (eat_keyword("F")) return fs_.f_eventually(parse_unary());
        return parse_primary();
    }

    int parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError("unexpected end of formula", pos_);
        if (eat('(')) {
            int f = parse_or();
            if (!eat(')')) throw ParseError("missing ')'", pos_);
            return f;
        }
        size_t at = pos_;
        auto id = peek_ident();
        if (!id) throw ParseError(std::string("unexpected character '") + text_[pos_] + "'", pos_);
        pos_ += id->size();
        if (*id == "true") return fs_.true_id();
        if (*id == "U" || *id == "X" || *id == "F")
            throw ParseError("operator '" + *id + "' used as proposition", at);
        int idx = ap_.index(*id);
        if (idx < 0) throw ParseError("unknown atomic proposition '" + *id + "'", at);
        return fs_.atom(idx);
    }

    FormulaSet& fs_;
    const std::string& text_;
    const Alphabet& ap_;
    size_t pos_ = 0;
};

inline int parse_formula(FormulaSet& fs, const std::string& text, const Alphabet& ap) {
    return FormulaParser(fs, text, ap).parse();
}

}  // namespace coplan
