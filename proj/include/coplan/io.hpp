#pragma once

// File formats: JSON schemas for automata, MDPs, grids, task lists, option
// directories, and experiment configs, plus the CSV writers shared by the CLI
// and the reproduction harness. Everything is emitted with fixed key order
// and shortest round-trip float formatting, so identical inputs produce
// byte-identical files.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "coplan/decomp.hpp"
#include "coplan/dfa.hpp"
#include "coplan/mdp.hpp"
#include "coplan/options.hpp"

namespace coplan {

using Json = nlohmann::ordered_json;

inline std::string format_double(double x) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& body) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << body;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_json_file(const std::filesystem::path& path, const Json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

inline Json load_json_file(const std::filesystem::path& path) {
    try {
        return Json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

// pulls a field out of a JSON object with a diagnostic naming the field
template <typename T>
T json_field(const Json& j, const std::string& name, const std::string& where) {
    if (!j.contains(name)) throw std::runtime_error(where + ": missing field '" + name + "'");
    try {
        return j.at(name).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(where + ": bad field '" + name + "': " + e.what());
    }
}

template <typename T>
T json_field_or(const Json& j, const std::string& name, const std::string& where, T fallback) {
    if (!j.contains(name)) return fallback;
    return json_field<T>(j, name, where);
}

// ---------------------------------------------------------------------------
// propositional rendering of symbol sets (for human-readable task files)

inline std::string symbols_to_formula(const SymbolSet& set, const Alphabet& ap) {
    const uint32_t m = ap.num_symbols();
    std::vector<char> in(m, 0);
    for (Symbol s : set) {
        if (s >= m) throw std::invalid_argument("symbols_to_formula: symbol out of range");
        in[s] = 1;
    }
    uint32_t count = 0;
    for (char c : in) count += c;
    if (count == 0) return "false";
    if (count == m) return "true";

    // prefer a disjunction of plain atoms when the set is exactly their union
    std::vector<char> covered(m, 0);
    std::string atoms;
    for (int a = 0; a < ap.size(); ++a) {
        bool inside = true;
        for (Symbol s = 0; s < m; ++s)
            if (((s >> a) & 1u) && !in[s]) inside = false;
        if (!inside) continue;
        for (Symbol s = 0; s < m; ++s)
            if ((s >> a) & 1u) covered[s] = 1;
        if (!atoms.empty()) atoms += " | ";
        atoms += ap.names[a];
    }
    if (!atoms.empty() && covered == in) return atoms;

    // fall back to one minterm per symbol
    std::string out;
    for (Symbol s = 0; s < m; ++s) {
        if (!in[s]) continue;
        std::string term;
        for (int a = 0; a < ap.size(); ++a) {
            if (!term.empty()) term += " & ";
            if (!((s >> a) & 1u)) term += "!";
            term += ap.names[a];
        }
        if (!out.empty()) out += " | ";
        out += count > 1 && ap.size() > 1 ? "(" + term + ")" : term;
    }
    return out;
}

// ---------------------------------------------------------------------------
// DFA files

inline void save_dfa(const Dfa& d, const std::filesystem::path& path) {
    Json j;
    j["ap"] = d.alphabet.names;
    j["states"] = d.num_states;
    j["q0"] = d.initial;
    Json acc = Json::array();
    for (int q = 0; q < d.num_states; ++q)
        if (d.accepting[q]) acc.push_back(q);
    j["accepting"] = acc;
    j["sink"] = d.sink >= 0 ? Json(d.sink) : Json(nullptr);
    Json delta = Json::array();
    for (int q = 0; q < d.num_states; ++q)
        for (uint32_t s = 0; s < d.num_symbols; ++s) delta.push_back({q, s, d.delta[q][s]});
    j["delta"] = delta;
    write_json_file(path, j);
}

inline Dfa load_dfa(const std::filesystem::path& path) {
    const std::string where = "dfa " + path.string();
    Json j = load_json_file(path);
    Dfa d;
    d.alphabet.names = json_field<std::vector<std::string>>(j, "ap", where);
    d.num_states = json_field<int>(j, "states", where);
    d.initial = json_field<int>(j, "q0", where);
    d.num_symbols = d.alphabet.num_symbols();
    if (d.num_states <= 0) throw std::runtime_error(where + ": no states");
    if (d.initial < 0 || d.initial >= d.num_states)
        throw std::runtime_error(where + ": initial state out of range");
    d.accepting.assign(d.num_states, 0);
    for (int q : json_field<std::vector<int>>(j, "accepting", where)) {
        if (q < 0 || q >= d.num_states)
            throw std::runtime_error(where + ": accepting state out of range");
        d.accepting[q] = 1;
    }
    if (!j.contains("sink")) throw std::runtime_error(where + ": missing field 'sink'");
    d.sink = j.at("sink").is_null() ? -1 : j.at("sink").get<int>();
    if (d.sink >= d.num_states) throw std::runtime_error(where + ": sink out of range");
    d.delta.assign(d.num_states, std::vector<int>(d.num_symbols, -1));
    for (const auto& row : json_field<std::vector<std::vector<int64_t>>>(j, "delta", where)) {
        if (row.size() != 3) throw std::runtime_error(where + ": delta rows are [q, symbol, q']");
        int64_t q = row[0], s = row[1], t = row[2];
        if (q < 0 || q >= d.num_states || t < 0 || t >= d.num_states || s < 0 ||
            s >= (int64_t)d.num_symbols)
            throw std::runtime_error(where + ": delta entry out of range");
        if (d.delta[q][s] != -1) throw std::runtime_error(where + ": duplicate delta entry");
        d.delta[q][s] = (int)t;
    }
    for (int q = 0; q < d.num_states; ++q)
        for (uint32_t s = 0; s < d.num_symbols; ++s)
            if (d.delta[q][s] < 0)
                throw std::runtime_error(where + ": delta is not total at state " +
                                         std::to_string(q));
    d.state_formula.assign(d.num_states, -1);
    return d;
}

// ---------------------------------------------------------------------------
// MDP files

struct MdpFile {
    Mdp mdp;
    std::vector<std::string> actions;
};

inline std::vector<std::string> grid_action_names() { return {"up", "down", "left", "right"}; }

inline void save_mdp(const Mdp& m, const std::vector<std::string>& actions,
                     const std::filesystem::path& path) {
    if ((int)actions.size() != m.num_actions)
        throw std::invalid_argument("save_mdp: one name per action required");
    Json j;
    j["ap"] = m.alphabet.names;
    j["states"] = m.num_states;
    j["actions"] = actions;
    j["mu0"] = Json::array({Json::array({m.initial, 1.0})});
    Json labels = Json::array();
    for (int s = 0; s < m.num_states; ++s) labels.push_back({s, m.label[s]});
    j["labels"] = labels;
    Json trans = Json::array();
    for (int s = 0; s < m.num_states; ++s)
        for (int a = 0; a < m.num_actions; ++a)
            for (auto [t, p] : m.trans[s][a]) trans.push_back({s, a, t, p});
    j["trans"] = trans;
    write_json_file(path, j);
}

inline MdpFile load_mdp(const std::filesystem::path& path) {
    const std::string where = "mdp " + path.string();
    Json j = load_json_file(path);
    MdpFile f;
    Mdp& m = f.mdp;
    m.alphabet.names = json_field<std::vector<std::string>>(j, "ap", where);
    m.num_states = json_field<int>(j, "states", where);
    f.actions = json_field<std::vector<std::string>>(j, "actions", where);
    m.num_actions = (int)f.actions.size();
    if (m.num_states <= 0 || m.num_actions <= 0)
        throw std::runtime_error(where + ": empty state or action space");

    auto mu0 = json_field<std::vector<std::vector<double>>>(j, "mu0", where);
    if (mu0.size() != 1 || mu0[0].size() != 2 || mu0[0][1] != 1.0)
        throw std::runtime_error(where + ": mu0 must be a single [state, 1.0] point mass");
    m.initial = (int)mu0[0][0];
    if (m.initial < 0 || m.initial >= m.num_states)
        throw std::runtime_error(where + ": initial state out of range");

    m.label.assign(m.num_states, 0);
    std::vector<char> labeled(m.num_states, 0);
    for (const auto& row : json_field<std::vector<std::vector<int64_t>>>(j, "labels", where)) {
        if (row.size() != 2) throw std::runtime_error(where + ": label rows are [state, bitmask]");
        int64_t s = row[0], bits = row[1];
        if (s < 0 || s >= m.num_states)
            throw std::runtime_error(where + ": label state out of range");
        if (bits < 0 || bits >= (int64_t)m.alphabet.num_symbols()) {
            int bad = m.alphabet.size();
            for (int a = 62; a >= m.alphabet.size(); --a)
                if (bits >= 0 && ((bits >> a) & 1)) {
                    bad = a;
                    break;
                }
            throw std::runtime_error(where + ": label uses atom bit " + std::to_string(bad) +
                                     " beyond the " + std::to_string(m.alphabet.size()) +
                                     " declared atoms");
        }
        if (labeled[s]) throw std::runtime_error(where + ": duplicate label row");
        labeled[s] = 1;
        m.label[s] = (Symbol)bits;
    }

    m.trans.assign(m.num_states, std::vector<SparseRow>(m.num_actions));
    for (const auto& row : json_field<std::vector<std::vector<double>>>(j, "trans", where)) {
        if (row.size() != 4) throw std::runtime_error(where + ": trans rows are [s, a, s', p]");
        int s = (int)row[0], a = (int)row[1], t = (int)row[2];
        double p = row[3];
        if (s < 0 || s >= m.num_states || t < 0 || t >= m.num_states || a < 0 ||
            a >= m.num_actions)
            throw std::runtime_error(where + ": transition index out of range");
        if (p <= 0.0 || p > 1.0) throw std::runtime_error(where + ": transition mass outside (0,1]");
        m.trans[s][a].emplace_back(t, p);
    }
    try {
        m.validate();
    } catch (const std::exception& e) {
        throw std::runtime_error(where + ": " + e.what());
    }
    return f;
}

// ---------------------------------------------------------------------------
// grid files

inline void save_grid(const GridSpec& g, const std::filesystem::path& path) {
    Json j;
    j["width"] = g.width;
    j["height"] = g.height;
    j["slip"] = g.slip;
    Json obstacles = Json::array();
    for (auto [x, y] : g.obstacles) obstacles.push_back({x, y});
    j["obstacles"] = obstacles;
    Json labels = Json::object();
    for (const auto& [key, cells] : g.regions) {
        Json arr = Json::array();
        for (auto [x, y] : cells) arr.push_back({x, y});
        labels[std::to_string(key)] = arr;
    }
    j["labels"] = labels;
    j["s0"] = {g.init_x, g.init_y};
    write_json_file(path, j);
}

inline GridSpec load_grid(const std::filesystem::path& path) {
    const std::string where = "grid " + path.string();
    Json j = load_json_file(path);
    GridSpec g;
    g.width = json_field<int>(j, "width", where);
    g.height = json_field<int>(j, "height", where);
    g.slip = json_field<double>(j, "slip", where);
    for (const auto& cell : json_field<std::vector<std::vector<int>>>(j, "obstacles", where)) {
        if (cell.size() != 2) throw std::runtime_error(where + ": obstacle cells are [x, y]");
        g.obstacles.emplace_back(cell[0], cell[1]);
    }
    if (!j.contains("labels") || !j.at("labels").is_object())
        throw std::runtime_error(where + ": missing object field 'labels'");
    for (const auto& [key, arr] : j.at("labels").items()) {
        int region;
        auto res = std::from_chars(key.data(), key.data() + key.size(), region);
        if (res.ec != std::errc() || res.ptr != key.data() + key.size())
            throw std::runtime_error(where + ": region keys are numeric, got '" + key + "'");
        auto& cells = g.regions[region];
        for (const auto& cell : arr.get<std::vector<std::vector<int>>>()) {
            if (cell.size() != 2) throw std::runtime_error(where + ": region cells are [x, y]");
            cells.emplace_back(cell[0], cell[1]);
        }
    }
    auto s0 = json_field<std::vector<int>>(j, "s0", where);
    if (s0.size() != 2) throw std::runtime_error(where + ": s0 is [x, y]");
    g.init_x = s0[0];
    g.init_y = s0[1];
    return g;
}

// ---------------------------------------------------------------------------
// task lists (decomposition output)

struct TasksFile {
    Alphabet ap;
    std::vector<OptionRecipe> inventory;
    std::vector<int64_t> ranks;                // -1 in the file marks the rejecting sink
    std::vector<std::vector<int>> options_at;  // inventory indices per automaton state
    std::vector<std::string> warnings;
};

inline const char* comb_name(OptionRecipe::Comb c) {
    switch (c) {
        case OptionRecipe::Comb::Primitive: return "primitive";
        case OptionRecipe::Comb::And: return "and";
        case OptionRecipe::Comb::Or: return "or";
        default: return "minus";
    }
}

inline OptionRecipe::Comb comb_from_name(const std::string& s, const std::string& where) {
    if (s == "primitive") return OptionRecipe::Comb::Primitive;
    if (s == "and") return OptionRecipe::Comb::And;
    if (s == "or") return OptionRecipe::Comb::Or;
    if (s == "minus") return OptionRecipe::Comb::Minus;
    throw std::runtime_error(where + ": unknown op '" + s + "'");
}

inline void save_tasks(const Decomposition& d, const std::filesystem::path& path) {
    const Alphabet& ap = d.dfa.alphabet;
    Json j;
    j["ap"] = ap.names;
    Json tasks = Json::array();
    for (const auto& r : d.inventory) {
        Json t;
        t["label"] = r.label;
        t["op"] = comb_name(r.comb);
        t["primitive"] = r.comb == OptionRecipe::Comb::Primitive;
        t["goal"] = r.expr.kind == GoalExpr::Kind::None ? symbols_to_formula(r.goal, ap)
                                                        : r.expr.to_string(ap);
        t["unsafe"] = symbols_to_formula(r.unsafe, ap);
        t["goal_symbols"] = r.goal;
        t["unsafe_symbols"] = r.unsafe;
        t["goal_pos_symbols"] = r.goal_pos;
        t["goal_both_symbols"] = r.goal_both;
        t["pos_parts"] = r.pos_parts;
        t["neg_parts"] = r.neg_parts;
        tasks.push_back(std::move(t));
    }
    j["tasks"] = tasks;
    Json ranks = Json::array();
    for (int64_t r : d.rank) ranks.push_back(r == kRankInf ? -1 : r);
    j["ranks"] = ranks;
    j["options_at"] = d.options_at;
    j["warnings"] = d.warnings;
    write_json_file(path, j);
}

inline TasksFile load_tasks(const std::filesystem::path& path) {
    const std::string where = "tasks " + path.string();
    Json j = load_json_file(path);
    TasksFile f;
    f.ap.names = json_field<std::vector<std::string>>(j, "ap", where);
    if (!j.contains("tasks") || !j.at("tasks").is_array())
        throw std::runtime_error(where + ": missing array field 'tasks'");
    auto check_syms = [&](const SymbolSet& xs) {
        for (Symbol s : xs)
            if (s >= f.ap.num_symbols())
                throw std::runtime_error(where + ": symbol out of range for the alphabet");
        return xs;
    };
    for (const auto& t : j.at("tasks")) {
        OptionRecipe r;
        r.label = json_field<std::string>(t, "label", where);
        r.comb = comb_from_name(json_field<std::string>(t, "op", where), where);
        r.goal = check_syms(json_field<SymbolSet>(t, "goal_symbols", where));
        r.unsafe = check_syms(json_field<SymbolSet>(t, "unsafe_symbols", where));
        r.goal_pos = check_syms(json_field_or<SymbolSet>(t, "goal_pos_symbols", where, {}));
        r.goal_both = check_syms(json_field_or<SymbolSet>(t, "goal_both_symbols", where, {}));
        r.pos_parts = json_field_or<std::vector<int>>(t, "pos_parts", where, {});
        r.neg_parts = json_field_or<std::vector<int>>(t, "neg_parts", where, {});
        const int n = (int)f.inventory.size();
        for (int ix : r.pos_parts)
            if (ix < 0 || ix >= n)
                throw std::runtime_error(where + ": pos_parts must point at earlier tasks");
        for (int ix : r.neg_parts)
            if (ix < 0 || ix >= n)
                throw std::runtime_error(where + ": neg_parts must point at earlier tasks");
        f.inventory.push_back(std::move(r));
    }
    for (int64_t r : json_field_or<std::vector<int64_t>>(j, "ranks", where, {}))
        f.ranks.push_back(r < 0 ? kRankInf : r);
    f.options_at = json_field_or<std::vector<std::vector<int>>>(j, "options_at", where, {});
    for (const auto& row : f.options_at)
        for (int ix : row)
            if (ix < 0 || ix >= (int)f.inventory.size())
                throw std::runtime_error(where + ": options_at index out of range");
    f.warnings = json_field_or<std::vector<std::string>>(j, "warnings", where, {});
    return f;
}

// ---------------------------------------------------------------------------
// CSV writers

inline void write_csv(const std::filesystem::path& path, const std::string& header,
                      const std::vector<std::vector<std::string>>& rows) {
    std::string body = header + "\n";
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) body += ",";
            body += row[i];
        }
        body += "\n";
    }
    write_text_file(path, body);
}

inline void write_value_csv(const std::filesystem::path& path, const std::vector<double>& v) {
    std::vector<std::vector<std::string>> rows;
    for (int s = 0; s < (int)v.size(); ++s)
        rows.push_back({std::to_string(s), format_double(v[s])});
    write_csv(path, "state,value", rows);
}

inline void write_policy_csv(const std::filesystem::path& path, const Policy& pi) {
    std::vector<std::vector<std::string>> rows;
    for (int s = 0; s < (int)pi.size(); ++s)
        for (int a = 0; a < (int)pi[s].size(); ++a)
            if (pi[s][a] > 0.0)
                rows.push_back({std::to_string(s), std::to_string(a), format_double(pi[s][a])});
    write_csv(path, "state,action,prob", rows);
}

inline Policy load_policy_csv(const std::filesystem::path& path, int num_states,
                              int num_actions) {
    const std::string where = "policy " + path.string();
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line) || line != "state,action,prob")
        throw std::runtime_error(where + ": expected header 'state,action,prob'");
    Policy pi(num_states, std::vector<double>(num_actions, 0.0));
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string s, a, p;
        if (!std::getline(row, s, ',') || !std::getline(row, a, ',') || !std::getline(row, p))
            throw std::runtime_error(where + ": malformed row '" + line + "'");
        int si = std::stoi(s), ai = std::stoi(a);
        if (si < 0 || si >= num_states || ai < 0 || ai >= num_actions)
            throw std::runtime_error(where + ": row out of range '" + line + "'");
        pi[si][ai] = std::stod(p);
    }
    return pi;
}

/// Heatmap matrix over a grid: one CSV row per grid row (top first).
inline void write_matrix_csv(const std::filesystem::path& path, int width, int height,
                             const std::vector<double>& by_cell) {
    if ((int)by_cell.size() != width * height)
        throw std::invalid_argument("write_matrix_csv: cell count mismatch");
    std::string body;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            if (x) body += ",";
            body += format_double(by_cell[y * width + x]);
        }
        body += "\n";
    }
    write_text_file(path, body);
}

inline void write_trace_csv(const std::filesystem::path& path,
                            const std::vector<std::pair<double, double>>& trace) {
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < (int)trace.size(); ++i)
        rows.push_back({std::to_string(i + 1), format_double(trace[i].first),
                        format_double(trace[i].second)});
    write_csv(path, "iteration,v_init,residual", rows);
}

// ---------------------------------------------------------------------------
// option directories

inline void save_options(const std::vector<OptionPolicy>& pool,
                         const std::vector<OptionRecipe>& provenance,
                         const std::filesystem::path& dir) {
    if (!provenance.empty() && provenance.size() != pool.size())
        throw std::invalid_argument("save_options: provenance size mismatch");
    std::filesystem::create_directories(dir);
    Json index;
    Json files = Json::array();
    for (size_t k = 0; k < pool.size(); ++k) {
        const OptionPolicy& o = pool[k];
        std::string stem = "option_" + std::to_string(k);
        Json j;
        j["label"] = o.label;
        if (!provenance.empty()) {
            const OptionRecipe& r = provenance[k];
            Json prov;
            prov["op"] = comb_name(r.comb);
            prov["goal"] = r.expr.kind == GoalExpr::Kind::None
                               ? symbols_to_formula(r.goal, o.task.base->alphabet)
                               : r.expr.to_string(o.task.base->alphabet);
            prov["unsafe"] = symbols_to_formula(r.unsafe, o.task.base->alphabet);
            prov["pos_parts"] = r.pos_parts;
            prov["neg_parts"] = r.neg_parts;
            j["provenance"] = prov;
        }
        std::vector<int> goal_states, unsafe_states, beta_support;
        for (int s = 0; s < o.task.num_states(); ++s) {
            if (o.task.goal[s]) goal_states.push_back(s);
            if (o.task.unsafe[s]) unsafe_states.push_back(s);
            if (o.beta[s]) beta_support.push_back(s);
        }
        j["goal_states"] = goal_states;
        j["unsafe_states"] = unsafe_states;
        j["beta"] = beta_support;
        j["iterations"] = o.iterations;
        j["warnings"] = o.warnings;
        j["policy_csv"] = stem + "_policy.csv";
        j["value_csv"] = stem + "_value.csv";
        write_json_file(dir / (stem + ".json"), j);
        write_policy_csv(dir / (stem + "_policy.csv"), o.policy);
        write_value_csv(dir / (stem + "_value.csv"), o.value);
        files.push_back(stem + ".json");
    }
    index["options"] = files;
    write_json_file(dir / "index.json", index);
}

inline std::vector<OptionPolicy> load_options(const std::filesystem::path& dir, const Mdp& m) {
    const std::string where = "options " + dir.string();
    Json index = load_json_file(dir / "index.json");
    std::vector<OptionPolicy> pool;
    for (const auto& name : json_field<std::vector<std::string>>(index, "options", where)) {
        Json j = load_json_file(dir / name);
        OptionPolicy o;
        o.label = json_field<std::string>(j, "label", where + "/" + name);
        std::vector<char> goal(m.num_states, 0), unsafe(m.num_states, 0);
        auto mark = [&](const char* field, std::vector<char>& into) {
            for (int s : json_field<std::vector<int>>(j, field, where + "/" + name)) {
                if (s < 0 || s >= m.num_states)
                    throw std::runtime_error(where + "/" + name + ": state out of range");
                into[s] = 1;
            }
        };
        mark("goal_states", goal);
        mark("unsafe_states", unsafe);
        o.task = bind_task_states(m, goal, unsafe);
        o.beta.assign(m.num_states, 0);
        mark("beta", o.beta);
        o.iterations = json_field_or<int>(j, "iterations", where, 0);
        o.warnings = json_field_or<std::vector<std::string>>(j, "warnings", where, {});
        o.policy = load_policy_csv(dir / json_field<std::string>(j, "policy_csv", where),
                                   m.num_states, m.num_actions);
        for (int s = 0; s < m.num_states; ++s) {
            double sum = 0.0;
            for (double w : o.policy[s]) sum += w;
            if (std::abs(sum - 1.0) > 1e-9)
                throw std::runtime_error(where + "/" + name + ": policy row " +
                                         std::to_string(s) + " does not sum to 1");
        }
        {
            const std::string where_v = where + "/" + name;
            std::istringstream in(
                read_text_file(dir / json_field<std::string>(j, "value_csv", where)));
            std::string line;
            if (!std::getline(in, line) || line != "state,value")
                throw std::runtime_error(where_v + ": expected header 'state,value'");
            o.value.assign(m.num_states, 0.0);
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                auto comma = line.find(',');
                if (comma == std::string::npos)
                    throw std::runtime_error(where_v + ": malformed value row");
                int s = std::stoi(line.substr(0, comma));
                if (s < 0 || s >= m.num_states)
                    throw std::runtime_error(where_v + ": value row out of range");
                o.value[s] = std::stod(line.substr(comma + 1));
            }
            o.soft_value = o.value;
        }
        pool.push_back(std::move(o));
    }
    return pool;
}

// ---------------------------------------------------------------------------
// experiment configs

struct ExperimentConfig {
    std::string grid = "gridworld_6x8.json";
    std::vector<std::pair<std::string, std::string>> tasks;  // (name, formula)
    double gamma = 0.9;
    double tau = 1.0;
    double alpha = 100.0;
    double tol = 0.001;
    double eta_or = 10.0;
    double eta_and = -10.0;
    int max_iter = 10000;
    uint64_t seed = 20260814;
};

inline std::vector<std::pair<std::string, std::string>> default_task_formulas() {
    return {
        {"phi1", "!C U (s1 & !C & X((!C U (s2 & !C)) & (!C U (s3 & !C))))"},
        {"phi2", "!C U ((s1 | s3) & !C & (!C U (s2 & !C)))"},
        {"phi3", "!C U ((s1 | s2) & !C & (!C U (s2 & s3 & !C)))"},
    };
}

inline Json experiment_to_json(const ExperimentConfig& c) {
    Json j;
    j["grid"] = c.grid;
    Json tasks = Json::object();
    for (const auto& [name, formula] : c.tasks) tasks[name] = formula;
    j["tasks"] = tasks;
    j["gamma"] = c.gamma;
    j["tau"] = c.tau;
    j["alpha"] = c.alpha;
    j["tol"] = c.tol;
    j["eta_or"] = c.eta_or;
    j["eta_and"] = c.eta_and;
    j["max_iter"] = c.max_iter;
    j["seed"] = c.seed;
    return j;
}

inline void save_experiment(const ExperimentConfig& c, const std::filesystem::path& path) {
    write_json_file(path, experiment_to_json(c));
}

/// Loads a config; every field is optional and falls back to the defaults.
/// The grid path is resolved relative to the config's directory.
inline ExperimentConfig load_experiment(const std::filesystem::path& path) {
    const std::string where = "experiment " + path.string();
    Json j = load_json_file(path);
    ExperimentConfig c;
    c.tasks = default_task_formulas();
    c.grid = json_field_or<std::string>(j, "grid", where, c.grid);
    if (j.contains("tasks")) {
        if (!j.at("tasks").is_object())
            throw std::runtime_error(where + ": 'tasks' maps names to formulas");
        c.tasks.clear();
        for (const auto& [name, formula] : j.at("tasks").items()) {
            if (!formula.is_string())
                throw std::runtime_error(where + ": task '" + name + "' is not a formula string");
            c.tasks.emplace_back(name, formula.get<std::string>());
        }
    }
    c.gamma = json_field_or<double>(j, "gamma", where, c.gamma);
    c.tau = json_field_or<double>(j, "tau", where, c.tau);
    c.alpha = json_field_or<double>(j, "alpha", where, c.alpha);
    c.tol = json_field_or<double>(j, "tol", where, c.tol);
    c.eta_or = json_field_or<double>(j, "eta_or", where, c.eta_or);
    c.eta_and = json_field_or<double>(j, "eta_and", where, c.eta_and);
    c.max_iter = json_field_or<int>(j, "max_iter", where, c.max_iter);
    c.seed = json_field_or<uint64_t>(j, "seed", where, c.seed);
    if (c.gamma <= 0.0 || c.gamma > 1.0 || c.tau <= 0.0 || c.alpha <= 0.0 || c.tol <= 0.0)
        throw std::runtime_error(where + ": gamma/tau/alpha/tol must be positive (gamma <= 1)");
    if (c.eta_or <= 0.0 || c.eta_and >= 0.0)
        throw std::runtime_error(where + ": eta_or must be positive and eta_and negative");
    // resolve the grid path against the config location
    std::filesystem::path g = c.grid;
    if (g.is_relative() && path.has_parent_path()) c.grid = (path.parent_path() / g).string();
    return c;
}

}  // namespace coplan
