#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "coplan/dfa.hpp"

using namespace coplan;

namespace {

// every word up to max_len, checked against the positional evaluator
void check_language_exhaustive(const std::string& text, const Alphabet& ap, int max_len) {
    FormulaSet fs;
    int f = parse_formula(fs, text, ap);
    Dfa d = to_dfa(fs, f, ap);
    std::vector<Symbol> word;
    auto rec = [&](auto&& self, int depth) -> void {
        INFO("formula " << text);
        CHECK(d.accepts(word) == eval_word(fs, f, word));
        if (depth == max_len) return;
        for (Symbol s = 0; s < ap.num_symbols(); ++s) {
            word.push_back(s);
            self(self, depth + 1);
            word.pop_back();
        }
    };
    rec(rec, 0);
}

void check_language_sampled(const std::string& text, const Alphabet& ap, int max_len,
                            int samples, uint64_t seed) {
    FormulaSet fs;
    int f = parse_formula(fs, text, ap);
    Dfa d = to_dfa(fs, f, ap);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> len(0, max_len);
    std::uniform_int_distribution<uint32_t> pick(0, ap.num_symbols() - 1);
    for (int i = 0; i < samples; ++i) {
        std::vector<Symbol> word(len(rng));
        for (auto& s : word) s = pick(rng);
        INFO("formula " << text);
        REQUIRE(d.accepts(word) == eval_word(fs, f, word));
    }
}

}  // namespace

TEST_CASE("automaton language matches word evaluation", "[dfa]") {
    Alphabet ap = Alphabet::parse_list("a,b,c");
    for (const char* s : {"true", "a", "F a", "X a", "X X a", "!a U b",
                          "a U (b U c)", "F (a & F (b & F c))", "F a & F b",
                          "F (a & b) | F c", "F (a \\ b)", "!c U (a | b)",
                          "F (a & X b)", "!c U (a & !c & X(!c U (b & !c)))"})
        check_language_exhaustive(s, ap, 4);
}

TEST_CASE("automaton language on four atoms, sampled", "[dfa]") {
    Alphabet ap = Alphabet::parse_list("s1,s2,s3,C");
    for (const char* s :
         {"!C U (s1 & !C & X((!C U (s2 & !C)) & (!C U (s3 & !C))))",
          "!C U ((s1 | s3) & !C & X(!C U (s2 & !C)))",
          "!C U ((s1 | s2) & !C & X(!C U (s2 & s3 & !C)))"})
        check_language_sampled(s, ap, 6, 2000, 20260814);
}

TEST_CASE("construction is deterministic", "[dfa]") {
    Alphabet ap = Alphabet::parse_list("s1,s2,s3,C");
    const std::string text = "!C U (s1 & !C & X((!C U (s2 & !C)) & (!C U (s3 & !C))))";
    FormulaSet f1, f2;
    Dfa a = to_dfa(f1, parse_formula(f1, text, ap), ap);
    Dfa b = to_dfa(f2, parse_formula(f2, text, ap), ap);
    REQUIRE(a.delta == b.delta);
    REQUIRE(a.accepting == b.accepting);
    REQUIRE(a.initial == b.initial);
    REQUIRE(a.sink == b.sink);
}

TEST_CASE("automaton shapes", "[dfa]") {
    Alphabet ap = Alphabet::parse_list("a,b,c");
    FormulaSet fs;

    Dfa t = to_dfa(fs, parse_formula(fs, "true", ap), ap);
    REQUIRE(t.num_states == 1);
    REQUIRE(t.sink == -1);
    REQUIRE(t.accepting[t.initial]);

    Dfa fa = to_dfa(fs, parse_formula(fs, "F a", ap), ap);
    REQUIRE(fa.num_states == 2);
    REQUIRE(fa.sink == -1);  // eventually-a never strands

    Dfa u = to_dfa(fs, parse_formula(fs, "a U b", ap), ap);
    REQUIRE(u.num_states == 3);
    REQUIRE(u.sink != -1);
    int acc_count = 0;
    for (int q = 0; q < u.num_states; ++q) acc_count += u.accepting[q];
    REQUIRE(acc_count == 1);

    // the accepting state is absorbing and carries the residual "true"
    for (int q = 0; q < u.num_states; ++q)
        if (u.accepting[q]) {
            REQUIRE(u.state_formula[q] == fs.true_id());
            for (Symbol s = 0; s < u.num_symbols; ++s) REQUIRE(u.step(q, s) == q);
        }
}

TEST_CASE("sequenced three goal formula yields six states", "[dfa]") {
    Alphabet ap = Alphabet::parse_list("s1,s2,s3,C");
    FormulaSet fs;
    int f = parse_formula(
        fs, "!C U (s1 & !C & X((!C U (s2 & !C)) & (!C U (s3 & !C))))", ap);
    Dfa d = to_dfa(fs, f, ap);
    REQUIRE(d.num_states == 6);
    REQUIRE(d.sink == 5);
    int acc_count = 0;
    for (int q = 0; q < d.num_states; ++q) acc_count += d.accepting[q];
    REQUIRE(acc_count == 1);

    // two-goal variants share the same skeleton minus the branch states
    int g2 = parse_formula(fs, "!C U ((s1 | s3) & !C & X(!C U (s2 & !C)))", ap);
    REQUIRE(to_dfa(fs, g2, ap).num_states == 4);
    int g3 = parse_formula(fs, "!C U ((s1 | s2) & !C & X(!C U (s2 & s3 & !C)))", ap);
    REQUIRE(to_dfa(fs, g3, ap).num_states == 4);
}

TEST_CASE("unsatisfiable and oversized inputs are rejected", "[dfa]") {
    Alphabet ap = Alphabet::parse_list("a,b,c");
    FormulaSet fs;
    REQUIRE_THROWS_AS(to_dfa(fs, parse_formula(fs, "a & !a", ap), ap), std::runtime_error);
    int f = parse_formula(fs, "F (a & F (b & F c))", ap);
    REQUIRE_THROWS_AS(to_dfa(fs, f, ap, 2), std::runtime_error);
}
