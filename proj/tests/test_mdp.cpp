#include <catch2/catch_amalgamated.hpp>

#include "coplan/mdp.hpp"

using namespace coplan;

namespace {

GridSpec demo_spec() {
    GridSpec g;
    g.width = 4;
    g.height = 3;
    g.slip = 0.7;
    g.init_x = 1;
    g.init_y = 1;
    g.regions[1] = {{0, 0}};
    g.regions[2] = {{3, 0}, {3, 1}};
    g.obstacles = {{2, 1}};
    return g;
}

double prob(const Mdp& m, int s, int a, int t) {
    for (auto [u, p] : m.row(s, a))
        if (u == t) return p;
    return 0.0;
}

}  // namespace

TEST_CASE("grid indexing, alphabet, labels", "[mdp]") {
    Mdp m = build_grid(demo_spec());
    REQUIRE(m.num_states == 12);
    REQUIRE(m.num_actions == 4);
    REQUIRE(m.initial == 1 * 4 + 1);
    REQUIRE(m.alphabet.names == std::vector<std::string>{"s1", "s2", "C"});
    REQUIRE(m.label[0] == 0b001);      // region 1 at (0,0)
    REQUIRE(m.label[3] == 0b010);      // region 2 at (3,0)
    REQUIRE(m.label[1 * 4 + 3] == 0b010);
    REQUIRE(m.label[1 * 4 + 2] == 0b100);  // obstacle
    REQUIRE(m.label[m.initial] == 0);

    GridSpec overlap = demo_spec();
    overlap.regions[2].push_back({0, 0});
    REQUIRE(build_grid(overlap).label[0] == 0b011);
}

TEST_CASE("slip model puts 0.075 on each side slot", "[mdp]") {
    Mdp m = build_grid(demo_spec());
    int s = 1 * 4 + 1;  // interior cell (1,1)
    // move up: intended (1,0); down/left/right/self each 0.075
    REQUIRE(prob(m, s, Up, 0 * 4 + 1) == Catch::Approx(0.7));
    REQUIRE(prob(m, s, Up, 2 * 4 + 1) == Catch::Approx(0.075));
    REQUIRE(prob(m, s, Up, 1 * 4 + 0) == Catch::Approx(0.075));
    REQUIRE(prob(m, s, Up, 1 * 4 + 2) == Catch::Approx(0.075));
    REQUIRE(prob(m, s, Up, s) == Catch::Approx(0.075));
}

TEST_CASE("off-grid mass stays put", "[mdp]") {
    Mdp m = build_grid(demo_spec());
    // corner (0,0) moving up: 0.7 (wall) + 0.075 (left wall) + 0.075 (stay)
    REQUIRE(prob(m, 0, Up, 0) == Catch::Approx(0.85));
    REQUIRE(prob(m, 0, Up, 1) == Catch::Approx(0.075));
    REQUIRE(prob(m, 0, Up, 4) == Catch::Approx(0.075));
    // corner moving right: only the left slot hits a wall
    REQUIRE(prob(m, 0, Right, 0) == Catch::Approx(0.075 + 0.7 * 0 + 0.075 + 0.075));
    REQUIRE(prob(m, 0, Right, 1) == Catch::Approx(0.7));
    // top edge (1,0) moving up: intended mass bounces back
    int e = 1;
    REQUIRE(prob(m, e, Up, e) == Catch::Approx(0.775));
    // every row is a distribution (validate() already enforces this; assert anyway)
    for (int s = 0; s < m.num_states; ++s)
        for (int a = 0; a < 4; ++a) {
            double sum = 0;
            for (auto [t, p] : m.row(s, a)) sum += p;
            REQUIRE(sum == Catch::Approx(1.0));
        }
}

TEST_CASE("grid rejects bad input", "[mdp]") {
    GridSpec g = demo_spec();
    g.obstacles.push_back({9, 9});
    REQUIRE_THROWS_AS(build_grid(g), std::invalid_argument);
    GridSpec h = demo_spec();
    h.slip = 1.5;
    REQUIRE_THROWS_AS(build_grid(h), std::invalid_argument);
}

TEST_CASE("task binding marks goals, unsafe, absorbing", "[mdp]") {
    Mdp m = build_grid(demo_spec());
    // goal: any label containing s2 but not C; unsafe: any label containing C
    SymbolSet goal, unsafe;
    for (Symbol s = 0; s < m.alphabet.num_symbols(); ++s) {
        if ((s >> 2) & 1u) unsafe.push_back(s);
        else if ((s >> 1) & 1u) goal.push_back(s);
    }
    TaskMdp t = bind_task(m, goal, unsafe);
    REQUIRE_FALSE(t.empty_goal);
    REQUIRE(t.goal[3]);
    REQUIRE(t.goal[1 * 4 + 3]);
    REQUIRE(t.unsafe[1 * 4 + 2]);
    REQUIRE(t.absorbing[3]);
    REQUIRE_FALSE(t.absorbing[m.initial]);
    int absorbing = 0;
    for (int s = 0; s < m.num_states; ++s) absorbing += t.absorbing[s];
    REQUIRE(absorbing == 3);

    // goal mass: from (2,0), moving right lands on the goal with prob 0.7
    REQUIRE(t.goal_mass(2, Right) == Catch::Approx(0.7));
    REQUIRE(t.goal_mass(2, Left) == Catch::Approx(0.075));

    // unsafe wins when a label is claimed by both sets
    TaskMdp both = bind_task(m, {0b100, 0b010}, {0b100});
    REQUIRE(both.unsafe[1 * 4 + 2]);
    REQUIRE_FALSE(both.goal[1 * 4 + 2]);

    // empty goal is flagged, not fatal
    TaskMdp none = bind_task(m, {0b011}, {});
    REQUIRE(none.empty_goal);

    REQUIRE_THROWS_AS(bind_task(m, {1u << 30}, {}), std::invalid_argument);
}
