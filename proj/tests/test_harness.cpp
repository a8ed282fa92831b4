#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "coplan/harness.hpp"

using namespace coplan;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("coplan_harness_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig bundled_config() {
    ExperimentConfig c;
    c.tasks = default_task_formulas();
    return c;
}

const fs::path kDataDir = COPLAN_DATA_DIR;

}  // namespace

TEST_CASE("relative gap computes both norms against the reference", "[harness]") {
    std::vector<double> a{1.0, 2.0, 2.0}, b{1.0, 2.0, 4.0};
    auto [e2, einf] = relative_gap(a, b);
    REQUIRE(e2 == Catch::Approx(2.0 / std::sqrt(21.0)));
    REQUIRE(einf == Catch::Approx(0.5));
    auto [z2, zinf] = relative_gap(b, b);
    REQUIRE(z2 == 0.0);
    REQUIRE(zinf == 0.0);
    REQUIRE_THROWS_AS(relative_gap(a, {1.0}), std::invalid_argument);
    REQUIRE_THROWS_AS(relative_gap({0.0}, {0.0}), std::invalid_argument);
}

TEST_CASE("prepare_experiment solves each task once and shares primitives", "[harness]") {
    ExperimentContext ctx;
    prepare_experiment(bundled_config(), ctx, kDataDir);
    REQUIRE(ctx.tasks.size() == 3);
    REQUIRE(ctx.primitives.size() >= 3);
    for (const TaskSetup& t : ctx.tasks) {
        CAPTURE(t.name);
        REQUIRE(t.pm.initial >= 0);
        REQUIRE(!t.macros.empty());
        REQUIRE(t.macros.size() <= t.inventory.size());
        REQUIRE(t.mm.num_options == (int)t.macros.size());
        for (const OptionPolicy& o : t.macros) REQUIRE(!o.task.empty_goal);
    }
    // phi1 keeps a lateral option with an empty goal out of the macro pool
    REQUIRE(ctx.tasks[0].macros.size() < ctx.tasks[0].inventory.size());
}

TEST_CASE("run_all writes the artifact tree and passes every gate", "[harness]") {
    TempDir tmp;
    fs::path out = tmp.path / "results";
    RunReport rep = run_all(bundled_config(), out, kDataDir);

    for (const Gate& g : rep.gates) {
        CAPTURE(g.name, g.detail);
        CHECK(g.pass);
    }
    REQUIRE(rep.pass);

    for (const char* rel :
         {"config.json", "report.json", "summary.md", "composition/config.json",
          "composition/fig3_or_composed.csv", "composition/fig3_or_direct.csv",
          "composition/fig3_and_composed.csv", "composition/fig3_and_direct.csv",
          "planners/config.json", "planners/table1.csv", "planners/timings.txt",
          "planners/fig4_phi1.csv", "planners/fig4_phi2.csv", "planners/fig4_phi3.csv",
          "deviation/config.json", "deviation/table2.csv", "table1.csv", "table2.csv",
          "fig3_or_composed.csv", "fig3_and_direct.csv", "fig4_phi1.csv"}) {
        CAPTURE(rel);
        REQUIRE(fs::exists(out / rel));
    }

    REQUIRE(rep.planners.tasks.size() == 3);
    for (const PlannerTaskResult& tr : rep.planners.tasks) {
        REQUIRE(tr.runs.size() == 4);
        for (const PlannerRun& run : tr.runs) {
            CAPTURE(tr.task, run.planner);
            REQUIRE(run.p >= 0.0);
            REQUIRE(run.p <= 1.0);
            REQUIRE(run.iterations >= 1);
        }
    }
    REQUIRE(rep.deviation.rows.size() == 6);

    // report.json round-trips as JSON and carries no wall-clock fields
    Json rj = Json::parse(slurp(out / "report.json"));
    REQUIRE(rj["pass"].get<bool>());
    REQUIRE(rj["planners"].size() == 3);
    REQUIRE(slurp(out / "report.json").find("seconds") == std::string::npos);

    // heatmaps are height-many rows of width-many cells in [0, alpha]
    std::string heat = slurp(out / "composition/fig3_or_composed.csv");
    int rows = 0;
    std::istringstream hs(heat);
    std::string line;
    while (std::getline(hs, line))
        if (!line.empty()) ++rows;
    REQUIRE(rows == 8);
}

TEST_CASE("identical configs produce byte-identical reports", "[harness]") {
    TempDir tmp;
    RunReport r1 = run_all(bundled_config(), tmp.path / "a", kDataDir);
    RunReport r2 = run_all(bundled_config(), tmp.path / "b", kDataDir);
    REQUIRE(r1.pass);
    REQUIRE(r2.pass);
    REQUIRE(slurp(tmp.path / "a/report.json") == slurp(tmp.path / "b/report.json"));
    REQUIRE(slurp(tmp.path / "a/table1.csv") == slurp(tmp.path / "b/table1.csv"));
    REQUIRE(slurp(tmp.path / "a/table2.csv") == slurp(tmp.path / "b/table2.csv"));
    REQUIRE(slurp(tmp.path / "a/fig3_and_composed.csv") ==
            slurp(tmp.path / "b/fig3_and_composed.csv"));
    REQUIRE(slurp(tmp.path / "a/fig4_phi2.csv") == slurp(tmp.path / "b/fig4_phi2.csv"));
}

TEST_CASE("composition study requires the bundled region labels", "[harness]") {
    TempDir tmp;
    write_text_file(tmp.path / "plain.json",
                    "{\"width\":3,\"height\":3,\"slip\":0.7,\"obstacles\":[],"
                    "\"labels\":{\"1\":[[0,0]]},\"s0\":[1,1]}");
    ExperimentConfig c;
    c.grid = "plain.json";
    c.tasks = {{"t", "F s1"}};
    ExperimentContext ctx;
    prepare_experiment(c, ctx, tmp.path);
    REQUIRE_THROWS_AS(run_composition_study(ctx, tmp.path / "out"), std::runtime_error);
}
