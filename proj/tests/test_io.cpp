#include <gtest/gtest.h>

#include <filesystem>

#include <moeeqi/io.hpp>

using namespace moeeqi;
using io::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("moeeqi_test_io_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string error_path(const std::function<void()>& f) {
    try {
        f();
    } catch (const io::ValidationError& e) {
        return e.path();
    }
    return "<no error>";
}

}  // namespace

TEST(Config, MissingBetaNamesTheField) {
    EXPECT_EQ(error_path([] { io::parse_config(json{{"iterations", 3}}); }), "config.beta");
}

TEST(Config, FieldPathsInNestedErrors) {
    EXPECT_EQ(error_path([] { io::parse_config(json{{"beta", 1.2}}); }), "config.beta");
    EXPECT_EQ(error_path([] { io::parse_config(json{{"beta", 0.7}, {"mc_samples", 1}}); }), "config.mc_samples");
    EXPECT_EQ(error_path([] { io::parse_config(json{{"beta", 0.7}, {"bogus", 1}}); }), "config.bogus");
    EXPECT_EQ(error_path([] {
                  io::parse_config(json::parse(R"({"beta":0.7,"iterations":2,
                      "mode_schedule":[{"mode":"aggressive","iterations":1},{"mode":"sideways","iterations":1}]})"));
              }),
              "config.mode_schedule[1].mode");
    EXPECT_EQ(error_path([] { io::parse_config(json::parse(R"({"beta":0.7,"study":{"betas":[0.7,1.5]}})")); }),
              "config.study.betas[1]");
    EXPECT_EQ(error_path([] { io::parse_problem(json::parse(R"({"kind":"toy","constraints":{"upper":[1,"x"]}})")); }),
              "problem.constraints.upper[1]");
    EXPECT_EQ(error_path([] { io::parse_problem(json::parse(R"({"kind":"other"})")); }), "problem.kind");
    EXPECT_EQ(error_path([] {
                  io::parse_problem(json::parse(R"({"kind":"toy","cost":{"dose_cost":1}})"));
              }),
              "problem.cost.doses_per_person");
}

TEST(Config, FullDocumentParses) {
    const auto c = io::parse_config(json::parse(R"({
        "beta": 0.9, "mc_samples": 12, "iterations": 6, "initial_design_size": 4, "grid_resolution": 30,
        "mode_schedule": [{"mode": "aggressive", "iterations": 4}, {"mode": "non_aggressive", "iterations": 2}],
        "comparator": "moeei", "seed": 77, "refit_hyperparameters": false, "literal_constraint_formula": true,
        "min_score": 1e-6, "fit_restarts": 2, "design_restarts": 3, "fixed_controls": {"1": 0.0},
        "study": {"betas": [0.5, 0.9], "include_moeei": false, "truth_resolution": 200}})"));
    EXPECT_EQ(c.run.beta, 0.9);
    EXPECT_EQ(c.run.mc_samples, 12);
    EXPECT_EQ(c.run.mode_at(5), ImprovementMode::non_aggressive);
    EXPECT_EQ(c.run.comparator, Comparator::moeei);
    EXPECT_EQ(c.run.seed, 77u);
    EXPECT_FALSE(c.run.refit_hyperparameters);
    EXPECT_EQ(c.run.constraint_rule(), ConstraintRule::literal_variance);
    EXPECT_EQ(c.run.min_score, std::optional<double>(1e-6));
    EXPECT_EQ(c.run.fixed_controls.at(1), 0.0);
    EXPECT_EQ(c.study.betas, (std::vector<double>{0.5, 0.9}));
    EXPECT_FALSE(c.study.include_moeei);
    EXPECT_NO_THROW(c.run.validate());
}

TEST(Problem, ConstraintsAndCost) {
    const auto p = io::parse_problem(json::parse(R"({"kind":"toy","a":0.5,"constraints":{"upper":[null,0.8]},
        "cost":{"dose_cost":10,"doses_per_person":2,"wastage":1.1,"population":1000,"horizon_years":1,
                "shelf_life_years":2,"center_setup":500,"staff_cost":3,"centers":2,"staff":4}})"));
    EXPECT_EQ(p.a, 0.5);
    EXPECT_FALSE(p.spec.constraints.upper[0]);
    EXPECT_EQ(p.spec.constraints.upper[1], std::optional<double>(0.8));
    ASSERT_TRUE(p.cost);
    EXPECT_EQ(p.cost->staff, 4.0);
}

TEST(Csv, FullPrecisionRoundTrip) {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::nextafter(1.0, 2.0)})
        EXPECT_EQ(std::stod(io::fmt(v)), v);
}

TEST(Csv, RunArtifactsRoundTrip) {
    RunConfig c;
    c.seed = 4;
    c.iterations = 3;
    c.grid_resolution = 20;
    const auto state = run(toy_problem(0.5), c);
    const auto dir = scratch("roundtrip");

    const auto obs = io::observations_table(state);
    io::write_table(dir / "observations.csv", obs);
    const auto back = io::read_table(dir / "observations.csv");
    EXPECT_EQ(back.header, obs.header);
    EXPECT_EQ(back.rows, obs.rows);
    for (std::size_t j = 0; j < state.datasets[0].size(); ++j) {
        EXPECT_EQ(back.number(j, "mean1"), state.datasets[0][j].mean);
        EXPECT_EQ(back.number(j, "variance2"), state.datasets[1][j].variance);
        EXPECT_EQ(back.number(j, "x2"), state.datasets[0][j].location[1]);
    }

    io::write_table(dir / "front.csv", io::front_table(state.front, 2));
    const auto f = io::read_front(io::read_table(dir / "front.csv"));
    ASSERT_EQ(f.size(), state.front.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        EXPECT_EQ(f[i].q1, state.front[i].q1);
        EXPECT_EQ(f[i].q2, state.front[i].q2);
        EXPECT_EQ(f[i].source, state.front[i].source);
    }

    const auto evo = io::evolution_table(state);
    io::write_table(dir / "evolution.csv", evo);
    EXPECT_EQ(io::read_table(dir / "evolution.csv").rows, evo.rows);
    EXPECT_EQ(evo.rows.size(), 3u);
}

TEST(Csv, ReadFrontRejectsNonStaircase) {
    io::Table t;
    t.header = {"q1", "q2"};
    t.rows = {{"0", "1"}, {"1", "2"}};
    EXPECT_THROW(io::read_front(t), std::runtime_error);
    t.rows = {{"1", "0"}, {"0", "1"}};
    EXPECT_THROW(io::read_front(t), std::runtime_error);
}

TEST(Study, QuantilesBracketTheMean) {
    std::vector<double> xs{3, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5, 8, 9, 7, 9, 3, 2, 3, 8, 4};
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= double(xs.size());
    EXPECT_LE(io::sample_quantile(xs, 0.05), mean);
    EXPECT_GE(io::sample_quantile(xs, 0.95), mean);
    EXPECT_EQ(io::sample_quantile(xs, 0.0), 1.0);
    EXPECT_EQ(io::sample_quantile(xs, 1.0), 9.0);
    EXPECT_DOUBLE_EQ(io::sample_quantile({0, 10}, 0.25), 2.5);
}

TEST(Study, RowAccountingAndBands) {
    const auto problem = io::parse_problem(json::parse(R"({"kind":"toy","a":0.5})"));
    const auto config = io::parse_config(json::parse(
        R"({"beta":0.7,"iterations":3,"grid_resolution":15,"study":{"betas":[0.7,0.9],"truth_resolution":100}})"));
    const auto dir = scratch("study");
    const auto res = io::run_study(problem, config, 4, 100, dir);
    EXPECT_EQ(res.runs, 12);
    EXPECT_EQ(res.failures, 0);

    const auto m = io::read_table(dir / "metrics.csv");
    std::map<std::string, int> per_variant;
    for (const auto& r : m.rows) ++per_variant[r[m.column("variant")]];
    EXPECT_EQ(per_variant.size(), 3u);
    for (const auto& [v, n] : per_variant) EXPECT_EQ(n, 4 * 3) << v;
    EXPECT_EQ(m.rows.front()[m.column("seed")], "101");

    const auto s = io::read_table(dir / "metrics_summary.csv");
    EXPECT_EQ(s.rows.size(), 3u * 3u);
    for (std::size_t i = 0; i < s.rows.size(); ++i)
        for (const std::string k : {"mean_distance", "penalized_5", "penalized_10", "front_size"}) {
            EXPECT_LE(s.number(i, k + "_q05"), s.number(i, k + "_mean") + 1e-12);
            EXPECT_GE(s.number(i, k + "_q95"), s.number(i, k + "_mean") - 1e-12);
        }
    EXPECT_TRUE(fs::exists(dir / "failures.csv"));
    EXPECT_TRUE(fs::exists(dir / "study_meta.json"));
}
