#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include <moeeqi/optimizer.hpp>

#include "oracles.hpp"

using namespace moeeqi;

namespace {

RunConfig small_config(std::uint64_t seed = 3) {
    RunConfig c;
    c.seed = seed;
    c.iterations = 4;
    c.grid_resolution = 25;
    return c;
}

/// State fitted to a hand-made dataset, with the same dataset for both
/// objectives' locations.
RunState fitted_state(const std::vector<NoisyObservation>& o1, const std::vector<NoisyObservation>& o2,
                      const KernelParams& p, const Box& box) {
    RunState s;
    s.datasets = {GpDataset(o1), GpDataset(o2)};
    for (std::size_t i = 0; i < 2; ++i) s.emulators.emplace_back(s.datasets[i], p, box);
    return s;
}

KernelParams unit_params(double ell = 0.3) {
    KernelParams p;
    p.process_variance = 1.0;
    p.lengthscales = {ell, ell};
    return p;
}

}  // namespace

TEST(Config, Validation) {
    RunConfig c;
    EXPECT_NO_THROW(c.validate());
    c.beta = 1.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.mc_samples = 1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.mode_schedule = {{ImprovementMode::aggressive, 4}, {ImprovementMode::non_aggressive, 4}};
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c.iterations = 8;
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.mode_at(4), ImprovementMode::aggressive);
    EXPECT_EQ(c.mode_at(5), ImprovementMode::non_aggressive);
}

TEST(Run, ZeroIterationsGivesInitialFit) {
    auto c = small_config();
    c.iterations = 0;
    const auto s = run(toy_problem(0.5), c);
    EXPECT_TRUE(s.history.empty());
    EXPECT_EQ(s.datasets[0].size(), 5u);
    ASSERT_FALSE(s.front.empty());
    // Front equals the non-dominated set of design-point quantiles.
    std::vector<FrontPoint> pts;
    for (const auto& o : s.datasets[0].observations())
        pts.push_back({s.emulators[0].quantile(o.location, c.beta), s.emulators[1].quantile(o.location, c.beta),
                       o.location});
    const ParetoFront expect(pts);
    ASSERT_EQ(expect.size(), s.front.size());
    for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_EQ(expect[i].source, s.front[i].source);
}

TEST(Run, BenchmarkProtocolStaysWithinBudget) {
    RunConfig c;
    c.seed = 11;
    const auto s = run(toy_problem(0.0), c);
    EXPECT_EQ(s.history.size(), 9u);
    EXPECT_LE(s.datasets[0].size(), 14u);
    for (std::size_t i = 1; i < s.front.size(); ++i) {
        EXPECT_LT(s.front[i - 1].q1, s.front[i].q1);
        EXPECT_GT(s.front[i - 1].q2, s.front[i].q2);
    }
}

TEST(Run, DeterministicForSeed) {
    const auto a = run(toy_problem(0.5), small_config(21));
    const auto b = run(toy_problem(0.5), small_config(21));
    ASSERT_EQ(a.history.size(), b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        EXPECT_EQ(a.history[i].chosen, b.history[i].chosen);
        EXPECT_EQ(a.history[i].score, b.history[i].score);
    }
    for (std::size_t j = 0; j < a.datasets[1].size(); ++j) EXPECT_EQ(a.datasets[1][j].mean, b.datasets[1][j].mean);
}

TEST(Run, DatasetsStayAlignedAndTraceNonNegative) {
    auto c = small_config(5);
    c.iterations = 8;
    const auto s = run(toy_problem(0.5), c);
    ASSERT_EQ(s.datasets[0].size(), s.datasets[1].size());
    for (std::size_t j = 0; j < s.datasets[0].size(); ++j) {
        EXPECT_EQ(s.datasets[0][j].location, s.datasets[1][j].location);
        EXPECT_EQ(s.datasets[0][j].replications, s.datasets[1][j].replications);
    }
    int reps = 0;
    for (const auto& o : s.datasets[0].observations()) reps += o.replications;
    EXPECT_EQ(reps, 5 + 8);
    for (double v : s.score_trace()) EXPECT_GE(v, 0.0);
    for (const auto& h : s.history) {
        const bool existed_before = std::count(s.iteration_added.begin(), s.iteration_added.end(), h.iteration) == 0;
        EXPECT_EQ(h.replicated, existed_before);
    }
}

TEST(Run, ScheduleRecordsModes) {
    auto c = small_config(6);
    c.iterations = 4;
    c.mode_schedule = {{ImprovementMode::aggressive, 2}, {ImprovementMode::non_aggressive, 2}};
    const auto s = run(toy_problem(0.5), c);
    ASSERT_EQ(s.history.size(), 4u);
    EXPECT_EQ(s.history[1].mode, ImprovementMode::aggressive);
    EXPECT_EQ(s.history[2].mode, ImprovementMode::non_aggressive);
}

TEST(Run, FixedControlsHonoured) {
    auto c = small_config(7);
    c.fixed_controls = {{1, 0.0}};
    const auto s = run(toy_problem(0.5), c);
    for (const auto& o : s.datasets[0].observations()) EXPECT_EQ(o.location[1], 0.0);
    c.fixed_controls = {{1, 2.0}};
    EXPECT_THROW(run(toy_problem(0.5), c), std::invalid_argument);
}

TEST(Run, EarlyStopOnThreshold) {
    auto c = small_config(8);
    c.min_score = 1e9;
    const auto s = run(toy_problem(0.5), c);
    EXPECT_TRUE(s.stopped_early);
    EXPECT_TRUE(s.history.empty());
}

TEST(Run, ConstrainedFrontRespectsBounds) {
    ConstraintSpec cs;
    cs.upper[1] = 0.6;
    auto c = small_config(9);
    for (bool literal : {false, true}) {
        c.literal_constraint_formula = literal;
        const auto s = run(toy_problem(0.5, cs), c);
        const auto a = moeeqi_settings(s, c.beta, cs, c.constraint_rule());
        for (const auto& p : s.front) {
            const auto qp = candidate_posteriors(s, p.source, a);
            EXPECT_FALSE(violates(cs, 1, p.q2, qp[1].sd, c.beta, c.constraint_rule()));
        }
    }
}

TEST(Select, PicksFarDominatingPoint) {
    const Box box = unit_box(2);
    std::vector<NoisyObservation> o1{{{0.1, 0.1}, 1.0, 0.0, 1}, {{0.9, 0.9}, 1.2, 0.0, 1}, {{0.1, 0.9}, 1.1, 0.0, 1}},
        o2{{{0.1, 0.1}, 1.0, 0.0, 1}, {{0.9, 0.9}, 0.8, 0.0, 1}, {{0.1, 0.9}, 1.3, 0.0, 1}};
    o1.push_back({{0.9, 0.1}, -5.0, 0.0, 1});
    o2.push_back({{0.9, 0.1}, -5.0, 0.0, 1});
    const auto s = fitted_state(o1, o2, unit_params(0.1), box);
    // The grid holds one point right on the very good observation.
    const std::vector<ControlPoint> grid{{0.5, 0.5}, {0.9, 0.1}, {0.3, 0.6}};
    // Build the front without the good point so it is an improvement.
    RunState front_only = fitted_state({o1.begin(), o1.end() - 1}, {o2.begin(), o2.end() - 1}, unit_params(0.1), box);
    const AcquisitionSettings a{0.7, {0.0, 0.0}, {}, ConstraintRule::sd};
    const auto sel = select_with(s, current_front(front_only, a), grid, ImprovementMode::aggressive, a);
    EXPECT_EQ(sel.index, 1u);
    EXPECT_FALSE(sel.fallback);
}

TEST(Select, AllZeroScoresFallBackToVariance) {
    const Box box = unit_box(2);
    std::vector<NoisyObservation> o{{{0.1, 0.1}, 0.0, 0.0, 1}, {{0.9, 0.9}, 0.0, 0.0, 1}};
    const auto s = fitted_state(o, o, unit_params(0.2), box);
    // Candidates are the design points themselves: no uncertainty, no gain.
    const std::vector<ControlPoint> grid{{0.1, 0.1}, {0.9, 0.9}, {0.5, 0.5}};
    const AcquisitionSettings a{0.7, {0.0, 0.0}, {}, ConstraintRule::sd};
    ParetoFront f(std::vector<FrontPoint>{{-100.0, -100.0, {}}});
    const auto sel = select_with(s, f, grid, ImprovementMode::aggressive, a);
    EXPECT_TRUE(sel.fallback);
    EXPECT_EQ(sel.index, 2u);
}

TEST(Select, ScoresMatchPerPointRecomputation) {
    const auto s = run(toy_problem(0.5), small_config(12));
    const auto a = moeeqi_settings(s, 0.7, {}, ConstraintRule::sd);
    const auto front = current_front(s, a);
    std::vector<std::array<double, 2>> pts;
    for (const auto& p : front) pts.push_back({p.q1, p.q2});
    const auto grid = candidate_grid(toy_bounds(), 9);
    for (std::size_t g : {3u, 17u, 40u, 55u, 78u}) {
        const auto& x = grid[g];
        const auto p1 = s.emulators[0].posterior(x), p2 = s.emulators[1].posterior(x);
        const auto q1 = quantile_posterior(p1.mean, p1.variance, future_noise(s.datasets[0]), 0.7);
        const auto q2 = quantile_posterior(p2.mean, p2.variance, future_noise(s.datasets[1]), 0.7);
        const auto quad = oracle::region_quadrature(pts, q1.mean, q1.sd, q2.mean, q2.sd, ImprovementMode::aggressive);
        double d = 1e300;
        for (const auto& p : pts) d = std::min(d, std::hypot(p[0] - quad.m1 / quad.mass, p[1] - quad.m2 / quad.mass));
        EXPECT_NEAR(score_candidate(s, front, x, ImprovementMode::aggressive, a), quad.mass * d, 1e-7);
    }
}

TEST(Comparator, AgreesWithQuantileCriterionOnNoiseFreeData) {
    const Box box = unit_box(2);
    std::vector<NoisyObservation> o1{{{0.1, 0.2}, 1.0, 0.0, 1}, {{0.7, 0.9}, 0.2, 0.0, 1}, {{0.4, 0.5}, 0.6, 0.0, 1}},
        o2{{{0.1, 0.2}, 0.1, 0.0, 1}, {{0.7, 0.9}, 0.9, 0.0, 1}, {{0.4, 0.5}, 0.5, 0.0, 1}};
    const auto s = fitted_state(o1, o2, unit_params(0.3), box);
    const auto grid = candidate_grid(box, 15);
    const auto a = select_next(s, grid, ImprovementMode::aggressive, 0.5);
    const auto b = moeei_select(s, grid, ImprovementMode::aggressive);
    EXPECT_EQ(a.index, b.index);
    EXPECT_DOUBLE_EQ(a.score, b.score);
}

// With noisy data the quantile criterion assumes the next observation is
// itself noisy, which shrinks the quantile spread at a design location; the
// plug-in variant assumes an exact observation and keeps the full posterior
// spread there.
TEST(Comparator, FutureNoiseSeparatesTheCriteriaAtDesignPoints) {
    const Box box = unit_box(2);
    std::vector<NoisyObservation> o1{{{0.1, 0.2}, 1.0, 0.3, 1}, {{0.7, 0.9}, 0.2, 0.3, 1}, {{0.4, 0.5}, 0.6, 0.3, 1}},
        o2{{{0.1, 0.2}, 0.1, 0.3, 1}, {{0.7, 0.9}, 0.9, 0.3, 1}, {{0.4, 0.5}, 0.5, 0.3, 1}};
    const auto s = fitted_state(o1, o2, unit_params(0.3), box);
    const auto eqi_settings = moeeqi_settings(s, 0.7, {}, ConstraintRule::sd);
    const auto ei_settings = moeei_settings({}, ConstraintRule::sd);
    for (const auto& o : s.datasets[0].observations()) {
        const auto q = candidate_posteriors(s, o.location, eqi_settings);
        const auto e = candidate_posteriors(s, o.location, ei_settings);
        EXPECT_LT(q[0].sd, e[0].sd);
        EXPECT_LT(q[1].sd, e[1].sd);
        EXPECT_DOUBLE_EQ(e[0].sd, s.emulators[0].posterior(o.location).sd());
    }
}

TEST(Comparator, PlugInRunIsDeterministic) {
    auto c = small_config(13);
    c.comparator = Comparator::moeei;
    const auto a = run(toy_problem(0.5), c), b = run(toy_problem(0.5), c);
    ASSERT_EQ(a.history.size(), b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].chosen, b.history[i].chosen);
}

TEST(Metrics, ExactFrontHasZeroDistance) {
    const auto truth = true_pareto_front(50);
    const std::vector<double> factors{5, 10};
    const auto m = evaluate_metrics(truth, truth, factors);
    EXPECT_EQ(m.mean_distance, 0.0);
    EXPECT_EQ(m.penalized_distance, (std::vector<double>{0.0, 0.0}));
    EXPECT_EQ(m.front_size, int(truth.size()));
}

TEST(Metrics, PenaltyOnlyForOverestimates) {
    const ParetoFront truth(std::vector<FrontPoint>{{0, 1, {}}, {1, 0, {}}});
    const std::vector<double> factors{5, 10};
    // Dominated by (1, 0): feasible side, no penalty.
    auto m = evaluate_metrics(ParetoFront(std::vector<FrontPoint>{{1.0, 0.3, {}}}), truth, factors);
    EXPECT_NEAR(m.mean_distance, 0.3, 1e-15);
    EXPECT_NEAR(m.penalized_distance[0], 0.3, 1e-15);
    // Dominates every truth point: distance to nearest is hypot(0.3, 0.4) = 0.5.
    m = evaluate_metrics(ParetoFront(std::vector<FrontPoint>{{-0.3, 0.6, {}}}), truth, factors);
    EXPECT_NEAR(m.mean_distance, 0.5, 1e-15);
    EXPECT_NEAR(m.penalized_distance[0], 2.5, 1e-14);
    EXPECT_NEAR(m.penalized_distance[1], 5.0, 1e-14);
}

TEST(Metrics, EmptyEstimateAndEmptyTruth) {
    const auto truth = true_pareto_front(10);
    const std::vector<double> factors{5};
    const auto m = evaluate_metrics(ParetoFront{}, truth, factors);
    EXPECT_EQ(m.front_size, 0);
    EXPECT_THROW(evaluate_metrics(truth, ParetoFront{}, factors), std::invalid_argument);
}
