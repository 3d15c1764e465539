#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "acquisition.hpp"
#include "gp.hpp"
#include "pareto.hpp"
#include "problems.hpp"

namespace moeeqi {

enum class Comparator { moeeqi, moeei };

inline std::string_view to_string(Comparator c) { return c == Comparator::moeeqi ? "moeeqi" : "moeei"; }

struct ModeSpan {
    ImprovementMode mode = ImprovementMode::aggressive;
    int iterations = 0;
};

struct RunConfig {
    double beta = 0.7;
    int mc_samples = 10;
    int iterations = 9;
    int initial_design_size = 5;
    int grid_resolution = 100;
    /// Empty means aggressive throughout.
    std::vector<ModeSpan> mode_schedule;
    Comparator comparator = Comparator::moeeqi;
    std::uint64_t seed = 1;
    bool refit_hyperparameters = true;
    bool literal_constraint_formula = false;
    /// Stop early once the best score falls below this.
    std::optional<double> min_score;
    int fit_restarts = 5;
    int design_restarts = 20;
    /// Control dimensions held at a fixed value.
    std::map<std::size_t, double> fixed_controls;

    void validate() const {
        if (!(beta >= 0.5 && beta < 1.0)) throw std::invalid_argument("RunConfig: beta must lie in [0.5, 1)");
        if (mc_samples < 2) throw std::invalid_argument("RunConfig: mc_samples must be >= 2");
        if (iterations < 0) throw std::invalid_argument("RunConfig: iterations must be >= 0");
        if (initial_design_size < 2) throw std::invalid_argument("RunConfig: initial_design_size must be >= 2");
        if (grid_resolution < 2) throw std::invalid_argument("RunConfig: grid_resolution must be >= 2");
        if (fit_restarts < 1) throw std::invalid_argument("RunConfig: fit_restarts must be >= 1");
        if (!mode_schedule.empty()) {
            int total = 0;
            for (const auto& s : mode_schedule) {
                if (s.iterations < 0) throw std::invalid_argument("RunConfig: negative schedule count");
                total += s.iterations;
            }
            if (total != iterations)
                throw std::invalid_argument("RunConfig: mode_schedule counts must sum to iterations");
        }
    }

    /// Mode in force at 1-based iteration `it`.
    ImprovementMode mode_at(int it) const {
        int seen = 0;
        for (const auto& s : mode_schedule) {
            seen += s.iterations;
            if (it <= seen) return s.mode;
        }
        return ImprovementMode::aggressive;
    }

    ConstraintRule constraint_rule() const {
        return literal_constraint_formula ? ConstraintRule::literal_variance : ConstraintRule::sd;
    }
};

struct IterationRecord {
    int iteration = 0;
    ImprovementMode mode = ImprovementMode::aggressive;
    ControlPoint chosen;
    double score = 0.0;
    bool replicated = false;
    bool fallback = false;
    /// Front after this iteration's update.
    ParetoFront front;
};

struct RunState {
    std::array<GpDataset, 2> datasets;
    std::vector<GpEmulator> emulators;
    /// Iteration at which each design location was first added (0 = initial design).
    std::vector<int> iteration_added;
    int iteration = 0;
    ParetoFront initial_front;
    ParetoFront front;
    std::vector<IterationRecord> history;
    bool stopped_early = false;

    std::vector<double> score_trace() const {
        std::vector<double> t;
        for (const auto& r : history) t.push_back(r.score);
        return t;
    }
};

/// Settings that distinguish the acquisition variants.
struct AcquisitionSettings {
    double beta = 0.7;
    std::array<double, 2> future_noise{};
    ConstraintSpec constraints;
    ConstraintRule rule = ConstraintRule::sd;
};

inline AcquisitionSettings moeeqi_settings(const RunState& s, double beta, const ConstraintSpec& c,
                                           ConstraintRule rule) {
    return {beta, {future_noise(s.datasets[0]), future_noise(s.datasets[1])}, c, rule};
}

/// Plug-in variant: mean-based front, noiseless future observation.
inline AcquisitionSettings moeei_settings(const ConstraintSpec& c, ConstraintRule rule) {
    return {0.5, {0.0, 0.0}, c, rule};
}

inline std::array<QuantilePosterior, 2> candidate_posteriors(const RunState& s, const ControlPoint& x,
                                                             const AcquisitionSettings& a) {
    std::array<QuantilePosterior, 2> qp;
    for (std::size_t i = 0; i < 2; ++i) {
        const Posterior p = s.emulators[i].posterior(x);
        qp[i] = quantile_posterior(p.mean, p.variance, a.future_noise[i], a.beta);
    }
    return qp;
}

/// Quantile front over the current design locations, constraint filtered.
inline ParetoFront current_front(const RunState& s, const AcquisitionSettings& a) {
    std::vector<FrontPoint> pts;
    std::vector<std::array<double, 2>> sds;
    for (const auto& o : s.datasets[0].observations()) {
        const Posterior p1 = s.emulators[0].posterior(o.location);
        const Posterior p2 = s.emulators[1].posterior(o.location);
        pts.push_back({quantile(p1.mean, p1.sd(), a.beta), quantile(p2.mean, p2.sd(), a.beta), o.location});
        const auto qp = candidate_posteriors(s, o.location, a);
        sds.push_back({qp[0].sd, qp[1].sd});
    }
    return build_front(std::move(pts), a.constraints, sds, a.beta, a.rule);
}

/// MO-E-EQI of one candidate against `front`; zero when the candidate's
/// quantile posterior mean violates a noise-adjusted constraint.
inline double score_candidate(const RunState& s, const ParetoFront& front, const ControlPoint& x,
                              ImprovementMode mode, const AcquisitionSettings& a) {
    const auto qp = candidate_posteriors(s, x, a);
    for (std::size_t i = 0; i < 2; ++i)
        if (violates(a.constraints, i, qp[i].mean, qp[i].sd, a.beta, a.rule)) return 0.0;
    return moeeqi(front, qp[0], qp[1], mode);
}

struct Selection {
    ControlPoint point;
    double score = 0.0;
    std::size_t index = 0;
    /// No candidate scored above zero; picked by largest posterior variance.
    bool fallback = false;
};

/// Grid point with the largest summed posterior variance, first in grid
/// order on ties.
inline Selection variance_fallback(const RunState& s, std::span<const ControlPoint> grid) {
    if (grid.empty()) throw std::invalid_argument("select_next: empty grid");
    Selection best;
    best.fallback = true;
    double best_var = -1.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const double v = s.emulators[0].posterior(grid[g]).variance + s.emulators[1].posterior(grid[g]).variance;
        if (v > best_var) {
            best_var = v;
            best.index = g;
        }
    }
    best.point = grid[best.index];
    return best;
}

/// Scores every grid point and returns the first maximiser in grid order.
inline Selection select_with(const RunState& s, const ParetoFront& front, std::span<const ControlPoint> grid,
                             ImprovementMode mode, const AcquisitionSettings& a) {
    if (grid.empty()) throw std::invalid_argument("select_next: empty grid");
    if (front.empty()) throw std::invalid_argument("select_next: empty front");
    Selection best;
    best.score = -1.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const double sc = score_candidate(s, front, grid[g], mode, a);
        if (sc > best.score) {
            best.score = sc;
            best.index = g;
        }
    }
    if (!(best.score > 0)) return variance_fallback(s, grid);
    best.point = grid[best.index];
    return best;
}

inline Selection select_next(const RunState& s, std::span<const ControlPoint> grid, ImprovementMode mode,
                             double beta, const ConstraintSpec& c = {},
                             ConstraintRule rule = ConstraintRule::sd) {
    const auto a = moeeqi_settings(s, beta, c, rule);
    return select_with(s, current_front(s, a), grid, mode, a);
}

inline Selection moeei_select(const RunState& s, std::span<const ControlPoint> grid, ImprovementMode mode,
                              const ConstraintSpec& c = {}, ConstraintRule rule = ConstraintRule::sd) {
    const auto a = moeei_settings(c, rule);
    return select_with(s, current_front(s, a), grid, mode, a);
}

/// Raised when a run cannot continue; carries the iteration it failed at.
class RunError : public std::runtime_error {
public:
    RunError(int iteration, const std::string& what)
        : std::runtime_error("iteration " + std::to_string(iteration) + ": " + what), iteration_(iteration) {}
    int iteration() const { return iteration_; }

private:
    int iteration_;
};

namespace detail {

inline AcquisitionSettings settings_for(const RunState& s, const ProblemSpec& spec, const RunConfig& cfg) {
    return cfg.comparator == Comparator::moeeqi
               ? moeeqi_settings(s, cfg.beta, spec.constraints, cfg.constraint_rule())
               : moeei_settings(spec.constraints, cfg.constraint_rule());
}

inline void refit(RunState& s, const ProblemSpec& spec, const RunConfig& cfg, std::mt19937_64& rng) {
    const bool fresh = s.emulators.empty();
    std::vector<GpEmulator> ems;
    for (std::size_t i = 0; i < 2; ++i) {
        KernelParams params;
        if (fresh || cfg.refit_hyperparameters) {
            FitOptions opts;
            opts.restarts = cfg.fit_restarts;
            params = fit_hyperparameters(s.datasets[i], spec.bounds, default_fit_bounds(s.datasets[i]), rng, opts);
        } else {
            params = s.emulators[i].params();
        }
        ems.emplace_back(s.datasets[i], params, spec.bounds);
    }
    s.emulators = std::move(ems);
}

}  // namespace detail

/// Sequential design: initial space-filling design, Monte Carlo estimates,
/// emulators, then `iterations` rounds of grid-maximised acquisition with
/// replication when the chosen point is already in the design.
inline RunState run(const ProblemSpec& spec, const RunConfig& cfg) {
    spec.validate();
    cfg.validate();
    for (const auto& [k, v] : cfg.fixed_controls)
        if (k >= spec.bounds.dim() || v < spec.bounds.lower[k] || v > spec.bounds.upper[k])
            throw std::invalid_argument("RunConfig: fixed control out of range");

    std::mt19937_64 rng(cfg.seed);
    RunState s;

    auto design = initial_design(cfg.initial_design_size, spec.bounds, rng, cfg.design_restarts);
    for (auto& x : design)
        for (const auto& [k, v] : cfg.fixed_controls) x[k] = v;
    for (const auto& x : design) {
        if (s.datasets[0].find(x)) continue;
        const auto env = sample_environment(spec.env, cfg.mc_samples, rng);
        const McBatch b = simulate(spec, x, env);
        for (std::size_t i = 0; i < 2; ++i) s.datasets[i].add({x, b.mean[i], b.variance[i], 1});
        s.iteration_added.push_back(0);
    }

    try {
        detail::refit(s, spec, cfg, rng);
        s.front = current_front(s, detail::settings_for(s, spec, cfg));
    } catch (const std::exception& e) {
        throw RunError(0, e.what());
    }
    s.initial_front = s.front;

    const auto grid = candidate_grid(spec.bounds, cfg.grid_resolution, cfg.fixed_controls);
    for (int it = 1; it <= cfg.iterations; ++it) {
        try {
            const ImprovementMode mode = cfg.mode_at(it);
            const auto settings = detail::settings_for(s, spec, cfg);
            // With every design point infeasible there is no front to improve on.
            const Selection sel = s.front.empty() ? variance_fallback(s, grid)
                                                  : select_with(s, s.front, grid, mode, settings);
            if (cfg.min_score && !sel.fallback && sel.score < *cfg.min_score) {
                s.stopped_early = true;
                break;
            }

            const auto env = sample_environment(spec.env, cfg.mc_samples, rng);
            const McBatch b = simulate(spec, sel.point, env);
            IterationRecord rec;
            rec.iteration = it;
            rec.mode = mode;
            rec.chosen = sel.point;
            rec.score = sel.score;
            rec.fallback = sel.fallback;
            if (const auto j = s.datasets[0].find(sel.point)) {
                rec.replicated = true;
                for (std::size_t i = 0; i < 2; ++i) {
                    const auto m = merge_replicate(s.datasets[i][*j], sel.point, b.mean[i], b.variance[i],
                                                   cfg.mc_samples);
                    s.datasets[i].replace(*j, m.merged);
                }
            } else {
                for (std::size_t i = 0; i < 2; ++i) s.datasets[i].add({sel.point, b.mean[i], b.variance[i], 1});
                s.iteration_added.push_back(it);
            }
            detail::refit(s, spec, cfg, rng);
            s.front = current_front(s, detail::settings_for(s, spec, cfg));
            rec.front = s.front;
            s.history.push_back(std::move(rec));
            s.iteration = it;
        } catch (const RunError&) {
            throw;
        } catch (const std::exception& e) {
            throw RunError(it, e.what());
        }
    }
    return s;
}

struct Metrics {
    double mean_distance = 0.0;
    /// One entry per requested penalty factor.
    std::vector<double> penalized_distance;
    int front_size = 0;
    std::vector<double> moeeqi_trace;
};

/// Distance-to-truth summary of an estimated front. A point that no truth
/// point weakly dominates overestimates the front and has its distance
/// multiplied by each penalty factor. An empty estimate scores zero.
inline Metrics evaluate_metrics(const ParetoFront& estimate, const ParetoFront& truth,
                                std::span<const double> penalty_factors) {
    if (truth.empty()) throw std::invalid_argument("evaluate_metrics: empty truth front");
    Metrics m;
    m.front_size = int(estimate.size());
    m.penalized_distance.assign(penalty_factors.size(), 0.0);
    if (estimate.empty()) return m;
    for (const auto& p : estimate) {
        const auto& near = nearest_front_point(truth, {p.q1, p.q2});
        const double d = std::hypot(p.q1 - near.q1, p.q2 - near.q2);
        const bool over = std::none_of(truth.begin(), truth.end(), [&](const FrontPoint& t) {
            return t.q1 <= p.q1 && t.q2 <= p.q2;
        });
        m.mean_distance += d;
        for (std::size_t f = 0; f < penalty_factors.size(); ++f)
            m.penalized_distance[f] += over ? penalty_factors[f] * d : d;
    }
    const double n = double(estimate.size());
    m.mean_distance /= n;
    for (auto& v : m.penalized_distance) v /= n;
    return m;
}

inline Metrics evaluate_metrics(const RunState& s, const ParetoFront& truth,
                                std::span<const double> penalty_factors) {
    Metrics m = evaluate_metrics(s.front, truth, penalty_factors);
    m.moeeqi_trace = s.score_trace();
    return m;
}

}  // namespace moeeqi
