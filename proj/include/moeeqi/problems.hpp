#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "gp.hpp"
#include "pareto.hpp"

namespace moeeqi {

struct UniformDist {
    double lo = 0.0;
    double hi = 1.0;
};

struct NormalDist {
    double mu = 0.0;
    double sd = 1.0;
};

/// Distribution of one environmental variable.
using EnvDistribution = std::variant<UniformDist, NormalDist>;

inline void validate(const EnvDistribution& d) {
    if (const auto* u = std::get_if<UniformDist>(&d)) {
        if (!(std::isfinite(u->lo) && std::isfinite(u->hi) && u->lo < u->hi))
            throw std::invalid_argument("uniform environment variable needs finite lo < hi");
    } else {
        const auto& n = std::get<NormalDist>(d);
        if (!(std::isfinite(n.mu) && n.sd > 0 && std::isfinite(n.sd)))
            throw std::invalid_argument("normal environment variable needs finite mu and sd > 0");
    }
}

using EnvSample = std::vector<double>;

/// N independent joint draws of the environmental variables.
inline std::vector<EnvSample> sample_environment(std::span<const EnvDistribution> env, int n,
                                                 std::mt19937_64& rng) {
    if (n < 1) throw std::invalid_argument("sample_environment: N must be >= 1");
    for (const auto& d : env) validate(d);
    std::vector<EnvSample> out(std::size_t(n), EnvSample(env.size()));
    for (auto& s : out) {
        for (std::size_t k = 0; k < env.size(); ++k) {
            s[k] = std::visit(
                [&](const auto& d) -> double {
                    using T = std::decay_t<decltype(d)>;
                    if constexpr (std::is_same_v<T, UniformDist>)
                        return std::uniform_real_distribution<double>(d.lo, d.hi)(rng);
                    else
                        return std::normal_distribution<double>(d.mu, d.sd)(rng);
                },
                env[k]);
        }
    }
    return out;
}

/// Monte Carlo summary of a batch of evaluations.
struct McBatch {
    std::array<double, 2> mean{};
    /// Unbiased sample variance divided by N.
    std::array<double, 2> variance{};
    int n = 0;
    /// Raw draws per objective; only filled when requested.
    std::array<std::vector<double>, 2> draws{};
};

/// Single-objective mean and variance-of-the-mean (Welford).
inline std::pair<double, double> mean_and_variance_of_mean(std::span<const double> xs) {
    if (xs.size() < 2) throw std::invalid_argument("mc_aggregate: need N >= 2 draws");
    double mean = 0.0, m2 = 0.0;
    std::size_t k = 0;
    for (double x : xs) {
        ++k;
        const double d = x - mean;
        mean += d / double(k);
        m2 += d * (x - mean);
    }
    const double n = double(xs.size());
    return {mean, std::max(0.0, m2 / (n - 1.0)) / n};
}

inline McBatch mc_aggregate(std::span<const double> draws1, std::span<const double> draws2,
                            bool keep_draws = false) {
    if (draws1.size() != draws2.size())
        throw std::invalid_argument("mc_aggregate: objectives have different draw counts");
    McBatch b;
    b.n = int(draws1.size());
    std::tie(b.mean[0], b.variance[0]) = mean_and_variance_of_mean(draws1);
    std::tie(b.mean[1], b.variance[1]) = mean_and_variance_of_mean(draws2);
    if (keep_draws) {
        b.draws[0].assign(draws1.begin(), draws1.end());
        b.draws[1].assign(draws2.begin(), draws2.end());
    }
    return b;
}

/// Bi-objective simulator response h(x_c, x_e).
using Evaluator = std::function<std::array<double, 2>(const ControlPoint&, const EnvSample&)>;
/// Environment-averaged objectives, when known in closed form.
using GroundTruth = std::function<std::array<double, 2>(const ControlPoint&)>;

struct ProblemSpec {
    std::string name;
    Evaluator evaluator;
    std::vector<EnvDistribution> env;
    Box bounds;
    ConstraintSpec constraints;
    std::optional<GroundTruth> ground_truth;

    void validate() const {
        if (!evaluator) throw std::invalid_argument("ProblemSpec: evaluator missing");
        bounds.validate();
        for (const auto& d : env) moeeqi::validate(d);
    }
};

/// Runs the evaluator on every env sample at xc and aggregates.
inline McBatch simulate(const ProblemSpec& spec, const ControlPoint& xc,
                        std::span<const EnvSample> samples, bool keep_draws = false) {
    std::vector<double> h1, h2;
    h1.reserve(samples.size());
    h2.reserve(samples.size());
    for (const auto& xe : samples) {
        const auto h = spec.evaluator(xc, xe);
        h1.push_back(h[0]);
        h2.push_back(h[1]);
    }
    return mc_aggregate(h1, h2, keep_draws);
}

// Two-control, two-environment benchmark pair.

inline Box toy_bounds() { return Box{{0.0, 0.0}, {std::numbers::pi / 2, 1.0}}; }

inline void check_toy_point(const ControlPoint& xc) {
    if (!toy_bounds().contains(xc))
        throw std::out_of_range("toy problem: control point outside [0, pi/2] x [0, 1]");
}

/// h1 = 1 - sin(xc1) + a cos(xe1) + (xc2 + xe2)/10,
/// h2 = 1 - cos(xc1) + a sin(xe1) + (xc2 + xe2)/3.
inline std::array<double, 2> toy_objectives(const ControlPoint& xc, const EnvSample& xe, double a) {
    check_toy_point(xc);
    if (xe.size() != 2) throw std::invalid_argument("toy_objectives: need two environment values");
    return {1.0 - std::sin(xc[0]) + a * std::cos(xe[0]) + (xc[1] + xe[1]) / 10.0,
            1.0 - std::cos(xc[0]) + a * std::sin(xe[0]) + (xc[1] + xe[1]) / 3.0};
}

/// Toy objectives with the environmental variables integrated out.
inline std::array<double, 2> ground_truth(const ControlPoint& xc) {
    check_toy_point(xc);
    return {1.0 - std::sin(xc[0]) + xc[1] / 10.0, 1.0 - std::cos(xc[0]) + xc[1] / 3.0};
}

inline std::vector<EnvDistribution> toy_environment() {
    return {UniformDist{-std::numbers::pi, std::numbers::pi}, NormalDist{0.0, 0.5}};
}

inline ProblemSpec toy_problem(double a, ConstraintSpec constraints = {}) {
    if (!(a >= 0)) throw std::invalid_argument("toy_problem: a must be >= 0");
    ProblemSpec p;
    p.name = "toy";
    p.evaluator = [a](const ControlPoint& xc, const EnvSample& xe) { return toy_objectives(xc, xe, a); };
    p.env = toy_environment();
    p.bounds = toy_bounds();
    p.constraints = constraints;
    p.ground_truth = GroundTruth(ground_truth);
    return p;
}

/// Full-factorial grid with `resolution` levels per dimension, boundaries
/// included, in lexicographic order (first coordinate slowest). Dimensions
/// listed in `fixed` take only the given value.
inline std::vector<ControlPoint> candidate_grid(const Box& box, int resolution,
                                                const std::map<std::size_t, double>& fixed = {}) {
    box.validate();
    if (resolution < 2) throw std::invalid_argument("candidate_grid: resolution must be >= 2");
    const std::size_t v = box.dim();
    std::vector<std::vector<double>> levels(v);
    for (std::size_t k = 0; k < v; ++k) {
        if (auto it = fixed.find(k); it != fixed.end()) {
            levels[k] = {it->second};
            continue;
        }
        levels[k].resize(std::size_t(resolution));
        for (int i = 0; i < resolution; ++i)
            levels[k][std::size_t(i)] =
                i == resolution - 1 ? box.upper[k]
                                    : box.lower[k] + (box.upper[k] - box.lower[k]) * i / (resolution - 1);
    }
    std::size_t total = 1;
    for (const auto& l : levels) total *= l.size();
    std::vector<ControlPoint> grid;
    grid.reserve(total);
    std::vector<std::size_t> idx(v, 0);
    for (std::size_t t = 0; t < total; ++t) {
        ControlPoint x{std::vector<double>(v)};
        for (std::size_t k = 0; k < v; ++k) x[k] = levels[k][idx[k]];
        grid.push_back(std::move(x));
        for (std::size_t k = v; k-- > 0;) {
            if (++idx[k] < levels[k].size()) break;
            idx[k] = 0;
        }
    }
    return grid;
}

/// Non-dominated set of the ground truth over a resolution^v grid.
inline ParetoFront true_pareto_front(const ProblemSpec& spec, int resolution) {
    if (!spec.ground_truth) throw std::invalid_argument("true_pareto_front: problem has no ground truth");
    if (resolution < 2) throw std::invalid_argument("true_pareto_front: resolution must be >= 2");
    std::vector<FrontPoint> pts;
    for (auto& x : candidate_grid(spec.bounds, resolution)) {
        const auto f = (*spec.ground_truth)(x);
        pts.push_back({f[0], f[1], std::move(x)});
    }
    return ParetoFront(std::move(pts));
}

inline ParetoFront true_pareto_front(int resolution) { return true_pareto_front(toy_problem(0.0), resolution); }

/// Intervention cost inputs.
struct CostParams {
    double dose_cost = 0.0;        // a
    double doses_per_person = 0.0; // nu
    double wastage = 1.0;          // rho
    double population = 0.0;       // P
    double horizon_years = 0.0;    // Y
    double shelf_life_years = 1.0; // T
    double center_setup = 0.0;     // g
    double staff_cost = 0.0;       // d
    double centers = 0.0;          // X
    double staff = 0.0;            // total staff

    void validate() const {
        for (double v : {dose_cost, doses_per_person, wastage, population, horizon_years,
                         shelf_life_years, center_setup, staff_cost, centers, staff})
            if (!(v >= 0) || !std::isfinite(v))
                throw std::invalid_argument("CostParams: all parameters must be finite and >= 0");
        if (!(wastage >= 1)) throw std::invalid_argument("CostParams: wastage multiplier must be >= 1");
        if (!(shelf_life_years > 0)) throw std::invalid_argument("CostParams: shelf life must be > 0");
    }
};

/// Administration cost (g X + d S nu P) Y.
inline double administration_cost(const CostParams& p) {
    return (p.center_setup * p.centers + p.staff_cost * p.staff * p.doses_per_person * p.population) *
           p.horizon_years;
}

/// Procurement cost a nu rho P Y / T.
inline double procurement_cost(const CostParams& p) {
    return p.dose_cost * p.doses_per_person * p.wastage * p.population * p.horizon_years /
           p.shelf_life_years;
}

/// Total cost ((g X / (nu P) + d S) + a rho / T) nu P Y.
inline double intervention_cost(const CostParams& p) {
    p.validate();
    const double people = p.doses_per_person * p.population;
    if (people == 0.0) return p.center_setup * p.centers * p.horizon_years;
    return ((p.center_setup * p.centers / people + p.staff_cost * p.staff) +
            p.dose_cost * p.wastage / p.shelf_life_years) *
           people * p.horizon_years;
}

/// Sum over point pairs of prod_k (x_jk - x_lk)^-2, on unit-cube coordinates.
inline double maxpro_criterion(std::span<const ControlPoint> design, const Box& box) {
    double total = 0.0;
    std::vector<Eigen::VectorXd> u;
    u.reserve(design.size());
    for (const auto& x : design) u.push_back(box.to_unit(x));
    for (std::size_t j = 0; j < u.size(); ++j)
        for (std::size_t l = j + 1; l < u.size(); ++l) {
            double prod = 1.0;
            for (Eigen::Index k = 0; k < u[j].size(); ++k) {
                const double d = u[j][k] - u[l][k];
                prod *= d * d;
            }
            total += prod > 0 ? 1.0 / prod : std::numeric_limits<double>::infinity();
        }
    return total;
}

/// Random Latin hypercube: one point per equal-width bin in every
/// coordinate, uniformly placed within its bin.
inline std::vector<ControlPoint> random_lhs(int s, const Box& box, std::mt19937_64& rng) {
    box.validate();
    if (s < 2) throw std::invalid_argument("initial_design: S must be >= 2");
    const std::size_t v = box.dim();
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<ControlPoint> design(std::size_t(s), ControlPoint{std::vector<double>(v)});
    std::vector<int> perm(static_cast<std::size_t>(s));
    for (std::size_t k = 0; k < v; ++k) {
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t j = 0; j < std::size_t(s); ++j) {
            const double u = (perm[j] + unif(rng)) / s;
            design[j][k] = box.lower[k] + u * (box.upper[k] - box.lower[k]);
        }
    }
    return design;
}

/// Coordinate exchange on the MaxPro criterion: swap one coordinate between
/// two points whenever that lowers the criterion, until no swap helps.
/// Swaps keep the Latin hypercube property.
inline std::vector<ControlPoint> improve_maxpro(std::vector<ControlPoint> design, const Box& box) {
    double current = maxpro_criterion(design, box);
    bool improved = true;
    while (improved) {
        improved = false;
        for (std::size_t k = 0; k < box.dim(); ++k)
            for (std::size_t j = 0; j < design.size(); ++j)
                for (std::size_t l = j + 1; l < design.size(); ++l) {
                    std::swap(design[j][k], design[l][k]);
                    const double trial = maxpro_criterion(design, box);
                    if (trial < current * (1.0 - 1e-12)) {
                        current = trial;
                        improved = true;
                    } else {
                        std::swap(design[j][k], design[l][k]);
                    }
                }
    }
    return design;
}

/// Maximum-projection Latin hypercube: best of `restarts` exchange-improved
/// random LHS draws.
inline std::vector<ControlPoint> initial_design(int s, const Box& box, std::mt19937_64& rng,
                                                int restarts = 20) {
    std::vector<ControlPoint> best;
    double best_c = std::numeric_limits<double>::infinity();
    for (int r = 0; r < std::max(restarts, 1); ++r) {
        auto d = improve_maxpro(random_lhs(s, box, rng), box);
        const double c = maxpro_criterion(d, box);
        if (c < best_c) {
            best_c = c;
            best = std::move(d);
        }
    }
    return best;
}

}  // namespace moeeqi
