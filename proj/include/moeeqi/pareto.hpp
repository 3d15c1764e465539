#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "acquisition.hpp"
#include "gp.hpp"
#include "normal.hpp"

namespace moeeqi {

/// A bi-objective (minimisation) value together with the control point
/// that produced it.
struct FrontPoint {
    double q1 = 0.0;
    double q2 = 0.0;
    ControlPoint source;
};

/// True when a weakly improves on b in both objectives and strictly in one.
inline bool dominates(double a1, double a2, double b1, double b2) {
    return a1 <= b1 && a2 <= b2 && (a1 < b1 || a2 < b2);
}

/// Non-dominated points sorted by q1 ascending (so q2 strictly descending).
class ParetoFront {
public:
    ParetoFront() = default;

    /// Keeps the maximal non-dominated subset of `candidates`. Exact
    /// duplicates collapse to the first one seen.
    explicit ParetoFront(std::vector<FrontPoint> candidates) {
        std::vector<std::size_t> idx(candidates.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            const auto& pa = candidates[a];
            const auto& pb = candidates[b];
            return pa.q1 < pb.q1 || (pa.q1 == pb.q1 && pa.q2 < pb.q2);
        });
        double best_q2 = std::numeric_limits<double>::infinity();
        for (std::size_t i : idx) {
            if (!std::isfinite(candidates[i].q1) || !std::isfinite(candidates[i].q2))
                throw std::invalid_argument("ParetoFront: non-finite objective value");
            if (candidates[i].q2 < best_q2) {
                best_q2 = candidates[i].q2;
                points_.push_back(std::move(candidates[i]));
            }
        }
    }

    const std::vector<FrontPoint>& points() const { return points_; }
    const FrontPoint& operator[](std::size_t i) const { return points_[i]; }
    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    auto begin() const { return points_.begin(); }
    auto end() const { return points_.end(); }

private:
    std::vector<FrontPoint> points_;
};

enum class ImprovementMode { aggressive, non_aggressive };

inline std::string_view to_string(ImprovementMode m) {
    return m == ImprovementMode::aggressive ? "aggressive" : "non_aggressive";
}

/// Optional upper bound b_i per objective.
struct ConstraintSpec {
    std::array<std::optional<double>, 2> upper{};

    bool any() const { return upper[0].has_value() || upper[1].has_value(); }
};

/// How the bound is widened for noise: b + Phi^-1(beta) * sd, or the
/// literal b + Phi^-1(beta) * sd^2.
enum class ConstraintRule { sd, literal_variance };

/// A value is infeasible for objective i when it is >= the noise-adjusted
/// bound.
inline bool violates(const ConstraintSpec& c, std::size_t objective, double value, double sd,
                     double beta, ConstraintRule rule = ConstraintRule::sd) {
    const auto& b = c.upper.at(objective);
    if (!b) return false;
    const double z = beta == 0.5 ? 0.0 : normal_quantile(beta);
    const double widen = rule == ConstraintRule::sd ? sd : sd * sd;
    return value >= *b + z * widen;
}

/// Drops candidates that violate a constraint, then returns the
/// non-dominated remainder. `noise_sd[j]` holds the per-objective sd used
/// to widen the bounds for candidate j; it may be empty when no constraint
/// is active.
inline ParetoFront build_front(std::vector<FrontPoint> candidates, const ConstraintSpec& constraints,
                               std::span<const std::array<double, 2>> noise_sd, double beta,
                               ConstraintRule rule = ConstraintRule::sd) {
    if (!constraints.any()) return ParetoFront(std::move(candidates));
    if (noise_sd.size() != candidates.size())
        throw std::invalid_argument("build_front: need one noise sd pair per candidate");
    std::vector<FrontPoint> kept;
    for (std::size_t j = 0; j < candidates.size(); ++j) {
        const auto& c = candidates[j];
        if (violates(constraints, 0, c.q1, noise_sd[j][0], beta, rule) ||
            violates(constraints, 1, c.q2, noise_sd[j][1], beta, rule))
            continue;
        kept.push_back(std::move(candidates[j]));
    }
    return ParetoFront(std::move(kept));
}

inline ParetoFront build_front(std::vector<FrontPoint> candidates) {
    return ParetoFront(std::move(candidates));
}

/// Axis-aligned rectangle [lo1, hi1) x [lo2, hi2); bounds may be infinite.
struct Rect {
    double lo1, hi1, lo2, hi2;
};

/// Rectangles making up the improvement region of a front, swept left to
/// right. Aggressive: everything left of the first point, the part of each
/// strip between neighbours that dominates the right-hand neighbour, and the
/// half-strip below the last point. Non-aggressive additionally admits the
/// gap rectangles in each strip up to the left-hand neighbour's q2, i.e. the
/// whole non-dominated region.
inline std::vector<Rect> improvement_region(const ParetoFront& front, ImprovementMode mode) {
    if (front.empty()) throw std::invalid_argument("improvement_region: empty front");
    constexpr double inf = std::numeric_limits<double>::infinity();
    const auto& p = front.points();
    std::vector<Rect> rects;
    rects.reserve(p.size() + 1);
    rects.push_back({-inf, p.front().q1, -inf, inf});
    for (std::size_t i = 0; i + 1 < p.size(); ++i) {
        const double top = mode == ImprovementMode::aggressive ? p[i + 1].q2 : p[i].q2;
        rects.push_back({p[i].q1, p[i + 1].q1, -inf, top});
    }
    rects.push_back({p.back().q1, inf, -inf, p.back().q2});
    return rects;
}

namespace detail {

/// Phi((c - m) / s), with the step function (value 1/2 at the jump) when s = 0.
inline double cdf_at(double c, const QuantilePosterior& qp) {
    if (qp.sd > 0) return normal_cdf((c - qp.mean) / qp.sd);
    if (c == qp.mean) return 0.5;
    return qp.mean < c ? 1.0 : 0.0;
}

/// P(lo < Q < hi) for Q ~ N(mean, sd^2).
inline double interval_mass(double lo, double hi, const QuantilePosterior& qp) {
    if (!(hi > lo)) return 0.0;
    if (qp.sd > 0) return normal_mass((lo - qp.mean) / qp.sd, (hi - qp.mean) / qp.sd);
    return cdf_at(hi, qp) - cdf_at(lo, qp);
}

/// E[Q ; lo < Q < hi] = m * mass - s * (phi(b) - phi(a)).
inline double interval_moment(double lo, double hi, const QuantilePosterior& qp) {
    const double mass = interval_mass(lo, hi, qp);
    if (!(qp.sd > 0) || !(hi > lo)) return qp.mean * mass;
    const double a = (lo - qp.mean) / qp.sd, b = (hi - qp.mean) / qp.sd;
    return qp.mean * mass - qp.sd * (normal_pdf(b) - normal_pdf(a));
}

}  // namespace detail

/// Probability mass and first moments of a union of disjoint rectangles
/// under independent normals.
struct RegionMoments {
    double mass = 0.0;
    double moment1 = 0.0;
    double moment2 = 0.0;
};

inline RegionMoments region_moments(std::span<const Rect> rects, const QuantilePosterior& qp1,
                                    const QuantilePosterior& qp2) {
    RegionMoments out;
    for (const auto& r : rects) {
        const double m1 = detail::interval_mass(r.lo1, r.hi1, qp1);
        const double m2 = detail::interval_mass(r.lo2, r.hi2, qp2);
        out.mass += m1 * m2;
        out.moment1 += detail::interval_moment(r.lo1, r.hi1, qp1) * m2;
        out.moment2 += m1 * detail::interval_moment(r.lo2, r.hi2, qp2);
    }
    return out;
}

/// Probability that the candidate's quantile pair lands in the improvement
/// region of `front`.
inline double probability_of_improvement(const ParetoFront& front, const QuantilePosterior& qp1,
                                         const QuantilePosterior& qp2, ImprovementMode mode) {
    if (front.empty()) throw std::invalid_argument("probability_of_improvement: empty front");
    const auto rects = improvement_region(front, mode);
    return std::clamp(region_moments(rects, qp1, qp2).mass, 0.0, 1.0);
}

class ZeroProbabilityError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Conditional mean of the quantile pair given it lands in the improvement
/// region.
inline std::array<double, 2> centroid(const ParetoFront& front, const QuantilePosterior& qp1,
                                      const QuantilePosterior& qp2, ImprovementMode mode) {
    if (front.empty()) throw std::invalid_argument("centroid: empty front");
    const auto rects = improvement_region(front, mode);
    const RegionMoments rm = region_moments(rects, qp1, qp2);
    if (!(rm.mass > 0)) throw ZeroProbabilityError("centroid: improvement region has zero probability");
    return {rm.moment1 / rm.mass, rm.moment2 / rm.mass};
}

/// Front point closest to q in Euclidean distance; ties go to smaller q1.
inline const FrontPoint& nearest_front_point(const ParetoFront& front, std::array<double, 2> q) {
    if (front.empty()) throw std::invalid_argument("nearest_front_point: empty front");
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < front.size(); ++i) {
        const double d = std::hypot(front[i].q1 - q[0], front[i].q2 - q[1]);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return front[best];
}

/// Probability of improvement times the distance from the region centroid
/// to the nearest front point.
inline double moeeqi(const ParetoFront& front, const QuantilePosterior& qp1,
                     const QuantilePosterior& qp2, ImprovementMode mode) {
    if (front.empty()) throw std::invalid_argument("moeeqi: empty front");
    const auto rects = improvement_region(front, mode);
    const RegionMoments rm = region_moments(rects, qp1, qp2);
    const double p = std::clamp(rm.mass, 0.0, 1.0);
    if (!(p > 0)) return 0.0;
    const std::array<double, 2> c{rm.moment1 / rm.mass, rm.moment2 / rm.mass};
    const auto& near = nearest_front_point(front, c);
    const double d = std::hypot(c[0] - near.q1, c[1] - near.q2);
    return std::isfinite(d) ? p * d : 0.0;
}

}  // namespace moeeqi
