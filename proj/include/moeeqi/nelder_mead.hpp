#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace moeeqi {

struct SimplexOptions {
    std::size_t max_evaluations = 400;
    double initial_step = 0.25;  // fraction of each box side
    double f_tolerance = 1e-8;
    double x_tolerance = 1e-6;
};

struct SimplexResult {
    std::vector<double> x;
    double value = std::numeric_limits<double>::infinity();
    std::size_t evaluations = 0;
};

/// Derivative-free Nelder-Mead minimisation inside the box [lower, upper].
/// Every trial point is projected onto the box before evaluation. The
/// objective may return +inf to reject a point.
inline SimplexResult minimize_in_box(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> start, const std::vector<double>& lower,
                                     const std::vector<double>& upper,
                                     const SimplexOptions& opts = {}) {
    const std::size_t n = start.size();
    if (lower.size() != n || upper.size() != n)
        throw std::invalid_argument("minimize_in_box: bound dimension mismatch");

    auto project = [&](std::vector<double>& x) {
        for (std::size_t k = 0; k < n; ++k) x[k] = std::clamp(x[k], lower[k], upper[k]);
    };

    SimplexResult out;
    auto eval = [&](std::vector<double>& x) {
        project(x);
        ++out.evaluations;
        const double v = f(x);
        return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
    };

    std::vector<std::vector<double>> pts(n + 1, start);
    std::vector<double> vals(n + 1);
    vals[0] = eval(pts[0]);
    for (std::size_t k = 0; k < n; ++k) {
        auto& p = pts[k + 1];
        const double step = opts.initial_step * (upper[k] - lower[k]);
        // Step away from whichever bound is nearer so the simplex is not flat.
        p[k] += (p[k] + step <= upper[k]) ? step : -step;
        vals[k + 1] = eval(p);
    }

    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), trial(n), trial2(n);
    while (out.evaluations < opts.max_evaluations) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t i, std::size_t j) { return vals[i] < vals[j]; });
        const std::size_t best = order.front(), worst = order.back(),
                          second = order[n - 1];

        double spread = 0.0;
        for (std::size_t i = 0; i <= n; ++i)
            for (std::size_t k = 0; k < n; ++k)
                spread = std::max(spread, std::abs(pts[i][k] - pts[best][k]));
        const bool flat = std::isfinite(vals[worst]) &&
                          std::abs(vals[worst] - vals[best]) <=
                              opts.f_tolerance * (1.0 + std::abs(vals[best]));
        if (flat && spread <= opts.x_tolerance) break;

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t k = 0; k < n; ++k) centroid[k] += pts[i][k] / double(n);
        }
        auto along = [&](double t, std::vector<double>& dst) {
            for (std::size_t k = 0; k < n; ++k)
                dst[k] = centroid[k] + t * (pts[worst][k] - centroid[k]);
            return eval(dst);
        };

        const double fr = along(-1.0, trial);
        if (fr < vals[best]) {
            const double fe = along(-2.0, trial2);
            if (fe < fr) {
                pts[worst] = trial2;
                vals[worst] = fe;
            } else {
                pts[worst] = trial;
                vals[worst] = fr;
            }
        } else if (fr < vals[second]) {
            pts[worst] = trial;
            vals[worst] = fr;
        } else {
            const bool outside = fr < vals[worst];
            const double fc = along(outside ? -0.5 : 0.5, trial2);
            if (fc < (outside ? fr : vals[worst])) {
                pts[worst] = trial2;
                vals[worst] = fc;
            } else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (std::size_t k = 0; k < n; ++k)
                        pts[i][k] = pts[best][k] + 0.5 * (pts[i][k] - pts[best][k]);
                    vals[i] = eval(pts[i]);
                }
            }
        }
    }

    const auto it = std::min_element(vals.begin(), vals.end());
    out.x = pts[std::size_t(it - vals.begin())];
    out.value = *it;
    return out;
}

}  // namespace moeeqi
