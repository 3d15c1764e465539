#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace moeeqi {

/// Standard normal density.
inline double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

/// Standard normal distribution function. Accurate in both tails.
inline double normal_cdf(double z) {
    if (std::isinf(z)) return z > 0 ? 1.0 : 0.0;
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

/// Upper tail 1 - Phi(z), without cancellation for large z.
inline double normal_sf(double z) {
    if (std::isinf(z)) return z > 0 ? 0.0 : 1.0;
    return 0.5 * std::erfc(z / std::numbers::sqrt2);
}

namespace detail {

template <std::size_t N>
inline double poly(const double (&c)[N], double x) {
    double r = c[N - 1];
    for (std::size_t i = N - 1; i-- > 0;) r = r * x + c[i];
    return r;
}

}  // namespace detail

/// Inverse standard normal distribution function.
///
/// Wichura's AS241 (PPND16) rational approximation followed by one Halley
/// step against erfc, which brings the result to within a few ulps over
/// (0, 1). Returns -inf / +inf at 0 / 1.
inline double normal_quantile(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("normal_quantile: p must lie in [0, 1]");
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();

    static constexpr double a[] = {3.387132872796366608,   133.14166789178437745,
                                   1971.5909503065514427,  13731.693765509461125,
                                   45921.953931549871457,  67265.770927008700853,
                                   33430.575583588128105,  2509.0809287301226727};
    static constexpr double b[] = {1.0,                   42.313330701600911252,
                                   687.1870074920579083,  5394.1960214247511077,
                                   21213.794301586595867, 39307.89580009271061,
                                   28729.085735721942674, 5226.495278852545925};
    static constexpr double c[] = {1.42343711074968357734,   4.6303378461565452959,
                                   5.7694972214606914055,    3.64784832476320460504,
                                   1.27045825245236838258,   0.24178072517745061177,
                                   0.0227238449892691845833, 7.7454501427834140764e-4};
    static constexpr double d[] = {1.0,                    2.05319162663775882187,
                                   1.6763848301838038494,  0.68976733498510000455,
                                   0.14810397642748007459, 0.0151986665636164571966,
                                   5.475938084995344946e-4, 1.05075007164441684324e-9};
    static constexpr double e[] = {6.6579046435011037772,    5.4637849111641143699,
                                   1.7848265399172913358,    0.29656057182850489123,
                                   0.026532189526576123093,  0.0012426609473880784386,
                                   2.71155556874348757815e-5, 2.01033439929228813265e-7};
    static constexpr double f[] = {1.0,                     0.59983220655588793769,
                                   0.13692988092273580531,  0.0148753612908506148525,
                                   7.868691311456132591e-4, 1.8463183175100546818e-5,
                                   1.4215117583164458887e-7, 2.04426310338993978564e-15};

    const double q = p - 0.5;
    double x;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        x = q * detail::poly(a, r) / detail::poly(b, r);
    } else {
        double r = std::sqrt(-std::log(q < 0 ? p : 1.0 - p));
        if (r <= 5.0) {
            r -= 1.6;
            x = detail::poly(c, r) / detail::poly(d, r);
        } else {
            r -= 5.0;
            x = detail::poly(e, r) / detail::poly(f, r);
        }
        if (q < 0) x = -x;
    }

    // Halley refinement; residual taken on the smaller tail.
    const double err = x < 0 ? normal_cdf(x) - p : (1.0 - p) - normal_sf(x);
    const double u = err / normal_pdf(x);
    if (std::isfinite(u)) x -= u / (1.0 + 0.5 * x * u);
    return x;
}

/// P(alpha < Z < beta) for standard normal Z, computed on whichever tail
/// keeps the difference well conditioned.
inline double normal_mass(double alpha, double beta) {
    if (!(beta > alpha)) return 0.0;
    if (alpha > 0) return normal_sf(alpha) - normal_sf(beta);
    return normal_cdf(beta) - normal_cdf(alpha);
}

}  // namespace moeeqi
