#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <initializer_list>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nelder_mead.hpp"
#include "normal.hpp"

namespace moeeqi {

/// A setting of the controllable variables, in problem units.
struct ControlPoint {
    std::vector<double> coords;

    ControlPoint() = default;
    explicit ControlPoint(std::vector<double> c) : coords(std::move(c)) {}
    ControlPoint(std::initializer_list<double> c) : coords(c) {}

    std::size_t size() const { return coords.size(); }
    double operator[](std::size_t k) const { return coords[k]; }
    double& operator[](std::size_t k) { return coords[k]; }

    friend bool operator==(const ControlPoint&, const ControlPoint&) = default;
    friend auto operator<=>(const ControlPoint&, const ControlPoint&) = default;
};

/// Axis-aligned box of control bounds.
struct Box {
    std::vector<double> lower;
    std::vector<double> upper;

    std::size_t dim() const { return lower.size(); }

    void validate() const {
        if (lower.size() != upper.size() || lower.empty())
            throw std::invalid_argument("Box: lower/upper must be non-empty and of equal length");
        for (std::size_t k = 0; k < lower.size(); ++k)
            if (!(std::isfinite(lower[k]) && std::isfinite(upper[k]) && lower[k] < upper[k]))
                throw std::invalid_argument("Box: need finite lb < ub in dimension " +
                                            std::to_string(k));
    }

    bool contains(const ControlPoint& x) const {
        if (x.size() != dim()) return false;
        for (std::size_t k = 0; k < dim(); ++k)
            if (x[k] < lower[k] || x[k] > upper[k]) return false;
        return true;
    }

    /// Maps x into the unit cube.
    Eigen::VectorXd to_unit(const ControlPoint& x) const {
        Eigen::VectorXd u(dim());
        for (std::size_t k = 0; k < dim(); ++k)
            u[Eigen::Index(k)] = (x[k] - lower[k]) / (upper[k] - lower[k]);
        return u;
    }
};

/// Unit box of the given dimension.
inline Box unit_box(std::size_t dim) {
    return Box{std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
}

/// Squared-exponential kernel hyperparameters. Lengthscales are measured in
/// the unit-cube coordinates the emulator works in.
struct KernelParams {
    double process_variance = 1.0;
    std::vector<double> lengthscales;
    double jitter = 0.0;

    void validate() const {
        if (!(process_variance > 0)) throw std::invalid_argument("KernelParams: process_variance must be > 0");
        for (double l : lengthscales)
            if (!(l > 0)) throw std::invalid_argument("KernelParams: lengthscales must be > 0");
        if (!(jitter >= 0)) throw std::invalid_argument("KernelParams: jitter must be >= 0");
    }
};

/// Monte Carlo estimate at one control point. `variance` is the variance of
/// the mean estimate, i.e. the sample variance already divided by the
/// sample size.
struct NoisyObservation {
    ControlPoint location;
    double mean = 0.0;
    double variance = 0.0;
    int replications = 1;

    void validate() const {
        if (!std::isfinite(mean)) throw std::invalid_argument("NoisyObservation: mean must be finite");
        if (!(variance >= 0) || !std::isfinite(variance))
            throw std::invalid_argument("NoisyObservation: variance must be finite and >= 0");
        if (replications < 1) throw std::invalid_argument("NoisyObservation: replications must be >= 1");
    }
};

/// Observations of one objective. Locations are unique; replicates are
/// merged before they get here.
class GpDataset {
public:
    GpDataset() = default;
    explicit GpDataset(std::vector<NoisyObservation> obs) {
        for (auto& o : obs) add(std::move(o));
    }

    void add(NoisyObservation obs) {
        obs.validate();
        if (!observations_.empty() && obs.location.size() != observations_.front().location.size())
            throw std::invalid_argument("GpDataset: location dimension mismatch");
        if (find(obs.location))
            throw std::invalid_argument("GpDataset: duplicate location; merge replicates instead");
        observations_.push_back(std::move(obs));
    }

    /// Index of the observation at exactly `x`, if any.
    std::optional<std::size_t> find(const ControlPoint& x) const {
        for (std::size_t j = 0; j < observations_.size(); ++j)
            if (observations_[j].location == x) return j;
        return std::nullopt;
    }

    void replace(std::size_t j, NoisyObservation obs) {
        obs.validate();
        if (!(obs.location == observations_.at(j).location))
            throw std::invalid_argument("GpDataset: replace must keep the location");
        observations_[j] = std::move(obs);
    }

    const std::vector<NoisyObservation>& observations() const { return observations_; }
    const NoisyObservation& operator[](std::size_t j) const { return observations_[j]; }
    std::size_t size() const { return observations_.size(); }
    bool empty() const { return observations_.empty(); }
    std::size_t dim() const { return empty() ? 0 : observations_.front().location.size(); }

private:
    std::vector<NoisyObservation> observations_;
};

/// Thrown when no usable covariance factorization exists.
class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// sigma_p^2 * exp(-sum_k (x_k - y_k)^2 / (2 l_k^2)).
inline double kernel_eval(const KernelParams& p, const ControlPoint& x, const ControlPoint& y) {
    p.validate();
    if (x.size() != y.size() || x.size() != p.lengthscales.size())
        throw std::invalid_argument("kernel_eval: dimension mismatch");
    double r2 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double d = (x[k] - y[k]) / p.lengthscales[k];
        r2 += d * d;
    }
    return p.process_variance * std::exp(-0.5 * r2);
}

namespace detail {

inline double sq_exp(const KernelParams& p, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    double r2 = 0.0;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double d = (x[k] - y[k]) / p.lengthscales[std::size_t(k)];
        r2 += d * d;
    }
    return p.process_variance * std::exp(-0.5 * r2);
}

inline Eigen::MatrixXd scaled_design(const GpDataset& data, const Box& box) {
    Eigen::MatrixXd X(Eigen::Index(data.size()), Eigen::Index(box.dim()));
    for (std::size_t j = 0; j < data.size(); ++j)
        X.row(Eigen::Index(j)) = box.to_unit(data[j].location).transpose();
    return X;
}

/// K + Delta without jitter.
inline Eigen::MatrixXd noisy_covariance(const GpDataset& data, const KernelParams& p,
                                        const Eigen::MatrixXd& X) {
    const Eigen::Index n = X.rows();
    Eigen::MatrixXd A(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        A(i, i) = p.process_variance + data[std::size_t(i)].variance;
        for (Eigen::Index j = 0; j < i; ++j)
            A(i, j) = A(j, i) = sq_exp(p, X.row(i).transpose(), X.row(j).transpose());
    }
    return A;
}

inline constexpr double kBaseJitter = 1e-8;
inline constexpr double kMaxJitter = 1e-4;

/// Cholesky of A + jitter*I. Starts at the requested jitter (or the base
/// relative jitter if zero fails) and escalates by 10x up to the cap.
/// Returns the jitter that worked, or nullopt.
inline std::optional<double> factorize(const Eigen::MatrixXd& A, double jitter, double process_variance,
                                       Eigen::LLT<Eigen::MatrixXd>& llt) {
    const Eigen::Index n = A.rows();
    auto attempt = [&](double j) {
        llt.compute(A + j * Eigen::MatrixXd::Identity(n, n));
        return llt.info() == Eigen::Success;
    };
    if (attempt(jitter)) return jitter;
    double j = std::max(jitter * 10.0, kBaseJitter * process_variance);
    for (; j <= kMaxJitter * process_variance * (1 + 1e-12); j *= 10.0)
        if (attempt(j)) return j;
    return std::nullopt;
}

}  // namespace detail

/// Generalised-least-squares constant mean 1'A^-1 y / 1'A^-1 1 with
/// A = K + Delta + jitter I.
inline double beta0_hat(const GpDataset& data, const KernelParams& params, const Box& box) {
    params.validate();
    if (data.empty()) throw std::invalid_argument("beta0_hat: empty dataset");
    const Eigen::MatrixXd X = detail::scaled_design(data, box);
    Eigen::LLT<Eigen::MatrixXd> llt;
    if (!detail::factorize(detail::noisy_covariance(data, params, X), params.jitter,
                           params.process_variance, llt))
        throw FitError("beta0_hat: covariance is singular");
    const Eigen::Index n = X.rows();
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = data[std::size_t(i)].mean;
    const Eigen::VectorXd w = llt.solve(Eigen::VectorXd::Ones(n));
    return w.dot(y) / w.sum();
}

struct Posterior {
    double mean = 0.0;
    double variance = 0.0;
    double sd() const { return std::sqrt(variance); }
};

/// q = m + Phi^-1(beta) s for beta in [0.5, 1).
inline double quantile(double mean, double sd, double beta) {
    if (!(beta >= 0.5 && beta < 1.0)) throw std::domain_error("quantile: beta must lie in [0.5, 1)");
    if (beta == 0.5) return mean;
    return mean + normal_quantile(beta) * sd;
}

/// Stochastic-kriging emulator with a profiled constant mean. Immutable
/// once built; all queries are const and thread-safe.
class GpEmulator {
public:
    GpEmulator(GpDataset data, KernelParams params, Box box)
        : data_(std::move(data)), params_(std::move(params)), box_(std::move(box)) {
        params_.validate();
        box_.validate();
        if (data_.empty()) throw std::invalid_argument("GpEmulator: empty dataset");
        if (data_.dim() != box_.dim() || params_.lengthscales.size() != box_.dim())
            throw std::invalid_argument("GpEmulator: dimension mismatch");

        X_ = detail::scaled_design(data_, box_);
        const auto used = detail::factorize(detail::noisy_covariance(data_, params_, X_),
                                            params_.jitter, params_.process_variance, llt_);
        if (!used)
            throw FitError("GpEmulator: K + Delta is not positive definite even with jitter " +
                           std::to_string(detail::kMaxJitter) + " x process variance");
        params_.jitter = *used;

        const Eigen::Index n = X_.rows();
        Eigen::VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i) y[i] = data_[std::size_t(i)].mean;
        const Eigen::MatrixXd L = llt_.matrixL();
        L_ = L;
        l_one_ = L_.triangularView<Eigen::Lower>().solve(Eigen::VectorXd::Ones(n));
        one_ainv_one_ = l_one_.squaredNorm();
        const Eigen::VectorXd l_y = L_.triangularView<Eigen::Lower>().solve(y);
        beta0_ = l_one_.dot(l_y) / one_ainv_one_;
        alpha_ = llt_.solve(y - beta0_ * Eigen::VectorXd::Ones(n));
    }

    Posterior posterior(const ControlPoint& x) const {
        if (x.size() != box_.dim()) throw std::invalid_argument("posterior: dimension mismatch");
        const Eigen::VectorXd u = box_.to_unit(x);
        const Eigen::Index n = X_.rows();
        Eigen::VectorXd k(n);
        for (Eigen::Index i = 0; i < n; ++i) k[i] = detail::sq_exp(params_, u, X_.row(i).transpose());
        const Eigen::VectorXd v = L_.triangularView<Eigen::Lower>().solve(k);
        Posterior post;
        post.mean = beta0_ + k.dot(alpha_);
        const double gls = 1.0 - l_one_.dot(v);
        post.variance = std::max(0.0, params_.process_variance - v.squaredNorm() +
                                          gls * gls / one_ainv_one_);
        return post;
    }

    double quantile(const ControlPoint& x, double beta) const {
        const Posterior p = posterior(x);
        return moeeqi::quantile(p.mean, p.sd(), beta);
    }

    double beta0_hat() const { return beta0_; }
    const KernelParams& params() const { return params_; }
    const GpDataset& dataset() const { return data_; }
    const Box& box() const { return box_; }

private:
    GpDataset data_;
    KernelParams params_;
    Box box_;
    Eigen::MatrixXd X_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::MatrixXd L_;
    Eigen::VectorXd l_one_;
    Eigen::VectorXd alpha_;
    double one_ainv_one_ = 0.0;
    double beta0_ = 0.0;
};

/// Log-likelihood with the constant mean profiled out:
/// -1/2 r'A^-1 r - 1/2 log|A| - n/2 log(2 pi), r = y - beta0_hat 1.
/// Returns -inf when A cannot be factorised.
inline double log_likelihood(const GpDataset& data, const KernelParams& params, const Box& box) {
    const Eigen::MatrixXd X = detail::scaled_design(data, box);
    Eigen::LLT<Eigen::MatrixXd> llt;
    if (!detail::factorize(detail::noisy_covariance(data, params, X), params.jitter,
                           params.process_variance, llt))
        return -std::numeric_limits<double>::infinity();
    const Eigen::Index n = X.rows();
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = data[std::size_t(i)].mean;
    const Eigen::MatrixXd L = llt.matrixL();
    const Eigen::VectorXd l_one = L.triangularView<Eigen::Lower>().solve(Eigen::VectorXd::Ones(n));
    const Eigen::VectorXd l_y = L.triangularView<Eigen::Lower>().solve(y);
    const double b0 = l_one.dot(l_y) / l_one.squaredNorm();
    const double quad = (l_y - b0 * l_one).squaredNorm();
    const double logdet = 2.0 * L.diagonal().array().log().sum();
    return -0.5 * quad - 0.5 * logdet - 0.5 * double(n) * std::log(2.0 * std::numbers::pi);
}

/// Search box for maximum-likelihood fitting. Lengthscales are in unit-cube
/// coordinates.
struct FitBounds {
    double variance_lower = 1e-6;
    double variance_upper = 1e2;
    double lengthscale_lower = 0.05;
    double lengthscale_upper = 10.0;
};

/// Bounds scaled to the spread of the responses and the noise level.
inline FitBounds default_fit_bounds(const GpDataset& data) {
    double mean = 0.0, noise = 0.0;
    for (const auto& o : data.observations()) {
        mean += o.mean;
        noise = std::max(noise, o.variance);
    }
    mean /= double(std::max<std::size_t>(data.size(), 1));
    double spread = 0.0;
    for (const auto& o : data.observations()) spread += (o.mean - mean) * (o.mean - mean);
    spread /= double(std::max<std::size_t>(data.size(), 2) - 1);
    const double scale = std::max({spread, noise, 1e-8});
    FitBounds b;
    b.variance_lower = 1e-4 * scale;
    b.variance_upper = 1e3 * scale;
    return b;
}

struct FitOptions {
    int restarts = 5;
    SimplexOptions simplex{};
};

/// Multi-start maximum likelihood over log(process variance) and
/// log(lengthscales). The first start is the centre of the log box; the
/// rest are uniform draws from it. Jitter is set to 1e-8 x process variance.
inline KernelParams fit_hyperparameters(const GpDataset& data, const Box& box, const FitBounds& bounds,
                                        std::mt19937_64& rng, const FitOptions& opts = {}) {
    if (data.size() < 2) throw std::invalid_argument("fit_hyperparameters: need at least 2 observations");
    if (data.dim() != box.dim()) throw std::invalid_argument("fit_hyperparameters: dimension mismatch");
    if (opts.restarts < 1) throw std::invalid_argument("fit_hyperparameters: restarts must be >= 1");
    const std::size_t v = box.dim();

    std::vector<double> lo(v + 1), hi(v + 1);
    lo[0] = std::log(bounds.variance_lower);
    hi[0] = std::log(bounds.variance_upper);
    for (std::size_t k = 0; k < v; ++k) {
        lo[k + 1] = std::log(bounds.lengthscale_lower);
        hi[k + 1] = std::log(bounds.lengthscale_upper);
    }

    auto unpack = [&](const std::vector<double>& t) {
        KernelParams p;
        p.process_variance = std::exp(t[0]);
        p.lengthscales.resize(v);
        for (std::size_t k = 0; k < v; ++k) p.lengthscales[k] = std::exp(t[k + 1]);
        p.jitter = detail::kBaseJitter * p.process_variance;
        return p;
    };
    auto objective = [&](const std::vector<double>& t) { return -log_likelihood(data, unpack(t), box); };

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    SimplexResult best;
    for (int r = 0; r < opts.restarts; ++r) {
        std::vector<double> start(v + 1);
        for (std::size_t k = 0; k <= v; ++k)
            start[k] = r == 0 ? 0.5 * (lo[k] + hi[k]) : lo[k] + unif(rng) * (hi[k] - lo[k]);
        SimplexResult res = minimize_in_box(objective, start, lo, hi, opts.simplex);
        if (res.value < best.value) best = std::move(res);
    }
    if (!std::isfinite(best.value))
        throw FitError("fit_hyperparameters: covariance not positive definite at any start; "
                       "try a larger jitter or wider lengthscale bounds");
    return unpack(best.x);
}

}  // namespace moeeqi
