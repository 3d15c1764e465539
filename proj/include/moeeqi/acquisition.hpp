#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "gp.hpp"
#include "normal.hpp"

namespace moeeqi {

/// Posterior of the beta-quantile after one more observation with noise
/// variance sigma2_new at the candidate.
struct QuantilePosterior {
    double mean = 0.0;
    double sd = 0.0;
};

/// m_Q = m + Phi^-1(beta) sqrt(sigma2 s2 / (s2 + sigma2)),
/// s_Q = s2 / sqrt(s2 + sigma2).
inline QuantilePosterior quantile_posterior(double m, double s2, double sigma2_new, double beta) {
    if (!(beta >= 0.5 && beta < 1.0))
        throw std::domain_error("quantile_posterior: beta must lie in [0.5, 1)");
    if (!(s2 >= 0) || !(sigma2_new >= 0))
        throw std::invalid_argument("quantile_posterior: variances must be >= 0");
    const double total = s2 + sigma2_new;
    if (total == 0.0) return {m, 0.0};
    const double z = beta == 0.5 ? 0.0 : normal_quantile(beta);
    return {m + z * std::sqrt(sigma2_new * s2 / total), s2 / std::sqrt(total)};
}

/// Closed-form expected quantile improvement over the current best quantile.
inline double eqi(const QuantilePosterior& qp, double q_star) {
    const double diff = q_star - qp.mean;
    if (qp.sd <= 0.0) return std::max(diff, 0.0);
    const double u = diff / qp.sd;
    return std::max(0.0, diff * normal_cdf(u) + qp.sd * normal_pdf(u));
}

/// Smallest current quantile over the design locations.
inline double best_quantile(const GpEmulator& em, double beta) {
    const auto& obs = em.dataset().observations();
    if (obs.empty()) throw std::invalid_argument("best_quantile: empty dataset");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& o : obs) best = std::min(best, em.quantile(o.location, beta));
    return best;
}

/// Conservative noise level assumed for the next observation: the largest
/// stored observation variance in the dataset.
inline double future_noise(const GpDataset& data) {
    if (data.empty()) throw std::invalid_argument("future_noise: empty dataset");
    double m = 0.0;
    for (const auto& o : data.observations()) m = std::max(m, o.variance);
    return m;
}

/// future_noise for each objective independently.
inline std::vector<double> future_noise(std::span<const GpDataset> datasets) {
    std::vector<double> out;
    out.reserve(datasets.size());
    for (const auto& d : datasets) out.push_back(future_noise(d));
    return out;
}

class ReplicationError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Variance to assign to a replicate batch so that precision-combining it
/// with the original estimate (var_N) yields the pooled estimate (var_2N):
/// var_N var_2N / (var_N - var_2N), evaluated as var_N / (var_N / var_2N - 1)
/// so that an exact halving returns var_N bit for bit.
inline double replication_variance(double var_n, double var_2n) {
    if (!(var_n > 0) || !(var_2n > 0))
        throw std::invalid_argument("replication_variance: variances must be > 0");
    if (!(var_2n < var_n))
        throw ReplicationError("replication_variance: pooled variance did not shrink");
    return var_n / (var_n / var_2n - 1.0);
}

struct MergeResult {
    NoisyObservation merged;
    /// Variance of the new batch implied by the pooled estimate; empty when
    /// the pooled variance did not shrink and precision weighting was used.
    std::optional<double> replicate_variance;
    bool precision_weighted = false;
};

/// Folds a new Monte Carlo batch of size `batch_size` into an existing
/// observation. Every batch merged so far is assumed to have that size.
/// Variances are variances of the mean (sample variance / sample size).
inline MergeResult merge_replicate(const NoisyObservation& old, const ControlPoint& location,
                                   double batch_mean, double batch_var, int batch_size) {
    if (!(old.location == location)) throw std::invalid_argument("merge_replicate: location mismatch");
    if (batch_size < 2) throw std::invalid_argument("merge_replicate: batch size must be >= 2");
    if (!(batch_var >= 0)) throw std::invalid_argument("merge_replicate: batch variance must be >= 0");

    const double n_old = double(old.replications) * batch_size;
    const double n_new = batch_size;
    const double n = n_old + n_new;

    // Sums of squared deviations recovered from the stored variances.
    const double ss_old = old.variance * n_old * (n_old - 1.0);
    const double ss_new = batch_var * n_new * (n_new - 1.0);
    const double delta = batch_mean - old.mean;
    const double ss = ss_old + ss_new + delta * delta * n_old * n_new / n;

    MergeResult res;
    res.merged.location = old.location;
    res.merged.replications = old.replications + 1;
    res.merged.mean = old.mean + delta * n_new / n;
    res.merged.variance = ss / (n - 1.0) / n;

    if (old.variance > 0 && res.merged.variance > 0 && res.merged.variance < old.variance) {
        res.replicate_variance = replication_variance(old.variance, res.merged.variance);
        return res;
    }
    if (old.variance == 0 && res.merged.variance == 0) return res;

    // Pooled variance failed to shrink: combine the two estimates by precision.
    res.precision_weighted = true;
    if (old.variance == 0 || batch_var == 0) {
        const bool keep_old = old.variance == 0 && batch_var > 0;
        const bool keep_new = batch_var == 0 && old.variance > 0;
        res.merged.mean = keep_old ? old.mean : keep_new ? batch_mean : res.merged.mean;
        res.merged.variance = 0.0;
        return res;
    }
    const double w_old = 1.0 / old.variance, w_new = 1.0 / batch_var;
    res.merged.mean = (w_old * old.mean + w_new * batch_mean) / (w_old + w_new);
    res.merged.variance = 1.0 / (w_old + w_new);
    return res;
}

}  // namespace moeeqi
