#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace adacvar {

/// Diagonal of a k-DPP kernel, stored as natural logs. A weight of zero is -inf.
class LogWeightVector {
public:
    LogWeightVector() = default;
    explicit LogWeightVector(std::vector<double> log_w);

    /// Unit weights (log 0) for n items.
    static LogWeightVector uniform(std::size_t n);
    /// From nonnegative linear-domain weights; throws InvalidInput on negative or non-finite entries.
    static LogWeightVector from_weights(std::span<const double> w);

    std::size_t size() const { return log_w_.size(); }
    std::size_t num_positive() const { return num_positive_; }
    std::span<const double> log_w() const { return log_w_; }
    double operator[](std::size_t i) const { return log_w_[i]; }
    double max_log() const;

    /// log_w[i] += delta.
    void add(std::size_t i, double delta);
    /// Subtracts max(log_w) from every finite entry when it exceeds `threshold`.
    /// Marginals are invariant under this shift. Returns true when a shift happened.
    bool rescale_if_above(double threshold);

private:
    std::vector<double> log_w_;
    std::size_t num_positive_ = 0;
};

/// Singleton marginals of a size-k point process: 0 <= p_i <= 1, sum p = k.
struct MarginalDistribution {
    std::vector<double> p;
    std::size_t k = 0;
};

struct NuSolution {
    double nu = 0.0;
    double residual = 0.0;  ///< sum_i sigma(log w_i + nu) - k
    int iterations = 0;
};

/// Numerically careful log(exp(a) + exp(b)).
double log_add(double a, double b);
/// log(exp(a) - exp(b)) for a >= b; -inf when the difference is not positive.
double log_sub(double a, double b);

/// Logs of the elementary symmetric polynomials e^0 .. e^k of the weights
/// (e^0 = 1, so the first entry is 0). Throws InvalidInput when k > N.
std::vector<double> elementary_symmetric(const LogWeightVector& weights, std::size_t k);

/// Exact marginals w_i e^{k-1}_{-i} / e^k_N of the diagonal k-DPP.
///
/// The leave-one-out polynomials come from the deletion recurrence
/// e^j_{-i} = e^j - w_i e^{j-1}_{-i}. Its rounding error grows by the factor
/// P_j(i) / (1 - P_j(i)) at every order j, so the accumulated growth is tracked
/// per item; past 1e6 (six digits) the item is recomputed top-down from the
/// full polynomial table, and if that direction is also ill-conditioned, by a
/// fresh leave-one-out pass.
///
/// Throws InvalidInput when k == 0, k > N, or fewer than k weights are positive.
MarginalDistribution exact_marginals(const LogWeightVector& weights, std::size_t k);

/// Number of items the last exact_marginals call on this thread routed to each
/// fallback path (top-down, fresh pass). Exposed for tests and diagnostics.
struct MarginalFallbackStats {
    std::size_t top_down = 0;
    std::size_t fresh = 0;
};
MarginalFallbackStats last_marginal_fallbacks();

/// Solves sum_i sigma(log w_i + nu) = k by bisection.
/// Throws InfeasibleConstraint unless 1 <= k < number of positive weights.
NuSolution solve_nu(const LogWeightVector& weights, std::size_t k);

/// Matched-DPP marginals w_i e^nu / (1 + w_i e^nu), rescaled to sum exactly to k.
MarginalDistribution approx_marginals(const LogWeightVector& weights, std::size_t k);

/// (1/2) sum_i |p_i - q_i| / k: total variation between the induced singleton
/// sampling distributions p/k and q/k. Throws InvalidInput on N or k mismatch.
double tv_distance(const MarginalDistribution& p, const MarginalDistribution& q);

}  // namespace adacvar
