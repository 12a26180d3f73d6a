#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace adacvar {

/// Per-example losses normalized into [0, 1]; the payoff row of the game.
class LossVector {
public:
    /// Throws InvalidInput when empty or when an entry is outside [0, 1] or not finite.
    explicit LossVector(std::vector<double> values);

    std::span<const double> values() const { return values_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }

private:
    std::vector<double> values_;
};

/// Risk level alpha together with the tail size k = floor(alpha * N) it induces.
class RiskLevel {
public:
    /// Throws InvalidInput unless 0 < alpha <= 1 and floor(alpha * n) >= 1.
    static RiskLevel for_size(double alpha, std::size_t n);

    double alpha() const { return alpha_; }
    std::size_t k() const { return k_; }
    std::size_t n() const { return n_; }

private:
    RiskLevel(double alpha, std::size_t k, std::size_t n) : alpha_(alpha), k_(k), n_(n) {}

    double alpha_;
    std::size_t k_;
    std::size_t n_;
};

/// k = floor(alpha * n), tolerant to the representation error of products
/// such as 0.29 * 100. Returns 0 when the level is empty.
std::size_t tail_size(double alpha, std::size_t n);

/// A point of the DRO set: 0 <= q_i <= 1/k and sum q_i = 1.
struct DroWeights {
    std::vector<double> q;
};

/// True when `q` satisfies the DRO-set constraints for tail size k (sum within `tol`).
bool is_feasible(std::span<const double> q, std::size_t k, double tol = 1e-9);

// The span overloads accept arbitrary finite losses (raw evaluation metrics);
// the LossVector overloads are the normalized-game entry points.

/// k-th largest value.
double tail_threshold(std::span<const double> losses, std::size_t k);
/// Mean of the k largest values.
double tail_average(std::span<const double> losses, std::size_t k);

double empirical_var(const LossVector& losses, const RiskLevel& level);
double empirical_cvar(const LossVector& losses, const RiskLevel& level);

/// ell + (1/k) * sum_i max(0, L_i - ell). With alpha * N integral this is the
/// Rockafellar-Uryasev objective with the 1/(alpha N) factor.
double rockafellar_objective(const LossVector& losses, double ell, const RiskLevel& level);

struct InnerMax {
    double value;
    DroWeights argmax;
};

/// Maximizes q . L over the DRO set: 1/k on the k largest losses, ties to lower indices.
InnerMax dro_inner_max(const LossVector& losses, const RiskLevel& level);
InnerMax dro_inner_max(std::span<const double> losses, std::size_t k);

}  // namespace adacvar
