#include "adacvar/risk.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adacvar/error.hpp"

namespace adacvar {

LossVector::LossVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw InvalidInput("loss vector is empty");
    for (std::size_t i = 0; i < values_.size(); ++i) {
        const double v = values_[i];
        if (!(v >= 0.0 && v <= 1.0))
            throw InvalidInput("loss " + std::to_string(i) + " = " + std::to_string(v) +
                               " outside [0, 1]");
    }
}

std::size_t tail_size(double alpha, std::size_t n) {
    if (!(alpha > 0.0 && alpha <= 1.0)) return 0;
    const double prod = alpha * static_cast<double>(n);
    return static_cast<std::size_t>(std::floor(prod * (1.0 + 1e-12) + 1e-12));
}

RiskLevel RiskLevel::for_size(double alpha, std::size_t n) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw InvalidInput("alpha must lie in (0, 1], got " + std::to_string(alpha));
    const std::size_t k = std::min(tail_size(alpha, n), n);
    if (k == 0)
        throw InvalidInput("floor(alpha * N) = 0 for alpha = " + std::to_string(alpha) +
                           ", N = " + std::to_string(n));
    return RiskLevel(alpha, k, n);
}

bool is_feasible(std::span<const double> q, std::size_t k, double tol) {
    if (k == 0 || q.empty()) return false;
    const double cap = 1.0 / static_cast<double>(k);
    double sum = 0.0;
    for (double v : q) {
        if (v < 0.0 || v > cap + 1e-15) return false;
        sum += v;
    }
    return std::abs(sum - 1.0) <= tol;
}

namespace {

void check_tail(std::span<const double> losses, std::size_t k) {
    if (losses.empty()) throw InvalidInput("losses are empty");
    if (k == 0 || k > losses.size())
        throw InvalidInput("tail size " + std::to_string(k) + " invalid for N = " +
                           std::to_string(losses.size()));
}

void check_level(const LossVector& losses, const RiskLevel& level) {
    if (level.n() != losses.size())
        throw InvalidInput("risk level built for N = " + std::to_string(level.n()) +
                           " used with " + std::to_string(losses.size()) + " losses");
}

// Indices of the k largest entries; stable, so equal values keep lower indices first.
std::vector<std::size_t> top_k_indices(std::span<const double> losses, std::size_t k) {
    std::vector<std::size_t> order(losses.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return losses[a] > losses[b]; });
    order.resize(k);
    return order;
}

}  // namespace

double tail_threshold(std::span<const double> losses, std::size_t k) {
    check_tail(losses, k);
    std::vector<double> sorted(losses.begin(), losses.end());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     sorted.end(), std::greater<>());
    return sorted[k - 1];
}

double tail_average(std::span<const double> losses, std::size_t k) {
    check_tail(losses, k);
    std::vector<double> sorted(losses.begin(), losses.end());
    std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k),
                      sorted.end(), std::greater<>());
    // Summed in descending order so repeated evaluation is bitwise stable.
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += sorted[i];
    return sum / static_cast<double>(k);
}

double empirical_var(const LossVector& losses, const RiskLevel& level) {
    check_level(losses, level);
    return tail_threshold(losses.values(), level.k());
}

double empirical_cvar(const LossVector& losses, const RiskLevel& level) {
    check_level(losses, level);
    return tail_average(losses.values(), level.k());
}

double rockafellar_objective(const LossVector& losses, double ell, const RiskLevel& level) {
    check_level(losses, level);
    double hinge = 0.0;
    for (double v : losses.values()) hinge += std::max(0.0, v - ell);
    return ell + hinge / static_cast<double>(level.k());
}

InnerMax dro_inner_max(std::span<const double> losses, std::size_t k) {
    check_tail(losses, k);
    const auto top = top_k_indices(losses, k);
    InnerMax out{0.0, DroWeights{std::vector<double>(losses.size(), 0.0)}};
    const double w = 1.0 / static_cast<double>(k);
    double sum = 0.0;
    for (std::size_t i : top) {
        out.argmax.q[i] = w;
        sum += losses[i];
    }
    out.value = sum / static_cast<double>(k);
    return out;
}

InnerMax dro_inner_max(const LossVector& losses, const RiskLevel& level) {
    check_level(losses, level);
    return dro_inner_max(losses.values(), level.k());
}

}  // namespace adacvar
