#include "adacvar/kdpp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "adacvar/error.hpp"

namespace adacvar {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Rounding error may grow by at most this factor before an item is recomputed.
const double kLogGrowthBudget = std::log(1e6);

thread_local MarginalFallbackStats g_fallbacks;

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

std::vector<double> positive_logs(const LogWeightVector& weights) {
    std::vector<double> out;
    out.reserve(weights.num_positive());
    for (double v : weights.log_w())
        if (v != kNegInf) out.push_back(v);
    return out;
}

// The recurrences run in extended precision: log magnitudes reach ~k log(N/k),
// so double rounding in the logs would show up as a common relative error.
using Real = long double;
constexpr Real kNegInfL = -std::numeric_limits<Real>::infinity();

Real log_add_l(Real a, Real b) {
    if (a < b) std::swap(a, b);
    if (b == kNegInfL) return a;
    return a + std::log1p(std::exp(b - a));
}

Real log_sub_l(Real a, Real b) {
    if (b == kNegInfL) return a;
    if (!(a > b)) return kNegInfL;
    return a + std::log1p(-std::exp(b - a));
}

// log e^0..e^order over `logs`, skipping index `skip` (pass logs.size() to skip nothing).
std::vector<Real> esp_table(std::span<const double> logs, std::size_t order, std::size_t skip) {
    std::vector<Real> e(order + 1, kNegInfL);
    e[0] = 0.0L;
    std::size_t seen = 0;
    for (std::size_t i = 0; i < logs.size(); ++i) {
        if (i == skip) continue;
        ++seen;
        const Real lw = logs[i];
        for (std::size_t j = std::min(seen, order); j >= 1; --j) e[j] = log_add_l(e[j], lw + e[j - 1]);
    }
    return e;
}

// log e^{k-1}_{-i} by the forward deletion recurrence; false when ill-conditioned.
bool deletion_forward(std::span<const Real> esp, Real lw, std::size_t k, Real& out) {
    Real prev = 0.0L;  // log e^0_{-i}
    Real growth = 0.0L;
    for (std::size_t j = 1; j < k; ++j) {
        const Real removed = lw + prev;
        const Real r = log_sub_l(esp[j], removed);
        if (r == kNegInfL) return false;
        growth = log_add_l(0.0L, removed - r + growth);
        if (growth > kLogGrowthBudget) return false;
        prev = r;
    }
    out = prev;
    return true;
}

// log e^{k-1}_{-i} descending from e^M_{-i} = 0 via e^{j-1}_{-i} = (e^j - e^j_{-i}) / w_i.
bool deletion_backward(std::span<const Real> full, Real lw, std::size_t k, Real& out) {
    const std::size_t m = full.size() - 1;
    Real cur = kNegInfL;  // log e^m_{-i}
    Real growth = 0.0L;
    for (std::size_t j = m; j >= k; --j) {
        const Real diff = log_sub_l(full[j], cur);
        if (diff == kNegInfL) return false;
        if (cur != kNegInfL) {
            growth = log_add_l(0.0L, cur - diff + growth);
            if (growth > kLogGrowthBudget) return false;
        }
        cur = diff - lw;  // log e^{j-1}_{-i}
        if (j == k) break;
    }
    out = cur;
    return true;
}

}  // namespace

double log_add(double a, double b) {
    if (a < b) std::swap(a, b);
    if (b == kNegInf) return a;
    return a + std::log1p(std::exp(b - a));
}

double log_sub(double a, double b) {
    if (b == kNegInf) return a;
    if (!(a > b)) return kNegInf;
    return a + std::log1p(-std::exp(b - a));
}

LogWeightVector::LogWeightVector(std::vector<double> log_w) : log_w_(std::move(log_w)) {
    for (std::size_t i = 0; i < log_w_.size(); ++i) {
        const double v = log_w_[i];
        if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
            throw InvalidInput("log weight " + std::to_string(i) + " is not a number or +inf");
        if (v != kNegInf) ++num_positive_;
    }
}

LogWeightVector LogWeightVector::uniform(std::size_t n) {
    return LogWeightVector(std::vector<double>(n, 0.0));
}

LogWeightVector LogWeightVector::from_weights(std::span<const double> w) {
    std::vector<double> logs(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!(w[i] >= 0.0) || !std::isfinite(w[i]))
            throw InvalidInput("weight " + std::to_string(i) + " must be finite and nonnegative");
        logs[i] = w[i] > 0.0 ? std::log(w[i]) : kNegInf;
    }
    return LogWeightVector(std::move(logs));
}

double LogWeightVector::max_log() const {
    double m = kNegInf;
    for (double v : log_w_) m = std::max(m, v);
    return m;
}

void LogWeightVector::add(std::size_t i, double delta) {
    if (i >= log_w_.size()) throw InvalidInput("weight index out of range");
    if (log_w_[i] != kNegInf) log_w_[i] += delta;
}

bool LogWeightVector::rescale_if_above(double threshold) {
    const double m = max_log();
    if (!(m > threshold)) return false;
    for (double& v : log_w_)
        if (v != kNegInf) v -= m;
    return true;
}

std::vector<double> elementary_symmetric(const LogWeightVector& weights, std::size_t k) {
    if (k > weights.size())
        throw InvalidInput("order k = " + std::to_string(k) + " exceeds N = " +
                           std::to_string(weights.size()));
    const std::vector<Real> e = esp_table(weights.log_w(), k, weights.size());
    return {e.begin(), e.end()};
}

MarginalDistribution exact_marginals(const LogWeightVector& weights, std::size_t k) {
    const std::size_t n = weights.size();
    if (k == 0 || k > n)
        throw InvalidInput("k = " + std::to_string(k) + " invalid for N = " + std::to_string(n));
    const std::size_t m = weights.num_positive();
    if (m < k)
        throw InvalidInput("only " + std::to_string(m) + " positive weights for k = " +
                           std::to_string(k));

    g_fallbacks = {};
    MarginalDistribution out{std::vector<double>(n, 0.0), k};
    if (m == k) {
        // Single feasible subset: every positive item is always selected.
        for (std::size_t i = 0; i < n; ++i)
            if (weights[i] != kNegInf) out.p[i] = 1.0;
        return out;
    }

    const std::vector<double> logs = positive_logs(weights);
    const std::vector<Real> esp = esp_table(logs, k, logs.size());
    const Real log_norm = esp[k];

    std::vector<Real> loo(logs.size(), kNegInfL);
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < logs.size(); ++i) {
        if (!deletion_forward(esp, logs[i], k, loo[i])) pending.push_back(i);
    }

    if (!pending.empty()) {
        const std::vector<Real> full = esp_table(logs, m, logs.size());
        std::vector<std::size_t> still;
        for (std::size_t i : pending) {
            if (deletion_backward(full, logs[i], k, loo[i]))
                ++g_fallbacks.top_down;
            else
                still.push_back(i);
        }
        for (std::size_t i : still) {
            loo[i] = esp_table(logs, k - 1, i)[k - 1];
            ++g_fallbacks.fresh;
        }
    }

    std::size_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (weights[i] == kNegInf) continue;
        out.p[i] = std::min(1.0, static_cast<double>(std::exp(logs[pos] + loo[pos] - log_norm)));
        ++pos;
    }
    return out;
}

MarginalFallbackStats last_marginal_fallbacks() { return g_fallbacks; }

NuSolution solve_nu(const LogWeightVector& weights, std::size_t k) {
    const std::size_t m = weights.num_positive();
    if (k == 0 || k >= m)
        throw InfeasibleConstraint("expected-size constraint needs 1 <= k < #positive weights (k = " +
                                   std::to_string(k) + ", positive = " + std::to_string(m) + ")");
    const std::vector<double> logs = positive_logs(weights);
    const double kd = static_cast<double>(k);

    const auto residual = [&](double nu) {
        double s = 0.0;
        for (double lw : logs) s += sigmoid(lw + nu);
        return s - kd;
    };

    double log_sum = kNegInf;
    double log_min = std::numeric_limits<double>::infinity();
    for (double lw : logs) {
        log_sum = log_add(log_sum, lw);
        log_min = std::min(log_min, lw);
    }
    double lo = std::log(kd) - log_sum - 40.0;
    double hi = std::log(kd) - log_min + 40.0;
    for (double step = 1.0; residual(lo) > 0.0; step *= 2.0) lo -= step;
    for (double step = 1.0; residual(hi) < 0.0; step *= 2.0) hi += step;

    NuSolution best{lo, residual(lo), 0};
    for (int it = 1; it <= 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double r = residual(mid);
        if (std::abs(r) < std::abs(best.residual)) best = {mid, r, it};
        best.iterations = it;
        if (std::abs(r) <= 1e-10) break;
        if (r < 0.0)
            lo = mid;
        else
            hi = mid;
        if (!(lo < mid || mid < hi)) break;  // bracket collapsed to adjacent doubles
    }
    return best;
}

MarginalDistribution approx_marginals(const LogWeightVector& weights, std::size_t k) {
    const NuSolution nu = solve_nu(weights, k);
    MarginalDistribution out{std::vector<double>(weights.size(), 0.0), k};
    double sum = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] == kNegInf) continue;
        out.p[i] = sigmoid(weights[i] + nu.nu);
        sum += out.p[i];
    }
    const double scale = static_cast<double>(k) / sum;
    for (double& v : out.p) v = std::min(1.0, v * scale);
    return out;
}

double tv_distance(const MarginalDistribution& p, const MarginalDistribution& q) {
    if (p.p.size() != q.p.size())
        throw InvalidInput("marginal dimension mismatch: " + std::to_string(p.p.size()) + " vs " +
                           std::to_string(q.p.size()));
    if (p.k != q.k || p.k == 0) throw InvalidInput("marginal sample sizes differ or are zero");
    double s = 0.0;
    for (std::size_t i = 0; i < p.p.size(); ++i) s += std::abs(p.p[i] - q.p[i]);
    return 0.5 * s / static_cast<double>(p.k);
}

}  // namespace adacvar
