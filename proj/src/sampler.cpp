#include "adacvar/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "adacvar/error.hpp"

namespace adacvar {

const char* to_string(ScheduleKind kind) {
    switch (kind) {
        case ScheduleKind::constant: return "constant";
        case ScheduleKind::fixed_horizon: return "fixed-horizon";
        case ScheduleKind::inverse_sqrt: return "inverse-sqrt";
        case ScheduleKind::adaptive: return "adaptive";
    }
    return "unknown";
}

ScheduleKind schedule_from_string(const std::string& name) {
    if (name == "constant") return ScheduleKind::constant;
    if (name == "fixed-horizon") return ScheduleKind::fixed_horizon;
    if (name == "inverse-sqrt") return ScheduleKind::inverse_sqrt;
    if (name == "adaptive" || name == "adagrad") return ScheduleKind::adaptive;
    throw InvalidInput("unknown sampler schedule '" + name + "'");
}

double eta_at(const EtaSchedule& schedule, std::size_t t, std::size_t n, double grad_sq_accum) {
    if (t == 0) throw InvalidInput("sampler steps start at t = 1");
    switch (schedule.kind) {
        case ScheduleKind::constant: return schedule.eta0;
        case ScheduleKind::fixed_horizon: {
            if (!schedule.horizon || *schedule.horizon == 0)
                throw ConfigError("/sampler/horizon", "fixed-horizon schedule needs a positive horizon");
            const double nd = static_cast<double>(n);
            return std::sqrt(std::log(nd) / (nd * static_cast<double>(*schedule.horizon)));
        }
        case ScheduleKind::inverse_sqrt: return schedule.eta0 / std::sqrt(static_cast<double>(t));
        case ScheduleKind::adaptive: return schedule.eta0 / std::sqrt(1.0 + grad_sq_accum);
    }
    return schedule.eta0;
}

Sampler::Sampler(std::size_t n, const RiskLevel& level, SamplerOptions options)
    : weights_(LogWeightVector::uniform(n)), k_(level.k()), options_(options) {
    if (n == 0) throw InvalidInput("sampler needs at least one item");
    if (level.n() != n)
        throw InvalidInput("risk level built for N = " + std::to_string(level.n()) + ", sampler has " +
                           std::to_string(n));
    if (!(options_.gamma >= 0.0 && options_.gamma < 1.0))
        throw ConfigError("/sampler/gamma", "mixing coefficient must lie in [0, 1)");
    if (!(options_.max_exponent > 0.0))
        throw ConfigError("/sampler/max_exponent", "must be positive");
    if (options_.schedule.kind == ScheduleKind::fixed_horizon) eta_at(options_.schedule, 1, n);
    grad_sq_accum_.assign(n, 0.0);
}

void Sampler::refresh() {
    const std::size_t n = weights_.size();
    q_.q.assign(n, 0.0);
    if (k_ == n) {
        // The only size-N subset is the whole set: marginals are identically 1.
        std::fill(q_.q.begin(), q_.q.end(), 1.0 / static_cast<double>(n));
    } else {
        const MarginalDistribution p =
            n <= options_.exact_max_n ? exact_marginals(weights_, k_) : approx_marginals(weights_, k_);
        const double gamma = options_.gamma;
        const double scale = (1.0 - gamma) / static_cast<double>(k_);
        const double floor = gamma / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) q_.q[i] = scale * p.p[i] + floor;
    }
    tree_ = SumTree(q_.q);
    dirty_ = false;
}

const DroWeights& Sampler::distribution() {
    if (dirty_) refresh();
    return q_;
}

double Sampler::probability(std::size_t i) {
    if (i >= size()) throw InvalidInput("sampler index out of range");
    return distribution().q[i];
}

std::size_t Sampler::draw(double u) {
    if (!(u >= 0.0 && u < 1.0)) throw InvalidInput("sample point must lie in [0, 1)");
    if (dirty_) refresh();
    if (k_ == size()) {
        const auto i = static_cast<std::size_t>(u * static_cast<double>(size()));
        return std::min(i, size() - 1);
    }
    return tree_.sample(u);
}

void Sampler::update(std::span<const LossEstimate> batch) {
    const double eta_step = options_.schedule.kind == ScheduleKind::adaptive
                                ? 0.0
                                : eta_at(options_.schedule, t_, size());
    for (const LossEstimate& est : batch) {
        if (est.index >= size()) throw InvalidInput("loss estimate index out of range");
        if (!(est.q_at_index > 0.0 && est.q_at_index <= 1.0))
            throw InvalidInput("q at the sampled index must lie in (0, 1]");
        if (!(est.raw_loss >= 0.0 && est.raw_loss <= 1.0))
            throw InvalidInput("raw loss must lie in [0, 1]");
        const double estimate = est.raw_loss / est.q_at_index;
        double eta = eta_step;
        if (options_.schedule.kind == ScheduleKind::adaptive) {
            grad_sq_accum_[est.index] += estimate * estimate;
            eta = eta_at(options_.schedule, t_, size(), grad_sq_accum_[est.index]);
        }
        double exponent = eta * estimate;
        if (exponent > options_.max_exponent) {
            exponent = options_.max_exponent;
            ++clip_events_;
        }
        if (exponent != 0.0) {
            weights_.add(est.index, exponent);
            dirty_ = true;
        }
    }
    if (weights_.rescale_if_above(options_.rescale_threshold)) ++rescales_;
    ++t_;
}

SamplerSnapshot Sampler::snapshot() const {
    return {std::vector<double>(weights_.log_w().begin(), weights_.log_w().end()), t_, clip_events_,
            rescales_};
}

RegretAccumulator::RegretAccumulator(std::size_t n, std::size_t k) : k_(k), cumulative_(n, 0.0) {
    if (k == 0 || k > n) throw InvalidInput("regret accumulator needs 1 <= k <= N");
}

void RegretAccumulator::add(std::span<const double> losses, std::span<const double> q) {
    if (losses.size() != cumulative_.size() || q.size() != cumulative_.size())
        throw InvalidInput("loss and distribution sizes must match the accumulator");
    double played = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        cumulative_[i] += losses[i];
        played += q[i] * losses[i];
    }
    played_ += played;
    ++rounds_;
}

double RegretAccumulator::regret() const {
    if (rounds_ == 0) return 0.0;
    return tail_average(cumulative_, k_) - played_;
}

double sampler_regret(std::span<const LossVector> loss_history, std::span<const DroWeights> q_history,
                      const RiskLevel& level) {
    if (loss_history.size() != q_history.size())
        throw InvalidInput("loss history has " + std::to_string(loss_history.size()) +
                           " rounds, distribution history " + std::to_string(q_history.size()));
    RegretAccumulator acc(level.n(), level.k());
    for (std::size_t t = 0; t < loss_history.size(); ++t)
        acc.add(loss_history[t].values(), q_history[t].q);
    return acc.regret();
}

}  // namespace adacvar
