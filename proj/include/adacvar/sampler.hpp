#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adacvar/kdpp.hpp"
#include "adacvar/risk.hpp"
#include "adacvar/sum_tree.hpp"

namespace adacvar {

enum class ScheduleKind {
    constant,       ///< eta0
    fixed_horizon,  ///< sqrt(log N / (N T))
    inverse_sqrt,   ///< eta0 / sqrt(t)
    adaptive,       ///< eta0 / sqrt(1 + accumulated squared estimates at the index)
};

const char* to_string(ScheduleKind kind);
/// Throws InvalidInput on unknown names.
ScheduleKind schedule_from_string(const std::string& name);

struct EtaSchedule {
    ScheduleKind kind = ScheduleKind::fixed_horizon;
    double eta0 = 1.0;
    std::optional<std::size_t> horizon;
};

/// Sampler learning rate at step t >= 1 for N items. `grad_sq_accum` is only
/// read by the adaptive schedule. Throws ConfigError for a fixed-horizon
/// schedule without a horizon and InvalidInput for t == 0.
double eta_at(const EtaSchedule& schedule, std::size_t t, std::size_t n, double grad_sq_accum = 0.0);

struct SamplerOptions {
    EtaSchedule schedule;
    double gamma = 0.01;            ///< mixing with the uniform distribution, in [0, 1)
    double max_exponent = 80.0;     ///< per-update cap on eta * L / q
    std::size_t exact_max_n = 64;   ///< exact marginals up to this N, matched-DPP above
    double rescale_threshold = 250.0;
};

/// Importance-weighted bandit feedback for one sampled index.
struct LossEstimate {
    std::size_t index;
    double raw_loss;    ///< in [0, 1]
    double q_at_index;  ///< probability the index was drawn with, in (0, 1]
};

/// Plain-data view of the sampler for run metadata.
struct SamplerSnapshot {
    std::vector<double> log_weights;
    std::size_t t;
    std::size_t clip_events;
    std::size_t rescales;
};

/// The q-player: exponential weights over items whose diagonal k-DPP
/// marginals, mixed with the uniform distribution, give the sampling
/// distribution q = (1 - gamma) P_w / k + gamma / N.
class Sampler {
public:
    /// Uniform initial weights. Throws InvalidInput when `level` does not match n
    /// and ConfigError on a gamma outside [0, 1).
    Sampler(std::size_t n, const RiskLevel& level, SamplerOptions options = {});

    std::size_t size() const { return weights_.size(); }
    std::size_t k() const { return k_; }
    /// Step counter; 1 before the first update.
    std::size_t t() const { return t_; }
    std::size_t clip_events() const { return clip_events_; }
    const LogWeightVector& weights() const { return weights_; }
    const SamplerOptions& options() const { return options_; }

    /// Current q_t (recomputed lazily after updates).
    const DroWeights& distribution();
    double probability(std::size_t i);
    /// Index drawn from q_t for a uniform u in [0, 1); deterministic in u.
    std::size_t draw(double u);

    /// One update step: every estimate in the batch moves its own log weight
    /// by eta_s(t) * raw_loss / q_at_index (capped), then t advances by one.
    void update(std::span<const LossEstimate> batch);
    void update(const LossEstimate& est) { update(std::span<const LossEstimate>(&est, 1)); }

    SamplerSnapshot snapshot() const;

private:
    void refresh();

    LogWeightVector weights_;
    std::size_t k_;
    SamplerOptions options_;
    std::size_t t_ = 1;
    std::size_t clip_events_ = 0;
    std::size_t rescales_ = 0;
    std::vector<double> grad_sq_accum_;
    DroWeights q_;
    SumTree tree_;
    bool dirty_ = true;
};

/// Streaming sampler regret: max_{q in Q} sum_t q.L_t - sum_t q_t.L_t, where the
/// comparator is (1/k) times the sum of the k largest cumulative per-item losses.
class RegretAccumulator {
public:
    RegretAccumulator(std::size_t n, std::size_t k);

    void add(std::span<const double> losses, std::span<const double> q);
    double regret() const;
    std::size_t rounds() const { return rounds_; }

private:
    std::size_t k_;
    std::vector<double> cumulative_;
    double played_ = 0.0;
    std::size_t rounds_ = 0;
};

/// Sampler regret over aligned histories. Throws InvalidInput on length mismatch.
double sampler_regret(std::span<const LossVector> loss_history, std::span<const DroWeights> q_history,
                      const RiskLevel& level);

}  // namespace adacvar
