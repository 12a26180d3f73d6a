#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adacvar/data.hpp"
#include "adacvar/learners.hpp"
#include "adacvar/risk.hpp"
#include "adacvar/rng.hpp"
#include "adacvar/sampler.hpp"

namespace adacvar {

enum class Algorithm { ada_cvar, trunc_cvar, soft_cvar, mean };
enum class IterateSelection { average, uniform_random, last };

/// Order of the two players inside an Ada-CVaR step.
enum class GameOrdering {
    learner_first,  ///< sample, learner step, estimate at the new iterate, sampler update
    sampler_first,  ///< sample, estimate, sampler update, learner step (convex variant)
};

/// Smooth relaxation used by Soft-CVaR on a mini-batch B.
enum class SoftSurrogate {
    /// ell + 1/(alpha b) sum_i tau log(1 + exp((L_i - ell) / tau)); >= the truncated objective.
    softplus,
    /// ell + (1/alpha) tau log((1/b) sum_i exp((L_i - ell) / tau)).
    batch_logsumexp,
};

const char* to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& name);
const char* to_string(IterateSelection s);
IterateSelection selection_from_string(const std::string& name);
const char* to_string(SoftSurrogate s);
SoftSurrogate soft_surrogate_from_string(const std::string& name);

struct StepRecord {
    std::size_t step = 0;
    std::vector<std::size_t> indices;
    std::vector<double> q_at;    ///< sampling probability of each index
    std::vector<double> losses;  ///< normalized losses of the batch
    double ell = 0.0;            ///< threshold variable (trunc / soft)
    std::size_t clip_events = 0; ///< cumulative sampler clip count
    bool zero_grad = false;      ///< learner gradient was exactly zero
};

struct EpochRecord {
    std::size_t epoch = 0;
    std::size_t step = 0;
    std::map<std::string, double> metrics;
};

struct RunTrace {
    std::vector<StepRecord> steps;
    std::vector<EpochRecord> epochs;
    /// Parameters after each learner update, theta_1 .. theta_T.
    std::vector<ModelParams> iterates;
    ModelParams running_average;
    /// Instrumented runs only: full normalized loss vector at the iterate the
    /// sampler played against in round t, and the full q_t.
    std::vector<std::vector<double>> full_losses;
    std::vector<std::vector<double>> full_q;
    std::size_t clip_events = 0;
    std::size_t zero_grad_steps = 0;
};

using EpochHook = std::function<EpochRecord(std::size_t epoch, std::size_t step, const ModelParams&)>;

struct TrainConfig {
    Algorithm algorithm = Algorithm::ada_cvar;
    double alpha = 0.1;
    std::size_t steps = 1000;
    std::size_t batch_size = 64;
    std::size_t steps_per_epoch = 0;  ///< 0: ceil(N / batch_size)
    OptimizerState optimizer;
    std::vector<std::size_t> lr_decay_epochs;  ///< multiply lr by 0.1 at these epochs
    std::optional<double> lr_ell;              ///< defaults to optimizer.lr
    double ell_init = 0.5;
    bool clamp_ell = false;                    ///< keep ell in [0, 1]
    SamplerOptions sampler;
    double soft_tau = 1.0;
    SoftSurrogate soft_surrogate = SoftSurrogate::softplus;
    GameOrdering ordering = GameOrdering::sampler_first;
    IterateSelection selection = IterateSelection::last;
    bool instrument_full_losses = false;
    bool store_iterates = true;
    bool early_stopping = false;  ///< keep the epoch with the lowest "val_cvar" from the hook
    std::uint64_t seed = 0;
    EpochHook epoch_hook;
};

struct TrainResult {
    ModelParams params;  ///< selected output iterate
    ModelParams final_params;
    RunTrace trace;
    double final_ell = 0.0;
};

/// Runs the configured algorithm on `data` from `init`. The dataset is only read.
TrainResult train(const Dataset& data, const LossSpec& spec, const TrainConfig& config,
                  const ModelParams& init);

TrainResult train_ada_cvar(const Dataset& data, const LossSpec& spec, const TrainConfig& config,
                           const ModelParams& init);
TrainResult train_trunc_cvar(const Dataset& data, const LossSpec& spec, const TrainConfig& config,
                             const ModelParams& init);
TrainResult train_soft_cvar(const Dataset& data, const LossSpec& spec, const TrainConfig& config,
                            const ModelParams& init);
TrainResult train_mean(const Dataset& data, const LossSpec& spec, const TrainConfig& config,
                       const ModelParams& init);

/// Subgradient of the mini-batch truncated objective
/// ell + 1/(alpha b) sum_i max(0, L_i - ell) with respect to ell.
double trunc_ell_subgradient(std::span<const double> batch_losses, double ell, double alpha);
double trunc_batch_objective(std::span<const double> batch_losses, double ell, double alpha);

struct SoftValue {
    double value;
    double d_ell;
    std::vector<double> d_loss;  ///< derivative with respect to each batch loss
};

/// Soft-CVaR surrogate on a batch, with exact derivatives (stable log-sum-exp).
SoftValue soft_batch_objective(std::span<const double> batch_losses, double ell, double alpha,
                               double tau, SoftSurrogate form = SoftSurrogate::softplus);

/// Normalized losses of every row at `params`.
std::vector<double> full_losses(const Dataset& data, const ModelParams& params, const LossSpec& spec);
/// Raw (unnormalized) losses of every row.
std::vector<double> raw_losses(const Dataset& data, const ModelParams& params, LossKind kind);

/// Normalization scale: the `quantile` of raw losses of `params` on `data`
/// (squared loss), or the fixed logistic scale log(1 + e^10).
double calibrate_scale(const Dataset& data, LossKind kind, const ModelParams& params,
                       double quantile = 0.995);
inline constexpr double kLogisticMargin = 10.0;

/// Output iterate per mode. Throws InvalidInput on an empty trace.
ModelParams select_output(const RunTrace& trace, IterateSelection mode, Rng& rng);

/// Full-batch subgradient minimization of the truncated objective
/// (ell + 1/k sum_i max(0, L_i - ell)), returning the iterate with the lowest
/// empirical CVaR seen. Used as the theta* oracle on small instances.
struct CvarOracle {
    ModelParams params;
    double ell;
    double cvar;
};
CvarOracle cvar_oracle(const Dataset& data, const LossSpec& spec, const RiskLevel& level,
                       std::size_t steps = 5000, double lr0 = 0.5);

/// sum_t [top-k average of L(theta_t)] - sum_t q_t . L(theta*). Needs a trace
/// recorded with instrument_full_losses; throws Unsupported otherwise.
double game_regret(const RunTrace& trace, const Dataset& data, const LossSpec& spec,
                   const RiskLevel& level, const ModelParams& theta_star);

}  // namespace adacvar
