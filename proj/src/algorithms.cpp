#include "adacvar/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "adacvar/error.hpp"

namespace adacvar {

const char* to_string(Algorithm a) {
    switch (a) {
        case Algorithm::ada_cvar: return "ada-cvar";
        case Algorithm::trunc_cvar: return "trunc-cvar";
        case Algorithm::soft_cvar: return "soft-cvar";
        case Algorithm::mean: return "mean";
    }
    return "unknown";
}

Algorithm algorithm_from_string(const std::string& name) {
    if (name == "ada-cvar") return Algorithm::ada_cvar;
    if (name == "trunc-cvar") return Algorithm::trunc_cvar;
    if (name == "soft-cvar") return Algorithm::soft_cvar;
    if (name == "mean") return Algorithm::mean;
    throw InvalidInput("unknown algorithm '" + name + "'");
}

const char* to_string(IterateSelection s) {
    switch (s) {
        case IterateSelection::average: return "average";
        case IterateSelection::uniform_random: return "uniform-random";
        case IterateSelection::last: return "last";
    }
    return "unknown";
}

IterateSelection selection_from_string(const std::string& name) {
    if (name == "average") return IterateSelection::average;
    if (name == "uniform-random") return IterateSelection::uniform_random;
    if (name == "last") return IterateSelection::last;
    throw InvalidInput("unknown iterate selection '" + name + "'");
}

const char* to_string(SoftSurrogate s) {
    return s == SoftSurrogate::softplus ? "softplus" : "batch-logsumexp";
}

SoftSurrogate soft_surrogate_from_string(const std::string& name) {
    if (name == "softplus") return SoftSurrogate::softplus;
    if (name == "batch-logsumexp") return SoftSurrogate::batch_logsumexp;
    throw InvalidInput("unknown soft surrogate '" + name + "'");
}

// ---------------------------------------------------------------------------
// Batch objectives

double trunc_batch_objective(std::span<const double> batch_losses, double ell, double alpha) {
    double hinge = 0.0;
    for (double l : batch_losses) hinge += std::max(0.0, l - ell);
    return ell + hinge / (alpha * static_cast<double>(batch_losses.size()));
}

double trunc_ell_subgradient(std::span<const double> batch_losses, double ell, double alpha) {
    std::size_t active = 0;
    for (double l : batch_losses)
        if (l > ell) ++active;
    return 1.0 - static_cast<double>(active) / (alpha * static_cast<double>(batch_losses.size()));
}

SoftValue soft_batch_objective(std::span<const double> batch_losses, double ell, double alpha,
                               double tau, SoftSurrogate form) {
    if (!(tau > 0.0)) throw InvalidInput("soft-cvar temperature must be positive");
    if (batch_losses.empty()) throw InvalidInput("empty batch");
    const double b = static_cast<double>(batch_losses.size());
    SoftValue out{0.0, 0.0, std::vector<double>(batch_losses.size(), 0.0)};

    if (form == SoftSurrogate::softplus) {
        double sum = 0.0, weight = 0.0;
        for (std::size_t i = 0; i < batch_losses.size(); ++i) {
            const double z = (batch_losses[i] - ell) / tau;
            const double sp = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
            const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
            sum += tau * sp;
            out.d_loss[i] = s / (alpha * b);
            weight += s;
        }
        out.value = ell + sum / (alpha * b);
        out.d_ell = 1.0 - weight / (alpha * b);
        return out;
    }

    double zmax = -std::numeric_limits<double>::infinity();
    for (double l : batch_losses) zmax = std::max(zmax, (l - ell) / tau);
    double s = 0.0;
    for (double l : batch_losses) s += std::exp((l - ell) / tau - zmax);
    out.value = ell + tau * (zmax + std::log(s / b)) / alpha;
    for (std::size_t i = 0; i < batch_losses.size(); ++i)
        out.d_loss[i] = std::exp((batch_losses[i] - ell) / tau - zmax) / s / alpha;
    out.d_ell = 1.0 - 1.0 / alpha;
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation helpers

std::vector<double> full_losses(const Dataset& data, const ModelParams& params, const LossSpec& spec) {
    std::vector<double> out(data.rows);
    for (std::size_t i = 0; i < data.rows; ++i) out[i] = loss_value(params, data.row(i), data.targets[i], spec);
    return out;
}

std::vector<double> raw_losses(const Dataset& data, const ModelParams& params, LossKind kind) {
    std::vector<double> out(data.rows);
    for (std::size_t i = 0; i < data.rows; ++i)
        out[i] = raw_loss(kind, predict(params, data.row(i)), data.targets[i]);
    return out;
}

double calibrate_scale(const Dataset& data, LossKind kind, const ModelParams& params, double quantile) {
    if (kind == LossKind::logistic) return std::log1p(std::exp(kLogisticMargin));
    if (data.rows == 0) throw InvalidInput("cannot calibrate a loss scale on an empty dataset");
    std::vector<double> raw = raw_losses(data, params, kind);
    std::sort(raw.begin(), raw.end());
    const double pos = quantile * static_cast<double>(raw.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, raw.size() - 1);
    const double v = raw[lo] + (pos - static_cast<double>(lo)) * (raw[hi] - raw[lo]);
    return v > 0.0 ? v : 1.0;
}

ModelParams select_output(const RunTrace& trace, IterateSelection mode, Rng& rng) {
    if (trace.iterates.empty()) {
        if (mode == IterateSelection::average && !trace.steps.empty()) return trace.running_average;
        throw InvalidInput("cannot select an output iterate from an empty trace");
    }
    switch (mode) {
        case IterateSelection::last: return trace.iterates.back();
        case IterateSelection::uniform_random: return trace.iterates[rng.index(trace.iterates.size())];
        case IterateSelection::average: {
            ModelParams avg = ModelParams::zeros(trace.iterates.front().dim());
            const double n = static_cast<double>(trace.iterates.size());
            for (const auto& p : trace.iterates) {
                for (std::size_t j = 0; j < avg.dim(); ++j) avg.theta[j] += p.theta[j] / n;
                avg.bias += p.bias / n;
            }
            return avg;
        }
    }
    return trace.iterates.back();
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

void validate(const Dataset& data, const TrainConfig& cfg, const ModelParams& init) {
    if (data.rows == 0) throw InvalidInput("training set is empty");
    if (init.dim() != data.cols) throw InvalidInput("initial parameters do not match the feature dimension");
    if (cfg.batch_size == 0) throw ConfigError("/batch_size", "must be at least 1");
    if (!(cfg.optimizer.lr >= 0.0)) throw ConfigError("/lr", "must be nonnegative");
    if (cfg.algorithm == Algorithm::soft_cvar && !(cfg.soft_tau > 0.0))
        throw ConfigError("/soft_tau", "must be positive for soft-cvar");
}

bool all_zero(std::span<const double> g, double gb) {
    if (gb != 0.0) return false;
    return std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; });
}

class Trainer {
public:
    Trainer(const Dataset& data, const LossSpec& spec, const TrainConfig& cfg, const ModelParams& init)
        : data_(data),
          spec_(spec),
          cfg_(cfg),
          theta_(init),
          opt_(cfg.optimizer),
          draws_(Rng::substream(cfg.seed, "draws")),
          select_(Rng::substream(cfg.seed, "select")),
          grad_(init.dim(), 0.0) {
        validate(data, cfg, init);
        opt_.first.clear();
        opt_.second.clear();
        opt_.step = 0;
        ell_ = cfg.ell_init;
        lr_ell_ = cfg.lr_ell.value_or(cfg.optimizer.lr);
        if (cfg.algorithm != Algorithm::mean) level_ = RiskLevel::for_size(cfg.alpha, data.rows);
        if (cfg.algorithm == Algorithm::ada_cvar) {
            SamplerOptions so = cfg.sampler;
            if (so.schedule.kind == ScheduleKind::fixed_horizon && !so.schedule.horizon)
                so.schedule.horizon = std::max<std::size_t>(cfg.steps, 1);
            sampler_.emplace(data.rows, *level_, so);
        }
        spe_ = cfg.steps_per_epoch ? cfg.steps_per_epoch
                                   : (data.rows + cfg.batch_size - 1) / cfg.batch_size;
        trace_.running_average = ModelParams::zeros(init.dim());
    }

    TrainResult run() {
        for (std::size_t t = 1; t <= cfg_.steps; ++t) {
            StepRecord rec;
            rec.step = t;
            switch (cfg_.algorithm) {
                case Algorithm::ada_cvar: ada_step(rec); break;
                case Algorithm::mean: mean_step(rec); break;
                case Algorithm::trunc_cvar: threshold_step(rec, false); break;
                case Algorithm::soft_cvar: threshold_step(rec, true); break;
            }
            if (!theta_.finite() || !std::isfinite(ell_)) throw NumericError(t, "non-finite parameters");
            finish_step(t, std::move(rec));
        }
        return finish();
    }

private:
    void reset_grad() {
        std::fill(grad_.begin(), grad_.end(), 0.0);
        grad_bias_ = 0.0;
    }

    void accumulate(const LossGrad& lg, double w) {
        for (std::size_t j = 0; j < grad_.size(); ++j) grad_[j] += w * lg.grad[j];
        grad_bias_ += w * lg.grad_bias;
    }

    LossGrad eval(std::size_t i) const {
        return loss_and_grad(theta_, data_.row(i), data_.targets[i], spec_);
    }

    void instrument(const std::vector<double>* q) {
        if (!cfg_.instrument_full_losses) return;
        trace_.full_losses.push_back(full_losses(data_, theta_, spec_));
        if (q) {
            trace_.full_q.push_back(*q);
        } else {
            trace_.full_q.emplace_back(data_.rows, 1.0 / static_cast<double>(data_.rows));
        }
    }

    void learner_step(StepRecord& rec) {
        rec.zero_grad = all_zero(grad_, grad_bias_);
        optimizer_step(opt_, theta_, grad_, grad_bias_);
    }

    void ada_step(StepRecord& rec) {
        Sampler& sampler = *sampler_;
        const std::vector<double> q = sampler.distribution().q;
        const std::size_t b = cfg_.batch_size;
        const double inv_b = 1.0 / static_cast<double>(b);
        reset_grad();
        std::vector<LossEstimate> estimates;
        estimates.reserve(b);
        for (std::size_t j = 0; j < b; ++j) {
            const std::size_t i = sampler.draw(draws_.uniform());
            rec.indices.push_back(i);
            rec.q_at.push_back(q[i]);
        }
        if (cfg_.ordering == GameOrdering::sampler_first) {
            instrument(&q);
            for (std::size_t j = 0; j < b; ++j) {
                const LossGrad lg = eval(rec.indices[j]);
                rec.losses.push_back(lg.loss);
                estimates.push_back({rec.indices[j], lg.loss, rec.q_at[j]});
                accumulate(lg, inv_b);
            }
            sampler.update(estimates);
            learner_step(rec);
        } else {
            for (std::size_t j = 0; j < b; ++j) accumulate(eval(rec.indices[j]), inv_b);
            learner_step(rec);
            instrument(&q);
            for (std::size_t j = 0; j < b; ++j) {
                const double loss = loss_value(theta_, data_.row(rec.indices[j]),
                                               data_.targets[rec.indices[j]], spec_);
                rec.losses.push_back(loss);
                estimates.push_back({rec.indices[j], loss, rec.q_at[j]});
            }
            sampler.update(estimates);
        }
        rec.clip_events = sampler.clip_events();
    }

    void mean_step(StepRecord& rec) {
        const std::size_t b = cfg_.batch_size;
        const double inv_b = 1.0 / static_cast<double>(b);
        const double q = 1.0 / static_cast<double>(data_.rows);
        instrument(nullptr);
        reset_grad();
        for (std::size_t j = 0; j < b; ++j) {
            const std::size_t i = draws_.index(data_.rows);
            const LossGrad lg = eval(i);
            rec.indices.push_back(i);
            rec.q_at.push_back(q);
            rec.losses.push_back(lg.loss);
            accumulate(lg, inv_b);
        }
        learner_step(rec);
    }

    // Trunc-CVaR and Soft-CVaR: uniform batches, joint descent on (theta, ell).
    void threshold_step(StepRecord& rec, bool soft) {
        const std::size_t b = cfg_.batch_size;
        const double q = 1.0 / static_cast<double>(data_.rows);
        instrument(nullptr);
        std::vector<LossGrad> evals;
        evals.reserve(b);
        for (std::size_t j = 0; j < b; ++j) {
            const std::size_t i = draws_.index(data_.rows);
            evals.push_back(eval(i));
            rec.indices.push_back(i);
            rec.q_at.push_back(q);
            rec.losses.push_back(evals.back().loss);
        }
        reset_grad();
        double d_ell;
        if (soft) {
            const SoftValue sv = soft_batch_objective(rec.losses, ell_, cfg_.alpha, cfg_.soft_tau,
                                                      cfg_.soft_surrogate);
            for (std::size_t j = 0; j < b; ++j) accumulate(evals[j], sv.d_loss[j]);
            d_ell = sv.d_ell;
        } else {
            const double w = 1.0 / (cfg_.alpha * static_cast<double>(b));
            for (std::size_t j = 0; j < b; ++j)
                if (rec.losses[j] > ell_) accumulate(evals[j], w);
            d_ell = trunc_ell_subgradient(rec.losses, ell_, cfg_.alpha);
        }
        rec.ell = ell_;
        learner_step(rec);
        ell_ -= lr_ell_ * d_ell;
        if (cfg_.clamp_ell) ell_ = std::clamp(ell_, 0.0, 1.0);
    }

    void finish_step(std::size_t t, StepRecord rec) {
        if (rec.zero_grad) ++trace_.zero_grad_steps;
        trace_.steps.push_back(std::move(rec));
        if (cfg_.store_iterates) trace_.iterates.push_back(theta_);
        const double w = 1.0 / static_cast<double>(t);
        for (std::size_t j = 0; j < theta_.dim(); ++j)
            trace_.running_average.theta[j] += w * (theta_.theta[j] - trace_.running_average.theta[j]);
        trace_.running_average.bias += w * (theta_.bias - trace_.running_average.bias);
        if (!cfg_.store_iterates && cfg_.selection == IterateSelection::uniform_random &&
            select_.uniform() * static_cast<double>(t) < 1.0)
            reservoir_ = theta_;

        if (t % spe_ == 0 || t == cfg_.steps) {
            const std::size_t epoch = (t + spe_ - 1) / spe_;
            if (cfg_.epoch_hook) {
                EpochRecord er = cfg_.epoch_hook(epoch, t, theta_);
                er.epoch = epoch;
                er.step = t;
                const auto it = er.metrics.find("val_cvar");
                if (cfg_.early_stopping && it != er.metrics.end() && it->second < best_val_) {
                    best_val_ = it->second;
                    best_ = theta_;
                }
                trace_.epochs.push_back(std::move(er));
            }
            if (t % spe_ == 0 &&
                std::find(cfg_.lr_decay_epochs.begin(), cfg_.lr_decay_epochs.end(), epoch) !=
                    cfg_.lr_decay_epochs.end()) {
                opt_.lr *= 0.1;
                lr_ell_ *= 0.1;
            }
        }
    }

    TrainResult finish() {
        TrainResult out;
        out.final_params = theta_;
        out.final_ell = ell_;
        if (sampler_) trace_.clip_events = sampler_->clip_events();
        if (cfg_.steps == 0) {
            out.params = theta_;
        } else if (cfg_.early_stopping && best_) {
            out.params = *best_;
        } else if (!cfg_.store_iterates && cfg_.selection == IterateSelection::uniform_random) {
            out.params = reservoir_.value_or(theta_);
        } else if (!cfg_.store_iterates && cfg_.selection == IterateSelection::last) {
            out.params = theta_;
        } else {
            out.params = select_output(trace_, cfg_.selection, select_);
        }
        out.trace = std::move(trace_);
        return out;
    }

    const Dataset& data_;
    const LossSpec& spec_;
    const TrainConfig& cfg_;
    ModelParams theta_;
    OptimizerState opt_;
    Rng draws_;
    Rng select_;
    std::vector<double> grad_;
    double grad_bias_ = 0.0;
    double ell_ = 0.5;
    double lr_ell_ = 0.0;
    std::optional<RiskLevel> level_;
    std::optional<Sampler> sampler_;
    std::size_t spe_ = 1;
    RunTrace trace_;
    std::optional<ModelParams> best_;
    std::optional<ModelParams> reservoir_;
    double best_val_ = std::numeric_limits<double>::infinity();
};

TrainResult train_as(Algorithm a, const Dataset& data, const LossSpec& spec, const TrainConfig& config,
                     const ModelParams& init) {
    TrainConfig cfg = config;
    cfg.algorithm = a;
    return Trainer(data, spec, cfg, init).run();
}

}  // namespace

TrainResult train(const Dataset& data, const LossSpec& spec, const TrainConfig& config,
                  const ModelParams& init) {
    return Trainer(data, spec, config, init).run();
}

TrainResult train_ada_cvar(const Dataset& data, const LossSpec& spec, const TrainConfig& config,
                           const ModelParams& init) {
    return train_as(Algorithm::ada_cvar, data, spec, config, init);
}

TrainResult train_trunc_cvar(const Dataset& data, const LossSpec& spec, const TrainConfig& config,
                             const ModelParams& init) {
    return train_as(Algorithm::trunc_cvar, data, spec, config, init);
}

TrainResult train_soft_cvar(const Dataset& data, const LossSpec& spec, const TrainConfig& config,
                            const ModelParams& init) {
    return train_as(Algorithm::soft_cvar, data, spec, config, init);
}

TrainResult train_mean(const Dataset& data, const LossSpec& spec, const TrainConfig& config,
                       const ModelParams& init) {
    return train_as(Algorithm::mean, data, spec, config, init);
}

// ---------------------------------------------------------------------------
// Oracles and regret

CvarOracle cvar_oracle(const Dataset& data, const LossSpec& spec, const RiskLevel& level, std::size_t steps,
                       double lr0) {
    if (level.n() != data.rows) throw InvalidInput("risk level does not match the dataset size");
    const std::size_t k = level.k();
    ModelParams theta = ModelParams::zeros(data.cols);
    std::vector<double> losses = full_losses(data, theta, spec);
    double ell = tail_threshold(losses, k);
    CvarOracle best{theta, ell, tail_average(losses, k)};

    std::vector<double> g(data.cols);
    for (std::size_t s = 1; s <= steps; ++s) {
        std::fill(g.begin(), g.end(), 0.0);
        double gb = 0.0;
        std::size_t active = 0;
        for (std::size_t i = 0; i < data.rows; ++i) {
            const LossGrad lg = loss_and_grad(theta, data.row(i), data.targets[i], spec);
            if (lg.loss <= ell) continue;
            ++active;
            for (std::size_t j = 0; j < g.size(); ++j) g[j] += lg.grad[j];
            gb += lg.grad_bias;
        }
        const double inv_k = 1.0 / static_cast<double>(k);
        const double rate = lr0 / std::sqrt(static_cast<double>(s));
        for (std::size_t j = 0; j < g.size(); ++j) theta.theta[j] -= rate * inv_k * g[j];
        theta.bias -= rate * inv_k * gb;
        ell -= rate * (1.0 - static_cast<double>(active) * inv_k);

        losses = full_losses(data, theta, spec);
        const double cvar = tail_average(losses, k);
        if (cvar < best.cvar) best = {theta, ell, cvar};
    }
    return best;
}

double game_regret(const RunTrace& trace, const Dataset& data, const LossSpec& spec, const RiskLevel& level,
                   const ModelParams& theta_star) {
    if (trace.full_losses.empty() || trace.full_losses.size() != trace.full_q.size())
        throw Unsupported("game regret needs a trace recorded with instrument_full_losses");
    const std::vector<double> star = full_losses(data, theta_star, spec);
    double regret = 0.0;
    for (std::size_t t = 0; t < trace.full_losses.size(); ++t) {
        const auto& lt = trace.full_losses[t];
        const auto& qt = trace.full_q[t];
        if (lt.size() != star.size() || qt.size() != star.size())
            throw InvalidInput("instrumented loss vectors do not match the dataset");
        double played = 0.0;
        for (std::size_t i = 0; i < star.size(); ++i) played += qt[i] * star[i];
        regret += tail_average(lt, level.k()) - played;
    }
    return regret;
}

}  // namespace adacvar
