#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace adacvar {

/// Linear model theta . x + bias.
struct ModelParams {
    std::vector<double> theta;
    double bias = 0.0;

    static ModelParams zeros(std::size_t dim) { return {std::vector<double>(dim, 0.0), 0.0}; }
    std::size_t dim() const { return theta.size(); }
    bool finite() const;
};

enum class LossKind { squared, logistic };

const char* to_string(LossKind kind);

/// Loss normalized into [0, 1]: min(raw / scale, 1).
struct LossSpec {
    LossKind kind = LossKind::squared;
    double scale = 1.0;
};

struct LossGrad {
    double loss;       ///< normalized, in [0, 1]
    double raw;        ///< before normalization and clamping
    std::vector<double> grad;
    double grad_bias;
};

/// Throws InvalidInput on dimension mismatch.
double predict(const ModelParams& params, std::span<const double> x);

/// Unnormalized loss: (pred - y)^2 or log(1 + exp(-y pred)).
double raw_loss(LossKind kind, double pred, double y);

/// Normalized loss and its gradient. In the clamped region (raw > scale) the
/// loss is exactly 1 and the gradient is zero. Logistic targets must be -1 or +1.
LossGrad loss_and_grad(const ModelParams& params, std::span<const double> x, double y,
                       const LossSpec& spec);

/// Normalized loss only.
double loss_value(const ModelParams& params, std::span<const double> x, double y, const LossSpec& spec);

/// Central differences of the normalized loss; theta coordinates then the bias.
std::vector<double> finite_diff_grad(const ModelParams& params, std::span<const double> x, double y,
                                     const LossSpec& spec, double h);

enum class OptimizerKind { sgd, momentum, adam };

const char* to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(const std::string& name);

/// First-order update rule with its accumulators. Sized lazily on first step.
struct OptimizerState {
    OptimizerKind kind = OptimizerKind::sgd;
    double lr = 0.01;
    double momentum = 0.9;
    std::optional<double> radius;  ///< L2-ball projection of theta when set

    std::vector<double> first;   ///< velocity (momentum) or first moment (adam); bias last
    std::vector<double> second;  ///< second moment (adam); bias last
    std::size_t step = 0;
};

/// theta <- theta - lr * direction(grad), then the optional projection.
void optimizer_step(OptimizerState& opt, ModelParams& params, std::span<const double> grad,
                    double grad_bias);

}  // namespace adacvar
