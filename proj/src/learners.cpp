#include "adacvar/learners.hpp"

#include <cmath>

#include "adacvar/error.hpp"

namespace adacvar {

namespace {

double softplus(double z) {
    // log(1 + e^z) without overflow.
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void check_label(LossKind kind, double y) {
    if (kind == LossKind::logistic && y != 1.0 && y != -1.0)
        throw InvalidInput("logistic loss needs labels in {-1, +1}, got " + std::to_string(y));
}

}  // namespace

bool ModelParams::finite() const {
    for (double v : theta)
        if (!std::isfinite(v)) return false;
    return std::isfinite(bias);
}

const char* to_string(LossKind kind) {
    return kind == LossKind::squared ? "squared" : "logistic";
}

double predict(const ModelParams& params, std::span<const double> x) {
    if (x.size() != params.theta.size())
        throw InvalidInput("feature dimension " + std::to_string(x.size()) + " does not match model " +
                           std::to_string(params.theta.size()));
    double s = params.bias;
    for (std::size_t j = 0; j < x.size(); ++j) s += params.theta[j] * x[j];
    return s;
}

double raw_loss(LossKind kind, double pred, double y) {
    if (kind == LossKind::squared) {
        const double r = pred - y;
        return r * r;
    }
    return softplus(-y * pred);
}

double loss_value(const ModelParams& params, std::span<const double> x, double y, const LossSpec& spec) {
    check_label(spec.kind, y);
    const double raw = raw_loss(spec.kind, predict(params, x), y);
    return std::min(raw / spec.scale, 1.0);
}

LossGrad loss_and_grad(const ModelParams& params, std::span<const double> x, double y,
                       const LossSpec& spec) {
    check_label(spec.kind, y);
    const double pred = predict(params, x);
    const double raw = raw_loss(spec.kind, pred, y);
    LossGrad out{0.0, raw, std::vector<double>(x.size(), 0.0), 0.0};
    const double normalized = raw / spec.scale;
    if (normalized > 1.0) {
        out.loss = 1.0;
        return out;
    }
    out.loss = normalized;
    // d loss / d pred
    const double dpred = spec.kind == LossKind::squared ? 2.0 * (pred - y) / spec.scale
                                                        : -y * sigmoid(-y * pred) / spec.scale;
    for (std::size_t j = 0; j < x.size(); ++j) out.grad[j] = dpred * x[j];
    out.grad_bias = dpred;
    return out;
}

std::vector<double> finite_diff_grad(const ModelParams& params, std::span<const double> x, double y,
                                     const LossSpec& spec, double h) {
    if (!(h > 0.0)) throw InvalidInput("finite-difference step must be positive");
    std::vector<double> g(params.dim() + 1, 0.0);
    ModelParams probe = params;
    for (std::size_t j = 0; j <= params.dim(); ++j) {
        double& coord = j < params.dim() ? probe.theta[j] : probe.bias;
        const double saved = coord;
        coord = saved + h;
        const double up = loss_value(probe, x, y, spec);
        coord = saved - h;
        const double down = loss_value(probe, x, y, spec);
        coord = saved;
        g[j] = (up - down) / (2.0 * h);
    }
    return g;
}

const char* to_string(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::sgd: return "sgd";
        case OptimizerKind::momentum: return "momentum";
        case OptimizerKind::adam: return "adam";
    }
    return "unknown";
}

OptimizerKind optimizer_from_string(const std::string& name) {
    if (name == "sgd" || name == "plain-sgd") return OptimizerKind::sgd;
    if (name == "momentum" || name == "momentum-sgd") return OptimizerKind::momentum;
    if (name == "adam" || name == "adaptive-moment") return OptimizerKind::adam;
    throw InvalidInput("unknown optimizer '" + name + "'");
}

void optimizer_step(OptimizerState& opt, ModelParams& params, std::span<const double> grad,
                    double grad_bias) {
    const std::size_t d = params.dim();
    if (grad.size() != d) throw InvalidInput("gradient dimension does not match the model");
    ++opt.step;

    const auto component = [&](std::size_t j) { return j < d ? grad[j] : grad_bias; };
    const auto param = [&](std::size_t j) -> double& { return j < d ? params.theta[j] : params.bias; };

    switch (opt.kind) {
        case OptimizerKind::sgd:
            for (std::size_t j = 0; j <= d; ++j) param(j) -= opt.lr * component(j);
            break;
        case OptimizerKind::momentum:
            if (opt.first.size() != d + 1) opt.first.assign(d + 1, 0.0);
            for (std::size_t j = 0; j <= d; ++j) {
                opt.first[j] = opt.momentum * opt.first[j] + component(j);
                param(j) -= opt.lr * opt.first[j];
            }
            break;
        case OptimizerKind::adam: {
            constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
            if (opt.first.size() != d + 1) opt.first.assign(d + 1, 0.0);
            if (opt.second.size() != d + 1) opt.second.assign(d + 1, 0.0);
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(opt.step));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(opt.step));
            for (std::size_t j = 0; j <= d; ++j) {
                const double g = component(j);
                opt.first[j] = beta1 * opt.first[j] + (1.0 - beta1) * g;
                opt.second[j] = beta2 * opt.second[j] + (1.0 - beta2) * g * g;
                param(j) -= opt.lr * (opt.first[j] / c1) / (std::sqrt(opt.second[j] / c2) + eps);
            }
            break;
        }
    }

    if (opt.radius) {
        double norm2 = 0.0;
        for (double v : params.theta) norm2 += v * v;
        const double norm = std::sqrt(norm2);
        if (norm > *opt.radius) {
            const double s = *opt.radius / norm;
            for (double& v : params.theta) v *= s;
        }
    }
}

}  // namespace adacvar
