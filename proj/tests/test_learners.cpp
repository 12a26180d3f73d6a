#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "adacvar/error.hpp"
#include "adacvar/learners.hpp"

using namespace adacvar;

namespace {

ModelParams random_params(std::mt19937_64& g, std::size_t d, double sd) {
    std::normal_distribution<double> Z(0, sd);
    ModelParams p = ModelParams::zeros(d);
    for (double& x : p.theta) x = Z(g);
    p.bias = Z(g);
    return p;
}

double max_rel_error(const LossGrad& lg, const std::vector<double>& fd) {
    double num = 0, den = 0;
    for (std::size_t j = 0; j < lg.grad.size(); ++j) {
        num = std::max(num, std::abs(lg.grad[j] - fd[j]));
        den = std::max(den, std::abs(fd[j]));
    }
    num = std::max(num, std::abs(lg.grad_bias - fd.back()));
    den = std::max(den, std::abs(fd.back()));
    return num / std::max(den, 1e-12);
}

}  // namespace

TEST_CASE("predict examples") {
    const std::vector<double> x{3, 4};
    CHECK(predict(ModelParams::zeros(2), x) == 0.0);
    CHECK(predict(ModelParams{{1, 2}, 1}, x) == 12.0);
    CHECK(predict(ModelParams{{1, 2}, -0.5}, std::vector<double>{0, 0}) == -0.5);
    CHECK_THROWS_AS(predict(ModelParams::zeros(3), x), InvalidInput);
}

TEST_CASE("loss examples") {
    const std::vector<double> x{1.0, -2.0};
    const ModelParams p{{0.5, 0.25}, 0.1};
    const double pred = predict(p, x);
    const LossGrad at_min = loss_and_grad(p, x, pred, LossSpec{LossKind::squared, 4.0});
    CHECK(at_min.loss == 0.0);
    for (double gj : at_min.grad) CHECK(gj == 0.0);
    CHECK(at_min.grad_bias == 0.0);

    const LossGrad lg = loss_and_grad(ModelParams::zeros(2), x, 1.0, LossSpec{LossKind::logistic, 3.0});
    CHECK(lg.loss == doctest::Approx(std::log(2.0) / 3.0).epsilon(1e-15));

    const LossGrad clamped = loss_and_grad(p, x, pred + 3.0, LossSpec{LossKind::squared, 4.0});
    CHECK(clamped.loss == 1.0);
    CHECK(clamped.raw == doctest::Approx(9.0));
    for (double gj : clamped.grad) CHECK(gj == 0.0);
    CHECK(clamped.grad_bias == 0.0);

    CHECK_THROWS_AS(loss_and_grad(p, x, 0.5, LossSpec{LossKind::logistic, 1.0}), InvalidInput);
}

TEST_CASE("raw losses") {
    CHECK(raw_loss(LossKind::squared, 1.5, -0.5) == 4.0);
    CHECK(raw_loss(LossKind::logistic, 0.0, 1.0) == doctest::Approx(std::log(2.0)));
    CHECK(raw_loss(LossKind::logistic, 800.0, -1.0) == doctest::Approx(800.0));
    CHECK(raw_loss(LossKind::logistic, 800.0, 1.0) >= 0.0);
}

TEST_CASE("property: analytic gradients match central differences") {
    std::mt19937_64 g(3);
    std::normal_distribution<double> Z(0, 1);
    for (LossKind kind : {LossKind::squared, LossKind::logistic}) {
        int checked = 0;
        while (checked < 100) {
            const ModelParams p = random_params(g, 4, 0.5);
            std::vector<double> x(4);
            for (double& v : x) v = Z(g);
            const double y = kind == LossKind::logistic ? (Z(g) > 0 ? 1.0 : -1.0) : Z(g);
            const LossSpec spec{kind, kind == LossKind::logistic ? std::log1p(std::exp(10.0)) : 8.0};
            const LossGrad lg = loss_and_grad(p, x, y, spec);
            if (!(lg.loss > 0.01 && lg.loss < 0.99)) continue;
            ++checked;
            CHECK(max_rel_error(lg, finite_diff_grad(p, x, y, spec, 1e-5)) <= 1e-4);
        }
    }
}

TEST_CASE("finite differences vanish at a minimum and in the clamp") {
    const std::vector<double> x{1.0, 2.0};
    const ModelParams p{{0.3, -0.1}, 0.2};
    const LossSpec spec{LossKind::squared, 1.0};
    for (double v : finite_diff_grad(p, x, predict(p, x), spec, 1e-5)) CHECK(std::abs(v) <= 1e-9);
    for (double v : finite_diff_grad(p, x, predict(p, x) + 10.0, spec, 1e-5)) CHECK(v == 0.0);
}

TEST_CASE("property: normalized losses stay in the unit interval") {
    std::mt19937_64 g(5);
    std::normal_distribution<double> Z(0, 3);
    for (int i = 0; i < 100000; ++i) {
        const ModelParams p = random_params(g, 3, 3.0);
        const std::vector<double> x{Z(g), Z(g), Z(g)};
        const bool logistic = i % 2 == 0;
        const double y = logistic ? (i % 4 == 0 ? 1.0 : -1.0) : Z(g);
        const LossSpec spec{logistic ? LossKind::logistic : LossKind::squared, 5.0};
        const double l = loss_value(p, x, y, spec);
        REQUIRE(l >= 0.0);
        REQUIRE(l <= 1.0);
    }
}

TEST_CASE("optimizer examples") {
    OptimizerState plain;
    plain.lr = 0.1;
    ModelParams p{{1.0}, 0.0};
    optimizer_step(plain, p, std::vector<double>{2.0}, 0.0);
    CHECK(p.theta[0] == doctest::Approx(0.8).epsilon(1e-15));
    optimizer_step(plain, p, std::vector<double>{0.0}, 0.0);
    CHECK(p.theta[0] == doctest::Approx(0.8).epsilon(1e-15));

    OptimizerState mom;
    mom.kind = OptimizerKind::momentum;
    mom.lr = 0.1;
    mom.momentum = 0.9;
    ModelParams q{{1.0}, 0.0};
    optimizer_step(mom, q, std::vector<double>{2.0}, 0.0);
    optimizer_step(mom, q, std::vector<double>{2.0}, 0.0);
    CHECK(q.theta[0] == doctest::Approx(1.0 - 0.1 * 2.0 * (1 + 1.9)).epsilon(1e-14));
}

TEST_CASE("adam first step moves every coordinate by about lr") {
    OptimizerState adam;
    adam.kind = OptimizerKind::adam;
    adam.lr = 0.01;
    ModelParams p{{0.0, 0.0}, 0.0};
    optimizer_step(adam, p, std::vector<double>{3.0, -0.2}, 5.0);
    CHECK(p.theta[0] == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(p.theta[1] == doctest::Approx(0.01).epsilon(1e-6));
    CHECK(p.bias == doctest::Approx(-0.01).epsilon(1e-6));
}

TEST_CASE("projection keeps theta inside the ball") {
    OptimizerState opt;
    opt.lr = 1.0;
    opt.radius = 2.0;
    ModelParams p{{0.0, 0.0}, 0.0};
    optimizer_step(opt, p, std::vector<double>{-30.0, -40.0}, 0.0);
    CHECK(std::hypot(p.theta[0], p.theta[1]) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(p.theta[0] == doctest::Approx(1.2));
}

TEST_CASE("property: plain descent on least squares is monotone across epochs") {
    std::mt19937_64 g(7);
    std::normal_distribution<double> Z(0, 1);
    const std::size_t n = 200, d = 3;
    std::vector<std::vector<double>> X(n, std::vector<double>(d));
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (double& v : X[i]) v = Z(g);
        y[i] = 1.5 * X[i][0] - 0.5 * X[i][1] + 0.3 + 0.1 * Z(g);
    }
    const LossSpec spec{LossKind::squared, 50.0};
    OptimizerState opt;
    opt.lr = 0.01;
    ModelParams p = ModelParams::zeros(d);
    auto mean_loss = [&] {
        double s = 0;
        for (std::size_t i = 0; i < n; ++i) s += loss_value(p, X[i], y[i], spec);
        return s / n;
    };
    std::vector<double> per_epoch;
    for (int epoch = 0; epoch < 40; ++epoch) {
        for (std::size_t t = 0; t < n; ++t) {
            const std::size_t i = g() % n;
            const LossGrad lg = loss_and_grad(p, X[i], y[i], spec);
            optimizer_step(opt, p, lg.grad, lg.grad_bias);
        }
        per_epoch.push_back(mean_loss());
    }
    int increases = 0;
    for (std::size_t e = 2; e + 1 < per_epoch.size(); ++e) {
        if (per_epoch[e + 1] > per_epoch[e]) {
            ++increases;
            CHECK(per_epoch[e + 1] - per_epoch[e] < 1e-4);
        }
    }
    CHECK(increases <= static_cast<int>(0.05 * static_cast<double>(per_epoch.size() - 3)));
}

TEST_CASE("names") {
    CHECK(std::string(to_string(LossKind::logistic)) == "logistic");
    CHECK(optimizer_from_string("adam") == OptimizerKind::adam);
    CHECK_THROWS_AS(optimizer_from_string("rmsprop"), InvalidInput);
}
