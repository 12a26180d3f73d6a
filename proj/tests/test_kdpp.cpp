#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "adacvar/error.hpp"
#include "adacvar/kdpp.hpp"
#include "oracles.hpp"

using namespace adacvar;

namespace {

std::vector<double> random_log_weights(std::mt19937_64& g, std::size_t n, double sd) {
    std::normal_distribution<double> Z(0.0, sd);
    std::vector<double> lw(n);
    for (double& x : lw) x = Z(g);
    return lw;
}

std::vector<double> exp_all(const std::vector<double>& lw) {
    std::vector<double> w(lw.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(lw[i]);
    return w;
}

double sum(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s;
}

}  // namespace

TEST_CASE("log_add and log_sub") {
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(log_add(std::log(2.0), std::log(3.0)) == doctest::Approx(std::log(5.0)).epsilon(1e-15));
    CHECK(log_add(-inf, 1.5) == 1.5);
    CHECK(log_sub(std::log(5.0), std::log(3.0)) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(log_sub(1.0, 1.0) == -inf);
}

TEST_CASE("elementary symmetric polynomial examples") {
    const auto e = elementary_symmetric(LogWeightVector::from_weights(std::vector<double>{1, 2, 3}), 2);
    REQUIRE(e.size() == 3);
    CHECK(e[0] == 0.0);
    CHECK(std::exp(e[1]) == doctest::Approx(6.0).epsilon(1e-14));
    CHECK(std::exp(e[2]) == doctest::Approx(11.0).epsilon(1e-14));

    const auto u = elementary_symmetric(LogWeightVector::uniform(20), 20);
    for (std::size_t k = 0; k <= 20; ++k) {
        const double log_binom = std::lgamma(21.0) - std::lgamma(k + 1.0) - std::lgamma(21.0 - k);
        CHECK(u[k] == doctest::Approx(log_binom).epsilon(1e-13));
    }
    CHECK(elementary_symmetric(LogWeightVector::uniform(5), 0) == std::vector<double>{0.0});
    CHECK_THROWS_AS(elementary_symmetric(LogWeightVector::uniform(3), 4), InvalidInput);
}

TEST_CASE("elementary symmetric polynomials match enumeration") {
    std::mt19937_64 g(5);
    for (std::size_t n = 1; n <= 10; ++n) {
        const auto lw = random_log_weights(g, n, 1.5);
        const auto e = elementary_symmetric(LogWeightVector(lw), n);
        for (std::size_t j = 0; j <= n; ++j)
            CHECK(std::exp(e[j]) == doctest::Approx(oracle::enumerate_esp(exp_all(lw), j)).epsilon(1e-12));
    }
}

TEST_CASE("exact marginal examples") {
    const auto p = exact_marginals(LogWeightVector::from_weights(std::vector<double>{1, 2, 3}), 2);
    CHECK(p.p[0] == doctest::Approx(5.0 / 11).epsilon(1e-14));
    CHECK(p.p[1] == doctest::Approx(8.0 / 11).epsilon(1e-14));
    CHECK(p.p[2] == doctest::Approx(9.0 / 11).epsilon(1e-14));

    for (std::size_t k : {1u, 4u, 9u}) {
        const auto u = exact_marginals(LogWeightVector::uniform(12), k);
        for (double x : u.p) CHECK(x == doctest::Approx(k / 12.0).epsilon(1e-14));
    }
    const auto full = exact_marginals(LogWeightVector::from_weights(std::vector<double>{0.3, 4, 1}), 3);
    for (double x : full.p) CHECK(x == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("exact marginals reject infeasible sizes") {
    CHECK_THROWS_AS(exact_marginals(LogWeightVector::uniform(3), 0), InvalidInput);
    CHECK_THROWS_AS(exact_marginals(LogWeightVector::uniform(3), 4), InvalidInput);
    CHECK_THROWS_AS(exact_marginals(LogWeightVector::from_weights(std::vector<double>{1, 0, 0}), 2), InvalidInput);
}

TEST_CASE("zero weights get zero marginal") {
    const auto p = exact_marginals(LogWeightVector::from_weights(std::vector<double>{1, 0, 2, 3}), 2);
    CHECK(p.p[1] == 0.0);
    CHECK(sum(p.p) == doctest::Approx(2.0).epsilon(1e-14));
    const auto ref = oracle::enumerate_marginals({1, 0, 2, 3}, 2);
    for (std::size_t i = 0; i < 4; ++i) CHECK(p.p[i] == doctest::Approx(ref[i]).epsilon(1e-13));
}

TEST_CASE("property: exact marginals agree with enumeration") {
    std::mt19937_64 g(17);
    for (std::size_t n = 1; n <= 10; ++n)
        for (std::size_t k = 1; k <= n; ++k)
            for (int draw = 0; draw < 5; ++draw) {
                const auto lw = random_log_weights(g, n, 2.0);
                const auto p = exact_marginals(LogWeightVector(lw), k);
                const auto ref = oracle::enumerate_marginals(exp_all(lw), k);
                for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(p.p[i] - ref[i]) <= 1e-9);
            }
}

TEST_CASE("ill-conditioned weights route through the fallbacks and stay accurate") {
    // Widely spread weights make the deletion recurrence cancel for the heavy items.
    std::vector<double> lw;
    for (int i = 0; i < 12; ++i) lw.push_back(3.0 * i);
    const auto p = exact_marginals(LogWeightVector(lw), 6);
    const auto stats = last_marginal_fallbacks();
    CHECK(stats.top_down + stats.fresh > 0);
    const auto ref = oracle::enumerate_marginals(exp_all(lw), 6);
    for (std::size_t i = 0; i < lw.size(); ++i) CHECK(std::abs(p.p[i] - ref[i]) <= 1e-9);
}

TEST_CASE("property: marginals sum to k at large N") {
    std::mt19937_64 g(23);
    for (std::size_t n : {100u, 1000u, 3000u}) {
        const auto lw = random_log_weights(g, n, 3.0);
        const std::size_t k = n / 10;
        const auto p = exact_marginals(LogWeightVector(lw), k);
        CHECK(std::abs(sum(p.p) - static_cast<double>(k)) <= 1e-8);
        for (double x : p.p) CHECK((x >= 0.0 && x <= 1.0));
    }
}

TEST_CASE("nu solver examples") {
    CHECK(solve_nu(LogWeightVector::uniform(4), 2).nu == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(solve_nu(LogWeightVector::uniform(4), 1).nu == doctest::Approx(std::log(1.0 / 3)).epsilon(1e-10));
    const std::vector<double> lw{0.0, std::log(2.0), std::log(3.0)};
    const NuSolution s = solve_nu(LogWeightVector(lw), 2);
    CHECK(std::abs(s.residual) <= 1e-10);
    CHECK(s.nu == doctest::Approx(static_cast<double>(oracle::solve_nu(lw, 2))).epsilon(1e-9));
    CHECK_THROWS_AS(solve_nu(LogWeightVector::uniform(4), 4), InfeasibleConstraint);
    CHECK_THROWS_AS(solve_nu(LogWeightVector::from_weights(std::vector<double>{1, 1, 0}), 2), InfeasibleConstraint);
}

TEST_CASE("property: constraint map is increasing across the bracket") {
    std::mt19937_64 g(29);
    for (int trial = 0; trial < 20; ++trial) {
        const auto lw = random_log_weights(g, 40, 2.0);
        const NuSolution s = solve_nu(LogWeightVector(lw), 7);
        long double prev = -1e9L;
        for (double d = -30; d <= 30; d += 0.5) {
            const long double r = oracle::nu_residual(lw, 7, s.nu + d);
            CHECK(r >= prev);
            if (d < 0) CHECK(r < 0);
            if (d > 0) CHECK(r > 0);
            prev = r;
        }
    }
}

TEST_CASE("approximate marginal examples") {
    const auto u = approx_marginals(LogWeightVector::uniform(10), 3);
    for (double x : u.p) CHECK(x == doctest::Approx(0.3).epsilon(1e-12));

    const auto lw = LogWeightVector::from_weights(std::vector<double>{1, 3});
    const auto a = approx_marginals(lw, 1);
    const auto e = exact_marginals(lw, 1);
    CHECK(e.p[0] == doctest::Approx(0.25));
    CHECK(e.p[1] == doctest::Approx(0.75));
    CHECK(sum(a.p) == doctest::Approx(1.0).epsilon(1e-14));
    // sigma(nu) + sigma(log 3 + nu) = 1 gives e^nu = 1/sqrt(3).
    const double r = 1.0 / std::sqrt(3.0);
    CHECK(a.p[0] == doctest::Approx(r / (1 + r)).epsilon(1e-10));
    CHECK(tv_distance(e, a) == doctest::Approx(std::abs(0.25 - r / (1 + r))).epsilon(1e-9));

    CHECK_THROWS_AS(approx_marginals(LogWeightVector::uniform(5), 5), InfeasibleConstraint);
}

TEST_CASE("total variation examples") {
    MarginalDistribution p{{1.0, 0.0}, 1}, q{{0.0, 1.0}, 1};
    CHECK(tv_distance(p, p) == 0.0);
    CHECK(tv_distance(p, q) == 1.0);
    CHECK_THROWS_AS(tv_distance(p, MarginalDistribution{{1.0, 0.0, 0.0}, 1}), InvalidInput);

    const std::vector<double> w{1, 2, 3};
    const auto lw = LogWeightVector::from_weights(w);
    const auto ref = oracle::enumerate_marginals(w, 2);
    const long double nu = oracle::solve_nu({lw.log_w().begin(), lw.log_w().end()}, 2);
    double tv = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double a = static_cast<double>(w[i] * std::exp(nu) / (1 + w[i] * std::exp(nu)));
        tv += std::abs(ref[i] - a);
    }
    tv /= 4.0;
    CHECK(tv_distance(exact_marginals(lw, 2), approx_marginals(lw, 2)) == doctest::Approx(tv).epsilon(1e-9));
}

TEST_CASE("rescale leaves marginals unchanged") {
    std::mt19937_64 g(31);
    auto lw = random_log_weights(g, 20, 1.0);
    lw[3] = 300.0;
    LogWeightVector v(lw);
    const auto before = exact_marginals(v, 5);
    CHECK(v.rescale_if_above(250.0));
    CHECK(v.max_log() == 0.0);
    const auto after = exact_marginals(v, 5);
    for (std::size_t i = 0; i < 20; ++i) CHECK(after.p[i] == doctest::Approx(before.p[i]).epsilon(1e-12));
    CHECK_FALSE(v.rescale_if_above(250.0));
}

TEST_CASE("approximation gap shrinks with N") {
    std::mt19937_64 g(37);
    auto median_tv = [&](std::size_t n) {
        std::vector<double> tvs;
        for (int s = 0; s < 15; ++s) {
            const LogWeightVector lw(random_log_weights(g, n, 1.0));
            tvs.push_back(tv_distance(exact_marginals(lw, n / 10), approx_marginals(lw, n / 10)));
        }
        std::sort(tvs.begin(), tvs.end());
        return tvs[tvs.size() / 2];
    };
    CHECK(median_tv(500) < median_tv(50) / 4);
}
