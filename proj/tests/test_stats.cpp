#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "flowecon/stats.hpp"

using namespace flowecon;

TEST_CASE("martingale test accepts centered increments") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int P = 1000, N = 50;
    std::vector<double> inc(std::size_t(P) * N);
    const double sdt = std::sqrt(0.01);
    for (auto& v : inc) v = sdt * normal(rng);
    auto rep = martingale_test(inc, P, N);
    CHECK(rep.pass);
    CHECK(rep.pass_fraction >= 0.95);
}

TEST_CASE("martingale test rejects a drifted sequence") {
    // Shift of 0.2 * sd per increment: at 50k paths the mean is ~45 standard
    // errors away from zero, so essentially every step must fail.
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int P = 50000, N = 20;
    const double sdt = std::sqrt(0.01);
    std::vector<double> inc(std::size_t(P) * N);
    for (auto& v : inc) v = sdt * (normal(rng) + 0.2);
    auto rep = martingale_test(inc, P, N);
    CHECK_FALSE(rep.pass);
    CHECK(rep.pass_fraction < 0.5);
}

TEST_CASE("martingale test passes identically zero increments via the floor") {
    const int P = 200, N = 10;
    std::vector<double> inc(std::size_t(P) * N, 0.0);
    auto rep = martingale_test(inc, P, N);
    CHECK(rep.pass);
    CHECK(rep.pass_fraction == 1.0);
}

TEST_CASE("martingale test requires at least 100 paths") {
    std::vector<double> inc(99 * 4, 0.0);
    CHECK_THROWS_AS(martingale_test(inc, 99, 4), std::invalid_argument);
}

TEST_CASE("convergence order recovers exact power laws") {
    std::vector<double> mesh = {0.1, 0.05, 0.025, 0.0125};
    std::vector<double> e1(4), e2(4), eh(4);
    for (int i = 0; i < 4; ++i) {
        e1[i] = 3.0 * mesh[i];
        e2[i] = 0.7 * mesh[i] * mesh[i];
        eh[i] = 2.0 * std::sqrt(mesh[i]);
    }
    CHECK(convergence_order(mesh, e1).slope == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(convergence_order(mesh, e2).slope == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(convergence_order(mesh, eh).slope == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("convergence order tolerates mild noise") {
    std::vector<double> mesh = {0.1, 0.05, 0.025};
    std::vector<double> err = {0.31, 0.148, 0.077}; // roughly order 1 with jitter
    auto fit = convergence_order(mesh, err);
    CHECK(fit.slope > 0.8);
    CHECK(fit.slope < 1.2);
}

TEST_CASE("brute force aggregate matches a hand-computed value") {
    // 2 * e^0 * 1.5 + 0.5 * e^{ln 2} * (-3) = 3 - 3 = 0 exactly up to rounding.
    std::vector<double> w = {2.0, 0.5};
    std::vector<double> f = {1.5, -3.0};
    std::vector<double> g = {0.0, std::log(2.0)};
    CHECK(std::abs(brute_force_aggregate(w, f, g)) < 1e-14);
}

TEST_CASE("kahan sum is exact where naive summation loses low bits") {
    // 1 + 1e-16 repeated: naive summation drops every tiny term.
    std::vector<double> xs;
    xs.push_back(1.0);
    for (int i = 0; i < 10000; ++i) xs.push_back(1e-16);
    double k = kahan_sum(xs);
    CHECK(k == doctest::Approx(1.0 + 1e-12).epsilon(1e-15));
}

TEST_CASE("ols recovers exact linear data with zero residual") {
    const int n = 50;
    std::vector<double> X(n * 2), y(n);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < n; ++i) {
        X[i * 2] = u(rng);
        X[i * 2 + 1] = u(rng);
        y[i] = 0.7 - 1.3 * X[i * 2] + 2.5 * X[i * 2 + 1];
    }
    auto fit = ols(y, X, n, 2);
    CHECK(fit.coef[0] == doctest::Approx(0.7).epsilon(1e-10));
    CHECK(fit.coef[1] == doctest::Approx(-1.3).epsilon(1e-10));
    CHECK(fit.coef[2] == doctest::Approx(2.5).epsilon(1e-10));
    CHECK(fit.resid_variance < 1e-20);
}

TEST_CASE("ols standard errors shrink like 1/sqrt(n)") {
    auto se_at = [](int n) {
        std::mt19937_64 rng(17);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<double> X(n), y(n);
        for (int i = 0; i < n; ++i) {
            X[i] = normal(rng);
            y[i] = 2.0 * X[i] + 0.5 * normal(rng);
        }
        return ols(y, X, n, 1).se[1];
    };
    double a = se_at(500), b = se_at(8000);
    CHECK(a / b > 2.5); // sqrt(16) = 4 in expectation
    CHECK(a / b < 6.0);
}

TEST_CASE("symmetric eigen solves a known 2x2") {
    // [[2,1],[1,2]] has eigenvalues 1 and 3.
    std::vector<double> a = {2.0, 1.0, 1.0, 2.0}, vals, vecs;
    symmetric_eigen(a, 2, vals, vecs);
    CHECK(vals[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(vals[1] == doctest::Approx(3.0).epsilon(1e-12));
    // eigenvector for lambda=1 is (1,-1)/sqrt(2) up to sign
    CHECK(vecs[0] * vecs[2] == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(std::abs(std::abs(vecs[0]) - std::abs(vecs[2])) < 1e-12);
}

TEST_CASE("symmetric eigen flags a rank-deficient direction") {
    // Outer product v v^T with v=(1,2,0): nullspace has dimension 2.
    std::vector<double> v = {1.0, 2.0, 0.0};
    std::vector<double> a(9);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) a[i * 3 + j] = v[i] * v[j];
    std::vector<double> vals, vecs;
    symmetric_eigen(a, 3, vals, vecs);
    CHECK(std::abs(vals[0]) < 1e-12);
    CHECK(std::abs(vals[1]) < 1e-12);
    CHECK(vals[2] == doctest::Approx(5.0).epsilon(1e-12));
}
