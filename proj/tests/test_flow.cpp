#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "flowecon/flow.hpp"
#include "flowecon/stats.hpp"

using namespace flowecon;

namespace {

// 1-d model dphi = drift(phi) dt + diffusion(phi) dW with scalar growth h.
FlowModel model_1d(std::function<double(double)> drift,
                   std::function<double(double)> diffusion,
                   std::function<double(double)> h = nullptr) {
    FlowModel m;
    m.dim = 1;
    m.noise_dim = 1;
    m.drift = [drift](std::span<const double> x, std::span<double> out) {
        out[0] = drift(x[0]);
    };
    m.diffusion = [diffusion](std::span<const double> x, std::span<double> out) {
        out[0] = diffusion(x[0]);
    };
    if (h) m.growth = field_1d(h);
    return m;
}

FlowModel ou_model(double kappa = 1.0, double vol = 1.0) {
    return model_1d([kappa](double x) { return -kappa * x; },
                    [vol](double) { return vol; });
}

} // namespace

TEST_CASE("zero coefficients freeze the state and weights") {
    auto m = model_1d([](double) { return 0.0; }, [](double) { return 0.0; });
    TimeGrid grid{0.0, 1.0, 50};
    auto ens = simulate_flow(m, grid, {{1.25}}, 16, 99);
    for (int p = 0; p < ens.n_paths; ++p)
        for (int j = 0; j <= grid.steps; ++j) {
            CHECK(ens.state(p, 0, j)[0] == 1.25);
            CHECK(ens.log_weight(p, 0, j) == 0.0);
        }
}

TEST_CASE("mean-reverting flow matches the closed-form mean at three standard errors") {
    auto m = ou_model();
    TimeGrid grid{0.0, 1.0, 200};
    const int M = 10000;
    auto ens = simulate_flow(m, grid, {{1.0}}, M, 4242);
    std::vector<double> terminal(M);
    for (int p = 0; p < M; ++p) terminal[p] = ens.state(p, 0, grid.steps)[0];
    double mean = mean_of(terminal);
    double se = stddev_of(terminal) / std::sqrt(double(M));
    const double closed_form = std::exp(-1.0); // e^{-T} x0 with T = 1, x0 = 1
    CHECK(std::abs(mean - closed_form) < 3.0 * se + 2e-3); // + Euler bias allowance at dt=1/200
}

TEST_CASE("zero growth gives unit weights bitwise") {
    auto m = ou_model();
    TimeGrid grid{0.0, 1.0, 64};
    auto ens = simulate_flow(m, grid, {{0.3}, {0.9}}, 32, 5);
    for (int p = 0; p < ens.n_paths; ++p)
        for (int k = 0; k < ens.n_types; ++k)
            for (int j = 0; j <= grid.steps; ++j)
                CHECK(ens.log_weight(p, k, j) == 0.0);
}

TEST_CASE("same seed reproduces the ensemble bitwise; different seed does not") {
    auto m = ou_model(0.8, 0.5);
    TimeGrid grid{0.0, 2.0, 100};
    auto a = simulate_flow(m, grid, {{0.1}, {-0.4}}, 50, 777);
    auto b = simulate_flow(m, grid, {{0.1}, {-0.4}}, 50, 777);
    CHECK(a.states == b.states);
    CHECK(a.increments == b.increments);
    auto c = simulate_flow(m, grid, {{0.1}, {-0.4}}, 50, 778);
    CHECK(a.states != c.states);
}

TEST_CASE("restart reproduces the original tail bitwise") {
    // Flow composition over adjacent windows is exact at grid points because
    // the restarted recursion replays identical floating-point operations.
    auto m = model_1d([](double x) { return 0.2 - 0.5 * x; },
                      [](double x) { return 0.3 + 0.05 * std::tanh(x); },
                      [](double x) { return 0.1 * std::sin(x); });
    TimeGrid grid{0.0, 2.0, 80};
    auto ens = simulate_flow(m, grid, {{0.0}, {1.0}, {-1.0}}, 25, 2024);
    const int s = 33;
    auto tail = restart_flow(m, ens, s);
    REQUIRE(tail.grid.steps == grid.steps - s);
    for (int p = 0; p < ens.n_paths; ++p)
        for (int k = 0; k < ens.n_types; ++k)
            for (int j = 0; j <= tail.grid.steps; ++j)
                CHECK(tail.state(p, k, j)[0] == ens.state(p, k, s + j)[0]);
}

TEST_CASE("restart composed twice still matches the original tail bitwise") {
    auto m = ou_model(0.5, 0.4);
    TimeGrid grid{0.0, 1.0, 60};
    auto ens = simulate_flow(m, grid, {{0.7}}, 10, 31);
    auto mid = restart_flow(m, ens, 20);
    auto late = restart_flow(m, mid, 25); // absolute index 45
    for (int p = 0; p < ens.n_paths; ++p)
        for (int j = 0; j <= late.grid.steps; ++j)
            CHECK(late.state(p, 0, j)[0] == ens.state(p, 0, 45 + j)[0]);
}

TEST_CASE("weight cocycle holds to 1e-12 relative across a restart") {
    auto m = model_1d([](double x) { return -0.3 * x; },
                      [](double) { return 0.25; },
                      [](double x) { return 0.4 + 0.2 * std::cos(x); });
    TimeGrid grid{0.0, 3.0, 120};
    auto ens = simulate_flow(m, grid, {{0.5}}, 40, 909);
    const int s = 47;
    auto tail = restart_flow(m, ens, s);
    for (int p = 0; p < ens.n_paths; ++p)
        for (int j = 0; j <= tail.grid.steps; ++j) {
            double full = ens.log_weight(p, 0, s + j);
            double split = ens.log_weight(p, 0, s) + tail.log_weight(p, 0, j);
            double rel = std::abs(std::exp(full) - std::exp(split)) / std::exp(full);
            CHECK(rel <= 1e-12);
        }
}

TEST_CASE("antithetic pairs mirror increments exactly") {
    auto m = ou_model();
    TimeGrid grid{0.0, 1.0, 30};
    auto ens = simulate_flow(m, grid, {{1.0}}, 8, 55, /*antithetic=*/true);
    for (int p = 0; p < 8; p += 2)
        for (int j = 0; j < grid.steps; ++j)
            CHECK(ens.increment(p, j)[0] == -ens.increment(p + 1, j)[0]);
}

TEST_CASE("weak error in the mean decays at first order across nested grids") {
    // Shared Brownian path: fine increments are summed into coarser ones.  On
    // a linear flow, antithetic pairs cancel the Monte Carlo noise in the mean
    // exactly, leaving the pure scheme bias x0 |(1-dt)^(T/dt) - e^{-T}|.
    auto m = ou_model();
    const int M = 64, Nf = 200;
    TimeGrid fine{0.0, 1.0, Nf};
    auto fine_ens = simulate_flow(m, fine, {{1.0}}, M, 101, /*antithetic=*/true);

    std::vector<double> meshes, errors;
    for (int factor : {4, 2, 1}) {
        int N = Nf / factor;
        TimeGrid g{0.0, 1.0, N};
        std::vector<double> inc(std::size_t(M) * N, 0.0);
        for (int p = 0; p < M; ++p)
            for (int j = 0; j < N; ++j)
                for (int f = 0; f < factor; ++f)
                    inc[std::size_t(p) * N + j] += fine_ens.increment(p, j * factor + f)[0];
        auto ens = simulate_flow_with_increments(m, g, {{1.0}}, M, inc);
        double mean = 0.0;
        for (int p = 0; p < M; ++p) mean += ens.state(p, 0, N)[0];
        mean /= M;
        meshes.push_back(g.dt());
        errors.push_back(std::abs(mean - std::exp(-1.0)));
    }
    auto fit = convergence_order(meshes, errors);
    CHECK(fit.slope > 0.9);
    CHECK(fit.slope < 1.1);
}

TEST_CASE("paths leaving the domain are frozen and counted") {
    auto m = model_1d([](double) { return 0.0; }, [](double) { return 0.4; });
    m.domain = [](std::span<const double> x) { return std::abs(x[0]) < 2.0; };
    TimeGrid grid{0.0, 1.0, 100};
    auto ens = simulate_flow(m, grid, {{1.2}}, 400, 12);
    int flagged = ens.n_flagged();
    CHECK(flagged > 0);             // starting near the boundary, many exit
    CHECK(flagged < 400);
    CHECK(flagged == ens.n_flagged());
    for (int p = 0; p < ens.n_paths; ++p) {
        if (!ens.exploded[p]) continue;
        int s = ens.explode_step[p];
        REQUIRE(s >= 1);
        // frozen at the last good state from the failure step onwards
        for (int j = s; j <= grid.steps; ++j)
            CHECK(ens.state(p, 0, j)[0] == ens.state(p, 0, s - 1)[0]);
    }
}

TEST_CASE("simulation rejects non-finite coefficients at the initial points") {
    auto m = model_1d([](double x) { return 1.0 / x; }, [](double) { return 1.0; });
    TimeGrid grid{0.0, 1.0, 10};
    CHECK_THROWS_AS(simulate_flow(m, grid, {{0.0}}, 4, 1), std::invalid_argument);
}

TEST_CASE("simulation rejects wholesale explosion") {
    // Deterministic cubic blow-up: every path overflows, which must throw
    // rather than return an ensemble that is mostly garbage.
    auto m = model_1d([](double x) { return x * x * x; }, [](double) { return 0.0; });
    TimeGrid grid{0.0, 2.0, 20};
    CHECK_THROWS_AS(simulate_flow(m, grid, {{3.0}}, 4, 1), std::runtime_error);
}

TEST_CASE("pathwise integral of a constant field is exact") {
    auto m = ou_model();
    TimeGrid grid{0.0, 2.0, 40};
    auto ens = simulate_flow(m, grid, {{0.2}}, 6, 3);
    auto gamma = pathwise_integral(ens, constant_field(0.05));
    for (int p = 0; p < ens.n_paths; ++p)
        for (int j = 0; j <= grid.steps; ++j) {
            double expected = 0.05 * grid.dt() * j;
            CHECK(gamma[(std::size_t(p) * 1) * grid.points() + j] ==
                  doctest::Approx(expected).epsilon(1e-13));
        }
}

TEST_CASE("non-explosion probe: driftless unit-noise flow diverges on both sides") {
    auto rep = feller_nonexplosion_1d([](double) { return 0.0; },
                                      [](double) { return 1.0; },
                                      {-4096.0, 4096.0}, 1e-6);
    CHECK(rep.verdict == FellerVerdict::non_explosive);
}

TEST_CASE("non-explosion probe: mean reversion is caught on a short range") {
    auto rep = feller_nonexplosion_1d([](double x) { return -x; },
                                      [](double) { return 1.0; },
                                      {-8.0, 8.0}, 1e-6);
    CHECK(rep.verdict == FellerVerdict::non_explosive);
}

TEST_CASE("non-explosion probe stays inconclusive for a cubic drift") {
    auto rep = feller_nonexplosion_1d([](double x) { return x * x * x; },
                                      [](double) { return 1.0; },
                                      {-4.0, 4.0}, 1e-6);
    CHECK(rep.verdict == FellerVerdict::inconclusive);
}

TEST_CASE("non-explosion probe rejects vanishing noise") {
    CHECK_THROWS_AS(feller_nonexplosion_1d([](double) { return 0.0; },
                                           [](double x) { return x; },
                                           {-2.0, 2.0}, 1e-6),
                    std::invalid_argument);
}
