#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "flowecon/preferences.hpp"

using namespace flowecon;

TEST_CASE("parameter validation") {
    IsoelasticPreference p;
    p.alpha = 1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = {};
    p.beta = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = {};
    p.scale = -1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("terminal scale and effective impatience for the benchmark parameters") {
    IsoelasticPreference p{1.0, 0.5, 0.04};
    // d = (0.5 / 0.04)^{0.5} = sqrt(12.5)
    CHECK(p.wealth_scale() == doctest::Approx(3.5355339059327378).epsilon(1e-15));
    CHECK(p.u2(0.0, 1.0) == doctest::Approx(3.5355339059327378).epsilon(1e-15));
    CHECK(p.gamma() == doctest::Approx(0.08).epsilon(1e-15));
}

TEST_CASE("running utility is increasing and concave in y") {
    IsoelasticPreference p{2.0, 0.3, 0.06};
    double prev = p.u1(1.0, 0.1);
    double prev_slope = 1e300;
    for (double y = 0.2; y < 5.0; y += 0.1) {
        double cur = p.u1(1.0, y);
        CHECK(cur > prev);
        double slope = (cur - prev) / 0.1;
        CHECK(slope < prev_slope);
        prev = cur;
        prev_slope = slope;
    }
}

TEST_CASE("inverse marginals invert the marginals") {
    IsoelasticPreference p{1.7, 0.4, 0.03};
    for (double t : {0.0, 1.5, 7.0})
        for (double z : {0.01, 0.5, 2.0, 50.0}) {
            double y1 = p.inverse_marginal_1(t, z);
            CHECK(p.marginal_u1(t, y1) == doctest::Approx(z).epsilon(1e-12));
            double y2 = p.inverse_marginal_2(t, z);
            CHECK(p.marginal_u2(t, y2) == doctest::Approx(z).epsilon(1e-12));
        }
}

TEST_CASE("duality at a hand-solved point") {
    // alpha=1/2, beta=0.04, scale=1, t=0, z=1: argmax of sqrt(y) - y is
    // y* = 1/4 with value 1/4.
    IsoelasticPreference p{1.0, 0.5, 0.04};
    auto rep = check_duality(p, 1, 0.0, 1.0);
    CHECK(rep.dual == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(rep.argmax == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(rep.residual <= 1e-9);
}

TEST_CASE("duality residual stays below 1e-6 over random cases") {
    std::mt19937_64 rng(1234);
    std::uniform_real_distribution<double> ua(0.1, 0.9), ub(0.01, 0.2), uc(0.1, 10.0),
        ut(0.0, 5.0), ulz(-3.0, 3.0);
    for (int i = 0; i < 100; ++i) {
        IsoelasticPreference p{uc(rng), ua(rng), ub(rng)};
        double t = ut(rng), z = std::pow(10.0, ulz(rng));
        int which = 1 + (i % 2);
        auto rep = check_duality(p, which, t, z);
        double scale = std::max(std::abs(rep.dual), 1.0);
        CHECK(rep.residual <= 1e-6 * scale);
    }
}

TEST_CASE("duality near the boundary of the admissible exponent range") {
    for (double alpha : {0.05, 0.95}) {
        IsoelasticPreference p{1.0, alpha, 0.1};
        auto rep = check_duality(p, 2, 0.5, 3.0);
        CHECK(rep.residual <= 1e-6 * std::max(1.0, std::abs(rep.dual)));
    }
}

TEST_CASE("terminal and running inverses satisfy the consistency identity") {
    IsoelasticPreference p{1.0, 0.5, 0.04};
    auto rep = check_time_consistency(p, 1.0, 4.0, 1.0);
    // closed form: lhs = (A/gamma)(e^{-gamma}-e^{-4 gamma}), A=(c alpha/z)^{1/(1-alpha)}
    CHECK(rep.lhs == doctest::Approx(0.25 / 0.08 * (std::exp(-0.08) - std::exp(-0.32)))
                         .epsilon(1e-12));
    CHECK(rep.residual <= 1e-8);
}

TEST_CASE("consistency identity over assorted parameters") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> ua(0.15, 0.85), ub(0.01, 0.15), uc(0.2, 5.0),
        uz(0.05, 20.0);
    for (int i = 0; i < 50; ++i) {
        IsoelasticPreference p{uc(rng), ua(rng), ub(rng)};
        auto rep = check_time_consistency(p, 0.5, 3.5, uz(rng));
        CHECK(rep.residual <= 1e-8 * std::max(1.0, std::abs(rep.lhs)));
    }
}

TEST_CASE("a 10 percent terminal-scale perturbation breaks consistency measurably") {
    IsoelasticPreference p{1.0, 0.5, 0.04};
    auto rep = check_time_consistency(p, 1.0, 4.0, 1.0, /*wealth_scale_factor=*/1.1);
    CHECK(rep.residual > 1e-3);
}

TEST_CASE("the wealth inverse is independent of the terminal date") {
    IsoelasticPreference p{1.3, 0.6, 0.05};
    double z = 0.8, t = 0.5;
    double a = p.wealth_inverse(t, 3.0, z);
    double b = p.wealth_inverse(t, 9.0, z);
    CHECK(std::abs(a - b) <= 1e-8 * std::abs(a));
}

TEST_CASE("the wealth inverse decreases when impatience rises") {
    IsoelasticPreference slow{1.0, 0.5, 0.03}, fast{1.0, 0.5, 0.08};
    double z = 1.0;
    CHECK(fast.wealth_inverse(0.0, 5.0, z) < slow.wealth_inverse(0.0, 5.0, z));
}

TEST_CASE("two parameterizations with equal effective impatience") {
    IsoelasticPreference a{1.0, 0.5, 0.04};  // gamma = 0.08
    IsoelasticPreference b{3.0, 0.75, 0.02}; // gamma = 0.08
    CHECK(a.gamma() == b.gamma());
}

TEST_CASE("simpson handles a known integral to high accuracy") {
    double v = simpson([](double x) { return std::exp(-x); }, 0.0, 2.0, 256);
    CHECK(v == doctest::Approx(1.0 - std::exp(-2.0)).epsilon(1e-9));
    CHECK_THROWS_AS(simpson([](double) { return 1.0; }, 0.0, 1.0, 3), std::invalid_argument);
}
