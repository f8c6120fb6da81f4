#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowecon/decomposition.hpp"
#include "flowecon/scenarios.hpp"

using namespace flowecon;

namespace {

// Writes a throwaway csv in the test working directory and returns its name.
std::string write_file(const std::string& name, const std::string& body) {
    std::ofstream out(name);
    out << body;
    return name;
}

// Geometric income on a driftless constant-volatility flow.  Everything is
// exact: sigma^c = 0.2 * 0.3 = 0.06, the loading leg vanishes, and the short
// rate is mu^c - mu^{loading} - crp = 0.0018 + 0.04 - 0.0036 = 0.0382.
EquilibriumInputs geometric_inputs() {
    EquilibriumInputs in;
    in.model.dim = 1;
    in.model.noise_dim = 1;
    in.model.drift = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; };
    in.model.diffusion = [](std::span<const double>, std::span<double> out) { out[0] = 0.3; };
    in.model.growth = constant_field(0.0);
    in.model.impatience = constant_field(0.04);
    in.population = PopulationMeasure::discrete({{0.0}}, {1.0});
    in.income = field_1d([](double x) { return std::exp(0.2 * x); },
                         [](double x) { return 0.2 * std::exp(0.2 * x); });
    in.wealth = {50.0};
    in.gamma_lower = 0.04;
    return in;
}

}  // namespace

TEST_CASE("premium inner products match hand arithmetic") {
    const std::vector<double> sc = {0.0124, 0.0};
    const std::vector<double> sl = {-0.05, 0.1};
    const std::vector<double> sa = {0.15, 0.05};

    PremiumSplit split = equity_premium_split(sc, sl, sa);
    CHECK(std::abs(split.consumption - 0.00186) <= 1e-15);
    CHECK(std::abs(split.impatience - (-0.0025)) <= 1e-15);
    CHECK(std::abs(split.total - 0.00436) <= 1e-15);
    CHECK(split.total == split.consumption - split.impatience);
    CHECK(split.amplified);

    // Same premium through the wealth-volatility form sigma^W = sigma^c - sigma^L.
    const std::vector<double> sw = {0.0624, -0.1};
    CHECK(std::abs(equity_premium(sw, sa) - split.total) <= 1e-15);

    // Positive loading leg shrinks the premium instead.
    PremiumSplit damped = equity_premium_split(sc, {0.05, 0.0}, sa);
    CHECK_FALSE(damped.amplified);
    CHECK(damped.total < damped.consumption);

    // Homogeneous population: loading volatility zero, pure CCAPM term left.
    PremiumSplit ccapm = equity_premium_split(sc, {0.0, 0.0}, sa);
    CHECK(ccapm.impatience == 0.0);
    CHECK(ccapm.total == ccapm.consumption);

    CHECK_THROWS_AS((void)equity_premium({0.1}, sa), std::invalid_argument);
    CHECK_THROWS_AS((void)equity_premium_split(sc, {0.1}, sa), std::invalid_argument);
}

TEST_CASE("volatility proxy reproduces the published comparison rows") {
    struct Row {
        double sigma, ep, predicted, theta;
    };
    // sigma and ep are the published moments; predicted and theta the
    // published derived columns they should round-trip to.
    const std::vector<Row> rows = {
        {0.186, 0.069, 0.035, 0.37},  {0.192, 0.0694, 0.037, 0.36},
        {0.163, 0.0569, 0.027, 0.35}, {0.186, 0.0474, 0.035, 0.25},
        {0.155, 0.0678, 0.024, 0.44}, {0.174, 0.0454, 0.030, 0.26},
    };
    for (const Row& r : rows) {
        Table1Derived d = table1_row(r.sigma, r.ep);
        CHECK(std::abs(d.predicted_ep - r.predicted) <= 0.001);
        CHECK(std::abs(d.implied_theta - r.theta) <= 0.01);
        CHECK(d.ep_exceeds_predicted);
    }

    // First row pinned to exact arithmetic: 0.186^2 and 0.069 / 0.186.
    Table1Derived mehra = table1_row(0.186, 0.069);
    CHECK(std::abs(mehra.predicted_ep - 0.034596) <= 1e-15);
    CHECK(std::abs(mehra.implied_theta - 0.3709677419354839) <= 1e-12);

    CHECK_THROWS_AS(table1_row(0.0, 0.05), std::invalid_argument);
    CHECK_THROWS_AS(table1_row(-0.1, 0.05), std::invalid_argument);
}

TEST_CASE("short rate formulas hit the calibration targets") {
    // Homogeneous case: 5.55% growth, 1.2% impatience, 1.24% consumption vol.
    const double r_const = short_rate_constant_impatience(0.0555, 0.012, 0.0124);
    CHECK(std::abs(r_const - 0.06734624) <= 1e-12);
    CHECK(std::abs(r_const - 0.0673) <= 2e-4);

    // Heterogeneous nominal: the 2.38% consumption risk premium does the work.
    const double r_het = short_rate(0.0555, -0.012, 0.0238);
    CHECK(std::abs(r_het - 0.0437) <= 1e-12);

    // Real terms: 2% + 1.2% - 2.2% = 1.0%.
    const double r_real = short_rate(0.02, -0.012, 0.022);
    CHECK(std::abs(r_real - 0.010) <= 1e-12);

    // Generic drift difference.
    CHECK(std::abs(short_rate(0.03, -0.02, 0.01) - 0.04) <= 1e-15);
}

TEST_CASE("observable report wires the pieces together") {
    ObservableInputs in;
    in.sigma_equity = 0.186;
    in.ep_observed = 0.069;
    in.mu_consumption = 0.0555;
    in.sigma_consumption = 0.0124;
    in.impatience = 0.012;
    in.consumption_risk_premium = 0.0238;

    CHECK(in.loading_drift() == -0.012);
    DecompositionReport rep = analyze(in);
    CHECK(std::abs(rep.rate_constant_impatience - 0.06734624) <= 1e-12);
    CHECK(std::abs(rep.rate_heterogeneous - 0.0437) <= 1e-12);
    CHECK(std::abs(rep.homogeneous_correction - 0.00015376) <= 1e-15);
    CHECK(rep.proxy.predicted_ep == table1_row(0.186, 0.069).predicted_ep);
    CHECK(rep.split.total == 0.069);
    CHECK(std::abs(rep.split.consumption - 0.0124 * 0.186) <= 1e-15);
    CHECK(rep.split.impatience == rep.split.consumption - rep.split.total);
    CHECK(rep.split.amplified);

    // Explicit loading drift overrides the -gamma default.
    in.mu_loading = -0.03;
    CHECK(std::abs(analyze(in).rate_heterogeneous - 0.0617) <= 1e-12);

    ObservableInputs bad = in;
    bad.sigma_equity = 0.0;
    CHECK_THROWS_AS(analyze(bad), std::invalid_argument);
    bad = in;
    bad.ep_observed = std::nan("");
    CHECK_THROWS_AS(analyze(bad), std::invalid_argument);
}

TEST_CASE("shipped moment table loads and round-trips its derived columns") {
    const std::vector<Table1Row> rows = load_table1(default_table1_path());
    REQUIRE(rows.size() == 6);
    CHECK(rows[0].source.find("Mehra") != std::string::npos);
    CHECK(rows[0].period == "1889-2000");
    CHECK(rows[0].sigma == 0.186);
    CHECK(rows[0].ep == 0.069);
    CHECK(rows[5].period == "1970-1996");
    CHECK(rows[5].sigma == 0.174);
    CHECK(rows[5].ep == 0.0454);

    const std::vector<Table1Reference>& ref = table1_reference();
    REQUIRE(ref.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        Table1Derived d = table1_row(rows[i].sigma, rows[i].ep);
        CHECK(std::abs(d.predicted_ep - ref[i].predicted_ep) <= 0.001);
        CHECK(std::abs(d.implied_theta - ref[i].theta) <= 0.01);
        CHECK(d.ep_exceeds_predicted);
    }
}

TEST_CASE("moment table reader rejects malformed files") {
    CHECK_THROWS_AS(load_table1("no_such_file.csv"), ConfigError);

    const std::string bad_header =
        write_file("tmp_table_header.csv", "sigma,ep\n0.1,0.2\n");
    try {
        load_table1(bad_header);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }

    const std::string short_row = write_file(
        "tmp_table_short.csv",
        "source,period,sigma,ep\nMehra (2003),1889-2000,0.186,0.069\nx,y,0.1\n");
    try {
        load_table1(short_row);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }

    const std::string bad_number = write_file(
        "tmp_table_number.csv", "source,period,sigma,ep\na,b,zero point two,0.1\n");
    CHECK_THROWS_AS(load_table1(bad_number), ConfigError);

    const std::string bad_sigma =
        write_file("tmp_table_sigma.csv", "source,period,sigma,ep\na,b,-0.2,0.1\n");
    CHECK_THROWS_AS(load_table1(bad_sigma), ConfigError);

    std::remove(bad_header.c_str());
    std::remove(short_row.c_str());
    std::remove(bad_number.c_str());
    std::remove(bad_sigma.c_str());
}

TEST_CASE("market decomposition is exact on the constant-rate economy") {
    Scenario sc = rentier_single();
    Ensemble ens = make_ensemble(sc);
    MarketPath mkt = build_market(sc.inputs, ens);
    MarketDecomposition md = decompose_from_market(mkt);

    REQUIRE(md.n_steps == sc.grid.steps);
    for (int j = 0; j < md.n_steps; ++j) {
        CHECK(std::abs(md.consumption_premium[j]) <= 1e-12);
        CHECK(md.impatience_premium[j] == 0.0);
        CHECK(std::abs(md.total_premium[j]) <= 1e-12);
        CHECK(std::abs(md.short_rate[j] - 0.02) <= 1e-10);
        CHECK(md.short_rate_se[j] <= 1e-12);
    }
    CHECK(md.theta_pass_fraction == 1.0);
    CHECK(md.theta_consistent);
    CHECK(md.max_theta_gap <= 1e-12);
}

TEST_CASE("market decomposition recovers known constant volatilities") {
    EquilibriumInputs in = geometric_inputs();
    const TimeGrid grid{0.0, 2.0, 100};
    Ensemble ens = simulate_flow(in.model, grid, {{0.0}}, 512, 0x67656f6dULL, true);
    MarketPath mkt = build_market(in, ens);
    MarketDecomposition md = decompose_from_market(mkt);

    for (int j = 0; j < md.n_steps; ++j) {
        CHECK(std::abs(md.consumption_premium[j] - 0.0036) <= 1e-10);
        CHECK(md.impatience_premium[j] == 0.0);
        CHECK(std::abs(md.total_premium[j] - 0.0036) <= 1e-10);
        CHECK(md.total_premium_se[j] <= 1e-10);
        CHECK(std::abs(md.short_rate[j] - 0.0382) <= 1e-10);
        CHECK(md.short_rate_se[j] <= 1e-10);
    }
    CHECK(md.theta_pass_fraction == 1.0);
    CHECK(md.max_theta_gap <= 1e-10);

    // Ties the market numbers back to the pure inner-product form.
    CHECK(equity_premium({0.06}, {0.06}) == 0.0036);
}

TEST_CASE("market decomposition reports what it is missing") {
    Scenario sc = rentier_single();

    // Too few paths for coefficient estimates.
    Ensemble small = make_ensemble(sc, 8, sc.seed);
    MarketPath no_coef = build_market(sc.inputs, small);
    CHECK_FALSE(no_coef.coef.available);
    try {
        decompose_from_market(no_coef);
        FAIL("expected runtime_error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("coefficient") != std::string::npos);
    }

    // Income field without a gradient: no volatility fields on the market.
    EquilibriumInputs in = sc.inputs;
    in.income = field_1d([](double) { return 1.0; });
    Ensemble ens = make_ensemble(sc, 128, sc.seed);
    MarketPath no_fields = build_market(in, ens);
    CHECK_FALSE(no_fields.has_volatility_fields);
    try {
        decompose_from_market(no_fields);
        FAIL("expected runtime_error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("volatility fields") != std::string::npos);
    }
}
