#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "flowecon/equilibrium.hpp"
#include "flowecon/scenarios.hpp"

using namespace flowecon;

TEST_CASE("scenario registry round-trips every name") {
    for (const std::string& name : scenario_names()) {
        Scenario sc = scenario_by_name(name);
        CHECK(sc.name == name);
        CHECK(sc.n_paths > 0);
        CHECK(!sc.summary.empty());
    }
    CHECK_THROWS_AS(scenario_by_name("nope"), ConfigError);
}

TEST_CASE("ensembles are reproducible by seed") {
    Scenario sc = rentier_stochastic();
    Ensemble a = make_ensemble(sc, 16, sc.seed);
    Ensemble b = make_ensemble(sc, 16, sc.seed);
    CHECK(a.states == b.states);
    CHECK(a.increments == b.increments);
    Ensemble c = make_ensemble(sc, 16, sc.seed + 1);
    CHECK(a.states != c.states);
}

TEST_CASE("rentier scenario matches its analytic references") {
    Scenario sc = rentier_single();
    REQUIRE(sc.analytic.deflator_is_exponential);
    REQUIRE(sc.analytic.price_is_flat);
    Ensemble ens = make_ensemble(sc, 32, sc.seed);
    MarketPath mkt = build_market(sc.inputs, ens);
    for (int p = 0; p < 32; p += 5)
        for (int j = 0; j <= sc.grid.steps; j += 11) {
            const double t = sc.grid.time(j);
            CHECK(std::abs(mkt.deflator(p, j) -
                           std::exp(-sc.analytic.deflator_rate * t)) <= 1e-12);
            CHECK(std::abs(mkt.price(p, j) - sc.analytic.price_level) <=
                  1e-10 * sc.analytic.price_level);
        }
    PolicyPath pol = market_policy(mkt, ens, sc.inputs.model.impatience);
    CHECK(verify_clearing(mkt, pol, sc.inputs.population).pass(1e-10));
    CHECK(joneses_identity(mkt, 0).applicable);
}

TEST_CASE("stochastic rentier clears and is outside the constant-impatience class") {
    Scenario sc = rentier_stochastic();
    Ensemble ens = make_ensemble(sc, 128, sc.seed);
    REQUIRE(ens.n_flagged() == 0);
    MarketPath mkt = build_market(sc.inputs, ens);
    PolicyPath pol = market_policy(mkt, ens, sc.inputs.model.impatience);
    CHECK(verify_clearing(mkt, pol, sc.inputs.population).pass(1e-10));
    MarketInvariantReport inv = market_invariants(mkt);
    CHECK(inv.eta_monotone);
    CHECK(inv.consumption_identity <= 1e-11);
    CHECK(!joneses_identity(mkt, 0).applicable);
}

TEST_CASE("amortizing desk: pledged claims, invariants, separated-driver search fails") {
    Scenario sc = desk51();
    Ensemble ens = make_ensemble(sc, 400, sc.seed);
    REQUIRE(ens.n_flagged() == 0);
    MarketPath mkt = build_market(sc.inputs, ens);

    REQUIRE(sc.analytic.claim0_is_pledge);
    for (int k = 0; k < 5; ++k) {
        const double want = -mkt.wealth[k] * sc.inputs.endowment.level[k];
        CHECK(std::abs(mkt.claim_type(0, k, 0) - want) <= 1e-10 * std::abs(want));
    }

    PolicyPath pol = market_policy(mkt, ens, sc.inputs.model.impatience);
    ClearingReport rep = verify_clearing(mkt, pol, sc.inputs.population);
    CHECK(rep.money == 0.0);
    CHECK(rep.pass(1e-10));

    MarketInvariantReport inv = market_invariants(mkt);
    CHECK(inv.eta_monotone);
    CHECK(inv.eta_decay_violation <= 1e-12);
    CHECK(inv.claim_constancy <= 1e-10);
    CHECK(inv.endow_cum_excess <= 1e-12);
    CHECK(inv.min_dividend > 0.0);

    // Sign structure of the endowment block.
    for (double q : mkt.endow_type.v) CHECK(q >= 0.0);
    for (double l : mkt.claim_type.v) CHECK(l <= 0.0);

    SUBCASE("one state dimension cannot separate the two drivers") {
        SmoothMarketReport smc = smooth_market_diagnostic(mkt);
        REQUIRE(smc.fields_available);
        CHECK(!smc.feasible);
        SmoothMarketReport given = smooth_market_check(
            mkt, std::vector<double>{0.0, 1.0}, std::vector<double>{1.0, 0.0});
        CHECK(!given.feasible);
        CHECK(given.gamma_leak > 1e-4 * given.field_scale);
    }
    SUBCASE("estimate-side checks hold at reduced path count") {
        VolatilityMatchReport vol = verify_wealth_volatility(mkt, ens);
        CHECK(vol.ratio_residual <= 1e-10);
        CHECK(vol.estimate_pass);
        CHECK(vol.analytic_pass);
        NoArbitrageReport na = verify_no_arbitrage(mkt, ens);
        CHECK(na.value_drift.pass);
        CHECK(na.identity_pass);
    }
}

TEST_CASE("income tilt desk keeps its invariants") {
    Scenario sc = desk53();
    Ensemble ens = make_ensemble(sc, 300, sc.seed);
    REQUIRE(ens.n_flagged() == 0);
    MarketPath mkt = build_market(sc.inputs, ens);
    PolicyPath pol = market_policy(mkt, ens, sc.inputs.model.impatience);
    CHECK(verify_clearing(mkt, pol, sc.inputs.population).pass(1e-10));
    CHECK(market_invariants(mkt).claim_constancy <= 1e-10);
    for (double q : mkt.endow_type.v) CHECK(q >= 0.0);
    for (double l : mkt.claim_type.v) CHECK(l <= 0.0);
}

TEST_CASE("target tilt desk builds with both grid inequalities intact") {
    Scenario sc = desk53fu();
    Ensemble ens = make_ensemble(sc, 300, sc.seed);
    REQUIRE(ens.n_flagged() == 0);
    MarketPath mkt = build_market(sc.inputs, ens);  // throws if chi misbehaves

    // Endowment rate is exactly y * u0 * aggregate income.
    for (int k = 0; k < 5; ++k)
        for (int j = 0; j <= sc.grid.steps; j += 17) {
            const double want =
                mkt.wealth[k] * sc.inputs.endowment.target[k] * mkt.income_agg(2, j);
            CHECK(std::abs(mkt.endow_type(2, k, j) - want) <= 1e-12 * want);
        }

    PolicyPath pol = market_policy(mkt, ens, sc.inputs.model.impatience);
    CHECK(verify_clearing(mkt, pol, sc.inputs.population).pass(1e-10));
    CHECK(market_invariants(mkt).claim_constancy <= 1e-10);
}

TEST_CASE("long-horizon amortization recovers the pledged stock") {
    Scenario sc = longrun51();
    CHECK(sc.grid.horizon == doctest::Approx(61.4).epsilon(0.01));
    Ensemble ens = make_ensemble(sc, 4, sc.seed);
    MarketPath mkt = build_market(sc.inputs, ens);
    CHECK(mkt.truncation_horizon == doctest::Approx(sc.grid.horizon).epsilon(1e-12));

    const double y = mkt.wealth[0];
    const double pledged = 0.3 * y;
    const int last = sc.grid.points() - 1;
    for (int p = 0; p < 4; ++p) {
        CHECK(std::abs(mkt.claim_type(p, 0, 0) + pledged) <= 1e-9 * pledged);
        CHECK(std::abs(mkt.deflated_endow_cum(p, 0, last) - pledged) <= 1e-5 * pledged);
        for (int j = 0; j <= last; j += 97)
            CHECK(std::abs(mkt.deflator(p, j) -
                           std::exp(-0.15 * sc.grid.time(j))) <= 1e-10);
    }
    MarketInvariantReport inv = market_invariants(mkt);
    CHECK(inv.claim_constancy <= 1e-10);
    CHECK(inv.eta_decay_violation <= 1e-10);
    CHECK(inv.endow_cum_excess <= 1e-12);
}

TEST_CASE("two state dimensions separate the income and impatience drivers") {
    Scenario sc = desk2d();
    Ensemble ens = make_ensemble(sc, 200, sc.seed);
    REQUIRE(ens.n_flagged() == 0);
    MarketPath mkt = build_market(sc.inputs, ens);
    REQUIRE(mkt.has_volatility_fields);

    SmoothMarketReport smc = smooth_market_diagnostic(mkt);
    REQUIRE(smc.fields_available);
    CHECK(smc.feasible);
    REQUIRE(smc.u.size() == 2);
    // Income loads only on W1, impatience only on W2, so u kills the second
    // component and v the first.
    CHECK(std::abs(smc.u[1]) <= 1e-8);
    CHECK(std::abs(smc.v[0]) <= 1e-8);
    CHECK(smc.gamma_leak <= 1e-10 * smc.field_scale);
    CHECK(smc.income_leak <= 1e-10 * smc.field_scale);
    CHECK(smc.min_combined > 1e-3 * smc.field_scale);

    SUBCASE("the swapped pair is rejected") {
        SmoothMarketReport swapped = smooth_market_check(
            mkt, std::vector<double>{0.0, 1.0}, std::vector<double>{1.0, 0.0});
        CHECK(!swapped.feasible);
        CHECK(swapped.gamma_leak > 1e-3 * swapped.field_scale);
        CHECK(swapped.income_leak > 1e-3 * swapped.field_scale);
    }
    SUBCASE("market still clears") {
        PolicyPath pol = market_policy(mkt, ens, sc.inputs.model.impatience);
        CHECK(verify_clearing(mkt, pol, sc.inputs.population).pass(1e-10));
    }
}
