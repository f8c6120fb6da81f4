#pragma once

#include <span>
#include <string>
#include <vector>

#include "flowecon/equilibrium.hpp"

namespace flowecon {

/// Closed-form expectations a scenario is known to satisfy, used by tests and
/// the verification CLI to cross-check built markets.
struct AnalyticReferences {
    bool deflator_is_exponential = false;
    double deflator_rate = 0.0;      // H = e^{-rate t}
    bool price_is_flat = false;
    double price_level = 0.0;        // P identically this (post-rescale units)
    bool claim0_is_pledge = false;   // L_k(0) = -y_k level_k
};

/// A fully specified market build: model + population + endowments + grid +
/// ensemble size.  Initial states are the population atoms.
struct Scenario {
    std::string name;
    std::string summary;
    EquilibriumInputs inputs;
    TimeGrid grid;
    int n_paths = 0;
    std::uint64_t seed = 0;
    bool antithetic = false;
    // Greatest lower bound of the impatience field over the whole type space;
    // config gamma_lower overrides above this are rejected before simulation.
    double impatience_inf = 0.0;
    AnalyticReferences analytic;
};

// Presets.  Parameters are frozen so seeds reproduce byte-identical output.
Scenario rentier_single();      // constant impatience, unit income, no endowments
Scenario rentier_stochastic();  // one type on an OU flow, smooth impatience
Scenario desk51();              // five types, two noises, amortizing claims
Scenario desk53();              // five types, decaying income tilt
Scenario desk53fu();            // five types, tilt relaxing toward a target
Scenario longrun51();           // constant impatience, horizon set by tail truncation
Scenario desk2d();              // two state dims with separated noise drivers

std::vector<std::string> scenario_names();
Scenario scenario_by_name(const std::string& name);  // throws ConfigError on unknown

Ensemble make_ensemble(const Scenario& sc);
Ensemble make_ensemble(const Scenario& sc, int n_paths, std::uint64_t seed);

/// Separated-driver diagnostic on the stored volatility fields: looks for
/// directions u, v with u.Sigma^gamma = 0 and v.Sigma^I = 0 everywhere while
/// u.Sigma^I + v.Sigma^gamma stays away from zero.  Directions come from the
/// null spaces of the field Gram matrices; signs are aligned to maximize the
/// worst-case combined exposure.
struct SmoothMarketReport {
    bool fields_available = false;
    bool feasible = false;
    std::vector<double> u, v;     // unit vectors, noise_dim entries
    double gamma_leak = 0.0;      // max |u . Sigma^gamma| over (path, step)
    double income_leak = 0.0;     // max |v . Sigma^I|
    double min_combined = 0.0;    // min |u . Sigma^I + v . Sigma^gamma|
    double mean_combined = 0.0;
    double field_scale = 0.0;     // rms field size the leaks compare against
};

SmoothMarketReport smooth_market_diagnostic(const MarketPath& mkt,
                                            double null_tol = 1e-10);

/// Same report for a caller-proposed pair (e.g. to show a pair fails).
SmoothMarketReport smooth_market_check(const MarketPath& mkt,
                                       std::span<const double> u,
                                       std::span<const double> v);

}  // namespace flowecon
