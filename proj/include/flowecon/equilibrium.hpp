#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "flowecon/flow.hpp"
#include "flowecon/policy.hpp"
#include "flowecon/population.hpp"
#include "flowecon/stats.hpp"
#include "flowecon/types.hpp"

namespace flowecon {

/// Endowment side of the market.  All kinds keep the per-type time profile of
/// finite variation so the deflated claim stays a pathwise constant plus the
/// cumulative deflated endowment (checked by market_invariants).
struct EndowmentSpec {
    enum class Kind {
        none,           // pure rentier: no endowments, no claims
        amortizing,     // claim amortizes at a per-type exponential rate
        income_tilt,    // endowment proportional to aggregate income, tilt decays
        income_target,  // tilt starts at `level` (f) and relaxes toward `target` (u0)
        tabulated,      // per-type endowment rates on a time table, priced by nested MC
    };
    Kind kind = Kind::none;

    // amortizing: level = initial amortization fraction in [0,1), decay >= 0.
    // income_tilt: level = initial tilt chi0 >= 0, decay >= 0.
    // income_target: level = f >= 0, target = long-run tilt u0 >= level.
    std::vector<double> level;
    std::vector<double> decay;
    std::vector<double> target;

    // tabulated: row-major rates[i * n_types + k] at table_times[i], linear
    // interpolation in t, zero beyond the last table time.
    std::vector<double> table_times;
    std::vector<double> table_values;
    int inner_paths = 0;
    int inner_steps = 0;
    std::uint64_t inner_seed = 0x6e657374ULL;
};

struct EquilibriumInputs {
    FlowModel model;
    PopulationMeasure population;
    ScalarField income;             // I(x) > 0 on sampled states
    std::vector<double> wealth;     // y per type, strictly positive
    EndowmentSpec endowment;

    double gamma_lower = 0.0;       // > 0 enables tail truncation and decay bounds
    double truncate_tol = 1e-8;     // tail tolerance, relative to eta_0
    bool rescale_wealth = true;     // scale y so initial consumption spend = initial income
    int outer_path_ceiling = 2000;  // nested-MC guards
    int inner_path_ceiling = 500;
};

/// Per-step drift / diffusion estimates of a positive scalar series, from
/// cross-path least squares of log-increments on the stored noise increments.
/// drift is the relative drift of the level process (Ito-corrected).
struct CoefficientPath {
    int n_steps = 0;
    int noise_dim = 0;
    std::vector<double> drift, drift_se;             // per step
    std::vector<double> diffusion, diffusion_se;     // n_steps * noise_dim

    double diff(int j, int m) const { return diffusion[std::size_t(j) * noise_dim + m]; }
    double diff_se(int j, int m) const { return diffusion_se[std::size_t(j) * noise_dim + m]; }
};

CoefficientPath estimate_coefficients(const AggregatePath& series, const Ensemble& ens);

struct MarketCoefficients {
    bool available = false;
    CoefficientPath deflator;             // short rate = -drift, price of risk = -diffusion
    CoefficientPath price;
    std::vector<double> dividend_yield;   // per step, cross-path mean of D/P
    std::vector<double> dividend_yield_se;
};

/// Everything the verification suites need, evaluated on one ensemble.
struct MarketPath {
    TimeGrid grid;
    int n_paths = 0, n_types = 0, noise_dim = 0;
    std::vector<char> flagged;        // copied explosion flags, per path

    std::vector<double> wealth;       // y per type after any rescale
    std::vector<double> pop_weights;  // population weights, copied for reports
    double wealth_scale = 1.0;
    bool rescaled = true;
    double gamma_lower = 0.0;
    double truncation_horizon = std::numeric_limits<double>::infinity();

    AggregatePath eta;            // sum_k w y e^{-int gamma}
    AggregatePath loading;        // -d(eta)/dt, from its analytic integrand
    AggregatePath deflator;       // H = loading / aggregate income, H_0 = 1 when rescaled
    AggregatePath income_agg;     // I^mu
    AggregatePath endow_agg;      // Q^mu
    AggregatePath dividend_agg;   // D^mu = I^mu - Q^mu
    AggregatePath claim_agg;      // L^mu <= 0
    AggregatePath price;          // P = L^mu + eta / H
    AggregatePath wealth_price;   // P^W = P - L^mu
    AggregatePath kappa;          // volatility multiplier fed to policies

    TypeSeries gamma_at;          // gamma(phi) per (p,k,j)
    TypeSeries gamma_integral;    // running trapezoid of gamma along the path
    TypeSeries income_type;       // I_t(x_k) = Lambda * I(phi)
    TypeSeries endow_type;        // Q_t(x_k)
    TypeSeries claim_type;        // L_t(x_k)
    TypeSeries hedge_type;        // varpi = -kappa * L
    TypeSeries deflated_endow_cum; // closed-form int_0^t H Q(x_k) ds (raw-H units)
    bool has_deflated_endow_cum = false;

    // Volatility fields and the analytic price of risk, present when both the
    // income and impatience fields carry gradients.  Layout (p*points + j)*n.
    bool has_volatility_fields = false;
    std::vector<double> sigma_income;      // Lambda-weighted grad(I) rho aggregate
    std::vector<double> sigma_impatience;  // Z-weighted grad(gamma) rho aggregate
    std::vector<double> theta;             // sigma_income/I - sigma_impatience/loading

    MarketCoefficients coef;

    double theta_at(int p, int j, int m) const {
        return theta[(std::size_t(p) * grid.points() + j) * noise_dim + m];
    }
    double sigma_income_at(int p, int j, int m) const {
        return sigma_income[(std::size_t(p) * grid.points() + j) * noise_dim + m];
    }
    double sigma_impatience_at(int p, int j, int m) const {
        return sigma_impatience[(std::size_t(p) * grid.points() + j) * noise_dim + m];
    }
};

/// eta and its analytic loading (never differenced numerically).
void compute_eta(const Ensemble& ens, const PopulationMeasure& mu,
                 const ScalarField& gamma, std::span<const double> wealth,
                 AggregatePath& eta, AggregatePath& loading);

MarketPath build_market(const EquilibriumInputs& in, const Ensemble& ens);

/// Limit policy of the market's own agents: deflator, kappa, hedge and wealth
/// all taken from the market.
PolicyPath market_policy(const MarketPath& mkt, const Ensemble& ens,
                         const ScalarField& gamma);

struct ClearingReport {
    double money = 0.0;      // max rel |xi^mu - pi^mu|
    double goods = 0.0;      // max rel |c^mu - (Q^mu + D^mu)|
    double portfolio = 0.0;  // max rel |pi^mu - P|
    bool consumption_positive = true;
    bool pass(double tol) const {
        return money <= tol && goods <= tol && portfolio <= tol && consumption_positive;
    }
};

ClearingReport verify_clearing(const MarketPath& mkt, const PolicyPath& pol,
                               const PopulationMeasure& mu);

struct NoArbitrageReport {
    StatTestReport value_drift;       // deflated gain increments vs zero
    std::vector<double> identity;     // b + delta - r - sigma.theta per step
    std::vector<double> identity_se;
    double identity_pass_fraction = 0.0;
    bool identity_pass = false;
    double max_abs_z = 0.0;
    bool pass() const { return value_drift.pass && identity_pass; }
};

/// rate_shift is added to the estimated short rate before the identity check;
/// nonzero values model a mispriced bond (fault injection).
NoArbitrageReport verify_no_arbitrage(const MarketPath& mkt, const Ensemble& ens,
                                      double rate_shift = 0.0);

struct VolatilityMatchReport {
    double estimate_pass_fraction = 0.0;  // sigma^W vs estimated theta, per step+component
    bool estimate_pass = false;
    double analytic_pass_fraction = 0.0;  // sigma^W vs analytic theta (when present)
    bool analytic_available = false;
    bool analytic_pass = false;
    double ratio_residual = 0.0;          // max rel |c^mu/P^W - loading/eta|
};

VolatilityMatchReport verify_wealth_volatility(const MarketPath& mkt, const Ensemble& ens);

struct JonesesReport {
    bool applicable = false;     // reference type has constant impatience along paths
    double path_residual = 0.0;  // max rel |H - e^{-t gamma_ref} / G|
    double aggregate_residual = 0.0;  // max rel |eta / (xi^mu - L^mu) - H|
};

/// g_scale perturbs the relative wealth gain G (fault injection; 1 = honest).
JonesesReport joneses_identity(const MarketPath& mkt, int reference_type,
                               double g_scale = 1.0);

struct MarketInvariantReport {
    bool eta_monotone = true;
    double eta_decay_violation = 0.0;   // max of eta_j/eta_0 - e^{-gamma_lower t_j}
    double h0_gap = 0.0;                // max |H_0 - 1| (rescaled markets)
    double consumption_identity = 0.0;  // max rel |H * c^mu - loading|
    double endow_cum_excess = 0.0;      // max of sum_k w cum_k - eta_0
    double claim_constancy = 0.0;       // max rel drift of H L(x) - cum(x)
    double min_dividend = 0.0;
    double budget_gap = 0.0;            // rel |initial spend - initial income|
};

MarketInvariantReport market_invariants(const MarketPath& mkt);

/// Volatility multiplier for a single risky asset: |theta| / |sigma| with the
/// sign of sigma.theta.  Returns 0 and sets *degenerate when |sigma| < 1e-12.
double select_kappa(std::span<const double> sigma, std::span<const double> theta,
                    bool* degenerate = nullptr);

}  // namespace flowecon
