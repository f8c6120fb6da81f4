#pragma once
// Equity premium and short rate decompositions.  Two layers: pure inner
// product arithmetic on observable moments (volatilities, growth rates,
// impatience), and a market-path version that prices the simulated aggregate
// claim with its own estimated coefficients and checks the estimated price of
// risk against the analytic consumption / loading volatility split.

#include <optional>
#include <string>
#include <vector>

#include "flowecon/equilibrium.hpp"

namespace flowecon {

/// Observable market moments, annualized fractions throughout (0.05 = 5%).
struct ObservableInputs {
    double sigma_equity = 0.0;              // equity volatility |sigma^S|
    double ep_observed = 0.0;               // mean excess equity return
    double mu_consumption = 0.0;            // aggregate consumption growth drift
    double sigma_consumption = 0.0;         // |sigma^c|
    double impatience = 0.0;                // effective impatience gamma
    double consumption_risk_premium = 0.0;  // sigma^c . theta
    // Drift of the loading (the decay rate of eta).  Unset means the
    // leading-order value -impatience.
    std::optional<double> mu_loading;

    double loading_drift() const { return mu_loading ? *mu_loading : -impatience; }
    void validate() const;  // throws invalid_argument unless finite, sigma_equity > 0
};

/// Premium legs of one asset against the two aggregate volatilities:
///   consumption = sigma^c . sigma_asset   (the CCAPM covariance term)
///   impatience  = sigma^{loading} . sigma_asset
///   total       = consumption - impatience
struct PremiumSplit {
    double consumption = 0.0;
    double impatience = 0.0;
    double total = 0.0;
    bool amplified = false;  // impatience < 0, so the premium exceeds the CCAPM leg
};

/// Excess return of an asset whose volatility vector is sigma_asset when total
/// wealth has volatility sigma_wealth.  Throws on dimension mismatch.
double equity_premium(const std::vector<double>& sigma_wealth,
                      const std::vector<double>& sigma_asset);

PremiumSplit equity_premium_split(const std::vector<double>& sigma_consumption,
                                  const std::vector<double>& sigma_loading,
                                  const std::vector<double>& sigma_asset);

/// Derived columns of one comparison row under the proxy sigma^W ~ sigma^S.
struct Table1Derived {
    double predicted_ep = 0.0;   // sigma^2
    double implied_theta = 0.0;  // ep / sigma
    bool ep_exceeds_predicted = false;
};
Table1Derived table1_row(double sigma, double ep);  // requires sigma > 0

/// r = (mu^c - mu^{loading}) - consumption risk premium.
double short_rate(double mu_consumption, double mu_loading,
                  double consumption_risk_premium);

/// Constant-impatience special case r = mu^c + gamma - |sigma^c|^2.
double short_rate_constant_impatience(double mu_consumption, double impatience,
                                      double sigma_consumption_norm);

/// Everything the calibration derives from one ObservableInputs row.  The
/// premium split treats the scalar moments as collinear (effectively one
/// noise dimension), so split.total equals the observed premium exactly and
/// the impatience leg absorbs whatever the CCAPM term cannot explain.
struct DecompositionReport {
    Table1Derived proxy;
    PremiumSplit split;
    double rate_constant_impatience = 0.0;  // mu^c + gamma - |sigma^c|^2
    double rate_heterogeneous = 0.0;        // (mu^c - mu^{loading}) - crp
    double homogeneous_correction = 0.0;    // |sigma^c|^2, all the constant case subtracts
};
DecompositionReport analyze(const ObservableInputs& in);

/// One row of the shipped long-run U.S. moment table (data/table1.csv):
/// annualized equity volatility and observed mean excess return.
struct Table1Row {
    std::string source;
    std::string period;
    double sigma = 0.0;
    double ep = 0.0;
};

/// Strict reader for the four-column file `source,period,sigma,ep`.
/// Throws ConfigError with a line number on any malformed content.
std::vector<Table1Row> load_table1(const std::string& path);
std::string default_table1_path();

/// Published derived columns for the shipped rows, in file order, used to
/// diff recomputed values: predicted EP to one decimal of a percent, implied
/// theta to two decimals.
struct Table1Reference {
    double predicted_ep = 0.0;
    double theta = 0.0;
};
const std::vector<Table1Reference>& table1_reference();

/// Per-step decomposition of the simulated market's aggregate claim premium.
/// The asset volatility is the estimated price diffusion; the consumption and
/// loading legs come from cross-path means of the analytic volatility fields.
struct MarketDecomposition {
    int n_steps = 0;
    int noise_dim = 0;
    std::vector<double> consumption_premium;  // per step
    std::vector<double> impatience_premium;
    std::vector<double> total_premium;        // consumption - impatience
    std::vector<double> total_premium_se;
    std::vector<double> short_rate;           // -(deflator drift), per step
    std::vector<double> short_rate_se;
    // Componentwise agreement of the estimated price of risk (-deflator
    // diffusion) with the analytic field mean, 3 standard error bands.
    double theta_pass_fraction = 0.0;
    bool theta_consistent = false;  // >= 95% of step-component checks
    double max_theta_gap = 0.0;     // worst |estimate - analytic mean|
};

/// Requires coefficient estimates and volatility fields on the market;
/// throws runtime_error when either is missing.
MarketDecomposition decompose_from_market(const MarketPath& mkt);

}  // namespace flowecon
