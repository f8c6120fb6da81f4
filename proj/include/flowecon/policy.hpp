#pragma once

#include <vector>

#include "flowecon/flow.hpp"
#include "flowecon/population.hpp"
#include "flowecon/types.hpp"

namespace flowecon {

/// Consumption / investment rule evaluated along every simulated path.
///
/// net_wealth(p,k,j) is financial wealth net of the endowment claim, i.e. the
/// part that is actually rolled in the risky account.  Total wealth is
/// net_wealth + L where L is the per-type endowment claim (zero for pure
/// rentiers).  consumption is a rate, portfolio is the risky position
/// net_wealth * kappa - varpi.
struct PolicyPath {
    TimeGrid grid;
    TypeSeries net_wealth;
    TypeSeries consumption;
    TypeSeries portfolio;
};

/// Inputs shared by all policy constructors.
///
/// deflator is the state-price density path H (one value per path and grid
/// point; H(p,0) is treated as time-0 normalisation, so any positive path
/// works).  kappa is the market-price-of-risk ratio applied to net wealth;
/// closed-form markets use kappa == 1 identically.  endowment_hedge is the
/// per-type hedge position varpi (may be empty, read as zero).
struct PolicyInputs {
    const Ensemble* ensemble = nullptr;
    const AggregatePath* deflator = nullptr;
    const AggregatePath* kappa = nullptr;
    std::vector<double> initial_net_wealth;   // y, one entry per type
    const TypeSeries* endowment_hedge = nullptr;
};

/// Policy of an agent whose impatience stays frozen at a constant rate
/// per type: net wealth decays like exp(-gamma_k * (t - t0)) in deflated
/// units, consumption is gamma_k times net wealth.
PolicyPath fixed_gamma_policy(const PolicyInputs& in,
                              const std::vector<double>& gamma_per_type);

/// Rolling policy over a partition of the grid.  partition holds strictly
/// increasing grid indices, starting at 0 and ending at the last grid point.
/// On each cell the impatience rate is frozen at the value of `gamma` at the
/// cell's left endpoint state, and the discount factors accumulate cell by
/// cell in stored order.
PolicyPath rolling_policy(const PolicyInputs& in, const ScalarField& gamma,
                          const std::vector<int>& partition);

/// Mesh-zero limit of the rolling policy: the frozen per-cell rates are
/// replaced by the running trapezoid integral of gamma along the path, and
/// consumption uses the instantaneous rate.
PolicyPath limit_policy(const PolicyInputs& in, const ScalarField& gamma);

/// Largest |rolling - limit| over paths, types and grid points, per field.
struct PolicyGap {
    double net_wealth = 0.0;
    double consumption = 0.0;
};

PolicyGap policy_gap(const PolicyPath& a, const PolicyPath& b);

}  // namespace flowecon
