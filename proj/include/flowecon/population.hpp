#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "flowecon/flow.hpp"

namespace flowecon {

/// Weighted atoms on the type space.  Covers both genuinely discrete
/// populations and quadrature discretizations of a density.
struct PopulationMeasure {
    std::vector<std::vector<double>> points;
    std::vector<double> weights;

    static PopulationMeasure discrete(std::vector<std::vector<double>> pts,
                                      std::vector<double> w);
    /// Midpoint-rule discretization of density g on an axis-aligned box.
    static PopulationMeasure quadrature_box(std::span<const double> lo,
                                            std::span<const double> hi,
                                            std::span<const int> cells,
                                            const ScalarField& density);

    std::size_t size() const { return points.size(); }
    double total_mass() const;
    void validate() const; // throws on non-positive/non-finite weights
};

/// Scalar time series per path: values(p, j).
struct AggregatePath {
    int n_paths = 0;
    int n_points = 0;
    std::vector<double> values; // n_paths * n_points
    double operator()(int p, int j) const { return values[std::size_t(p) * n_points + j]; }
    double& operator()(int p, int j) { return values[std::size_t(p) * n_points + j]; }
};

/// Field evaluated per (step index, type index, current state).
using SampleField = std::function<double(int, int, std::span<const double>)>;

/// Population-weighted aggregate with growth weighting:
///   psi(p, j) = sum_k w_k * Lambda(p,k,j) * field(j, k, phi(p,k,j)).
/// Atom count must match the ensemble's type count.  When any log-weight in a
/// (p, j) slice exceeds 300 the sum is evaluated in factored log space to
/// dodge overflow.
AggregatePath aggregate(const Ensemble& ens, const PopulationMeasure& mu,
                        const SampleField& field);

/// Plain population-weighted sum without the growth factor:
///   psi(p, j) = sum_k w_k * field(j, k, phi(p,k,j)).
AggregatePath aggregate_raw(const Ensemble& ens, const PopulationMeasure& mu,
                            const SampleField& field);

/// Measure pushed forward to time index j along path p, with growth-weighted
/// masses: atoms (phi_j(x_k), w_k * Lambda_j(x_k)).
PopulationMeasure transport_measure(const Ensemble& ens, const PopulationMeasure& mu,
                                    int j, int p);

/// Test function with the derivatives needed by the aggregated increment
/// decomposition: value, time derivative, gradient and Hessian.
struct ItoTestFunction {
    std::function<double(double, std::span<const double>)> value;
    std::function<double(double, std::span<const double>)> dt;
    std::function<void(double, std::span<const double>, std::span<double>)> gradient;
    std::function<void(double, std::span<const double>, std::span<double>)> hessian; // row-major d x d
};

struct ItoAggregationReport {
    std::vector<double> step_mean_residual; // cross-path mean per step
    double max_step_mean = 0.0;             // max |per-step mean|
    double horizon_mean = 0.0;              // mean over paths of summed residuals
    int n_paths = 0;
};

/// Compares realized increments of the aggregate of f(t, phi_t) against the
/// drift-plus-noise decomposition evaluated at left endpoints with the same
/// stored increments:
///   d Agg f = Agg[ f_t + grad f . drift + 1/2 tr(a Hess f) ] dt
///           + Agg[ grad f . diffusion ] dW,        a = diffusion diffusion^T.
/// Requires zero growth (weights identically one); throws otherwise.
ItoAggregationReport verify_ito_aggregation(const Ensemble& ens,
                                            const PopulationMeasure& mu,
                                            const FlowModel& model,
                                            const ItoTestFunction& f);

} // namespace flowecon
