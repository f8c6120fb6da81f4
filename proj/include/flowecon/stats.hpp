#pragma once

#include <span>
#include <string>
#include <vector>

namespace flowecon {

/// Outcome of a per-step statistical check across paths.
struct StatTestReport {
    std::string name;
    std::vector<double> mean;      // per step
    std::vector<double> se;        // per step, standard error of the mean
    std::vector<char> step_pass;   // |mean| <= confidence * se (+ floor)
    double pass_fraction = 0.0;
    double required_fraction = 0.95;
    bool pass = false;
};

/// Tests whether per-step increments are centered at zero: at each step the
/// cross-path mean must lie within `confidence` standard errors of 0.  The
/// whole test passes when at least `required_fraction` of the steps do.
/// `increments` is row-major n_paths x n_steps.  Requires n_paths >= 100.
/// Steps whose cross-path dispersion is at rounding level pass on an absolute
/// floor (1e-12 * scale) instead of a zero-width band.
StatTestReport martingale_test(std::span<const double> increments,
                               int n_paths, int n_steps,
                               double confidence = 3.0,
                               double required_fraction = 0.95,
                               const std::string& name = "martingale");

struct ConvergenceFit {
    double slope = 0.0;
    double slope_se = 0.0;
    double intercept = 0.0;
};

/// Least-squares slope of log(error) against log(mesh).  Errors must be
/// positive; at least two points.
ConvergenceFit convergence_order(std::span<const double> mesh,
                                 std::span<const double> error);

/// Kahan-compensated reference aggregator: sum_i w_i * exp(g_i) * f_i.
/// Deliberately a different accumulation scheme from the production
/// aggregation path so the two can cross-check each other.
double brute_force_aggregate(std::span<const double> weights,
                             std::span<const double> field_values,
                             std::span<const double> growth_integrals);

/// Kahan-compensated plain sum (building block for oracles).
double kahan_sum(std::span<const double> xs);

/// Ordinary least squares with intercept: y ~ b0 + X b.  X is row-major
/// n x k.  Returns coefficients [b0, b1..bk], classical standard errors and
/// HC1 heteroskedasticity-robust ones.  The robust errors matter when slopes
/// vary across rows (residual variance then scales with the regressors and
/// the classical formula understates slope uncertainty).
struct OlsFit {
    std::vector<double> coef;
    std::vector<double> se;
    std::vector<double> robust_se;
    double resid_variance = 0.0;
    int n = 0;
};

OlsFit ols(std::span<const double> y, std::span<const double> X, int n, int k);

/// Eigen-decomposition of a small symmetric matrix (Jacobi sweeps).
/// `a` is row-major n x n and destroyed; eigenvalues ascending, eigenvectors
/// in columns of `vecs` (row-major n x n).
void symmetric_eigen(std::vector<double>& a, int n,
                     std::vector<double>& values, std::vector<double>& vecs);

double mean_of(std::span<const double> xs);
double stddev_of(std::span<const double> xs); // sample (n-1)

} // namespace flowecon
