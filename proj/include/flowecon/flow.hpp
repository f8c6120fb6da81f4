#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "flowecon/types.hpp"

namespace flowecon {

/// Uniform time grid on [t0, t0 + horizon] with `steps` Euler steps.
struct TimeGrid {
    double t0 = 0.0;
    double horizon = 1.0;
    int steps = 100;

    double dt() const { return horizon / steps; }
    double time(int j) const { return t0 + j * dt(); }
    int points() const { return steps + 1; }
};

/// Coefficients of the type-space SDE moved by the common noise:
///   d phi = drift(phi) dt + diffusion(phi) dW,   phi(s) = x.
/// `diffusion` writes a row-major (dim x noise_dim) block.
/// `growth` feeds the multiplicative population weight, `impatience` the
/// discounting field used by the pricing side.
struct FlowModel {
    int dim = 1;
    int noise_dim = 1;
    std::function<void(std::span<const double>, std::span<double>)> drift;
    std::function<void(std::span<const double>, std::span<double>)> diffusion;
    std::function<bool(std::span<const double>)> domain; // optional; default: all finite points
    ScalarField growth;     // h(x)
    ScalarField impatience; // gamma(x)

    bool in_domain(std::span<const double> x) const;
};

/// Simulated trajectories of every type under one shared increment stream per
/// path, plus log population weights accumulated by the trapezoid rule.
///
/// Storage is flat: state(p,k,j) is a dim-span, increment(p,j) an n-span.
struct Ensemble {
    TimeGrid grid;
    int dim = 0;
    int noise_dim = 0;
    int n_paths = 0;
    int n_types = 0;
    std::uint64_t seed = 0;
    bool antithetic = false;

    std::vector<double> states;       // n_paths * n_types * points * dim
    std::vector<double> log_weights;  // n_paths * n_types * points
    std::vector<double> increments;   // n_paths * steps * noise_dim
    std::vector<char> exploded;       // n_paths
    std::vector<int> explode_step;    // n_paths (-1 when clean)
    std::vector<double> initial_types; // n_types * dim (as passed to simulate)

    std::span<const double> state(int p, int k, int j) const {
        return {states.data() + ((std::size_t(p) * n_types + k) * grid.points() + j) * dim,
                std::size_t(dim)};
    }
    std::span<double> state(int p, int k, int j) {
        return {states.data() + ((std::size_t(p) * n_types + k) * grid.points() + j) * dim,
                std::size_t(dim)};
    }
    double log_weight(int p, int k, int j) const {
        return log_weights[(std::size_t(p) * n_types + k) * grid.points() + j];
    }
    double& log_weight(int p, int k, int j) {
        return log_weights[(std::size_t(p) * n_types + k) * grid.points() + j];
    }
    std::span<const double> increment(int p, int j) const {
        return {increments.data() + (std::size_t(p) * grid.steps + j) * noise_dim,
                std::size_t(noise_dim)};
    }
    std::span<double> increment(int p, int j) {
        return {increments.data() + (std::size_t(p) * grid.steps + j) * noise_dim,
                std::size_t(noise_dim)};
    }
    int n_flagged() const;
};

/// Euler scheme over the grid.  Increments are N(0, dt) draws from a
/// per-path generator seeded via derive_path_seed(seed, p); with
/// `antithetic`, odd paths mirror the even path before them.
/// A path is flagged as exploded when any coordinate turns non-finite or
/// leaves the domain; its state freezes at the last good value.
/// Throws std::invalid_argument if coefficients are non-finite at any initial
/// type or more than half the paths flag.
Ensemble simulate_flow(const FlowModel& model, const TimeGrid& grid,
                       const std::vector<std::vector<double>>& types,
                       int n_paths, std::uint64_t seed, bool antithetic = false);

/// Same scheme, caller-supplied increments (n_paths * steps * noise_dim).
/// Used by nested-grid convergence studies and by restarts.
Ensemble simulate_flow_with_increments(const FlowModel& model, const TimeGrid& grid,
                                       const std::vector<std::vector<double>>& types,
                                       int n_paths, std::span<const double> increments);

/// Per-path restart at grid index `s`: each path continues from its own
/// states at t_s, reusing the stored tail increments.  Weights restart at 1.
/// Because the Euler recursion is deterministic, the restarted states match
/// the original tail bitwise.
Ensemble restart_flow(const FlowModel& model, const Ensemble& ens, int s);

/// Trapezoidal running integral of f(phi) along every (path, type):
/// out(p,k,j) ~= int_{t0}^{t_j} f(phi_u) du.  Layout matches log_weights.
std::vector<double> pathwise_integral(const Ensemble& ens, const ScalarField& f);

enum class FellerVerdict { non_explosive, inconclusive };

struct FellerReport {
    FellerVerdict verdict = FellerVerdict::inconclusive;
    double k_left = 0.0;   // K at the left end of the widest probed range
    double k_right = 0.0;  // K at the right end
    double threshold = 0.0;
    double probed_left = 0.0;
    double probed_right = 0.0;
};

/// Sufficient one-dimensional non-explosion test.  Evaluates
///   c(x) = exp(2 int_0^x drift/diffusion^2),
///   K(x) = int_0^x 2 c(z)^{-1} int_0^z c(y)/diffusion(y)^2 dy dz
/// over ranges expanding from [-1,1] up to `probe_range`; reports
/// non_explosive when K exceeds 1/tolerance on both sides, else inconclusive.
/// Throws std::invalid_argument when diffusion vanishes on the probe range.
FellerReport feller_nonexplosion_1d(const std::function<double(double)>& drift,
                                    const std::function<double(double)>& diffusion,
                                    std::pair<double, double> probe_range,
                                    double tolerance);

} // namespace flowecon
