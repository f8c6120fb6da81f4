#include "flowecon/population.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flowecon {

PopulationMeasure PopulationMeasure::discrete(std::vector<std::vector<double>> pts,
                                              std::vector<double> w) {
    PopulationMeasure mu;
    mu.points = std::move(pts);
    mu.weights = std::move(w);
    if (mu.points.size() != mu.weights.size())
        throw std::invalid_argument("PopulationMeasure: point/weight count mismatch");
    mu.validate();
    return mu;
}

PopulationMeasure PopulationMeasure::quadrature_box(std::span<const double> lo,
                                                    std::span<const double> hi,
                                                    std::span<const int> cells,
                                                    const ScalarField& density) {
    const int d = int(lo.size());
    if (int(hi.size()) != d || int(cells.size()) != d)
        throw std::invalid_argument("quadrature_box: dimension mismatch");
    long total = 1;
    double cell_vol = 1.0;
    for (int c = 0; c < d; ++c) {
        if (cells[c] <= 0 || !(hi[c] > lo[c]))
            throw std::invalid_argument("quadrature_box: bad box or cell count");
        total *= cells[c];
        cell_vol *= (hi[c] - lo[c]) / cells[c];
    }
    PopulationMeasure mu;
    mu.points.reserve(total);
    mu.weights.reserve(total);
    std::vector<int> idx(d, 0);
    std::vector<double> x(d);
    for (long flat = 0; flat < total; ++flat) {
        long rem = flat;
        for (int c = 0; c < d; ++c) {
            idx[c] = int(rem % cells[c]);
            rem /= cells[c];
            x[c] = lo[c] + (idx[c] + 0.5) * (hi[c] - lo[c]) / cells[c];
        }
        double w = density(x) * cell_vol;
        if (w > 0.0) {
            mu.points.push_back(x);
            mu.weights.push_back(w);
        }
    }
    mu.validate();
    return mu;
}

double PopulationMeasure::total_mass() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
}

void PopulationMeasure::validate() const {
    if (points.empty())
        throw std::invalid_argument("PopulationMeasure: no atoms");
    for (double w : weights)
        if (!(w > 0.0) || !std::isfinite(w))
            throw std::invalid_argument("PopulationMeasure: weights must be positive and finite");
    if (!std::isfinite(total_mass()))
        throw std::invalid_argument("PopulationMeasure: non-finite total mass");
}

namespace {

void check_compatible(const Ensemble& ens, const PopulationMeasure& mu) {
    if (int(mu.size()) != ens.n_types)
        throw std::invalid_argument("aggregate: measure atom count differs from ensemble types");
}

} // namespace

AggregatePath aggregate(const Ensemble& ens, const PopulationMeasure& mu,
                        const SampleField& field) {
    check_compatible(ens, mu);
    const int P = ens.n_paths, K = ens.n_types, J = ens.grid.points();
    AggregatePath out;
    out.n_paths = P;
    out.n_points = J;
    out.values.assign(std::size_t(P) * J, 0.0);
    for (int p = 0; p < P; ++p)
        for (int j = 0; j < J; ++j) {
            double lmax = 0.0;
            for (int k = 0; k < K; ++k) lmax = std::max(lmax, ens.log_weight(p, k, j));
            double s = 0.0;
            if (lmax > 300.0) {
                // Factor out the dominant growth weight so exp() stays in range;
                // signs of the field survive because only exp(lw - lmax) <= 1 is
                // taken inside the sum.
                for (int k = 0; k < K; ++k)
                    s += mu.weights[k] * std::exp(ens.log_weight(p, k, j) - lmax) *
                         field(j, k, ens.state(p, k, j));
                s *= std::exp(lmax);
            } else {
                for (int k = 0; k < K; ++k)
                    s += mu.weights[k] * std::exp(ens.log_weight(p, k, j)) *
                         field(j, k, ens.state(p, k, j));
            }
            out(p, j) = s;
        }
    return out;
}

AggregatePath aggregate_raw(const Ensemble& ens, const PopulationMeasure& mu,
                            const SampleField& field) {
    check_compatible(ens, mu);
    const int P = ens.n_paths, K = ens.n_types, J = ens.grid.points();
    AggregatePath out;
    out.n_paths = P;
    out.n_points = J;
    out.values.assign(std::size_t(P) * J, 0.0);
    for (int p = 0; p < P; ++p)
        for (int j = 0; j < J; ++j) {
            double s = 0.0;
            for (int k = 0; k < K; ++k)
                s += mu.weights[k] * field(j, k, ens.state(p, k, j));
            out(p, j) = s;
        }
    return out;
}

PopulationMeasure transport_measure(const Ensemble& ens, const PopulationMeasure& mu,
                                    int j, int p) {
    check_compatible(ens, mu);
    if (j < 0 || j >= ens.grid.points() || p < 0 || p >= ens.n_paths)
        throw std::invalid_argument("transport_measure: index out of range");
    PopulationMeasure out;
    out.points.reserve(mu.size());
    out.weights.reserve(mu.size());
    for (int k = 0; k < ens.n_types; ++k) {
        auto st = ens.state(p, k, j);
        out.points.emplace_back(st.begin(), st.end());
        out.weights.push_back(mu.weights[k] * std::exp(ens.log_weight(p, k, j)));
    }
    out.validate();
    return out;
}

ItoAggregationReport verify_ito_aggregation(const Ensemble& ens,
                                            const PopulationMeasure& mu,
                                            const FlowModel& model,
                                            const ItoTestFunction& f) {
    check_compatible(ens, mu);
    for (int k = 0; k < ens.n_types; ++k)
        if (ens.log_weight(0, k, ens.grid.steps) != 0.0)
            throw std::invalid_argument(
                "verify_ito_aggregation: requires zero growth (unit weights)");

    const int P = ens.n_paths, K = ens.n_types, N = ens.grid.steps;
    const int d = ens.dim, n = ens.noise_dim;
    const double dt = ens.grid.dt();

    ItoAggregationReport rep;
    rep.n_paths = P;
    rep.step_mean_residual.assign(N, 0.0);
    std::vector<double> horizon(P, 0.0);
    std::vector<double> grad(d), hess(std::size_t(d) * d), rho(d), sig(std::size_t(d) * n);

    for (int p = 0; p < P; ++p) {
        for (int j = 0; j < N; ++j) {
            const double t = ens.grid.time(j);
            std::span<const double> dw = ens.increment(p, j);
            double lhs = 0.0, rhs = 0.0;
            for (int k = 0; k < K; ++k) {
                std::span<const double> x = ens.state(p, k, j);
                std::span<const double> y = ens.state(p, k, j + 1);
                lhs += mu.weights[k] * (f.value(t + dt, y) - f.value(t, x));

                model.drift(x, rho);
                model.diffusion(x, sig);
                f.gradient(t, x, grad);
                f.hessian(t, x, hess);
                double drift_part = f.dt(t, x);
                for (int a = 0; a < d; ++a) drift_part += grad[a] * rho[a];
                // 1/2 sum_{a,b} (sig sig^T)_{ab} hess_{ab}
                for (int a = 0; a < d; ++a)
                    for (int b = 0; b < d; ++b) {
                        double aab = 0.0;
                        for (int m = 0; m < n; ++m)
                            aab += sig[std::size_t(a) * n + m] * sig[std::size_t(b) * n + m];
                        drift_part += 0.5 * aab * hess[std::size_t(a) * d + b];
                    }
                double noise_part = 0.0;
                for (int m = 0; m < n; ++m) {
                    double gm = 0.0;
                    for (int a = 0; a < d; ++a) gm += grad[a] * sig[std::size_t(a) * n + m];
                    noise_part += gm * dw[m];
                }
                rhs += mu.weights[k] * (drift_part * dt + noise_part);
            }
            double r = lhs - rhs;
            rep.step_mean_residual[j] += r;
            horizon[p] += r;
        }
    }
    for (int j = 0; j < N; ++j) {
        rep.step_mean_residual[j] /= P;
        rep.max_step_mean = std::max(rep.max_step_mean, std::abs(rep.step_mean_residual[j]));
    }
    double hm = 0.0;
    for (double h : horizon) hm += h;
    rep.horizon_mean = hm / P;
    return rep;
}

} // namespace flowecon
