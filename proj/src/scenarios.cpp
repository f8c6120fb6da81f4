#include "flowecon/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flowecon {

namespace {

ScalarField tanh_impatience(double base, double swing) {
    ScalarField f;
    f.value = [base, swing](std::span<const double> x) {
        return base + swing * std::tanh(x[0]);
    };
    f.gradient = [swing](std::span<const double> x, std::span<double> g) {
        const double c = std::cosh(x[0]);
        g[0] = swing / (c * c);
        for (std::size_t i = 1; i < g.size(); ++i) g[i] = 0.0;
    };
    return f;
}

ScalarField exp_income(double slope) {
    ScalarField f;
    f.value = [slope](std::span<const double> x) { return std::exp(slope * x[0]); };
    f.gradient = [slope](std::span<const double> x, std::span<double> g) {
        g[0] = slope * std::exp(slope * x[0]);
        for (std::size_t i = 1; i < g.size(); ++i) g[i] = 0.0;
    };
    return f;
}

FlowModel still_flow(double gamma) {
    FlowModel m;
    m.dim = 1;
    m.noise_dim = 1;
    m.drift = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; };
    m.diffusion = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; };
    m.growth = constant_field(0.0);
    m.impatience = constant_field(gamma);
    return m;
}

FlowModel ou_flow_1d(double pull, double vol, ScalarField impatience) {
    FlowModel m;
    m.dim = 1;
    m.noise_dim = 1;
    m.drift = [pull](std::span<const double> x, std::span<double> out) {
        out[0] = -pull * x[0];
    };
    m.diffusion = [vol](std::span<const double>, std::span<double> out) {
        out[0] = vol;
    };
    m.growth = constant_field(0.0);
    m.impatience = std::move(impatience);
    return m;
}

// One state dimension driven by two noises with constant loadings.
FlowModel ou_flow_two_noise(double pull, double v1, double v2, ScalarField impatience) {
    FlowModel m;
    m.dim = 1;
    m.noise_dim = 2;
    m.drift = [pull](std::span<const double> x, std::span<double> out) {
        out[0] = -pull * x[0];
    };
    m.diffusion = [v1, v2](std::span<const double>, std::span<double> out) {
        out[0] = v1;
        out[1] = v2;
    };
    m.growth = constant_field(0.0);
    m.impatience = std::move(impatience);
    return m;
}

// Five-type desk shared by the endowment variants.
void desk_population(Scenario& sc) {
    sc.inputs.population = PopulationMeasure::discrete(
        {{-0.4}, {-0.2}, {0.0}, {0.2}, {0.4}}, {0.15, 0.2, 0.3, 0.2, 0.15});
    sc.inputs.wealth = {40.0, 45.0, 50.0, 55.0, 60.0};
    sc.inputs.gamma_lower = 0.015;
}

Scenario desk_base(const char* name, const char* summary, std::uint64_t seed) {
    Scenario sc;
    sc.name = name;
    sc.summary = summary;
    sc.inputs.model = ou_flow_two_noise(0.5, 0.22, 0.12, tanh_impatience(0.045, 0.03));
    sc.inputs.income = exp_income(0.35);
    desk_population(sc);
    sc.grid = TimeGrid{0.0, 2.0, 100};
    sc.n_paths = 10000;
    sc.seed = seed;
    sc.antithetic = true;
    sc.impatience_inf = 0.015;
    return sc;
}

}  // namespace

Scenario rentier_single() {
    Scenario sc;
    sc.name = "rentier_single";
    sc.summary = "constant impatience, unit income, no endowments";
    sc.inputs.model = still_flow(0.02);
    sc.inputs.population = PopulationMeasure::discrete({{1.0}}, {1.0});
    sc.inputs.income = constant_field(1.0);
    sc.inputs.wealth = {50.0};
    sc.grid = TimeGrid{0.0, 2.0, 100};
    sc.n_paths = 256;
    sc.seed = 0x72656e74ULL;
    sc.impatience_inf = 0.02;
    sc.analytic.deflator_is_exponential = true;
    sc.analytic.deflator_rate = 0.02;
    sc.analytic.price_is_flat = true;
    sc.analytic.price_level = 50.0;
    return sc;
}

Scenario rentier_stochastic() {
    Scenario sc;
    sc.name = "rentier_stochastic";
    sc.summary = "one type on an OU flow, smooth impatience, unit income";
    sc.inputs.model = ou_flow_1d(0.5, 0.25, tanh_impatience(0.05, 0.03));
    sc.inputs.population = PopulationMeasure::discrete({{0.0}}, {1.0});
    sc.inputs.income = constant_field(1.0);
    sc.inputs.wealth = {40.0};
    sc.inputs.gamma_lower = 0.015;
    sc.grid = TimeGrid{0.0, 2.0, 100};
    sc.n_paths = 512;
    sc.seed = 0x6f752d31ULL;
    sc.impatience_inf = 0.02;
    return sc;
}

Scenario desk51() {
    Scenario sc = desk_base("desk51", "five types, two noises, amortizing claims",
                            0x6465736bULL);
    sc.inputs.endowment.kind = EndowmentSpec::Kind::amortizing;
    sc.inputs.endowment.level = {0.2, 0.15, 0.1, 0.15, 0.2};
    sc.inputs.endowment.decay = {0.03, 0.02, 0.0, 0.02, 0.03};
    sc.analytic.claim0_is_pledge = true;
    return sc;
}

Scenario desk53() {
    Scenario sc = desk_base("desk53", "five types, decaying income tilt",
                            0x6465736cULL);
    sc.inputs.endowment.kind = EndowmentSpec::Kind::income_tilt;
    sc.inputs.endowment.level = {1.2e-4, 1.0e-4, 0.8e-4, 1.0e-4, 1.2e-4};
    sc.inputs.endowment.decay = {0.3, 0.25, 0.2, 0.25, 0.3};
    return sc;
}

Scenario desk53fu() {
    Scenario sc = desk_base("desk53fu", "five types, tilt relaxing toward a target",
                            0x6465736dULL);
    sc.inputs.endowment.kind = EndowmentSpec::Kind::income_target;
    sc.inputs.endowment.target = {0.002, 0.0022, 0.0024, 0.0022, 0.002};
    sc.inputs.endowment.level = std::vector<double>(5);
    for (int k = 0; k < 5; ++k)
        sc.inputs.endowment.level[k] = 0.6 * sc.inputs.endowment.target[k];
    return sc;
}

Scenario longrun51() {
    Scenario sc;
    sc.name = "longrun51";
    sc.summary = "constant impatience, horizon set by the claim tail truncation";
    sc.inputs.model = still_flow(0.15);
    sc.inputs.population = PopulationMeasure::discrete({{1.0}}, {1.0});
    sc.inputs.income = constant_field(1.0);
    sc.inputs.wealth = {10.0};
    sc.inputs.gamma_lower = 0.15;
    sc.inputs.truncate_tol = 1e-4;
    sc.inputs.endowment.kind = EndowmentSpec::Kind::amortizing;
    sc.inputs.endowment.level = {0.3};
    sc.inputs.endowment.decay = {0.05};
    const double horizon = std::log(1.0 / sc.inputs.truncate_tol) / sc.inputs.gamma_lower;
    sc.grid = TimeGrid{0.0, horizon, 1228};
    sc.n_paths = 8;
    sc.seed = 0x6c6f6e67ULL;
    sc.impatience_inf = 0.15;
    sc.analytic.deflator_is_exponential = true;
    sc.analytic.deflator_rate = 0.15;
    sc.analytic.claim0_is_pledge = true;
    return sc;
}

Scenario desk2d() {
    Scenario sc;
    sc.name = "desk2d";
    sc.summary = "income moved by the first noise, impatience by the second";
    FlowModel m;
    m.dim = 2;
    m.noise_dim = 2;
    m.drift = [](std::span<const double> x, std::span<double> out) {
        out[0] = -0.5 * x[0];
        out[1] = -0.4 * x[1];
    };
    m.diffusion = [](std::span<const double>, std::span<double> out) {
        out[0] = 0.25;  // d x1 loads on W1 only
        out[1] = 0.0;
        out[2] = 0.0;   // d x2 loads on W2 only
        out[3] = 0.2;
    };
    m.growth = constant_field(0.0);
    m.impatience.value = [](std::span<const double> x) {
        return 0.05 + 0.03 * std::tanh(x[1]);
    };
    m.impatience.gradient = [](std::span<const double> x, std::span<double> g) {
        const double c = std::cosh(x[1]);
        g[0] = 0.0;
        g[1] = 0.03 / (c * c);
    };
    sc.inputs.model = std::move(m);
    sc.inputs.income.value = [](std::span<const double> x) {
        return std::exp(0.3 * x[0]);
    };
    sc.inputs.income.gradient = [](std::span<const double> x, std::span<double> g) {
        g[0] = 0.3 * std::exp(0.3 * x[0]);
        g[1] = 0.0;
    };
    sc.inputs.population =
        PopulationMeasure::discrete({{-0.3, -0.2}, {0.2, 0.3}}, {0.5, 0.5});
    sc.inputs.wealth = {40.0, 60.0};
    sc.inputs.gamma_lower = 0.015;
    sc.grid = TimeGrid{0.0, 2.0, 50};
    sc.n_paths = 512;
    sc.seed = 0x32646d6bULL;
    sc.impatience_inf = 0.02;
    return sc;
}

std::vector<std::string> scenario_names() {
    return {"rentier_single", "rentier_stochastic", "desk51", "desk53",
            "desk53fu",       "longrun51",          "desk2d"};
}

Scenario scenario_by_name(const std::string& name) {
    if (name == "rentier_single") return rentier_single();
    if (name == "rentier_stochastic") return rentier_stochastic();
    if (name == "desk51") return desk51();
    if (name == "desk53") return desk53();
    if (name == "desk53fu") return desk53fu();
    if (name == "longrun51") return longrun51();
    if (name == "desk2d") return desk2d();
    throw ConfigError("unknown scenario: " + name);
}

Ensemble make_ensemble(const Scenario& sc) {
    return make_ensemble(sc, sc.n_paths, sc.seed);
}

Ensemble make_ensemble(const Scenario& sc, int n_paths, std::uint64_t seed) {
    return simulate_flow(sc.inputs.model, sc.grid, sc.inputs.population.points,
                         n_paths, seed, sc.antithetic);
}

namespace {

// Orthonormal basis of the near-null space of a PSD Gram matrix, columns of a
// flat row-major block.
std::vector<double> null_basis(std::vector<double> gram, int n, double tol, int& q) {
    std::vector<double> values, vecs;
    symmetric_eigen(gram, n, values, vecs);
    const double lmax = std::max(values.back(), 0.0);
    q = 0;
    std::vector<double> basis;
    for (int c = 0; c < n; ++c)
        if (values[c] <= tol * std::max(lmax, 1e-300)) {
            for (int r = 0; r < n; ++r) basis.push_back(vecs[std::size_t(r) * n + c]);
            ++q;
        }
    return basis;  // q vectors of length n, concatenated
}

// argmax over unit w in span(basis) of w' G w.
std::vector<double> best_in_span(const std::vector<double>& basis, int q, int n,
                                 const std::vector<double>& gram) {
    // B = N' G N, top eigenvector.
    std::vector<double> b(std::size_t(q) * q, 0.0);
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j) {
            double s = 0.0;
            for (int r = 0; r < n; ++r) {
                double gr = 0.0;
                for (int c = 0; c < n; ++c)
                    gr += gram[std::size_t(r) * n + c] * basis[std::size_t(j) * n + c];
                s += basis[std::size_t(i) * n + r] * gr;
            }
            b[std::size_t(i) * q + j] = s;
        }
    std::vector<double> values, vecs;
    symmetric_eigen(b, q, values, vecs);
    std::vector<double> w(n, 0.0);
    for (int i = 0; i < q; ++i)
        for (int r = 0; r < n; ++r)
            w[r] += vecs[(std::size_t(i)) * q + (q - 1)] * basis[std::size_t(i) * n + r];
    double norm = 0.0;
    for (double x : w) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0)
        for (double& x : w) x /= norm;
    return w;
}

}  // namespace

SmoothMarketReport smooth_market_check(const MarketPath& mkt,
                                       std::span<const double> u,
                                       std::span<const double> v) {
    SmoothMarketReport rep;
    rep.fields_available = mkt.has_volatility_fields;
    if (!rep.fields_available) return rep;
    const int n = mkt.noise_dim;
    if (int(u.size()) != n || int(v.size()) != n)
        throw std::invalid_argument("smooth_market_check: direction size mismatch");
    rep.u.assign(u.begin(), u.end());
    rep.v.assign(v.begin(), v.end());

    const int J = mkt.grid.points();
    double sum2 = 0.0, sum_comb = 0.0;
    long count = 0;
    rep.min_combined = std::numeric_limits<double>::infinity();
    for (int p = 0; p < mkt.n_paths; ++p) {
        if (mkt.flagged[p]) continue;
        for (int j = 0; j < J; ++j) {
            double ug = 0.0, vi = 0.0, comb = 0.0, f2 = 0.0;
            for (int m = 0; m < n; ++m) {
                const double si = mkt.sigma_income_at(p, j, m);
                const double sg = mkt.sigma_impatience_at(p, j, m);
                ug += u[m] * sg;
                vi += v[m] * si;
                comb += u[m] * si + v[m] * sg;
                f2 += si * si + sg * sg;
            }
            rep.gamma_leak = std::max(rep.gamma_leak, std::abs(ug));
            rep.income_leak = std::max(rep.income_leak, std::abs(vi));
            rep.min_combined = std::min(rep.min_combined, std::abs(comb));
            sum_comb += std::abs(comb);
            sum2 += f2;
            ++count;
        }
    }
    if (count == 0) {
        rep.min_combined = 0.0;
        return rep;
    }
    rep.mean_combined = sum_comb / count;
    rep.field_scale = std::sqrt(sum2 / (2.0 * count));
    const double scale = std::max(rep.field_scale, 1e-300);
    rep.feasible = rep.gamma_leak <= 1e-8 * scale && rep.income_leak <= 1e-8 * scale &&
                   rep.min_combined >= 1e-4 * scale;
    return rep;
}

SmoothMarketReport smooth_market_diagnostic(const MarketPath& mkt, double null_tol) {
    SmoothMarketReport rep;
    rep.fields_available = mkt.has_volatility_fields;
    if (!rep.fields_available) return rep;
    const int n = mkt.noise_dim;
    const int J = mkt.grid.points();

    std::vector<double> gg(std::size_t(n) * n, 0.0), gi(std::size_t(n) * n, 0.0);
    long count = 0;
    for (int p = 0; p < mkt.n_paths; ++p) {
        if (mkt.flagged[p]) continue;
        for (int j = 0; j < J; ++j) {
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) {
                    gg[std::size_t(a) * n + b] +=
                        mkt.sigma_impatience_at(p, j, a) * mkt.sigma_impatience_at(p, j, b);
                    gi[std::size_t(a) * n + b] +=
                        mkt.sigma_income_at(p, j, a) * mkt.sigma_income_at(p, j, b);
                }
            ++count;
        }
    }
    if (count == 0) return rep;
    for (auto& x : gg) x /= double(count);
    for (auto& x : gi) x /= double(count);

    int qg = 0, qi = 0;
    std::vector<double> ng = null_basis(gg, n, null_tol, qg);
    std::vector<double> ni = null_basis(gi, n, null_tol, qi);
    if (qg == 0 || qi == 0) {
        rep.feasible = false;
        return rep;
    }
    std::vector<double> u = best_in_span(ng, qg, n, gi);
    std::vector<double> v = best_in_span(ni, qi, n, gg);

    // Pick the relative sign with the larger worst-case combined exposure.
    SmoothMarketReport plus = smooth_market_check(mkt, u, v);
    for (double& x : v) x = -x;
    SmoothMarketReport minus = smooth_market_check(mkt, u, v);
    return plus.min_combined >= minus.min_combined ? plus : minus;
}

}  // namespace flowecon
