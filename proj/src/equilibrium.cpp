#include "flowecon/equilibrium.hpp"
#include "flowecon/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

namespace flowecon {

namespace {

std::string at_point(int p, int k, int j) {
    char buf[96];
    std::snprintf(buf, sizeof buf, " (path %d, type %d, step %d)", p, k, j);
    return buf;
}

void check_common(const EquilibriumInputs& in, const Ensemble& ens) {
    in.population.validate();
    if (static_cast<int>(in.population.size()) != ens.n_types)
        throw std::invalid_argument("build_market: population atom count must match ensemble types");
    if (static_cast<int>(in.wealth.size()) != ens.n_types)
        throw std::invalid_argument("build_market: need one initial wealth per type");
    for (double y : in.wealth)
        if (!(y > 0.0) || !std::isfinite(y))
            throw std::invalid_argument("build_market: initial wealth must be strictly positive");
    if (!in.income.value) throw std::invalid_argument("build_market: income field missing");
    if (!in.model.impatience.value)
        throw std::invalid_argument("build_market: impatience field missing");

    const EndowmentSpec& q = in.endowment;
    auto need = [&](const std::vector<double>& v, const char* what) {
        if (static_cast<int>(v.size()) != ens.n_types)
            throw std::invalid_argument(std::string("build_market: endowment ") + what +
                                        " needs one entry per type");
    };
    switch (q.kind) {
        case EndowmentSpec::Kind::none:
            break;
        case EndowmentSpec::Kind::amortizing:
            need(q.level, "level");
            need(q.decay, "decay");
            for (int k = 0; k < ens.n_types; ++k)
                if (q.level[k] < 0.0 || q.level[k] >= 1.0 || q.decay[k] < 0.0)
                    throw std::invalid_argument(
                        "build_market: amortizing endowment needs level in [0,1) and decay >= 0");
            break;
        case EndowmentSpec::Kind::income_tilt:
            need(q.level, "level");
            need(q.decay, "decay");
            for (int k = 0; k < ens.n_types; ++k)
                if (q.level[k] < 0.0 || q.decay[k] < 0.0)
                    throw std::invalid_argument(
                        "build_market: income tilt needs level >= 0 and decay >= 0");
            break;
        case EndowmentSpec::Kind::income_target:
            need(q.level, "level");
            need(q.target, "target");
            for (int k = 0; k < ens.n_types; ++k)
                if (q.level[k] < 0.0 || q.target[k] < q.level[k])
                    throw std::invalid_argument(
                        "build_market: income target needs 0 <= start <= target tilt");
            break;
        case EndowmentSpec::Kind::tabulated: {
            if (q.table_times.size() < 2 ||
                q.table_values.size() != q.table_times.size() * ens.n_types)
                throw std::invalid_argument("build_market: endowment table shape mismatch");
            for (std::size_t i = 1; i < q.table_times.size(); ++i)
                if (q.table_times[i] <= q.table_times[i - 1])
                    throw std::invalid_argument("build_market: table times must increase");
            for (double v : q.table_values)
                if (v < 0.0 || !std::isfinite(v))
                    throw std::invalid_argument("build_market: table rates must be >= 0");
            if (q.inner_paths <= 0 || q.inner_steps <= 0)
                throw std::invalid_argument(
                    "build_market: tabulated endowments need nested MC enabled "
                    "(inner_paths and inner_steps)");
            if (ens.n_paths > in.outer_path_ceiling || q.inner_paths > in.inner_path_ceiling)
                throw std::invalid_argument(
                    "build_market: nested MC size exceeds the configured path ceilings");
            break;
        }
    }
}

// Endowment rate from the table, linear in t, zero beyond the last time.
double table_rate(const EndowmentSpec& q, int n_types, double t, int k) {
    const std::vector<double>& ts = q.table_times;
    if (t <= ts.front()) return q.table_values[k];
    if (t >= ts.back()) return 0.0;
    auto it = std::upper_bound(ts.begin(), ts.end(), t);
    const std::size_t hi = it - ts.begin();
    const double w = (t - ts[hi - 1]) / (ts[hi] - ts[hi - 1]);
    const double lo_v = q.table_values[(hi - 1) * n_types + k];
    const double hi_v = q.table_values[hi * n_types + k];
    return (1.0 - w) * lo_v + w * hi_v;
}

AggregatePath zero_path(int n_paths, int n_points) {
    AggregatePath a;
    a.n_paths = n_paths;
    a.n_points = n_points;
    a.values.assign(std::size_t(n_paths) * n_points, 0.0);
    return a;
}

}  // namespace

void compute_eta(const Ensemble& ens, const PopulationMeasure& mu,
                 const ScalarField& gamma, std::span<const double> wealth,
                 AggregatePath& eta, AggregatePath& loading) {
    mu.validate();
    if (static_cast<int>(mu.size()) != ens.n_types ||
        static_cast<int>(wealth.size()) != ens.n_types)
        throw std::invalid_argument("compute_eta: measure / wealth shape mismatch");
    for (double y : wealth)
        if (!(y > 0.0)) throw std::invalid_argument("compute_eta: wealth must be positive");

    const int P = ens.n_paths, K = ens.n_types, J = ens.grid.points();
    const double dt = ens.grid.dt();
    eta = zero_path(P, J);
    loading = zero_path(P, J);
    std::vector<double> acc(K), prev(K), cur(K);
    for (int p = 0; p < P; ++p) {
        for (int k = 0; k < K; ++k) {
            acc[k] = 0.0;
            prev[k] = gamma(ens.state(p, k, 0));
        }
        for (int j = 0; j < J; ++j) {
            double e = 0.0, l = 0.0;
            for (int k = 0; k < K; ++k) {
                if (j > 0) {
                    cur[k] = gamma(ens.state(p, k, j));
                    acc[k] += 0.5 * dt * (prev[k] + cur[k]);
                    prev[k] = cur[k];
                }
                const double z = mu.weights[k] * wealth[k] * std::exp(-acc[k]);
                e += z;
                l += z * prev[k];
            }
            eta(p, j) = e;
            loading(p, j) = l;
        }
    }
}

MarketPath build_market(const EquilibriumInputs& in, const Ensemble& ens) {
    check_common(in, ens);
    const int P = ens.n_paths, K = ens.n_types, J = ens.grid.points();
    const int n = ens.noise_dim;
    const double dt = ens.grid.dt();
    const EndowmentSpec& q = in.endowment;

    MarketPath mkt;
    mkt.grid = ens.grid;
    mkt.n_paths = P;
    mkt.n_types = K;
    mkt.noise_dim = n;
    mkt.flagged = ens.exploded;
    mkt.rescaled = in.rescale_wealth;
    mkt.gamma_lower = in.gamma_lower;
    mkt.pop_weights = in.population.weights;

    // Budget normalisation: initial consumption spend sum w y gamma equals
    // initial aggregate income.
    double spend0 = 0.0, income0 = 0.0;
    for (int k = 0; k < K; ++k) {
        std::span<const double> x0{ens.initial_types.data() + std::size_t(k) * ens.dim,
                                   std::size_t(ens.dim)};
        const double g = in.model.impatience(x0);
        if (!(g > 0.0))
            throw std::invalid_argument("build_market: impatience not strictly positive at an atom");
        spend0 += in.population.weights[k] * in.wealth[k] * g;
        income0 += in.population.weights[k] * in.income(x0);
    }
    mkt.wealth = in.wealth;
    if (in.rescale_wealth) {
        mkt.wealth_scale = income0 / spend0;
        if (!(mkt.wealth_scale > 0.0) || !std::isfinite(mkt.wealth_scale))
            throw std::invalid_argument("build_market: budget rescale factor not positive");
        for (double& y : mkt.wealth) y *= mkt.wealth_scale;
    }
    if (in.gamma_lower > 0.0)
        mkt.truncation_horizon = std::log(1.0 / in.truncate_tol) / in.gamma_lower;

    // Impatience samples and running trapezoid integral (same accumulation as
    // pathwise_integral so policy construction agrees bitwise).
    mkt.gamma_at = TypeSeries(P, K, J);
    mkt.gamma_integral = TypeSeries(P, K, J);
    for (int p = 0; p < P; ++p) {
        const bool live = !ens.exploded[p];
        for (int k = 0; k < K; ++k) {
            double acc = 0.0;
            double prev = in.model.impatience(ens.state(p, k, 0));
            mkt.gamma_at(p, k, 0) = prev;
            for (int j = 1; j < J; ++j) {
                const double cur = in.model.impatience(ens.state(p, k, j));
                acc += 0.5 * dt * (prev + cur);
                mkt.gamma_at(p, k, j) = cur;
                mkt.gamma_integral(p, k, j) = acc;
                prev = cur;
            }
            if (live)
                for (int j = 0; j < J; ++j) {
                    const double g = mkt.gamma_at(p, k, j);
                    if (!(g > 0.0) || g < in.gamma_lower - 1e-15)
                        throw std::runtime_error(
                            "build_market: impatience fell below its admissible bound" +
                            at_point(p, k, j));
                }
        }
    }

    // eta, loading, per-type and aggregate income.
    mkt.eta = zero_path(P, J);
    mkt.loading = zero_path(P, J);
    mkt.income_type = TypeSeries(P, K, J);
    mkt.income_agg = zero_path(P, J);
    for (int p = 0; p < P; ++p) {
        const bool live = !ens.exploded[p];
        for (int j = 0; j < J; ++j) {
            double e = 0.0, l = 0.0, inc = 0.0;
            for (int k = 0; k < K; ++k) {
                const double w = in.population.weights[k];
                const double z = w * mkt.wealth[k] * std::exp(-mkt.gamma_integral(p, k, j));
                e += z;
                l += z * mkt.gamma_at(p, k, j);
                const double ik =
                    std::exp(ens.log_weight(p, k, j)) * in.income(ens.state(p, k, j));
                if (live && !(ik > 0.0))
                    throw std::runtime_error("build_market: income not strictly positive" +
                                             at_point(p, k, j));
                mkt.income_type(p, k, j) = ik;
                inc += w * ik;
            }
            mkt.eta(p, j) = e;
            mkt.loading(p, j) = l;
            mkt.income_agg(p, j) = inc;
        }
    }

    // Deflator H = loading / I^mu, pinned to H_0 = 1 whenever the budget was
    // rescaled (the raw ratio is then 1 up to rounding; dividing by itself
    // makes it exact).
    mkt.deflator = zero_path(P, J);
    for (int p = 0; p < P; ++p) {
        const double h0 = mkt.loading(p, 0) / mkt.income_agg(p, 0);
        for (int j = 0; j < J; ++j) {
            const double raw = mkt.loading(p, j) / mkt.income_agg(p, j);
            mkt.deflator(p, j) = in.rescale_wealth ? raw / h0 : raw;
        }
    }

    // Endowment side.
    mkt.endow_type = TypeSeries(P, K, J);
    mkt.claim_type = TypeSeries(P, K, J);
    mkt.endow_agg = zero_path(P, J);
    mkt.claim_agg = zero_path(P, J);
    mkt.dividend_agg = zero_path(P, J);
    mkt.price = zero_path(P, J);
    mkt.kappa = zero_path(P, J);
    for (double& v : mkt.kappa.values) v = 1.0;

    const double total_wealth = [&] {
        double s = 0.0;
        for (int k = 0; k < K; ++k) s += in.population.weights[k] * mkt.wealth[k];
        return s;
    }();

    const bool closed_form = q.kind != EndowmentSpec::Kind::tabulated;
    if (closed_form) {
        mkt.deflated_endow_cum = TypeSeries(P, K, J);
        mkt.has_deflated_endow_cum = true;
    }

    // Per-type deterministic decay profiles for the two parametric kinds.
    std::vector<double> profile(std::size_t(K) * J, 0.0);
    if (q.kind == EndowmentSpec::Kind::amortizing ||
        q.kind == EndowmentSpec::Kind::income_tilt) {
        for (int k = 0; k < K; ++k)
            for (int j = 0; j < J; ++j)
                profile[std::size_t(k) * J + j] =
                    q.level[k] * std::exp(-q.decay[k] * (ens.grid.time(j) - ens.grid.t0));
        if (q.kind == EndowmentSpec::Kind::amortizing) {
            double pledged = 0.0;
            for (int k = 0; k < K; ++k)
                pledged += in.population.weights[k] * q.level[k] * mkt.wealth[k];
            if (!(pledged < total_wealth))
                throw std::invalid_argument(
                    "build_market: amortizing levels must keep sum w B0 y below sum w y");
        }
    }

    std::vector<double> cum_loading;  // running trapezoid of loading, per path
    if (q.kind == EndowmentSpec::Kind::income_target) {
        cum_loading.assign(std::size_t(P) * J, 0.0);
        for (int p = 0; p < P; ++p) {
            double acc = 0.0;
            for (int j = 1; j < J; ++j) {
                acc += 0.5 * dt * (mkt.loading(p, j - 1) + mkt.loading(p, j));
                cum_loading[std::size_t(p) * J + j] = acc;
            }
        }
    }

    for (int p = 0; p < P; ++p) {
        const bool live = !ens.exploded[p];
        for (int j = 0; j < J; ++j) {
            const double eta = mkt.eta(p, j);
            const double load = mkt.loading(p, j);
            const double inc = mkt.income_agg(p, j);
            const double factor = inc / load;
            const double eta0 = mkt.eta(p, 0);

            double bar = 0.0;  // the (1 - bar) discount entering P
            for (int k = 0; k < K; ++k) {
                const double w = in.population.weights[k];
                const double y = mkt.wealth[k];
                double endow = 0.0, claim = 0.0, cum = 0.0;
                switch (q.kind) {
                    case EndowmentSpec::Kind::none:
                        break;
                    case EndowmentSpec::Kind::amortizing: {
                        const double b = profile[std::size_t(k) * J + j];
                        const double b0 = q.level[k];
                        endow = (y / total_wealth) * inc * b * (load + q.decay[k] * eta) / load;
                        claim = -(y / total_wealth) * eta * b * factor;
                        cum = (y / total_wealth) * (eta0 * b0 - eta * b);
                        bar += w * (y / total_wealth) * b;
                        break;
                    }
                    case EndowmentSpec::Kind::income_tilt: {
                        const double chi = profile[std::size_t(k) * J + j];
                        const double u = chi * (1.0 + q.decay[k] * eta / load);
                        endow = y * inc * u;
                        claim = -eta * factor * y * chi;
                        cum = y * (eta0 * q.level[k] - eta * chi);
                        bar += w * y * chi;
                        break;
                    }
                    case EndowmentSpec::Kind::income_target: {
                        const double cl = cum_loading[std::size_t(p) * J + j];
                        const double chi_eta = eta0 * q.level[k] - q.target[k] * cl;
                        const double chi = chi_eta / eta;
                        if (live && chi < -1e-12)
                            throw std::runtime_error(
                                "build_market: income-target tilt went negative" +
                                at_point(p, k, j));
                        if (live && chi_eta > q.target[k] * eta +
                                        1e-12 * std::max(1.0, std::abs(chi_eta)))
                            throw std::runtime_error(
                                "build_market: income-target tilt not non-increasing" +
                                at_point(p, k, j));
                        endow = y * inc * q.target[k];
                        claim = -factor * y * chi_eta;
                        cum = y * q.target[k] * cl;
                        bar += w * y * chi;
                        break;
                    }
                    case EndowmentSpec::Kind::tabulated:
                        break;  // filled by the nested-MC pass below
                }
                if (closed_form) {
                    mkt.endow_type(p, k, j) = endow;
                    mkt.claim_type(p, k, j) = claim;
                    mkt.deflated_endow_cum(p, k, j) = cum;
                }
            }
            if (closed_form) {
                if (live && q.kind != EndowmentSpec::Kind::none && !(bar < 1.0))
                    throw std::runtime_error(
                        "build_market: endowment tilt aggregated to >= 1, price not positive" +
                        at_point(p, 0, j));
                mkt.price(p, j) = eta * factor * (1.0 - bar);
            }
        }
    }

    if (!closed_form) {
        // Nested Monte Carlo: for each outer (path, step), simulate fresh inner
        // continuations from the current states and average the deflated
        // endowment integrals.  Antithetic inner increments, one seed per
        // outer point.
        for (int p = 0; p < P; ++p) {
            if (ens.exploded[p]) continue;
            for (int j = 0; j < J; ++j) {
                const double t0 = ens.grid.time(j);
                double horizon = std::max(q.table_times.back() - t0, 0.0);
                horizon = std::min(horizon, mkt.truncation_horizon);
                std::vector<double> mean_cum(K, 0.0);
                if (horizon > 0.0) {
                    std::vector<std::vector<double>> starts(K);
                    for (int k = 0; k < K; ++k) {
                        auto st = ens.state(p, k, j);
                        starts[k].assign(st.begin(), st.end());
                    }
                    TimeGrid ig{t0, horizon, q.inner_steps};
                    Ensemble inner = simulate_flow(
                        in.model, ig, starts, q.inner_paths,
                        derive_path_seed(q.inner_seed, std::uint64_t(p) * J + j),
                        /*antithetic=*/true);
                    std::vector<double> ginner = pathwise_integral(inner, in.model.impatience);
                    const int JI = ig.points();
                    std::vector<double> hq(std::size_t(K) * JI);
                    int used = 0;
                    std::vector<double> acc(K);
                    for (int pi = 0; pi < q.inner_paths; ++pi) {
                        if (inner.exploded[pi]) continue;
                        ++used;
                        for (int u = 0; u < JI; ++u) {
                            double load_in = 0.0, inc_in = 0.0;
                            for (int k = 0; k < K; ++k) {
                                const double w = in.population.weights[k];
                                const double gout = mkt.gamma_integral(p, k, j);
                                const double gin =
                                    ginner[(std::size_t(pi) * K + k) * JI + u];
                                load_in += w * mkt.wealth[k] * std::exp(-gout - gin) *
                                           in.model.impatience(inner.state(pi, k, u));
                                inc_in += w * std::exp(ens.log_weight(p, k, j) +
                                                       inner.log_weight(pi, k, u)) *
                                          in.income(inner.state(pi, k, u));
                            }
                            const double h_in = load_in / inc_in;
                            for (int k = 0; k < K; ++k)
                                hq[std::size_t(k) * JI + u] =
                                    h_in * table_rate(q, K, ig.time(u), k);
                        }
                        const double dti = ig.dt();
                        for (int k = 0; k < K; ++k) {
                            double a = 0.0;
                            for (int u = 1; u < JI; ++u)
                                a += 0.5 * dti *
                                     (hq[std::size_t(k) * JI + u - 1] + hq[std::size_t(k) * JI + u]);
                            acc[k] = a;
                            mean_cum[k] += a;
                        }
                    }
                    if (used == 0)
                        throw std::runtime_error("build_market: all inner paths exploded" +
                                                 at_point(p, 0, j));
                    for (int k = 0; k < K; ++k) mean_cum[k] /= used;
                }
                const double h_here = mkt.loading(p, j) / mkt.income_agg(p, j);
                for (int k = 0; k < K; ++k) {
                    mkt.endow_type(p, k, j) = table_rate(q, K, t0, k);
                    mkt.claim_type(p, k, j) = -mean_cum[k] / h_here;
                }
                double lsum = 0.0;
                for (int k = 0; k < K; ++k)
                    lsum += in.population.weights[k] * mkt.claim_type(p, k, j);
                mkt.price(p, j) = lsum + mkt.eta(p, j) / mkt.deflator(p, j);
            }
        }
    }

    // Aggregates, dividends, sign checks, wealth price, hedges.
    mkt.hedge_type = TypeSeries(P, K, J);
    mkt.wealth_price = zero_path(P, J);
    for (int p = 0; p < P; ++p) {
        const bool live = !ens.exploded[p];
        for (int j = 0; j < J; ++j) {
            double qa = 0.0, la = 0.0;
            for (int k = 0; k < K; ++k) {
                const double w = in.population.weights[k];
                const double endow = mkt.endow_type(p, k, j);
                const double claim = mkt.claim_type(p, k, j);
                if (live) {
                    if (endow < -1e-9)
                        throw std::runtime_error("build_market: negative endowment rate" +
                                                 at_point(p, k, j));
                    if (endow >= mkt.income_type(p, k, j))
                        throw std::runtime_error(
                            "build_market: endowment rate reached the income rate" +
                            at_point(p, k, j));
                }
                qa += w * endow;
                la += w * claim;
                mkt.hedge_type(p, k, j) = -mkt.kappa(p, j) * claim;
            }
            mkt.endow_agg(p, j) = qa;
            mkt.claim_agg(p, j) = la;
            mkt.dividend_agg(p, j) = mkt.income_agg(p, j) - qa;
            mkt.wealth_price(p, j) = mkt.price(p, j) - la;
        }
    }

    // Analytic volatility fields when gradients are available.
    const bool have_grads = in.income.has_gradient() && in.model.impatience.has_gradient() &&
                            static_cast<bool>(in.model.diffusion);
    if (have_grads) {
        mkt.has_volatility_fields = true;
        mkt.sigma_income.assign(std::size_t(P) * J * n, 0.0);
        mkt.sigma_impatience.assign(std::size_t(P) * J * n, 0.0);
        mkt.theta.assign(std::size_t(P) * J * n, 0.0);
        const int d = ens.dim;
        std::vector<double> rho(std::size_t(d) * n), gi(d), gg(d);
        for (int p = 0; p < P; ++p)
            for (int j = 0; j < J; ++j) {
                const std::size_t base = (std::size_t(p) * J + j) * n;
                for (int k = 0; k < K; ++k) {
                    auto st = ens.state(p, k, j);
                    in.model.diffusion(st, rho);
                    in.income.gradient(st, gi);
                    in.model.impatience.gradient(st, gg);
                    const double w = in.population.weights[k];
                    const double lam = std::exp(ens.log_weight(p, k, j));
                    const double z = mkt.wealth[k] * std::exp(-mkt.gamma_integral(p, k, j));
                    for (int m = 0; m < n; ++m) {
                        double di = 0.0, dg = 0.0;
                        for (int c = 0; c < d; ++c) {
                            di += gi[c] * rho[std::size_t(c) * n + m];
                            dg += gg[c] * rho[std::size_t(c) * n + m];
                        }
                        mkt.sigma_income[base + m] += w * lam * di;
                        mkt.sigma_impatience[base + m] += w * z * dg;
                    }
                }
                for (int m = 0; m < n; ++m)
                    mkt.theta[base + m] = mkt.sigma_income[base + m] / mkt.income_agg(p, j) -
                                          mkt.sigma_impatience[base + m] / mkt.loading(p, j);
            }
    }

    // Coefficient estimates need enough cross-path spread to mean anything.
    int live = 0;
    for (int p = 0; p < P; ++p)
        if (!ens.exploded[p]) ++live;
    if (live >= 100) {
        mkt.coef.available = true;
        mkt.coef.deflator = estimate_coefficients(mkt.deflator, ens);
        mkt.coef.price = estimate_coefficients(mkt.price, ens);
        mkt.coef.dividend_yield.assign(ens.grid.steps, 0.0);
        mkt.coef.dividend_yield_se.assign(ens.grid.steps, 0.0);
        std::vector<double> dp(live);
        for (int j = 0; j < ens.grid.steps; ++j) {
            int m = 0;
            for (int p = 0; p < P; ++p)
                if (!ens.exploded[p]) dp[m++] = mkt.dividend_agg(p, j) / mkt.price(p, j);
            mkt.coef.dividend_yield[j] = mean_of(dp);
            mkt.coef.dividend_yield_se[j] =
                m > 1 ? stddev_of(dp) / std::sqrt(double(m)) : 0.0;
        }
    }
    return mkt;
}

CoefficientPath estimate_coefficients(const AggregatePath& series, const Ensemble& ens) {
    const int P = ens.n_paths, N = ens.grid.steps, n = ens.noise_dim;
    if (series.n_paths != P || series.n_points != ens.grid.points())
        throw std::invalid_argument("estimate_coefficients: series shape mismatch");
    std::vector<int> live;
    for (int p = 0; p < P; ++p)
        if (!ens.exploded[p]) live.push_back(p);
    if (static_cast<int>(live.size()) < 100)
        throw std::runtime_error("estimate_coefficients: fewer than 100 unflagged paths");
    const double dt = ens.grid.dt();

    CoefficientPath out;
    out.n_steps = N;
    out.noise_dim = n;
    out.drift.assign(N, 0.0);
    out.drift_se.assign(N, 0.0);
    out.diffusion.assign(std::size_t(N) * n, 0.0);
    out.diffusion_se.assign(std::size_t(N) * n, 0.0);

    const int M = static_cast<int>(live.size());
    std::vector<double> y(M), X(std::size_t(M) * n);
    for (int j = 0; j < N; ++j) {
        for (int m = 0; m < M; ++m) {
            const int p = live[m];
            const double lo = series(p, j), hi = series(p, j + 1);
            if (!(lo > 0.0) || !(hi > 0.0))
                throw std::invalid_argument("estimate_coefficients: series must stay positive");
            y[m] = std::log(hi) - std::log(lo);
            auto dw = ens.increment(p, j);
            for (int c = 0; c < n; ++c) X[std::size_t(m) * n + c] = dw[c];
        }
        OlsFit fit = ols(y, X, M, n);
        double s2 = 0.0;
        for (int c = 0; c < n; ++c) {
            out.diffusion[std::size_t(j) * n + c] = fit.coef[c + 1];
            out.diffusion_se[std::size_t(j) * n + c] = fit.robust_se[c + 1];
            s2 += fit.coef[c + 1] * fit.coef[c + 1];
        }
        out.drift[j] = fit.coef[0] / dt + 0.5 * s2;
        out.drift_se[j] = fit.robust_se[0] / dt;
    }
    return out;
}

PolicyPath market_policy(const MarketPath& mkt, const Ensemble& ens,
                         const ScalarField& gamma) {
    PolicyInputs in;
    in.ensemble = &ens;
    in.deflator = &mkt.deflator;
    in.kappa = &mkt.kappa;
    in.initial_net_wealth = mkt.wealth;
    in.endowment_hedge = &mkt.hedge_type;
    return limit_policy(in, gamma);
}

ClearingReport verify_clearing(const MarketPath& mkt, const PolicyPath& pol,
                               const PopulationMeasure& mu) {
    const int P = mkt.n_paths, K = mkt.n_types, J = mkt.grid.points();
    if (pol.net_wealth.n_paths != P || pol.net_wealth.n_types != K ||
        pol.net_wealth.n_points != J)
        throw std::invalid_argument("verify_clearing: policy shape mismatch");
    ClearingReport rep;
    for (int p = 0; p < P; ++p) {
        if (mkt.flagged[p]) continue;
        for (int j = 0; j < J; ++j) {
            double xi = 0.0, pi = 0.0, c = 0.0;
            for (int k = 0; k < K; ++k) {
                const double w = mu.weights[k];
                xi += w * (pol.net_wealth(p, k, j) + mkt.claim_type(p, k, j));
                pi += w * pol.portfolio(p, k, j);
                c += w * pol.consumption(p, k, j);
            }
            const double pscale = std::max(std::abs(mkt.price(p, j)), 1e-300);
            rep.money = std::max(rep.money, std::abs(xi - pi) / pscale);
            rep.portfolio = std::max(rep.portfolio, std::abs(pi - mkt.price(p, j)) / pscale);
            const double supply = mkt.endow_agg(p, j) + mkt.dividend_agg(p, j);
            rep.goods = std::max(rep.goods,
                                 std::abs(c - supply) / std::max(std::abs(c), 1e-300));
            if (!(c > 0.0)) rep.consumption_positive = false;
        }
    }
    return rep;
}

NoArbitrageReport verify_no_arbitrage(const MarketPath& mkt, const Ensemble& ens,
                                      double rate_shift) {
    const int P = mkt.n_paths, N = mkt.grid.steps;
    const double dt = mkt.grid.dt();
    NoArbitrageReport rep;

    std::vector<int> live;
    for (int p = 0; p < P; ++p)
        if (!mkt.flagged[p]) live.push_back(p);
    const int M = static_cast<int>(live.size());

    // (a) Deflated gain: the per-step increment of H P plus the trapezoid
    // accumulation of deflated dividends should be centred at zero.
    std::vector<double> incs(std::size_t(M) * N);
    for (int m = 0; m < M; ++m) {
        const int p = live[m];
        for (int j = 0; j < N; ++j) {
            const double hd0 = mkt.deflator(p, j) * mkt.dividend_agg(p, j);
            const double hd1 = mkt.deflator(p, j + 1) * mkt.dividend_agg(p, j + 1);
            incs[std::size_t(m) * N + j] =
                mkt.deflator(p, j + 1) * mkt.price(p, j + 1) -
                mkt.deflator(p, j) * mkt.price(p, j) + 0.5 * (hd0 + hd1) * dt;
        }
    }
    rep.value_drift = martingale_test(incs, M, N, 3.0, 0.95, "deflated gain drift");

    // (b) Coefficient identity b + delta - r - sigma.theta = 0 per step.
    const CoefficientPath h_coef =
        mkt.coef.available ? mkt.coef.deflator : estimate_coefficients(mkt.deflator, ens);
    const CoefficientPath p_coef =
        mkt.coef.available ? mkt.coef.price : estimate_coefficients(mkt.price, ens);
    rep.identity.assign(N, 0.0);
    rep.identity_se.assign(N, 0.0);
    int passed = 0;
    std::vector<double> dp(M);
    for (int j = 0; j < N; ++j) {
        double delta, delta_se;
        if (mkt.coef.available) {
            delta = mkt.coef.dividend_yield[j];
            delta_se = mkt.coef.dividend_yield_se[j];
        } else {
            for (int m = 0; m < M; ++m)
                dp[m] = mkt.dividend_agg(live[m], j) / mkt.price(live[m], j);
            delta = mean_of(dp);
            delta_se = M > 1 ? stddev_of(dp) / std::sqrt(double(M)) : 0.0;
        }
        const double r = -h_coef.drift[j] + rate_shift;
        const double b = p_coef.drift[j];
        double cross = 0.0, var = h_coef.drift_se[j] * h_coef.drift_se[j] +
                                   p_coef.drift_se[j] * p_coef.drift_se[j] +
                                   delta_se * delta_se;
        for (int c = 0; c < mkt.noise_dim; ++c) {
            const double sig = p_coef.diff(j, c);
            const double th = -h_coef.diff(j, c);
            cross += sig * th;
            var += sig * sig * h_coef.diff_se(j, c) * h_coef.diff_se(j, c) +
                   th * th * p_coef.diff_se(j, c) * p_coef.diff_se(j, c);
        }
        rep.identity[j] = b + delta - r - cross;
        rep.identity_se[j] = std::sqrt(var);
        const double band = 3.0 * rep.identity_se[j] + 1e-10;
        if (std::abs(rep.identity[j]) <= band) ++passed;
        rep.max_abs_z = std::max(rep.max_abs_z,
                                 std::abs(rep.identity[j]) / std::max(rep.identity_se[j], 1e-300));
    }
    rep.identity_pass_fraction = double(passed) / N;
    rep.identity_pass = rep.identity_pass_fraction >= 0.95;
    return rep;
}

VolatilityMatchReport verify_wealth_volatility(const MarketPath& mkt, const Ensemble& ens) {
    const int N = mkt.grid.steps, n = mkt.noise_dim;
    VolatilityMatchReport rep;

    const CoefficientPath h_coef =
        mkt.coef.available ? mkt.coef.deflator : estimate_coefficients(mkt.deflator, ens);
    const CoefficientPath w_coef = estimate_coefficients(mkt.wealth_price, ens);

    int pass = 0, total = 0, apass = 0, atotal = 0;
    std::vector<int> live;
    for (int p = 0; p < mkt.n_paths; ++p)
        if (!mkt.flagged[p]) live.push_back(p);
    for (int j = 0; j < N; ++j)
        for (int c = 0; c < n; ++c) {
            const double sw = w_coef.diff(j, c);
            const double th = -h_coef.diff(j, c);
            const double band = 3.0 * std::sqrt(w_coef.diff_se(j, c) * w_coef.diff_se(j, c) +
                                                h_coef.diff_se(j, c) * h_coef.diff_se(j, c)) +
                                1e-10;
            ++total;
            if (std::abs(sw - th) <= band) ++pass;
            if (mkt.has_volatility_fields) {
                double amean = 0.0;
                for (int p : live) amean += mkt.theta_at(p, j, c);
                amean /= double(live.size());
                ++atotal;
                if (std::abs(sw - amean) <= 3.0 * w_coef.diff_se(j, c) + 1e-10) ++apass;
            }
        }
    rep.estimate_pass_fraction = total ? double(pass) / total : 0.0;
    rep.estimate_pass = rep.estimate_pass_fraction >= 0.95;
    rep.analytic_available = mkt.has_volatility_fields;
    rep.analytic_pass_fraction = atotal ? double(apass) / atotal : 0.0;
    rep.analytic_pass = !mkt.has_volatility_fields || rep.analytic_pass_fraction >= 0.95;

    // Pathwise consumption-to-wealth identity c^mu / P^W = loading / eta; in
    // equilibrium aggregate consumption is aggregate income.
    for (int p : live)
        for (int j = 0; j <= N; ++j) {
            const double lhs = mkt.income_agg(p, j) / mkt.wealth_price(p, j);
            const double rhs = mkt.loading(p, j) / mkt.eta(p, j);
            rep.ratio_residual =
                std::max(rep.ratio_residual, std::abs(lhs - rhs) / std::abs(rhs));
        }
    return rep;
}

JonesesReport joneses_identity(const MarketPath& mkt, int reference_type, double g_scale) {
    const int P = mkt.n_paths, K = mkt.n_types, J = mkt.grid.points();
    if (reference_type < 0 || reference_type >= K)
        throw std::invalid_argument("joneses_identity: reference type out of range");
    JonesesReport rep;
    rep.applicable = true;
    for (int p = 0; p < P && rep.applicable; ++p) {
        if (mkt.flagged[p]) continue;
        const double g0 = mkt.gamma_at(p, reference_type, 0);
        for (int j = 0; j < J; ++j)
            if (std::abs(mkt.gamma_at(p, reference_type, j) - g0) >
                1e-12 * std::max(1.0, std::abs(g0))) {
                rep.applicable = false;
                break;
            }
    }
    if (!rep.applicable) return rep;

    for (int p = 0; p < P; ++p) {
        if (mkt.flagged[p]) continue;
        const double gref = mkt.gamma_at(p, reference_type, 0);
        for (int j = 0; j < J; ++j) {
            const double t = mkt.grid.time(j) - mkt.grid.t0;
            const double G = g_scale * std::exp(-mkt.gamma_integral(p, reference_type, j)) *
                             mkt.deflator(p, 0) / mkt.deflator(p, j);
            const double lhs = std::exp(-t * gref) / G;
            const double target = mkt.deflator(p, j) / mkt.deflator(p, 0);
            rep.path_residual =
                std::max(rep.path_residual, std::abs(lhs - target) / target);

            double net_agg = 0.0;
            for (int k = 0; k < K; ++k)
                net_agg += mkt.pop_weights[k] * mkt.wealth[k] *
                           std::exp(-mkt.gamma_integral(p, k, j)) / mkt.deflator(p, j);
            rep.aggregate_residual =
                std::max(rep.aggregate_residual,
                         std::abs(mkt.eta(p, j) / net_agg - mkt.deflator(p, j)) /
                             mkt.deflator(p, j));
        }
    }
    return rep;
}

MarketInvariantReport market_invariants(const MarketPath& mkt) {
    const int P = mkt.n_paths, K = mkt.n_types, J = mkt.grid.points();
    MarketInvariantReport rep;
    rep.min_dividend = std::numeric_limits<double>::infinity();
    for (int p = 0; p < P; ++p) {
        if (mkt.flagged[p]) continue;
        const double eta0 = mkt.eta(p, 0);
        for (int j = 0; j < J; ++j) {
            if (j > 0 && !(mkt.eta(p, j) < mkt.eta(p, j - 1))) rep.eta_monotone = false;
            if (mkt.gamma_lower > 0.0) {
                const double bound =
                    std::exp(-mkt.gamma_lower * (mkt.grid.time(j) - mkt.grid.t0));
                rep.eta_decay_violation =
                    std::max(rep.eta_decay_violation, mkt.eta(p, j) / eta0 - bound);
            }
            const double hc = mkt.deflator(p, j) * mkt.income_agg(p, j);
            rep.consumption_identity =
                std::max(rep.consumption_identity,
                         std::abs(hc - mkt.loading(p, j)) / mkt.loading(p, j));
            rep.min_dividend = std::min(rep.min_dividend, mkt.dividend_agg(p, j));
        }
        if (mkt.rescaled)
            rep.h0_gap = std::max(rep.h0_gap, std::abs(mkt.deflator(p, 0) - 1.0));
        rep.budget_gap = std::max(
            rep.budget_gap,
            std::abs(mkt.loading(p, 0) - mkt.income_agg(p, 0)) / mkt.income_agg(p, 0));

        if (mkt.has_deflated_endow_cum) {
            double cum_total = 0.0;
            for (int k = 0; k < K; ++k) {
                cum_total += mkt.pop_weights[k] * mkt.deflated_endow_cum(p, k, J - 1);
                const double base = mkt.deflator(p, 0) * mkt.claim_type(p, k, 0);
                const double scale =
                    std::max({std::abs(base), std::abs(mkt.claim_type(p, k, 0)),
                              mkt.wealth[k]});
                for (int j = 0; j < J; ++j) {
                    const double v = mkt.deflator(p, j) * mkt.claim_type(p, k, j) -
                                     mkt.deflated_endow_cum(p, k, j);
                    rep.claim_constancy =
                        std::max(rep.claim_constancy, std::abs(v - base) / scale);
                }
            }
            rep.endow_cum_excess = std::max(rep.endow_cum_excess, cum_total - eta0);
        }
    }
    if (rep.min_dividend == std::numeric_limits<double>::infinity()) rep.min_dividend = 0.0;
    return rep;
}

double select_kappa(std::span<const double> sigma, std::span<const double> theta,
                    bool* degenerate) {
    if (sigma.size() != theta.size())
        throw std::invalid_argument("select_kappa: dimension mismatch");
    double s2 = 0.0, t2 = 0.0, dot = 0.0;
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        s2 += sigma[i] * sigma[i];
        t2 += theta[i] * theta[i];
        dot += sigma[i] * theta[i];
    }
    const double sn = std::sqrt(s2);
    if (degenerate) *degenerate = false;
    if (sn < 1e-12) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    const double mag = std::sqrt(t2) / sn;
    return dot < 0.0 ? -mag : mag;
}

}  // namespace flowecon
