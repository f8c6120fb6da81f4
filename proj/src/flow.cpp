#include "flowecon/flow.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <thread>

#include "flowecon/rng.hpp"

namespace flowecon {

bool FlowModel::in_domain(std::span<const double> x) const {
    for (double c : x)
        if (!std::isfinite(c)) return false;
    return domain ? domain(x) : true;
}

int Ensemble::n_flagged() const {
    int n = 0;
    for (char c : exploded) n += (c != 0);
    return n;
}

namespace {

int thread_count_from_env() {
    if (const char* s = std::getenv("FLOWECON_THREADS")) {
        int n = std::atoi(s);
        if (n > 0) return n;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc ? int(hc) : 1;
}

void check_initial_coefficients(const FlowModel& model,
                                const std::vector<std::vector<double>>& types) {
    std::vector<double> rho(model.dim), sig(std::size_t(model.dim) * model.noise_dim);
    for (const auto& x : types) {
        if (int(x.size()) != model.dim)
            throw std::invalid_argument("simulate_flow: type dimension mismatch");
        if (!model.in_domain(x))
            throw std::invalid_argument("simulate_flow: initial type outside domain");
        model.drift(x, rho);
        model.diffusion(x, sig);
        for (double v : rho)
            if (!std::isfinite(v))
                throw std::invalid_argument("simulate_flow: non-finite drift at initial type");
        for (double v : sig)
            if (!std::isfinite(v))
                throw std::invalid_argument("simulate_flow: non-finite diffusion at initial type");
        if (model.growth.value && !std::isfinite(model.growth(x)))
            throw std::invalid_argument("simulate_flow: non-finite growth at initial type");
    }
}

// Euler recursion for one path over all types; shared by every entry point so
// that restarts reproduce stored tails bitwise.
void run_path(const FlowModel& model, const TimeGrid& grid, Ensemble& ens, int p) {
    const int d = model.dim, n = model.noise_dim, K = ens.n_types, N = grid.steps;
    const double dt = grid.dt();
    std::vector<double> rho(d), sig(std::size_t(d) * n);
    bool bad = false;
    int bad_step = -1;

    for (int k = 0; k < K; ++k) ens.log_weight(p, k, 0) = 0.0;

    for (int j = 0; j < N && !bad; ++j) {
        std::span<const double> dw = ens.increment(p, j);
        for (int k = 0; k < K; ++k) {
            std::span<const double> x = ens.state(p, k, j);
            std::span<double> y = ens.state(p, k, j + 1);
            model.drift(x, rho);
            model.diffusion(x, sig);
            for (int c = 0; c < d; ++c) {
                double v = x[c] + rho[c] * dt;
                for (int m = 0; m < n; ++m) v += sig[std::size_t(c) * n + m] * dw[m];
                y[c] = v;
            }
            if (!model.in_domain(y)) { bad = true; bad_step = j + 1; break; }
            double h0 = model.growth.value ? model.growth(x) : 0.0;
            double h1 = model.growth.value ? model.growth(y) : 0.0;
            double lw = ens.log_weight(p, k, j) + 0.5 * dt * (h0 + h1);
            if (!std::isfinite(lw)) { bad = true; bad_step = j + 1; break; }
            ens.log_weight(p, k, j + 1) = lw;
        }
        if (bad) {
            // Freeze every type of this path at its last good value.
            for (int k = 0; k < K; ++k)
                for (int jj = bad_step; jj <= N; ++jj) {
                    std::copy_n(ens.state(p, k, bad_step - 1).data(), d,
                                ens.state(p, k, jj).data());
                    ens.log_weight(p, k, jj) = ens.log_weight(p, k, bad_step - 1);
                }
        }
    }
    ens.exploded[p] = bad ? 1 : 0;
    ens.explode_step[p] = bad ? bad_step : -1;
}

Ensemble make_ensemble(const FlowModel& model, const TimeGrid& grid,
                       const std::vector<std::vector<double>>& types, int n_paths) {
    if (n_paths <= 0) throw std::invalid_argument("simulate_flow: need n_paths > 0");
    if (types.empty()) throw std::invalid_argument("simulate_flow: need at least one type");
    if (grid.steps <= 0 || !(grid.horizon > 0))
        throw std::invalid_argument("simulate_flow: degenerate time grid");
    check_initial_coefficients(model, types);

    Ensemble ens;
    ens.grid = grid;
    ens.dim = model.dim;
    ens.noise_dim = model.noise_dim;
    ens.n_paths = n_paths;
    ens.n_types = int(types.size());
    ens.states.assign(std::size_t(n_paths) * ens.n_types * grid.points() * model.dim, 0.0);
    ens.log_weights.assign(std::size_t(n_paths) * ens.n_types * grid.points(), 0.0);
    ens.increments.assign(std::size_t(n_paths) * grid.steps * model.noise_dim, 0.0);
    ens.exploded.assign(n_paths, 0);
    ens.explode_step.assign(n_paths, -1);
    ens.initial_types.reserve(std::size_t(ens.n_types) * model.dim);
    for (const auto& x : types)
        ens.initial_types.insert(ens.initial_types.end(), x.begin(), x.end());
    for (int p = 0; p < n_paths; ++p)
        for (int k = 0; k < ens.n_types; ++k)
            std::copy_n(types[k].data(), model.dim, ens.state(p, k, 0).data());
    return ens;
}

void run_all_paths(const FlowModel& model, const TimeGrid& grid, Ensemble& ens) {
    const int nt = std::min(thread_count_from_env(), ens.n_paths);
    if (nt <= 1) {
        for (int p = 0; p < ens.n_paths; ++p) run_path(model, grid, ens, p);
    } else {
        // Static path partition: each path's output block is disjoint, so the
        // result does not depend on the thread count.
        std::vector<std::thread> pool;
        for (int t = 0; t < nt; ++t)
            pool.emplace_back([&, t] {
                for (int p = t; p < ens.n_paths; p += nt) run_path(model, grid, ens, p);
            });
        for (auto& th : pool) th.join();
    }
    int flagged = ens.n_flagged();
    if (2 * flagged > ens.n_paths)
        throw std::runtime_error("simulate_flow: more than half of the paths exploded");
}

} // namespace

Ensemble simulate_flow(const FlowModel& model, const TimeGrid& grid,
                       const std::vector<std::vector<double>>& types,
                       int n_paths, std::uint64_t seed, bool antithetic) {
    Ensemble ens = make_ensemble(model, grid, types, n_paths);
    ens.seed = seed;
    ens.antithetic = antithetic;
    const double sdt = std::sqrt(grid.dt());
    for (int p = 0; p < n_paths; ++p) {
        if (antithetic && (p & 1)) {
            for (int j = 0; j < grid.steps; ++j) {
                std::span<const double> src = ens.increment(p - 1, j);
                std::span<double> dst = ens.increment(p, j);
                for (int m = 0; m < model.noise_dim; ++m) dst[m] = -src[m];
            }
            continue;
        }
        PathRng rng = make_path_rng(seed, std::uint64_t(antithetic ? p / 2 : p));
        std::normal_distribution<double> normal(0.0, 1.0);
        for (int j = 0; j < grid.steps; ++j) {
            std::span<double> dw = ens.increment(p, j);
            for (int m = 0; m < model.noise_dim; ++m) dw[m] = sdt * normal(rng);
        }
    }
    run_all_paths(model, grid, ens);
    return ens;
}

Ensemble simulate_flow_with_increments(const FlowModel& model, const TimeGrid& grid,
                                       const std::vector<std::vector<double>>& types,
                                       int n_paths, std::span<const double> increments) {
    Ensemble ens = make_ensemble(model, grid, types, n_paths);
    if (increments.size() != ens.increments.size())
        throw std::invalid_argument("simulate_flow_with_increments: increment buffer size mismatch");
    std::copy(increments.begin(), increments.end(), ens.increments.begin());
    run_all_paths(model, grid, ens);
    return ens;
}

Ensemble restart_flow(const FlowModel& model, const Ensemble& ens, int s) {
    if (s < 0 || s >= ens.grid.steps)
        throw std::invalid_argument("restart_flow: restart index outside grid");
    TimeGrid tail;
    tail.t0 = ens.grid.time(s);
    tail.steps = ens.grid.steps - s;
    tail.horizon = tail.steps * ens.grid.dt();

    Ensemble out;
    out.grid = tail;
    out.dim = ens.dim;
    out.noise_dim = ens.noise_dim;
    out.n_paths = ens.n_paths;
    out.n_types = ens.n_types;
    out.seed = ens.seed;
    out.antithetic = ens.antithetic;
    out.states.assign(std::size_t(out.n_paths) * out.n_types * tail.points() * out.dim, 0.0);
    out.log_weights.assign(std::size_t(out.n_paths) * out.n_types * tail.points(), 0.0);
    out.increments.assign(std::size_t(out.n_paths) * tail.steps * out.noise_dim, 0.0);
    out.exploded.assign(out.n_paths, 0);
    out.explode_step.assign(out.n_paths, -1);
    out.initial_types = ens.initial_types; // nominal; actual starts are per path

    for (int p = 0; p < ens.n_paths; ++p) {
        for (int k = 0; k < ens.n_types; ++k)
            std::copy_n(ens.state(p, k, s).data(), ens.dim, out.state(p, k, 0).data());
        for (int j = 0; j < tail.steps; ++j)
            std::copy_n(ens.increment(p, s + j).data(), ens.noise_dim,
                        out.increment(p, j).data());
    }
    run_all_paths(model, out.grid, out);
    return out;
}

std::vector<double> pathwise_integral(const Ensemble& ens, const ScalarField& f) {
    const int P = ens.n_paths, K = ens.n_types, J = ens.grid.points();
    const double dt = ens.grid.dt();
    std::vector<double> out(std::size_t(P) * K * J, 0.0);
    for (int p = 0; p < P; ++p)
        for (int k = 0; k < K; ++k) {
            double acc = 0.0;
            double prev = f(ens.state(p, k, 0));
            out[(std::size_t(p) * K + k) * J] = 0.0;
            for (int j = 1; j < J; ++j) {
                double cur = f(ens.state(p, k, j));
                acc += 0.5 * dt * (prev + cur);
                out[(std::size_t(p) * K + k) * J + j] = acc;
                prev = cur;
            }
        }
    return out;
}

FellerReport feller_nonexplosion_1d(const std::function<double(double)>& drift,
                                    const std::function<double(double)>& diffusion,
                                    std::pair<double, double> probe_range,
                                    double tolerance) {
    if (!(probe_range.first < 0.0 && probe_range.second > 0.0))
        throw std::invalid_argument("feller_nonexplosion_1d: probe range must straddle 0");
    if (!(tolerance > 0.0))
        throw std::invalid_argument("feller_nonexplosion_1d: tolerance must be positive");

    const double threshold = 1.0 / tolerance;

    // One-sided scale/speed accumulation on [0, end].  All quantities are kept
    // in log space: c(x) spans hundreds of orders of magnitude for even mild
    // drifts.  log_inner tracks log int_0^z c(y)/sigma(y)^2 dy via incremental
    // log-sum-exp; K accumulates 2 exp(log_inner - log_c) which saturates to
    // +inf harmlessly once divergence is obvious.
    auto k_at = [&](double end) {
        const int n_steps = 4000;
        const double hstep = end / n_steps; // signed
        double log_c_prev = 0.0;
        double log_inner = -std::numeric_limits<double>::infinity();
        double K = 0.0;
        double x = 0.0;
        double s0 = diffusion(0.0);
        if (std::abs(s0) < 1e-12)
            throw std::invalid_argument("feller_nonexplosion_1d: diffusion vanishes on probe range");
        double ratio_prev = drift(0.0) / (s0 * s0);
        double inner_term_prev = 0.0 - 2.0 * std::log(std::abs(s0)); // log(c/sigma^2) at 0
        for (int i = 1; i <= n_steps; ++i) {
            double xn = x + hstep;
            double s = diffusion(xn);
            if (std::abs(s) < 1e-12)
                throw std::invalid_argument("feller_nonexplosion_1d: diffusion vanishes on probe range");
            double ratio = drift(xn) / (s * s);
            double log_c = log_c_prev + 2.0 * 0.5 * hstep * (ratio_prev + ratio);
            double inner_term = log_c - 2.0 * std::log(std::abs(s));
            // trapezoid cell of the inner integral, in log space
            double la = inner_term_prev, lb = inner_term;
            double lm = std::max(la, lb);
            double cell = std::log(0.5 * std::abs(hstep)) + lm +
                          std::log(std::exp(la - lm) + std::exp(lb - lm));
            double top = std::max(log_inner, cell);
            log_inner = top + std::log(std::exp(log_inner - top) + std::exp(cell - top));
            K += 2.0 * std::abs(hstep) * std::exp(log_inner - log_c);
            if (K > threshold) return K; // already divergent; no need to continue
            log_c_prev = log_c;
            ratio_prev = ratio;
            inner_term_prev = inner_term;
            x = xn;
        }
        return K;
    };

    FellerReport rep;
    rep.threshold = threshold;
    double left = -1.0, right = 1.0;
    bool left_div = false, right_div = false;
    for (int round = 0; round < 64; ++round) {
        if (!right_div) {
            rep.k_right = k_at(right);
            rep.probed_right = right;
            right_div = rep.k_right > threshold;
        }
        if (!left_div) {
            rep.k_left = k_at(left);
            rep.probed_left = left;
            left_div = rep.k_left > threshold;
        }
        if (left_div && right_div) break;
        bool grew = false;
        if (!right_div && right < probe_range.second) {
            right = std::min(2.0 * right, probe_range.second);
            grew = true;
        }
        if (!left_div && left > probe_range.first) {
            left = std::max(2.0 * left, probe_range.first);
            grew = true;
        }
        if (!grew) break; // probe range exhausted
    }
    rep.verdict = (left_div && right_div) ? FellerVerdict::non_explosive
                                          : FellerVerdict::inconclusive;
    return rep;
}

} // namespace flowecon
