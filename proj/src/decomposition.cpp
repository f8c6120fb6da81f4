#include "flowecon/decomposition.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace flowecon {

namespace {

bool finite(double x) { return std::isfinite(x); }

double dot_checked(const std::vector<double>& a, const std::vector<double>& b,
                   const char* what) {
    if (a.size() != b.size())
        throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                    std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double parse_number(const std::string& field, const std::string& path, int line,
                    const char* col) {
    const char* begin = field.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0' || !std::isfinite(v))
        throw ConfigError(path + " line " + std::to_string(line) + ": bad " + col +
                          " value '" + field + "'");
    return v;
}

}  // namespace

void ObservableInputs::validate() const {
    if (!(sigma_equity > 0.0) || !finite(sigma_equity))
        throw std::invalid_argument("observable inputs: sigma_equity must be positive");
    const double vals[] = {ep_observed,           mu_consumption,
                           sigma_consumption,     impatience,
                           consumption_risk_premium, loading_drift()};
    for (double v : vals)
        if (!finite(v)) throw std::invalid_argument("observable inputs: non-finite rate");
}

double equity_premium(const std::vector<double>& sigma_wealth,
                      const std::vector<double>& sigma_asset) {
    return dot_checked(sigma_wealth, sigma_asset, "equity_premium");
}

PremiumSplit equity_premium_split(const std::vector<double>& sigma_consumption,
                                  const std::vector<double>& sigma_loading,
                                  const std::vector<double>& sigma_asset) {
    PremiumSplit out;
    out.consumption = dot_checked(sigma_consumption, sigma_asset, "equity_premium_split");
    out.impatience = dot_checked(sigma_loading, sigma_asset, "equity_premium_split");
    out.total = out.consumption - out.impatience;
    out.amplified = out.impatience < 0.0;
    return out;
}

Table1Derived table1_row(double sigma, double ep) {
    if (!(sigma > 0.0) || !finite(sigma))
        throw std::invalid_argument("table1_row: sigma must be positive");
    Table1Derived d;
    d.predicted_ep = sigma * sigma;
    d.implied_theta = ep / sigma;
    d.ep_exceeds_predicted = ep > d.predicted_ep;
    return d;
}

double short_rate(double mu_consumption, double mu_loading,
                  double consumption_risk_premium) {
    return (mu_consumption - mu_loading) - consumption_risk_premium;
}

double short_rate_constant_impatience(double mu_consumption, double impatience,
                                      double sigma_consumption_norm) {
    return mu_consumption + impatience -
           sigma_consumption_norm * sigma_consumption_norm;
}

DecompositionReport analyze(const ObservableInputs& in) {
    in.validate();
    DecompositionReport rep;
    rep.proxy = table1_row(in.sigma_equity, in.ep_observed);
    rep.split.consumption = in.sigma_consumption * in.sigma_equity;
    rep.split.total = in.ep_observed;
    rep.split.impatience = rep.split.consumption - rep.split.total;
    rep.split.amplified = rep.split.impatience < 0.0;
    rep.rate_constant_impatience = short_rate_constant_impatience(
        in.mu_consumption, in.impatience, in.sigma_consumption);
    rep.rate_heterogeneous =
        short_rate(in.mu_consumption, in.loading_drift(), in.consumption_risk_premium);
    rep.homogeneous_correction = in.sigma_consumption * in.sigma_consumption;
    return rep;
}

std::string default_table1_path() { return std::string(FLOWECON_DATA_DIR) + "/table1.csv"; }

std::vector<Table1Row> load_table1(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw ConfigError("cannot open table file " + path);

    std::vector<Table1Row> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(file, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1) {
            if (line != "source,period,sigma,ep")
                throw ConfigError(path + " line 1: expected header 'source,period,sigma,ep'");
            continue;
        }
        if (line.empty()) continue;

        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 4)
            throw ConfigError(path + " line " + std::to_string(lineno) +
                              ": expected 4 comma-separated fields, got " +
                              std::to_string(fields.size()));

        Table1Row row;
        row.source = fields[0];
        row.period = fields[1];
        row.sigma = parse_number(fields[2], path, lineno, "sigma");
        row.ep = parse_number(fields[3], path, lineno, "ep");
        if (!(row.sigma > 0.0))
            throw ConfigError(path + " line " + std::to_string(lineno) +
                              ": sigma must be positive");
        rows.push_back(std::move(row));
    }
    return rows;
}

const std::vector<Table1Reference>& table1_reference() {
    static const std::vector<Table1Reference> ref = {
        {0.035, 0.37}, {0.037, 0.36}, {0.027, 0.35},
        {0.035, 0.25}, {0.024, 0.44}, {0.030, 0.26},
    };
    return ref;
}

MarketDecomposition decompose_from_market(const MarketPath& mkt) {
    if (!mkt.coef.available)
        throw std::runtime_error(
            "decompose_from_market: market carries no coefficient estimates "
            "(needs at least 100 unflagged paths)");
    if (!mkt.has_volatility_fields)
        throw std::runtime_error(
            "decompose_from_market: market carries no volatility fields "
            "(income and impatience gradients plus a diffusion are required)");

    const int N = mkt.grid.steps, n = mkt.noise_dim;
    std::vector<int> live;
    for (int p = 0; p < mkt.n_paths; ++p)
        if (!mkt.flagged[p]) live.push_back(p);
    const double P = double(live.size());

    MarketDecomposition out;
    out.n_steps = N;
    out.noise_dim = n;
    out.consumption_premium.assign(N, 0.0);
    out.impatience_premium.assign(N, 0.0);
    out.total_premium.assign(N, 0.0);
    out.total_premium_se.assign(N, 0.0);
    out.short_rate.assign(N, 0.0);
    out.short_rate_se.assign(N, 0.0);

    int pass = 0, total = 0;
    std::vector<double> sc(n), sl(n), th(n), th_se(n);
    for (int j = 0; j < N; ++j) {
        for (int c = 0; c < n; ++c) {
            double mc = 0.0, ml = 0.0, mt = 0.0, mt2 = 0.0;
            for (int p : live) {
                mc += mkt.sigma_income_at(p, j, c) / mkt.income_agg(p, j);
                ml += mkt.sigma_impatience_at(p, j, c) / mkt.loading(p, j);
                const double t = mkt.theta_at(p, j, c);
                mt += t;
                mt2 += t * t;
            }
            sc[c] = mc / P;
            sl[c] = ml / P;
            th[c] = mt / P;
            const double var = P > 1.0 ? std::max(0.0, (mt2 - mt * mt / P) / (P - 1.0)) : 0.0;
            th_se[c] = std::sqrt(var / P);
        }

        double var_total = 0.0;
        for (int c = 0; c < n; ++c) {
            const double sp = mkt.coef.price.diff(j, c);
            const double sp_se = mkt.coef.price.diff_se(j, c);
            out.consumption_premium[j] += sc[c] * sp;
            out.impatience_premium[j] += sl[c] * sp;
            var_total += th[c] * th[c] * sp_se * sp_se + sp * sp * th_se[c] * th_se[c];

            const double est = -mkt.coef.deflator.diff(j, c);
            const double band =
                3.0 * std::sqrt(mkt.coef.deflator.diff_se(j, c) * mkt.coef.deflator.diff_se(j, c) +
                                th_se[c] * th_se[c]) +
                1e-10;
            const double gap = std::abs(est - th[c]);
            out.max_theta_gap = std::max(out.max_theta_gap, gap);
            ++total;
            if (gap <= band) ++pass;
        }
        out.total_premium[j] = out.consumption_premium[j] - out.impatience_premium[j];
        out.total_premium_se[j] = std::sqrt(var_total);
        out.short_rate[j] = -mkt.coef.deflator.drift[j];
        out.short_rate_se[j] = mkt.coef.deflator.drift_se[j];
    }
    out.theta_pass_fraction = total ? double(pass) / total : 0.0;
    out.theta_consistent = out.theta_pass_fraction >= 0.95;
    return out;
}

}  // namespace flowecon
