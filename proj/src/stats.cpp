#include "flowecon/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace flowecon {

StatTestReport martingale_test(std::span<const double> increments,
                               int n_paths, int n_steps,
                               double confidence, double required_fraction,
                               const std::string& name) {
    if (n_paths < 100)
        throw std::invalid_argument("martingale_test: need at least 100 paths");
    if (increments.size() != std::size_t(n_paths) * n_steps)
        throw std::invalid_argument("martingale_test: buffer size mismatch");

    StatTestReport rep;
    rep.name = name;
    rep.required_fraction = required_fraction;
    rep.mean.resize(n_steps);
    rep.se.resize(n_steps);
    rep.step_pass.resize(n_steps);

    int passed = 0;
    for (int j = 0; j < n_steps; ++j) {
        double m = 0.0, scale = 0.0;
        for (int p = 0; p < n_paths; ++p) {
            double v = increments[std::size_t(p) * n_steps + j];
            m += v;
            scale = std::max(scale, std::abs(v));
        }
        m /= n_paths;
        double s2 = 0.0;
        for (int p = 0; p < n_paths; ++p) {
            double d = increments[std::size_t(p) * n_steps + j] - m;
            s2 += d * d;
        }
        s2 /= (n_paths - 1);
        double se = std::sqrt(s2 / n_paths);
        rep.mean[j] = m;
        rep.se[j] = se;
        // Absolute floor handles degenerate steps where every path carries the
        // same value up to rounding.
        bool ok = std::abs(m) <= confidence * se + 1e-12 * std::max(scale, 1e-300);
        rep.step_pass[j] = ok ? 1 : 0;
        passed += ok;
    }
    rep.pass_fraction = n_steps > 0 ? double(passed) / n_steps : 1.0;
    rep.pass = rep.pass_fraction >= required_fraction;
    return rep;
}

ConvergenceFit convergence_order(std::span<const double> mesh,
                                 std::span<const double> error) {
    if (mesh.size() != error.size() || mesh.size() < 2)
        throw std::invalid_argument("convergence_order: need matching arrays, >= 2 points");
    const int n = int(mesh.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        if (!(mesh[i] > 0.0) || !(error[i] > 0.0))
            throw std::invalid_argument("convergence_order: mesh and error must be positive");
        double x = std::log(mesh[i]), y = std::log(error[i]);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    double denom = n * sxx - sx * sx;
    ConvergenceFit fit;
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    double ss = 0.0;
    for (int i = 0; i < n; ++i) {
        double r = std::log(error[i]) - fit.intercept - fit.slope * std::log(mesh[i]);
        ss += r * r;
    }
    if (n > 2) fit.slope_se = std::sqrt(ss / (n - 2) * n / denom);
    return fit;
}

double kahan_sum(std::span<const double> xs) {
    double s = 0.0, c = 0.0;
    for (double x : xs) {
        double y = x - c;
        double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    return s;
}

double brute_force_aggregate(std::span<const double> weights,
                             std::span<const double> field_values,
                             std::span<const double> growth_integrals) {
    if (weights.size() != field_values.size() || weights.size() != growth_integrals.size())
        throw std::invalid_argument("brute_force_aggregate: size mismatch");
    double s = 0.0, c = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        double x = weights[i] * std::exp(growth_integrals[i]) * field_values[i];
        double y = x - c;
        double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    return s;
}

OlsFit ols(std::span<const double> y, std::span<const double> X, int n, int k) {
    const int m = k + 1; // intercept + k slopes
    if (int(y.size()) != n || int(X.size()) != n * k)
        throw std::invalid_argument("ols: buffer size mismatch");
    if (n <= m)
        throw std::invalid_argument("ols: not enough rows");

    // Normal equations on the augmented design [1 | X].
    std::vector<double> xtx(std::size_t(m) * m, 0.0), xty(m, 0.0);
    std::vector<double> row(m);
    for (int i = 0; i < n; ++i) {
        row[0] = 1.0;
        for (int j = 0; j < k; ++j) row[j + 1] = X[std::size_t(i) * k + j];
        for (int a = 0; a < m; ++a) {
            xty[a] += row[a] * y[i];
            for (int b = 0; b < m; ++b) xtx[std::size_t(a) * m + b] += row[a] * row[b];
        }
    }

    // Invert xtx by Gauss-Jordan with partial pivoting (m <= 5 in practice).
    std::vector<double> inv(std::size_t(m) * m, 0.0);
    for (int i = 0; i < m; ++i) inv[std::size_t(i) * m + i] = 1.0;
    std::vector<double> a = xtx;
    for (int col = 0; col < m; ++col) {
        int piv = col;
        for (int r = col + 1; r < m; ++r)
            if (std::abs(a[std::size_t(r) * m + col]) > std::abs(a[std::size_t(piv) * m + col]))
                piv = r;
        if (std::abs(a[std::size_t(piv) * m + col]) < 1e-300)
            throw std::runtime_error("ols: singular design");
        if (piv != col)
            for (int c = 0; c < m; ++c) {
                std::swap(a[std::size_t(piv) * m + c], a[std::size_t(col) * m + c]);
                std::swap(inv[std::size_t(piv) * m + c], inv[std::size_t(col) * m + c]);
            }
        double d = a[std::size_t(col) * m + col];
        for (int c = 0; c < m; ++c) {
            a[std::size_t(col) * m + c] /= d;
            inv[std::size_t(col) * m + c] /= d;
        }
        for (int r = 0; r < m; ++r) {
            if (r == col) continue;
            double f = a[std::size_t(r) * m + col];
            if (f == 0.0) continue;
            for (int c = 0; c < m; ++c) {
                a[std::size_t(r) * m + c] -= f * a[std::size_t(col) * m + c];
                inv[std::size_t(r) * m + c] -= f * inv[std::size_t(col) * m + c];
            }
        }
    }

    OlsFit fit;
    fit.n = n;
    fit.coef.assign(m, 0.0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) fit.coef[i] += inv[std::size_t(i) * m + j] * xty[j];

    double ss = 0.0;
    std::vector<double> meat(std::size_t(m) * m, 0.0);
    for (int i = 0; i < n; ++i) {
        row[0] = 1.0;
        for (int j = 0; j < k; ++j) row[j + 1] = X[std::size_t(i) * k + j];
        double pred = 0.0;
        for (int j = 0; j < m; ++j) pred += fit.coef[j] * row[j];
        double r = y[i] - pred;
        ss += r * r;
        for (int a2 = 0; a2 < m; ++a2)
            for (int b2 = 0; b2 < m; ++b2)
                meat[std::size_t(a2) * m + b2] += r * r * row[a2] * row[b2];
    }
    fit.resid_variance = ss / (n - m);
    fit.se.assign(m, 0.0);
    for (int i = 0; i < m; ++i)
        fit.se[i] = std::sqrt(std::max(0.0, fit.resid_variance * inv[std::size_t(i) * m + i]));

    // HC1 sandwich: inv (sum e^2 x x') inv, scaled by n/(n-m).
    fit.robust_se.assign(m, 0.0);
    const double dof = double(n) / double(n - m);
    for (int i = 0; i < m; ++i) {
        double v = 0.0;
        for (int a2 = 0; a2 < m; ++a2)
            for (int b2 = 0; b2 < m; ++b2)
                v += inv[std::size_t(i) * m + a2] * meat[std::size_t(a2) * m + b2] *
                     inv[std::size_t(b2) * m + i];
        fit.robust_se[i] = std::sqrt(std::max(0.0, v * dof));
    }
    return fit;
}

void symmetric_eigen(std::vector<double>& a, int n,
                     std::vector<double>& values, std::vector<double>& vecs) {
    vecs.assign(std::size_t(n) * n, 0.0);
    for (int i = 0; i < n; ++i) vecs[std::size_t(i) * n + i] = 1.0;
    auto A = [&](int i, int j) -> double& { return a[std::size_t(i) * n + j]; };
    auto V = [&](int i, int j) -> double& { return vecs[std::size_t(i) * n + j]; };

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += A(i, j) * A(i, j);
        if (off < 1e-30) break;
        for (int p = 0; p < n - 1; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(A(p, q)) < 1e-300) continue;
                double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (int i = 0; i < n; ++i) {
                    double aip = A(i, p), aiq = A(i, q);
                    A(i, p) = c * aip - s * aiq;
                    A(i, q) = s * aip + c * aiq;
                }
                for (int j = 0; j < n; ++j) {
                    double apj = A(p, j), aqj = A(q, j);
                    A(p, j) = c * apj - s * aqj;
                    A(q, j) = s * apj + c * aqj;
                }
                for (int i = 0; i < n; ++i) {
                    double vip = V(i, p), viq = V(i, q);
                    V(i, p) = c * vip - s * viq;
                    V(i, q) = s * vip + c * viq;
                }
            }
    }
    values.resize(n);
    for (int i = 0; i < n; ++i) values[i] = A(i, i);
    // Sort ascending, permuting eigenvector columns alongside.
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int i, int j) { return values[i] < values[j]; });
    std::vector<double> sv(n), svecs(std::size_t(n) * n);
    for (int c = 0; c < n; ++c) {
        sv[c] = values[idx[c]];
        for (int r = 0; r < n; ++r) svecs[std::size_t(r) * n + c] = V(r, idx[c]);
    }
    values = std::move(sv);
    vecs = std::move(svecs);
}

double mean_of(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / double(xs.size());
}

double stddev_of(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    double m = mean_of(xs), s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / double(xs.size() - 1));
}

} // namespace flowecon
