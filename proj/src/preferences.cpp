#include "flowecon/preferences.hpp"

#include <cmath>
#include <stdexcept>

namespace flowecon {

void IsoelasticPreference::validate() const {
    if (!(scale > 0.0)) throw std::invalid_argument("preference: scale must be > 0");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("preference: alpha in (0,1)");
    if (!(beta > 0.0)) throw std::invalid_argument("preference: beta must be > 0");
}

double IsoelasticPreference::wealth_scale() const {
    return scale * std::pow((1.0 - alpha) / beta, 1.0 - alpha);
}

double IsoelasticPreference::u1(double t, double y) const {
    return scale * std::exp(-beta * t) * std::pow(y, alpha);
}

double IsoelasticPreference::u2(double t, double y) const {
    return wealth_scale() * std::exp(-beta * t) * std::pow(y, alpha);
}

double IsoelasticPreference::marginal_u1(double t, double y) const {
    return scale * alpha * std::exp(-beta * t) * std::pow(y, alpha - 1.0);
}

double IsoelasticPreference::marginal_u2(double t, double y) const {
    return wealth_scale() * alpha * std::exp(-beta * t) * std::pow(y, alpha - 1.0);
}

double IsoelasticPreference::inverse_marginal_1(double t, double z) const {
    if (!(z > 0.0)) throw std::invalid_argument("inverse_marginal_1: z must be > 0");
    return std::pow(z * std::exp(beta * t) / (scale * alpha), 1.0 / (alpha - 1.0));
}

double IsoelasticPreference::inverse_marginal_2(double t, double z) const {
    if (!(z > 0.0)) throw std::invalid_argument("inverse_marginal_2: z must be > 0");
    return std::pow(z * std::exp(beta * t) / (wealth_scale() * alpha), 1.0 / (alpha - 1.0));
}

double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
    if (panels < 2 || panels % 2 != 0)
        throw std::invalid_argument("simpson: panels must be even and >= 2");
    const double h = (b - a) / panels;
    double s = f(a) + f(b);
    for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

double IsoelasticPreference::wealth_inverse(double t, double T, double z) const {
    double tail = inverse_marginal_2(T, z);
    double integral = t == T ? 0.0
                             : simpson([&](double s) { return inverse_marginal_1(s, z); },
                                       t, T, 256);
    return tail + integral;
}

DualityReport check_duality(const IsoelasticPreference& pref, int which,
                            double t, double z) {
    if (which != 1 && which != 2) throw std::invalid_argument("check_duality: which in {1,2}");
    auto u = [&](double y) { return which == 1 ? pref.u1(t, y) : pref.u2(t, y); };
    double center = which == 1 ? pref.inverse_marginal_1(t, z) : pref.inverse_marginal_2(t, z);

    DualityReport rep;
    rep.dual = u(center) - z * center;

    // Coarse log-spaced bracket around the analytic candidate, then
    // golden-section refinement of y -> u(y) - z y.
    auto obj = [&](double y) { return u(y) - z * y; };
    const int n_grid = 200;
    double lo = center / 100.0, hi = center * 100.0;
    double best = -1e300, best_y = center;
    for (int i = 0; i <= n_grid; ++i) {
        double y = lo * std::pow(hi / lo, double(i) / n_grid);
        double v = obj(y);
        if (v > best) { best = v; best_y = y; }
    }
    double a = best_y / std::pow(hi / lo, 1.0 / n_grid);
    double b = best_y * std::pow(hi / lo, 1.0 / n_grid);
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = obj(x1), f2 = obj(x2);
    for (int it = 0; it < 200 && (b - a) > 1e-14 * (std::abs(a) + std::abs(b)); ++it) {
        if (f1 < f2) {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + gr * (b - a); f2 = obj(x2);
        } else {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - gr * (b - a); f1 = obj(x1);
        }
    }
    rep.argmax = 0.5 * (a + b);
    rep.primal = obj(rep.argmax);
    rep.residual = std::abs(rep.primal - rep.dual);
    return rep;
}

ConsistencyReport check_time_consistency(const IsoelasticPreference& pref,
                                         double t_lo, double t_hi, double z,
                                         double wealth_scale_factor) {
    if (!(t_lo < t_hi)) throw std::invalid_argument("check_time_consistency: need t_lo < t_hi");
    ConsistencyReport rep;
    double d = pref.wealth_scale() * wealth_scale_factor;
    auto inv2 = [&](double T) {
        return std::pow(z * std::exp(pref.beta * T) / (d * pref.alpha),
                        1.0 / (pref.alpha - 1.0));
    };
    rep.lhs = inv2(t_lo) - inv2(t_hi);
    rep.rhs = simpson([&](double s) { return pref.inverse_marginal_1(s, z); },
                      t_lo, t_hi, 256);
    rep.residual = std::abs(rep.lhs - rep.rhs);
    return rep;
}

} // namespace flowecon
