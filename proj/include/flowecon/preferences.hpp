#pragma once

#include <functional>

namespace flowecon {

/// Running/terminal utility pair
///   U1(t, y) = scale * e^{-beta t} y^alpha,
///   U2(t, y) = wealth_scale * e^{-beta t} y^alpha,
/// with the terminal scale tied to the running one so that consuming at the
/// effective impatience rate gamma = beta / (1 - alpha) is optimal.
struct IsoelasticPreference {
    double scale = 1.0;  // c
    double alpha = 0.5;  // in (0, 1)
    double beta = 0.05;  // > 0

    double wealth_scale() const;          // d = c ((1 - alpha) / beta)^{1 - alpha}
    double gamma() const { return beta / (1.0 - alpha); }

    double u1(double t, double y) const;
    double u2(double t, double y) const;
    double marginal_u1(double t, double y) const;
    double marginal_u2(double t, double y) const;
    double inverse_marginal_1(double t, double z) const;
    double inverse_marginal_2(double t, double z) const;

    /// chi(t, T, z) = I2(T, z) + int_t^T I1(s, z) ds (composite Simpson,
    /// 256 panels).  Independent of T when the pair is consistent.
    double wealth_inverse(double t, double T, double z) const;

    void validate() const; // throws std::invalid_argument on bad parameters
};

struct DualityReport {
    double primal = 0.0;   // grid-refined max_y (U(t,y) - y z)
    double dual = 0.0;     // U(t, I(t,z)) - z I(t,z)
    double residual = 0.0; // |primal - dual|
    double argmax = 0.0;
};

/// Legendre-duality check for U1 (which = 1) or U2 (which = 2): maximizes
/// U(t, y) - y z over a log-spaced grid around the inverse marginal, refines
/// by golden-section, and compares with the closed-form dual value.
DualityReport check_duality(const IsoelasticPreference& pref, int which,
                            double t, double z);

struct ConsistencyReport {
    double lhs = 0.0;      // I2(T', z) - I2(T, z)
    double rhs = 0.0;      // int_{T'}^{T} I1(s, z) ds
    double residual = 0.0;
};

/// Terminal-vs-running consistency: I2(T', z) - I2(T, z) = int_{T'}^{T} I1(s, z) ds.
/// `wealth_scale_factor` perturbs the terminal scale d (1 = consistent pair);
/// the residual quantifies how far the perturbed pair is from consistency.
ConsistencyReport check_time_consistency(const IsoelasticPreference& pref,
                                         double t_lo, double t_hi, double z,
                                         double wealth_scale_factor = 1.0);

/// Composite Simpson on [a, b] with an even number of panels.
double simpson(const std::function<double(double)>& f, double a, double b, int panels);

} // namespace flowecon
