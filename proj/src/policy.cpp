#include "flowecon/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flowecon {

namespace {

void check_inputs(const PolicyInputs& in) {
    if (!in.ensemble || !in.deflator || !in.kappa)
        throw std::invalid_argument("policy: ensemble, deflator and kappa are required");
    const Ensemble& ens = *in.ensemble;
    const int points = ens.grid.points();
    if (in.deflator->n_paths != ens.n_paths || in.deflator->n_points != points)
        throw std::invalid_argument("policy: deflator shape does not match ensemble");
    if (in.kappa->n_paths != ens.n_paths || in.kappa->n_points != points)
        throw std::invalid_argument("policy: kappa shape does not match ensemble");
    if (static_cast<int>(in.initial_net_wealth.size()) != ens.n_types)
        throw std::invalid_argument("policy: need one initial net wealth per type");
    if (in.endowment_hedge && !in.endowment_hedge->empty()) {
        const TypeSeries& h = *in.endowment_hedge;
        if (h.n_paths != ens.n_paths || h.n_types != ens.n_types || h.n_points != points)
            throw std::invalid_argument("policy: endowment hedge shape mismatch");
    }
    for (int p = 0; p < ens.n_paths; ++p)
        for (int j = 0; j < points; ++j)
            if (!((*in.deflator)(p, j) > 0.0))
                throw std::invalid_argument("policy: deflator must stay strictly positive");
}

PolicyPath make_empty(const PolicyInputs& in) {
    const Ensemble& ens = *in.ensemble;
    PolicyPath out;
    out.grid = ens.grid;
    out.net_wealth = TypeSeries(ens.n_paths, ens.n_types, ens.grid.points());
    out.consumption = TypeSeries(ens.n_paths, ens.n_types, ens.grid.points());
    out.portfolio = TypeSeries(ens.n_paths, ens.n_types, ens.grid.points());
    return out;
}

double hedge_at(const PolicyInputs& in, int p, int k, int j) {
    if (!in.endowment_hedge || in.endowment_hedge->empty()) return 0.0;
    return (*in.endowment_hedge)(p, k, j);
}

}  // namespace

PolicyPath fixed_gamma_policy(const PolicyInputs& in,
                              const std::vector<double>& gamma_per_type) {
    check_inputs(in);
    const Ensemble& ens = *in.ensemble;
    if (static_cast<int>(gamma_per_type.size()) != ens.n_types)
        throw std::invalid_argument("policy: need one impatience rate per type");
    PolicyPath out = make_empty(in);
    const int points = ens.grid.points();
    for (int p = 0; p < ens.n_paths; ++p) {
        const double h0 = (*in.deflator)(p, 0);
        for (int k = 0; k < ens.n_types; ++k) {
            const double y = in.initial_net_wealth[k];
            const double g = gamma_per_type[k];
            for (int j = 0; j < points; ++j) {
                const double elapsed = ens.grid.time(j) - ens.grid.t0;
                const double net =
                    y * std::exp(-g * elapsed) * (h0 / (*in.deflator)(p, j));
                out.net_wealth(p, k, j) = net;
                out.consumption(p, k, j) = g * net;
                out.portfolio(p, k, j) =
                    net * (*in.kappa)(p, j) - hedge_at(in, p, k, j);
            }
        }
    }
    return out;
}

PolicyPath rolling_policy(const PolicyInputs& in, const ScalarField& gamma,
                          const std::vector<int>& partition) {
    check_inputs(in);
    const Ensemble& ens = *in.ensemble;
    if (partition.size() < 2 || partition.front() != 0 ||
        partition.back() != ens.grid.steps)
        throw std::invalid_argument("policy: partition must run from 0 to the last grid index");
    for (std::size_t i = 1; i < partition.size(); ++i)
        if (partition[i] <= partition[i - 1])
            throw std::invalid_argument("policy: partition indices must be strictly increasing");

    PolicyPath out = make_empty(in);
    for (int p = 0; p < ens.n_paths; ++p) {
        const double h0 = (*in.deflator)(p, 0);
        for (int k = 0; k < ens.n_types; ++k) {
            const double y = in.initial_net_wealth[k];
            // Discount accumulated over completed cells, in stored order.
            double log_disc = 0.0;
            for (std::size_t cell = 0; cell + 1 < partition.size(); ++cell) {
                const int lo = partition[cell];
                const int hi = partition[cell + 1];
                const double t_lo = ens.grid.time(lo);
                const double g = gamma(ens.state(p, k, lo));
                for (int j = lo; j <= hi; ++j) {
                    const double local = g * (ens.grid.time(j) - t_lo);
                    const double net = y * std::exp(-(log_disc + local)) *
                                       (h0 / (*in.deflator)(p, j));
                    out.net_wealth(p, k, j) = net;
                    out.consumption(p, k, j) = g * net;
                    out.portfolio(p, k, j) =
                        net * (*in.kappa)(p, j) - hedge_at(in, p, k, j);
                }
                log_disc += g * (ens.grid.time(hi) - t_lo);
            }
        }
    }
    return out;
}

PolicyPath limit_policy(const PolicyInputs& in, const ScalarField& gamma) {
    check_inputs(in);
    const Ensemble& ens = *in.ensemble;
    const int points = ens.grid.points();
    const std::vector<double> gamma_int = pathwise_integral(ens, gamma);
    PolicyPath out = make_empty(in);
    for (int p = 0; p < ens.n_paths; ++p) {
        const double h0 = (*in.deflator)(p, 0);
        for (int k = 0; k < ens.n_types; ++k) {
            const double y = in.initial_net_wealth[k];
            const std::size_t base = (std::size_t(p) * ens.n_types + k) * points;
            for (int j = 0; j < points; ++j) {
                const double net = y * std::exp(-gamma_int[base + j]) *
                                   (h0 / (*in.deflator)(p, j));
                out.net_wealth(p, k, j) = net;
                out.consumption(p, k, j) = gamma(ens.state(p, k, j)) * net;
                out.portfolio(p, k, j) =
                    net * (*in.kappa)(p, j) - hedge_at(in, p, k, j);
            }
        }
    }
    return out;
}

PolicyGap policy_gap(const PolicyPath& a, const PolicyPath& b) {
    if (a.net_wealth.v.size() != b.net_wealth.v.size())
        throw std::invalid_argument("policy_gap: shape mismatch");
    PolicyGap gap;
    for (std::size_t i = 0; i < a.net_wealth.v.size(); ++i) {
        gap.net_wealth =
            std::max(gap.net_wealth, std::abs(a.net_wealth.v[i] - b.net_wealth.v[i]));
        gap.consumption = std::max(
            gap.consumption, std::abs(a.consumption.v[i] - b.consumption.v[i]));
    }
    return gap;
}

}  // namespace flowecon
