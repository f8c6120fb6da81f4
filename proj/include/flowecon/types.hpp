#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowecon {

// Row-major matrix view helpers are avoided on purpose: state dimensions are
// tiny (d, n <= 4 in every shipped scenario) so flat std::vector<double>
// buffers plus explicit strides keep the hot loops allocation-free.

using Scalar = double;

/// Scalar field on the type space, with an optional analytic gradient.
/// The gradient is required only by volatility diagnostics; constructors of
/// scenarios that need it must populate it.
struct ScalarField {
    std::function<double(std::span<const double>)> value;
    std::function<void(std::span<const double>, std::span<double>)> gradient;

    bool has_gradient() const { return static_cast<bool>(gradient); }
    double operator()(std::span<const double> x) const { return value(x); }
};

inline ScalarField constant_field(double c) {
    ScalarField f;
    f.value = [c](std::span<const double>) { return c; };
    f.gradient = [](std::span<const double> x, std::span<double> g) {
        for (std::size_t i = 0; i < x.size(); ++i) g[i] = 0.0;
    };
    return f;
}

/// 1-d convenience: wrap double(double) callables.
inline ScalarField field_1d(std::function<double(double)> v,
                            std::function<double(double)> dv = nullptr) {
    ScalarField f;
    f.value = [v](std::span<const double> x) { return v(x[0]); };
    if (dv)
        f.gradient = [dv](std::span<const double> x, std::span<double> g) {
            g[0] = dv(x[0]);
        };
    return f;
}

/// Flat (path, type, grid point) array of doubles.
struct TypeSeries {
    int n_paths = 0;
    int n_types = 0;
    int n_points = 0;
    std::vector<double> v;

    TypeSeries() = default;
    TypeSeries(int p, int k, int j) : n_paths(p), n_types(k), n_points(j) {
        v.assign(std::size_t(p) * k * j, 0.0);
    }
    double operator()(int p, int k, int j) const {
        return v[(std::size_t(p) * n_types + k) * n_points + j];
    }
    double& operator()(int p, int k, int j) {
        return v[(std::size_t(p) * n_types + k) * n_points + j];
    }
    bool empty() const { return v.empty(); }
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace flowecon
