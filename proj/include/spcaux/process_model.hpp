#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "spcaux/rng.hpp"

namespace spcaux {

/// In-control bivariate normal process: study variable Y, auxiliary variable X.
///
/// Positive means are required because the ratio-type charting statistics
/// divide by the population means; the coefficients of variation cv_y, cv_x
/// feed every first-order MSE formula.
struct ProcessParameters {
    double mu_y;
    double mu_x;
    double sigma_y;
    double sigma_x;
    double rho_xy;

    ProcessParameters(double mu_y_, double mu_x_, double sigma_y_,
                      double sigma_x_, double rho_xy_)
        : mu_y(mu_y_), mu_x(mu_x_), sigma_y(sigma_y_), sigma_x(sigma_x_),
          rho_xy(rho_xy_) {
        if (!(sigma_y > 0.0) || !(sigma_x > 0.0))
            throw std::invalid_argument("ProcessParameters: sigma must be > 0");
        if (!(rho_xy > -1.0 && rho_xy < 1.0))
            throw std::invalid_argument(
                "ProcessParameters: rho_xy must lie strictly inside (-1, 1)");
        if (!(mu_y > 0.0) || !(mu_x > 0.0))
            throw std::invalid_argument(
                "ProcessParameters: means must be > 0 (ratio-type statistics "
                "divide by them)");
    }

    [[nodiscard]] double cv_y() const noexcept { return sigma_y / mu_y; }
    [[nodiscard]] double cv_x() const noexcept { return sigma_x / mu_x; }
};

/// Mean shift in multiples of sigma_y applied per observation to Y.
/// delta = 0 reproduces the in-control process exactly.
struct ShiftSpec {
    double delta = 0.0;

    ShiftSpec() = default;
    explicit ShiftSpec(double delta_) : delta(delta_) {
        if (!(delta >= 0.0))
            throw std::invalid_argument("ShiftSpec: delta must be >= 0");
    }
};

/// One rational subgroup of paired (y, x) observations.
struct Subgroup {
    std::vector<std::pair<double, double>> pairs;

    [[nodiscard]] std::size_t n() const noexcept { return pairs.size(); }
};

/// Draw n iid (y, x) pairs into caller-owned spans (allocation-free hot path).
///
/// X = mu_x + sigma_x * z1 and Y = mu_y + delta*sigma_y
///   + sigma_y * (rho * z1 + sqrt(1 - rho^2) * z2), z1, z2 iid standard
/// normal, so corr(Y, X) = rho_xy and the Y mean carries the shift.
inline void sample_observations(const ProcessParameters& params,
                                const ShiftSpec& shift, RngStream& stream,
                                std::span<double> y, std::span<double> x) {
    const double shifted_mu_y = params.mu_y + shift.delta * params.sigma_y;
    const double cross = params.sigma_y * params.rho_xy;
    const double resid =
        params.sigma_y * std::sqrt(1.0 - params.rho_xy * params.rho_xy);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double z1 = stream.normal();
        const double z2 = stream.normal();
        x[i] = params.mu_x + params.sigma_x * z1;
        y[i] = shifted_mu_y + cross * z1 + resid * z2;
    }
}

/// Draw one rational subgroup of size n from the (possibly shifted) process.
inline Subgroup sample_subgroup(const ProcessParameters& params, std::size_t n,
                                const ShiftSpec& shift, RngStream& stream) {
    if (n < 2)
        throw std::invalid_argument("sample_subgroup: n must be >= 2, got " +
                                    std::to_string(n));
    std::vector<double> y(n), x(n);
    sample_observations(params, shift, stream, y, x);
    Subgroup g;
    g.pairs.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        g.pairs.emplace_back(y[i], x[i]);
    return g;
}

} // namespace spcaux
