#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "spcaux/errors.hpp"
#include "spcaux/process_model.hpp"

namespace spcaux {

/// The four charting statistics.
///   T0 -- subgroup mean of Y alone
///   T1 -- regression estimator using the auxiliary mean
///   T2 -- ratio-product exponential estimator
///   T3 -- difference-cum-exponential estimator
enum class EstimatorKind { t0, t1, t2, t3 };

inline const char* estimator_name(EstimatorKind kind) noexcept {
    switch (kind) {
    case EstimatorKind::t0: return "t0";
    case EstimatorKind::t1: return "t1";
    case EstimatorKind::t2: return "t2";
    case EstimatorKind::t3: return "t3";
    }
    return "?";
}

inline EstimatorKind parse_estimator(std::string name) {
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (name == "t0") return EstimatorKind::t0;
    if (name == "t1") return EstimatorKind::t1;
    if (name == "t2") return EstimatorKind::t2;
    if (name == "t3") return EstimatorKind::t3;
    throw std::invalid_argument("unknown estimator kind: " + name);
}

/// Sample moments of one subgroup.  r_xy is empty when either sample
/// standard deviation is zero (the correlation is then undefined).
struct SubgroupStats {
    double y_bar = 0.0;
    double x_bar = 0.0;
    double s_y = 0.0;
    double s_x = 0.0;
    std::optional<double> r_xy;

    /// Regression slope b = r_xy * (s_y / s_x).  Zero y-variation gives a
    /// zero slope; zero x-variation leaves the slope undefined.
    [[nodiscard]] double regression_slope() const {
        if (s_x == 0.0)
            throw degenerate_subgroup_error(
                "regression slope undefined: zero auxiliary-variable variance");
        if (!r_xy.has_value())
            return 0.0; // s_y == 0, so the covariance is zero as well
        return *r_xy * (s_y / s_x);
    }
};

inline SubgroupStats subgroup_stats(std::span<const double> y,
                                    std::span<const double> x) {
    const std::size_t n = y.size();
    if (n != x.size())
        throw std::invalid_argument("subgroup_stats: y/x length mismatch");
    if (n < 2)
        throw std::invalid_argument("subgroup_stats: need at least 2 pairs");
    double y_sum = 0.0, x_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        y_sum += y[i];
        x_sum += x[i];
    }
    SubgroupStats s;
    s.y_bar = y_sum / static_cast<double>(n);
    s.x_bar = x_sum / static_cast<double>(n);
    double syy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dy = y[i] - s.y_bar;
        const double dx = x[i] - s.x_bar;
        syy += dy * dy;
        sxx += dx * dx;
        sxy += dy * dx;
    }
    const double dof = static_cast<double>(n - 1);
    s.s_y = std::sqrt(syy / dof);
    s.s_x = std::sqrt(sxx / dof);
    if (syy > 0.0 && sxx > 0.0)
        s.r_xy = std::clamp(sxy / std::sqrt(syy * sxx), -1.0, 1.0);
    return s;
}

inline SubgroupStats subgroup_stats(const Subgroup& g) {
    std::vector<double> y(g.n()), x(g.n());
    for (std::size_t i = 0; i < g.n(); ++i) {
        y[i] = g.pairs[i].first;
        x[i] = g.pairs[i].second;
    }
    return subgroup_stats(std::span<const double>(y), std::span<const double>(x));
}

enum class WeightSource { printed_formula, quadratic_minimizer };

/// Mixing weight of the ratio-product statistic (alpha) and the difference
/// weights of the mixed statistic (w1, w2), together with how they were
/// obtained.
struct EstimatorWeights {
    double alpha = 0.5;
    double w1 = 0.0;
    double w2 = 0.0;
    WeightSource source = WeightSource::quadratic_minimizer;
};

/// T0: the plain subgroup mean of the study variable.
inline double t0(const SubgroupStats& stats) noexcept { return stats.y_bar; }

/// T1: regression estimator ybar + b (mu_x - xbar).
inline double t1(const SubgroupStats& stats, const ProcessParameters& params) {
    return stats.y_bar + stats.regression_slope() * (params.mu_x - stats.x_bar);
}

namespace detail {

inline void check_ratio_domain(double x_bar, double mu_x) {
    if (!(x_bar + mu_x > 0.0))
        throw std::domain_error(
            "ratio statistic undefined: x_bar + mu_x must be positive");
}

} // namespace detail

/// T2: ybar * (alpha e^{u} + (1 - alpha) e^{-u}) with
/// u = (mu_x - xbar)/(mu_x + xbar).
inline double t2(const SubgroupStats& stats, const ProcessParameters& params,
                 const EstimatorWeights& weights) {
    detail::check_ratio_domain(stats.x_bar, params.mu_x);
    const double u = (params.mu_x - stats.x_bar) / (params.mu_x + stats.x_bar);
    return stats.y_bar *
           (weights.alpha * std::exp(u) + (1.0 - weights.alpha) * std::exp(-u));
}

/// T3: (t2 + w1 (mu_x - xbar) + w2 ybar) * e^{(xbar - mu_x)/(xbar + mu_x)}.
///
/// The outer factor uses the product-direction exponent: it is the reading
/// under which the published optimum of w1 has the sign it has, and the only
/// one under which this statistic actually improves on T2 (see the weights
/// validation report).
inline double t3(const SubgroupStats& stats, const ProcessParameters& params,
                 const EstimatorWeights& weights) {
    const double base = t2(stats, params, weights);
    const double u = (stats.x_bar - params.mu_x) / (stats.x_bar + params.mu_x);
    return (base + weights.w1 * (params.mu_x - stats.x_bar) +
            weights.w2 * stats.y_bar) *
           std::exp(u);
}

namespace detail {

// Affine form c + a1 w1 + a2 w2 and the quadratic accumulation used by the
// first-order MSE of the T3 family.
struct affine {
    double c, a1, a2;
};

struct quadratic {
    double c = 0, b1 = 0, b2 = 0, q11 = 0, q22 = 0, q12 = 0;

    void add_product(const affine& l, const affine& r, double scale) noexcept {
        c += scale * l.c * r.c;
        b1 += scale * (l.c * r.a1 + l.a1 * r.c);
        b2 += scale * (l.c * r.a2 + l.a2 * r.c);
        q11 += scale * l.a1 * r.a1;
        q22 += scale * l.a2 * r.a2;
        q12 += scale * (l.a1 * r.a2 + l.a2 * r.a1);
    }

    [[nodiscard]] double eval(double w1, double w2) const noexcept {
        return c + b1 * w1 + b2 * w2 + q11 * w1 * w1 + q22 * w2 * w2 +
               q12 * w1 * w2;
    }
};

// First-order MSE of T3 as a quadratic in (w1, w2): expand T3 - mu_y to
// second order in the relative errors e0, e1 of (ybar, xbar), square, and
// keep expectations through O(1/n).  Third joint moments of (e0, e1) vanish
// exactly under bivariate normality.  Coefficient table (product exponent):
//   k0   = Y w2                          constant term
//   ky   = Y (1 + w2)                    e0
//   kx   = Y(1-a) - X w1 + Y w2 / 2      e1
//   kyx  = Y(1-a) + Y w2 / 2             e0 e1
//   kxx  = -X w1 / 2 - Y w2 / 8          e1^2
inline quadratic t3_first_order_mse(const ProcessParameters& params,
                                    std::size_t n, double alpha) {
    const double Y = params.mu_y;
    const double X = params.mu_x;
    const double lambda = 1.0 / static_cast<double>(n);
    const double m_y2 = lambda * params.cv_y() * params.cv_y();
    const double m_x2 = lambda * params.cv_x() * params.cv_x();
    const double m_yx = lambda * params.rho_xy * params.cv_y() * params.cv_x();

    const affine k0{0.0, 0.0, Y};
    const affine ky{Y, 0.0, Y};
    const affine kx{Y * (1.0 - alpha), -X, Y / 2.0};
    const affine kyx{Y * (1.0 - alpha), 0.0, Y / 2.0};
    const affine kxx{0.0, -X / 2.0, -Y / 8.0};

    quadratic q;
    q.add_product(k0, k0, 1.0);
    q.add_product(ky, ky, m_y2);
    q.add_product(kx, kx, m_x2);
    q.add_product(ky, kx, 2.0 * m_yx);
    q.add_product(k0, kyx, 2.0 * m_yx);
    q.add_product(k0, kxx, 2.0 * m_x2);
    return q;
}

} // namespace detail

/// Optimal mixing weight of the ratio-product statistic: 1/2 + rho cv_y/cv_x.
inline double optimal_alpha(const ProcessParameters& params) {
    return 0.5 + params.rho_xy * params.cv_y() / params.cv_x();
}

/// First-order MSE of the T3 statistic at the given difference weights
/// (the objective the quadratic-minimizer weights minimise).
inline double first_order_mse_t3(const ProcessParameters& params, std::size_t n,
                                 double w1, double w2) {
    if (n < 2)
        throw std::invalid_argument("first_order_mse_t3: n must be >= 2");
    return detail::t3_first_order_mse(params, n, optimal_alpha(params))
        .eval(w1, w2);
}

/// Compute estimator weights for the given process and subgroup size.
///
/// printed_formula evaluates the closed-form optima exactly as published
/// (with one documented parenthesis repair); quadratic_minimizer solves the
/// 2x2 normal equations of the first-order MSE, which is the default used by
/// the chart engine.  The two disagree for w1 -- the validation report
/// compares them empirically.
inline EstimatorWeights weights_for(const ProcessParameters& params,
                                    std::size_t n, WeightSource source) {
    if (n < 2)
        throw std::invalid_argument("weights_for: n must be >= 2");
    EstimatorWeights w;
    w.alpha = optimal_alpha(params);
    w.source = source;
    const double lambda = 1.0 / static_cast<double>(n);
    const double cy = params.cv_y();
    const double cx = params.cv_x();
    const double rho = params.rho_xy;

    if (source == WeightSource::printed_formula) {
        const double denom_core = -1.0 + lambda * (-1.0 + rho * rho) * cy * cy;
        const double den = 4.0 * params.mu_x * cx * denom_core;
        w.w1 = params.mu_y *
               (-4.0 * rho * cy +
                cx * (2.0 - lambda * cx * cx + lambda * rho * cy * cx +
                      2.0 * lambda * (-1.0 + rho * rho) * cy * cy)) /
               den;
        w.w2 = lambda * (cx * cx - 4.0 * (-1.0 + rho * rho) * cy * cy) / den;
        return w;
    }

    const auto q = detail::t3_first_order_mse(params, n, w.alpha);
    // normal equations: [2 q11, q12; q12, 2 q22] (w1, w2)' = -(b1, b2)'
    const double h11 = 2.0 * q.q11;
    const double h22 = 2.0 * q.q22;
    const double h12 = q.q12;
    const double det = h11 * h22 - h12 * h12;
    const double scale = std::max(std::abs(h11), std::abs(h22));
    if (!(std::abs(det) > 1e-12 * scale * scale))
        throw near_singularity_error(
            "weight normal equations are numerically singular (rho^2 too "
            "close to 1)");
    w.w1 = (-q.b1 * h22 + q.b2 * h12) / det;
    w.w2 = (-q.b2 * h11 + q.b1 * h12) / det;
    return w;
}

/// First-order theoretical MSE of a charting statistic.
///   T0      -> sigma_y^2 / n
///   T1, T2  -> (1 - rho^2) sigma_y^2 / n  (identical at first order)
///   T3      -> published minimum-MSE expression
inline double theoretical_mse(EstimatorKind kind,
                              const ProcessParameters& params, std::size_t n) {
    if (n < 2)
        throw std::invalid_argument("theoretical_mse: n must be >= 2");
    const double lambda = 1.0 / static_cast<double>(n);
    const double y2 = params.mu_y * params.mu_y;
    const double cy2 = params.cv_y() * params.cv_y();
    const double cx2 = params.cv_x() * params.cv_x();
    const double rho2 = params.rho_xy * params.rho_xy;
    switch (kind) {
    case EstimatorKind::t0:
        return lambda * y2 * cy2;
    case EstimatorKind::t1:
    case EstimatorKind::t2:
        return lambda * y2 * (1.0 - rho2) * cy2;
    case EstimatorKind::t3:
        return lambda * y2 *
               (lambda * cx2 * cx2 -
                8.0 * ((-1.0 + rho2) * (-2.0 + lambda * cx2) * cy2)) /
               (16.0 * (-1.0 + lambda * (-1.0 + rho2) * cy2));
    }
    throw std::logic_error("theoretical_mse: unreachable");
}

/// The two nonnegative gain terms of the published MSE decomposition
/// MSE(T3) ~ MSE(T1) - (gain_a + gain_b).  The published numerators carry a
/// stray first power of the mean where dimensional analysis requires its
/// square; implemented with the square.
inline double mse_gain_a(const ProcessParameters& params, std::size_t n) {
    const double lambda = 1.0 / static_cast<double>(n);
    const double cy2 = params.cv_y() * params.cv_y();
    const double cx2 = params.cv_x() * params.cv_x();
    const double v = (1.0 - params.rho_xy * params.rho_xy) * cy2;
    const double num = cx2 + 8.0 * v;
    return lambda * lambda * params.mu_y * params.mu_y * num * num /
           (64.0 * (1.0 + lambda * v));
}

inline double mse_gain_b(const ProcessParameters& params, std::size_t n) {
    const double lambda = 1.0 / static_cast<double>(n);
    const double cy2 = params.cv_y() * params.cv_y();
    const double cx2 = params.cv_x() * params.cv_x();
    const double v = (1.0 - params.rho_xy * params.rho_xy) * cy2;
    const double num = 3.0 * cx2 + 16.0 * v;
    return lambda * lambda * params.mu_y * params.mu_y * cx2 * num * num /
           (64.0 * (1.0 + lambda * v));
}

/// Evaluate the charting statistic selected by kind.
inline double charting_statistic(EstimatorKind kind, const SubgroupStats& stats,
                                 const ProcessParameters& params,
                                 const EstimatorWeights& weights) {
    switch (kind) {
    case EstimatorKind::t0: return t0(stats);
    case EstimatorKind::t1: return t1(stats, params);
    case EstimatorKind::t2: return t2(stats, params, weights);
    case EstimatorKind::t3: return t3(stats, params, weights);
    }
    throw std::logic_error("charting_statistic: unreachable");
}

} // namespace spcaux
