#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "spcaux/errors.hpp"
#include "spcaux/estimators.hpp"
#include "spcaux/parallel.hpp"
#include "spcaux/process_model.hpp"
#include "spcaux/rng.hpp"

namespace spcaux {

enum class LimitStyle { three_sigma_scaled, probability_quantile };

inline const char* limit_style_name(LimitStyle s) noexcept {
    return s == LimitStyle::three_sigma_scaled ? "three_sigma" : "probability";
}

inline LimitStyle parse_limit_style(const std::string& name) {
    if (name == "three_sigma" || name == "three_sigma_scaled")
        return LimitStyle::three_sigma_scaled;
    if (name == "probability" || name == "probability_quantile")
        return LimitStyle::probability_quantile;
    throw std::invalid_argument("unknown limit style: " + name);
}

/// Chart design: which statistic, subgroup size, limit style, and either the
/// standard-error multiplier (three-sigma style) or the total tail
/// probability (probability style).
struct ChartConfig {
    EstimatorKind kind = EstimatorKind::t0;
    std::size_t n = 5;
    LimitStyle style = LimitStyle::three_sigma_scaled;
    double coefficient = 3.0;
    double target_arl0 = 370.4;

    void validate() const {
        if (n < 2)
            throw std::invalid_argument("ChartConfig: n must be >= 2");
        if (!(coefficient > 0.0))
            throw std::invalid_argument("ChartConfig: coefficient must be > 0");
        if (style == LimitStyle::probability_quantile && !(coefficient < 1.0))
            throw std::invalid_argument(
                "ChartConfig: probability-style coefficient is a tail "
                "probability and must lie in (0, 1)");
        if (!(target_arl0 > 1.0))
            throw std::invalid_argument("ChartConfig: target ARL0 must be > 1");
    }
};

struct ControlLimits {
    double lcl;
    double cl;
    double ucl;

    ControlLimits(double lcl_, double cl_, double ucl_)
        : lcl(lcl_), cl(cl_), ucl(ucl_) {
        if (!(lcl < cl && cl < ucl))
            throw std::invalid_argument(
                "ControlLimits: require lcl < cl < ucl");
    }
};

/// Center-line +- coefficient * (first-order standard error of the statistic).
inline ControlLimits limits_three_sigma(const ChartConfig& config,
                                        const ProcessParameters& params) {
    config.validate();
    if (config.style != LimitStyle::three_sigma_scaled)
        throw std::invalid_argument(
            "limits_three_sigma: config.style must be three_sigma_scaled");
    const double mse = theoretical_mse(config.kind, params, config.n);
    if (!(mse > 0.0))
        throw std::domain_error(
            "limits_three_sigma: first-order MSE is not positive for these "
            "parameters");
    const double half_width = config.coefficient * std::sqrt(mse);
    return {params.mu_y - half_width, params.mu_y, params.mu_y + half_width};
}

namespace detail {

// Type-7 (linear interpolation) quantile of an already sorted sample.
inline double sorted_quantile(std::span<const double> sorted, double p) {
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const std::size_t idx = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(idx);
    if (idx + 1 < sorted.size())
        return sorted[idx] * (1.0 - frac) + sorted[idx + 1] * frac;
    return sorted.back();
}

// Shared by the chart engine and the simulation module: evaluator that draws
// one subgroup from the (possibly shifted) process and returns the charting
// statistic, redrawing the rare subgroup on which the statistic is undefined.
class statistic_sampler {
public:
    statistic_sampler(const ChartConfig& config, const ProcessParameters& params)
        : kind_(config.kind), params_(params),
          weights_(weights_for(params, config.n,
                               WeightSource::quadratic_minimizer)),
          y_(config.n), x_(config.n) {}

    double draw(const ShiftSpec& shift, RngStream& stream) {
        for (int attempt = 0; attempt < max_redraws; ++attempt) {
            sample_observations(params_, shift, stream, y_, x_);
            const SubgroupStats stats =
                subgroup_stats(std::span<const double>(y_),
                               std::span<const double>(x_));
            try {
                return charting_statistic(kind_, stats, params_, weights_);
            } catch (const degenerate_subgroup_error&) {
                ++degenerate_redraws_;
            } catch (const std::domain_error&) {
                ++degenerate_redraws_;
            }
        }
        throw degenerate_subgroup_error(
            "statistic undefined on " + std::to_string(max_redraws) +
            " consecutive subgroups; process parameters are degenerate");
    }

    [[nodiscard]] std::uint64_t degenerate_redraws() const noexcept {
        return degenerate_redraws_;
    }

private:
    static constexpr int max_redraws = 128;
    EstimatorKind kind_;
    ProcessParameters params_;
    EstimatorWeights weights_;
    std::vector<double> y_, x_;
    std::uint64_t degenerate_redraws_ = 0;
};

} // namespace detail

/// Empirical probability limits: simulate m in-control statistic values and
/// place LCL/UCL at the alpha/2 and 1 - alpha/2 quantiles (equal tail split),
/// CL at the median.  Each statistic value owns child stream i of `stream`,
/// so the result does not depend on the worker count.
inline ControlLimits limits_probability(const ChartConfig& config,
                                        const ProcessParameters& params,
                                        std::uint64_t m, RngStream& stream) {
    config.validate();
    if (config.style != LimitStyle::probability_quantile)
        throw std::invalid_argument(
            "limits_probability: config.style must be probability_quantile");
    const double alpha = config.coefficient;
    const std::uint64_t min_m = std::max<std::uint64_t>(
        100000, static_cast<std::uint64_t>(std::ceil(20.0 / alpha)));
    if (m < min_m)
        throw precision_error(
            "limits_probability: m = " + std::to_string(m) +
            " is too small for alpha = " + std::to_string(alpha) +
            "; need m >= " + std::to_string(min_m));

    std::vector<double> values(m);
    parallel_for_blocks(m, [&](std::uint64_t begin, std::uint64_t end,
                               std::size_t) {
        detail::statistic_sampler sampler(config, params);
        for (std::uint64_t i = begin; i < end; ++i) {
            RngStream child = stream.child(i);
            values[i] = sampler.draw(ShiftSpec{}, child);
        }
    });
    std::sort(values.begin(), values.end());
    const std::span<const double> sorted(values);
    return {detail::sorted_quantile(sorted, alpha / 2.0),
            detail::sorted_quantile(sorted, 0.5),
            detail::sorted_quantile(sorted, 1.0 - alpha / 2.0)};
}

/// Flags every statistic outside [lcl, ucl].  Indices are 1-based subgroup
/// numbers; first_signal_after is the first flagged index strictly greater
/// than the declared changepoint.
struct SignalReport {
    std::vector<std::size_t> signal_indices;
    std::optional<std::size_t> first_signal_after;
};

inline SignalReport monitor(std::span<const double> statistics,
                            const ControlLimits& limits,
                            std::optional<std::size_t> changepoint = {}) {
    if (statistics.empty())
        throw std::invalid_argument("monitor: empty statistic sequence");
    SignalReport report;
    for (std::size_t i = 0; i < statistics.size(); ++i) {
        const double v = statistics[i];
        if (v < limits.lcl || v > limits.ucl) {
            const std::size_t subgroup = i + 1;
            report.signal_indices.push_back(subgroup);
            if (changepoint && subgroup > *changepoint &&
                !report.first_signal_after)
                report.first_signal_after = subgroup;
        }
    }
    return report;
}

/// Outcome of calibrating a chart coefficient to a target in-control ARL.
struct CalibrationResult {
    ChartConfig config;
    double achieved_arl = 0.0;
    double arl_se = 0.0;
    std::uint64_t capped_runs = 0;
    std::uint64_t budget = 0;
};

namespace detail {

// One in-control run length at fixed limits; 1-based, capped.
inline std::uint64_t run_length_capped(statistic_sampler& sampler,
                                       const ControlLimits& limits,
                                       const ShiftSpec& shift,
                                       RngStream& stream, std::uint64_t cap) {
    for (std::uint64_t t = 1; t <= cap; ++t) {
        const double v = sampler.draw(shift, stream);
        if (v < limits.lcl || v > limits.ucl)
            return t;
    }
    return cap;
}

struct run_length_sums {
    std::uint64_t reps = 0;
    std::uint64_t capped = 0;
    std::uint64_t degenerate = 0;
    std::uint64_t sum = 0;
    unsigned __int128 sum_sq = 0;

    void merge(const run_length_sums& o) noexcept {
        reps += o.reps;
        capped += o.capped;
        degenerate += o.degenerate;
        sum += o.sum;
        sum_sq += o.sum_sq;
    }

    [[nodiscard]] double mean() const noexcept {
        return static_cast<double>(sum) / static_cast<double>(reps);
    }

    [[nodiscard]] double sd() const noexcept {
        if (reps < 2)
            return 0.0;
        const double m = mean();
        const double ss = static_cast<double>(sum_sq) -
                          m * m * static_cast<double>(reps);
        return std::sqrt(std::max(0.0, ss / static_cast<double>(reps - 1)));
    }
};

// Simulate `reps` independent in-control run lengths; replication r uses
// child stream r, so the totals are exact integers independent of threading.
inline run_length_sums
simulate_run_lengths(const ChartConfig& config, const ControlLimits& limits,
                     const ProcessParameters& params, const ShiftSpec& shift,
                     const RngStream& base, std::uint64_t reps,
                     std::uint64_t cap) {
    std::vector<run_length_sums> partial(effective_workers(reps, 0));
    parallel_for_blocks(
        reps,
        [&](std::uint64_t begin, std::uint64_t end, std::size_t worker) {
            statistic_sampler sampler(config, params);
            run_length_sums local;
            for (std::uint64_t r = begin; r < end; ++r) {
                RngStream stream = base.child(r);
                const std::uint64_t rl =
                    run_length_capped(sampler, limits, shift, stream, cap);
                local.reps += 1;
                local.sum += rl;
                local.sum_sq += static_cast<unsigned __int128>(rl) * rl;
                if (rl == cap)
                    ++local.capped;
            }
            local.degenerate = sampler.degenerate_redraws();
            partial[worker].merge(local);
        },
        partial.size());
    run_length_sums total;
    for (const auto& p : partial)
        total.merge(p);
    return total;
}

} // namespace detail

/// Calibrate the limit coefficient so the simulated in-control ARL hits the
/// target within the tolerance.
///
/// Every probe re-simulates `budget` run lengths from the same child stream
/// (common random numbers), which makes the probe ARL exactly monotone in
/// the coefficient, so the bracketed search is noise-stable.  Probability
/// style charts bisect the tail probability instead of the multiplier.
inline CalibrationResult calibrate(const ChartConfig& config,
                                   const ProcessParameters& params,
                                   std::uint64_t budget, double tolerance,
                                   RngStream& stream,
                                   std::uint64_t run_cap = 10'000'000) {
    config.validate();
    if (!(tolerance > 0.0 && tolerance < 0.5))
        throw std::invalid_argument("calibrate: tolerance must be in (0, 0.5)");
    if (budget < 100000)
        throw precision_error("calibrate: budget must be >= 100000 "
                              "replications per probe, got " +
                              std::to_string(budget));
    const auto needed =
        static_cast<std::uint64_t>(std::ceil(9.0 / (tolerance * tolerance)));
    if (budget < needed)
        throw precision_error(
            "calibrate: budget " + std::to_string(budget) +
            " cannot resolve tolerance " + std::to_string(tolerance) +
            "; need >= " + std::to_string(needed));

    const double target = config.target_arl0;
    const bool probability = config.style == LimitStyle::probability_quantile;
    const RngStream probe_base = stream.child(0);
    RngStream limits_stream = stream.child(1);

    struct probe_result {
        double arl, se;
        std::uint64_t capped;
    };
    auto probe = [&](double coefficient) -> probe_result {
        ChartConfig c = config;
        c.coefficient = coefficient;
        ControlLimits limits =
            probability
                ? limits_probability(c, params,
                                     std::max<std::uint64_t>(budget, 100000),
                                     limits_stream)
                : limits_three_sigma(c, params);
        const auto sums = detail::simulate_run_lengths(
            c, limits, params, ShiftSpec{}, probe_base, budget, run_cap);
        return {sums.mean(), sums.sd() / std::sqrt(static_cast<double>(budget)),
                sums.capped};
    };

    // Monotone transform of the search variable: ARL grows with the
    // three-sigma multiplier and shrinks with the tail probability.
    const double lo_bound = probability ? 1e-6 : 0.5;
    const double hi_bound = probability ? 0.5 : 6.0;
    auto arl_increasing_in = [&](double v) { return probability ? -v : v; };

    // normal-theory starting point: solve 2*Phi(-L) = 1/target by Newton
    const double z = probability ? 1.0 / target : [&] {
        double L = 3.0;
        for (int i = 0; i < 60; ++i) {
            const double f = std::erfc(L / std::sqrt(2.0)) - 1.0 / target;
            const double df =
                -std::sqrt(2.0 / std::numbers::pi) * std::exp(-0.5 * L * L);
            L -= f / df;
        }
        return L;
    }();

    auto clamp_search = [&](double v) {
        return std::clamp(v, lo_bound, hi_bound);
    };

    double lo = clamp_search(probability ? z * 2.0 : z - 0.2);
    double hi = clamp_search(probability ? z * 0.5 : z + 0.2);
    if (arl_increasing_in(lo) > arl_increasing_in(hi))
        std::swap(lo, hi);

    struct evaluated {
        double coeff;
        probe_result r;
    };
    std::optional<evaluated> accepted;
    auto within = [&](const probe_result& r) {
        return std::abs(r.arl - target) <= tolerance * target;
    };
    auto try_probe = [&](double coeff) {
        const probe_result r = probe(coeff);
        if (within(r) && !accepted)
            accepted = evaluated{coeff, r};
        return r;
    };

    probe_result lo_r = try_probe(lo);
    probe_result hi_r = try_probe(hi);

    // expand the bracket until it straddles the target
    const double step = probability ? 4.0 : 0.25;
    while (!accepted && lo_r.arl > target) {
        if ((probability && lo >= hi_bound) || (!probability && lo <= lo_bound))
            throw calibration_range_error(
                "calibrate: no coefficient in the admissible range reaches "
                "ARL0 below " +
                std::to_string(target));
        hi = lo;
        hi_r = lo_r;
        lo = clamp_search(probability ? lo * step : lo - step);
        lo_r = try_probe(lo);
    }
    while (!accepted && hi_r.arl < target) {
        if ((probability && hi <= lo_bound) || (!probability && hi >= hi_bound))
            throw calibration_range_error(
                "calibrate: no coefficient in the admissible range reaches "
                "ARL0 above " +
                std::to_string(target));
        lo = hi;
        lo_r = hi_r;
        hi = clamp_search(probability ? hi / step : hi + step);
        hi_r = try_probe(hi);
    }

    for (int it = 0; it < 200 && !accepted; ++it) {
        // false position on log ARL (ARL is near-exponential in the
        // three-sigma multiplier), guarded towards plain bisection
        double mid;
        const double gl = std::log(std::max(lo_r.arl, 1.0));
        const double gh = std::log(std::max(hi_r.arl, 1.0));
        const double gt = std::log(target);
        if (gh > gl) {
            mid = lo + (hi - lo) * (gt - gl) / (gh - gl);
            const double margin = 0.1 * (hi - lo);
            mid = std::clamp(mid, std::min(lo, hi) + margin,
                             std::max(lo, hi) - margin);
        } else {
            mid = 0.5 * (lo + hi);
        }
        const probe_result mid_r = try_probe(mid);
        if (accepted)
            break;
        if (mid_r.arl < target) {
            lo = mid;
            lo_r = mid_r;
        } else {
            hi = mid;
            hi_r = mid_r;
        }
        if (std::abs(hi - lo) <
            1e-9 * std::max(1.0, std::abs(hi) + std::abs(lo)))
            throw precision_error(
                "calibrate: search interval collapsed before reaching the "
                "tolerance; increase the budget");
    }
    if (!accepted)
        throw precision_error("calibrate: did not reach the tolerance within "
                              "the probe limit; increase the budget");

    CalibrationResult result;
    result.config = config;
    result.config.coefficient = accepted->coeff;
    result.achieved_arl = accepted->r.arl;
    result.arl_se = accepted->r.se;
    result.capped_runs = accepted->r.capped;
    result.budget = budget;
    return result;
}

} // namespace spcaux
