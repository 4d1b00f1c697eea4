#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "spcaux/chart_engine.hpp"
#include "spcaux/estimators.hpp"
#include "spcaux/process_model.hpp"

namespace spcaux {

/// Strictly increasing shift magnitudes starting at 0 (the in-control point).
struct ShiftGrid {
    std::vector<double> deltas;

    explicit ShiftGrid(std::vector<double> deltas_) : deltas(std::move(deltas_)) {
        if (deltas.empty() || deltas.front() != 0.0)
            throw std::invalid_argument("ShiftGrid: deltas must start at 0");
        for (std::size_t i = 1; i < deltas.size(); ++i)
            if (!(deltas[i] > deltas[i - 1]))
                throw std::invalid_argument(
                    "ShiftGrid: deltas must be strictly increasing");
    }

    /// Default evaluation grid used when an experiment does not name one.
    static ShiftGrid standard() {
        return ShiftGrid({0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0});
    }
};

/// Run-length summary at one shift.
struct ArlPoint {
    double delta = 0.0;
    double arl = 0.0;
    double sdrl = 0.0;
    double se = 0.0;
    std::uint64_t reps = 0;
    std::uint64_t capped = 0;
    std::uint64_t degenerate_redraws = 0;
};

struct ArlProfile {
    std::vector<ArlPoint> points;
};

/// One run length: draw subgroups under the shifted process until the
/// statistic exits [lcl, ucl]; returns the 1-based index of the first exit,
/// or cap when no exit occurred by then.
inline std::uint64_t run_length(const ChartConfig& config,
                                const ControlLimits& limits,
                                const ProcessParameters& params,
                                const ShiftSpec& shift, RngStream& stream,
                                std::uint64_t cap = 10'000'000) {
    config.validate();
    detail::statistic_sampler sampler(config, params);
    return detail::run_length_capped(sampler, limits, shift, stream, cap);
}

/// Mean, SD and standard error of `reps` independent run lengths.
/// Replication r owns child stream r of the seed's root stream, so the
/// result is bit-identical for any worker count.  Capped runs enter the
/// mean at the cap value and are counted.
inline ArlPoint arl(const ChartConfig& config, const ControlLimits& limits,
                    const ProcessParameters& params, const ShiftSpec& shift,
                    std::uint64_t reps, std::uint64_t seed,
                    std::uint64_t cap = 10'000'000) {
    config.validate();
    if (reps < 10000)
        throw std::invalid_argument("arl: need at least 10^4 replications");
    const RngStream base(seed);
    const auto sums = detail::simulate_run_lengths(config, limits, params,
                                                   shift, base, reps, cap);
    ArlPoint p;
    p.delta = shift.delta;
    p.arl = sums.mean();
    p.sdrl = sums.sd();
    p.se = p.sdrl / std::sqrt(static_cast<double>(reps));
    p.reps = reps;
    p.capped = sums.capped;
    p.degenerate_redraws = sums.degenerate;
    return p;
}

/// One arl() entry per grid shift, with fixed (in-control) limits.
/// Shift index d uses child d of the seed's root stream.
inline ArlProfile arl_curve(const ChartConfig& config,
                            const ControlLimits& limits,
                            const ProcessParameters& params,
                            const ShiftGrid& grid, std::uint64_t reps,
                            std::uint64_t seed, std::uint64_t cap = 10'000'000) {
    config.validate();
    if (reps < 10000)
        throw std::invalid_argument("arl_curve: need at least 10^4 replications");
    const RngStream root(seed);
    ArlProfile profile;
    profile.points.reserve(grid.deltas.size());
    for (std::size_t d = 0; d < grid.deltas.size(); ++d) {
        const RngStream base = root.child(d);
        const auto sums = detail::simulate_run_lengths(
            config, limits, params, ShiftSpec(grid.deltas[d]), base, reps, cap);
        ArlPoint p;
        p.delta = grid.deltas[d];
        p.arl = sums.mean();
        p.sdrl = sums.sd();
        p.se = p.sdrl / std::sqrt(static_cast<double>(reps));
        p.reps = reps;
        p.capped = sums.capped;
        p.degenerate_redraws = sums.degenerate;
        profile.points.push_back(p);
    }
    return profile;
}

/// Shift-weighted loss and comparison indices of a chart against a benchmark.
struct PerformanceSummary {
    double eql = 0.0;
    double rarl = 0.0;
    double pci = 0.0;
    EstimatorKind benchmark = EstimatorKind::t0;
};

namespace detail {

// trapezoid mean of (delta, value) samples over the positive shifts
inline double
trapezoid_mean(const std::vector<std::pair<double, double>>& xy) {
    double integral = 0.0;
    for (std::size_t i = 1; i < xy.size(); ++i)
        integral += 0.5 * (xy[i].second + xy[i - 1].second) *
                    (xy[i].first - xy[i - 1].first);
    return integral / (xy.back().first - xy.front().first);
}

} // namespace detail

/// EQL, RARL and PCI for each chart profile against the benchmark chart.
///
/// EQL  = mean of delta^2 * ARL(delta) over the positive shifts (trapezoid),
/// RARL = mean of ARL(delta)/ARL_bench(delta),
/// PCI  = EQL / EQL_bench.
inline std::map<EstimatorKind, PerformanceSummary>
performance_summary(const std::map<EstimatorKind, ArlProfile>& profiles,
                    const ShiftGrid& grid, EstimatorKind benchmark) {
    if (!profiles.contains(benchmark))
        throw std::invalid_argument(
            "performance_summary: benchmark profile missing");
    std::size_t positive = 0;
    for (double d : grid.deltas)
        if (d > 0.0)
            ++positive;
    if (positive < 3)
        throw std::invalid_argument(
            "performance_summary: grid needs at least 3 positive shifts");
    for (const auto& [kind, profile] : profiles) {
        if (profile.points.size() != grid.deltas.size())
            throw std::invalid_argument(
                "performance_summary: profile grid mismatch for " +
                std::string(estimator_name(kind)));
        for (std::size_t i = 0; i < grid.deltas.size(); ++i)
            if (profile.points[i].delta != grid.deltas[i])
                throw std::invalid_argument(
                    "performance_summary: profile grid mismatch for " +
                    std::string(estimator_name(kind)));
    }

    const ArlProfile& bench = profiles.at(benchmark);
    auto eql_of = [](const ArlProfile& profile) {
        std::vector<std::pair<double, double>> xy;
        for (const auto& p : profile.points)
            if (p.delta > 0.0)
                xy.emplace_back(p.delta, p.delta * p.delta * p.arl);
        return detail::trapezoid_mean(xy);
    };
    const double bench_eql = eql_of(bench);

    std::map<EstimatorKind, PerformanceSummary> out;
    for (const auto& [kind, profile] : profiles) {
        PerformanceSummary s;
        s.benchmark = benchmark;
        s.eql = eql_of(profile);
        std::vector<std::pair<double, double>> ratio;
        for (std::size_t i = 0; i < profile.points.size(); ++i)
            if (profile.points[i].delta > 0.0)
                ratio.emplace_back(profile.points[i].delta,
                                   profile.points[i].arl /
                                       bench.points[i].arl);
        s.rarl = detail::trapezoid_mean(ratio);
        s.pci = s.eql / bench_eql;
        out.emplace(kind, s);
    }
    return out;
}

} // namespace spcaux
