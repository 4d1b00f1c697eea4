#pragma once

#include <stdexcept>
#include <string>

namespace spcaux {

/// Subgroup statistic is undefined for the requested estimator
/// (e.g. zero auxiliary-variable variance for the regression statistic).
class degenerate_subgroup_error : public std::runtime_error {
public:
    explicit degenerate_subgroup_error(const std::string& what)
        : std::runtime_error(what) {}
};

/// Monte Carlo budget or sample size is too small for the requested precision.
class precision_error : public std::runtime_error {
public:
    explicit precision_error(const std::string& what)
        : std::runtime_error(what) {}
};

/// No control-limit coefficient inside the admissible search range
/// reproduces the target in-control ARL.
class calibration_range_error : public std::runtime_error {
public:
    explicit calibration_range_error(const std::string& what)
        : std::runtime_error(what) {}
};

/// The normal equations of the weight optimisation are numerically singular.
class near_singularity_error : public std::runtime_error {
public:
    explicit near_singularity_error(const std::string& what)
        : std::runtime_error(what) {}
};

} // namespace spcaux
