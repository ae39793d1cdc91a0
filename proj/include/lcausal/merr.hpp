#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "lcausal/estimate.hpp"
#include "lcausal/frame.hpp"

namespace lcausal {

/// Reliability (intraclass correlation) of a mismeasured variable.
struct Reliability {
    double r = 1.0;
    double se_r = std::numeric_limits<double>::quiet_NaN();
    std::string source = "external";

    /// Throws InputError unless 0 < r <= 1 and se_r is NaN or >= 0.
    void validate() const;
    /// "0.7" or "0.7,0.05".
    static Reliability parse(const std::string& text);
};

/// beta / r, with a delta-method SE when the input SE is finite; se_r
/// adds b^2 se_r^2 / r^4 to the variance when given.
ComponentEstimate disattenuate(const ComponentEstimate& beta, const Reliability& rel);
double disattenuate(double beta, const Reliability& rel);

struct IndirectCorrection {
    double total = 0.0;
    double iie = 0.0;
    double direct = 0.0;
};

/// iie / r and total - iie / r; total is passed through unchanged.
/// Assumes a linear mediator and outcome.
IndirectCorrection correct_indirect(double total_effect, double iie_naive, const Reliability& rel);

struct GrowthFeatures {
    std::vector<double> size;
    std::vector<double> velocity;
    double centering_age = 0.0;
    std::size_t n_points = 0;
};

/// Per-subject least-squares line through (age - centering_age, measure):
/// size is the fitted value at the centering age, velocity the slope.
GrowthFeatures growth_features(const Frame& f, const std::vector<std::string>& measure_cols,
                               const std::vector<double>& ages, double centering_age);

/// Copy of `f` with the size and velocity columns appended.
Frame extract_growth(const Frame& f, const std::vector<std::string>& measure_cols, const std::vector<double>& ages,
                     double centering_age, const std::string& size_name = "size",
                     const std::string& velocity_name = "velocity");

}  // namespace lcausal
