#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "lcausal/estimate.hpp"
#include "lcausal/frame.hpp"

namespace lcausal {

/// Per-variant summary statistics for Mendelian randomization.
struct MrSummary {
    std::vector<double> beta_exposure;
    std::vector<double> se_exposure;
    std::vector<double> beta_outcome;
    std::vector<double> se_outcome;

    std::size_t size() const { return beta_exposure.size(); }
    /// Equal lengths >= 3, finite values, positive SEs.
    void validate() const;
};

/// Four numeric columns with a header: beta_exposure, se_exposure,
/// beta_outcome, se_outcome (matched by name, any order).
MrSummary read_mr_summary(std::istream& in);
MrSummary load_mr_summary(const std::string& path);
void write_mr_summary(std::ostream& out, const MrSummary& s);

/// Ratio of intention-to-treat contrasts for a binary instrument z.
/// Component "wald_ratio"; delta-method SE. Weak relevance is a warning,
/// an exactly zero exposure contrast an error.
EffectEstimate wald_ratio(const Frame& f, const std::string& z, const std::string& a, const std::string& y);

/// Two-stage least squares. Component "tsls" (coefficient of a), plus the
/// covariate coefficients; SEs use structural residuals computed with the
/// observed exposure. First-stage partial F reported in diagnostics.
EffectEstimate tsls(const Frame& f, const std::vector<std::string>& instruments, const std::string& a,
                    const std::string& y, const std::vector<std::string>& covariates = {});

/// MR-Egger: inverse-variance weighted regression of outcome betas on
/// exposure betas with an intercept, after orienting exposure betas to be
/// non-negative. Components "slope" and "intercept" with SEs and CIs at
/// `level`; their covariance is in diagnostics as "slope_intercept_cov".
EffectEstimate mr_egger(const MrSummary& s, double level = 0.95);

/// Flips the sign of both betas wherever the exposure beta is negative.
MrSummary orient(const MrSummary& s);

}  // namespace lcausal
