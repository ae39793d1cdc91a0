#pragma once

#include <string>
#include <vector>

#include "lcausal/estimate.hpp"
#include "lcausal/frame.hpp"

namespace lcausal {

enum class CovariateMode { none, target_only, both_twins };

std::string to_string(CovariateMode mode);
CovariateMode parse_covariate_mode(const std::string& text);

/// Throws InputError unless the frame's clusters are pairs (exactly two
/// rows each) and there are at least two of them.
void validate_pairs(const Frame& f);

/// Pooled regression of y on x and covariates with pair-clustered
/// sandwich covariance. Component "beta".
EffectEstimate naive_clustered(const Frame& f, const std::string& x, const std::string& y,
                               const std::vector<std::string>& covariates = {});

/// y ~ x + pair mean of x, plus the non-shared covariate v of the target
/// twin (target_only) or of both twins (both_twins). Component "beta_W"
/// with cluster-robust SE; the between coefficient is a diagnostic.
EffectEstimate between_within(const Frame& f, const std::string& x, const std::string& y, CovariateMode mode,
                              const std::string& v = "");

/// Appends the pair mean of `col` as `name`.
Frame with_pair_mean(const Frame& f, const std::string& col, const std::string& name);
/// Appends the co-twin's value of `col` as `name`.
Frame with_cotwin(const Frame& f, const std::string& col, const std::string& name);

}  // namespace lcausal
