#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lcausal/estimate.hpp"
#include "lcausal/frame.hpp"
#include "lcausal/regress.hpp"

namespace lcausal {

/// Labels of the conceptual life-course models.
inline const std::vector<std::string>& lifecourse_labels()
{
    static const std::vector<std::string> labels{"pathway",     "cumulative", "sensitive_1", "sensitive_2",
                                                 "critical_1", "critical_2", "null"};
    return labels;
}

/// F-test of a set of linear constraints on the full model.
struct ConstraintTest {
    double statistic = 0.0;
    double df1 = 0.0;
    double df2 = 0.0;
    double p_value = 1.0;
};

struct LifecourseVerdict {
    FittedModel fitted_full;
    std::string a1, a2;
    /// Keys: no_synergy (b3=0), cumulative (b1=b2, b3=0), critical_1
    /// (b2=b3=0), critical_2 (b1=b3=0).
    std::map<std::string, ConstraintTest> submodel_tests;
    double alpha = 0.05;
    /// Per-test level after the Bonferroni split over the four tests.
    double test_level = 0.0125;
    std::string classification;
    /// CDE of a1 at each a2 level and TCE of a2, when requested.
    std::optional<EffectEstimate> estimand_evidence;

    double beta1() const;
    double beta2() const;
    double beta3() const;
};

/// F-test of R b = 0 on a gaussian fit using its covariance matrix.
/// Each constraint maps term labels to weights.
ConstraintTest linear_constraint_test(const FittedModel& model, const std::vector<std::map<std::string, double>>& rows);

/// Fits y ~ a1 + a2 + a1:a2 + confounders and tests the constrained
/// submodels. Tests run in the order synergy, then nullity of each
/// period, then equality.
LifecourseVerdict compare_nested(const Frame& f, const std::string& a1, const std::string& a2, const std::string& y,
                                 const std::vector<std::string>& confounders, double alpha = 0.05);

/// Re-derives the label from stored test results and coefficients.
std::string derive_label(const LifecourseVerdict& verdict);

/// CDE of a1 at each a2 level ("CDE1(v)") from y ~ a1 + a2 + a1:a2 + C and
/// TCE of a2 ("TCE2") from y ~ a2 + a1 + C.
EffectEstimate lifecourse_estimands(const Frame& f, const std::string& a1, const std::string& a2, const std::string& y,
                                    const std::vector<std::string>& confounders, const std::vector<double>& a2_levels);

/// Label from estimand comparison. "Close to zero" means the CI covers 0
/// (when an interval is present) and |point| < tolerance * |other|.
std::string classify_by_estimands(const std::vector<ComponentEstimate>& cde1, const ComponentEstimate& tce2,
                                  double tolerance = 0.25);

}  // namespace lcausal
