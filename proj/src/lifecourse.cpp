#include "lcausal/lifecourse.hpp"

#include <algorithm>
#include <cmath>

#include "lcausal/error.hpp"
#include "lcausal/estimands.hpp"
#include "lcausal/stats.hpp"

namespace lcausal {

namespace {

std::string interaction_label(const std::string& a1, const std::string& a2) { return Term::interaction(a1, a2).label(); }

}  // namespace

double LifecourseVerdict::beta1() const { return fitted_full.coefficient(a1); }
double LifecourseVerdict::beta2() const { return fitted_full.coefficient(a2); }
double LifecourseVerdict::beta3() const { return fitted_full.coefficient(interaction_label(a1, a2)); }

ConstraintTest linear_constraint_test(const FittedModel& model, const std::vector<std::map<std::string, double>>& rows)
{
    if (model.spec().family != Family::gaussian) throw InputError("constraint F-tests need a gaussian model");
    if (rows.empty()) throw InputError("no constraints given");
    const auto p = model.coefficients().size();
    const auto q = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(q, p);
    for (Eigen::Index r = 0; r < q; ++r) {
        for (const auto& [label, w] : rows[static_cast<std::size_t>(r)]) {
            R(r, static_cast<Eigen::Index>(model.term_index(label))) = w;
        }
    }
    const Eigen::VectorXd rb = R * model.coefficients();
    const Eigen::MatrixXd middle = R * model.covariance() * R.transpose();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(middle);
    if (ldlt.info() != Eigen::Success) throw EstimationError("constraint covariance is singular");
    ConstraintTest t;
    t.df1 = static_cast<double>(q);
    t.df2 = static_cast<double>(model.df_residual());
    if (t.df2 <= 0) throw EstimationError("no residual degrees of freedom for the F-test");
    t.statistic = rb.dot(ldlt.solve(rb)) / t.df1;
    t.p_value = f_upper_p(t.statistic, t.df1, t.df2);
    return t;
}

LifecourseVerdict compare_nested(const Frame& f, const std::string& a1, const std::string& a2, const std::string& y,
                                 const std::vector<std::string>& confounders, double alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
    if (a1 == a2) throw InputError("the two exposure periods must be different columns");
    ModelSpec spec;
    spec.response = y;
    spec.terms = {Term::intercept(), Term::main(a1), Term::main(a2), Term::interaction(a1, a2)};
    for (const auto& c : confounders) {
        if (c == a1 || c == a2 || c == y) throw InputError("confounder '" + c + "' duplicates an exposure or the outcome");
        spec.terms.push_back(Term::main(c));
    }
    LifecourseVerdict v;
    v.a1 = a1;
    v.a2 = a2;
    v.alpha = alpha;
    v.test_level = alpha / 4.0;
    v.fitted_full = fit(spec, f);
    const std::string b3 = interaction_label(a1, a2);
    v.submodel_tests["no_synergy"] = linear_constraint_test(v.fitted_full, {{{b3, 1.0}}});
    v.submodel_tests["cumulative"] = linear_constraint_test(v.fitted_full, {{{a1, 1.0}, {a2, -1.0}}, {{b3, 1.0}}});
    v.submodel_tests["critical_1"] = linear_constraint_test(v.fitted_full, {{{a2, 1.0}}, {{b3, 1.0}}});
    v.submodel_tests["critical_2"] = linear_constraint_test(v.fitted_full, {{{a1, 1.0}}, {{b3, 1.0}}});
    v.classification = derive_label(v);
    return v;
}

std::string derive_label(const LifecourseVerdict& v)
{
    const double level = v.test_level;
    auto rejected = [&](const std::string& key) { return v.submodel_tests.at(key).p_value < level; };
    if (rejected("no_synergy")) return "pathway";
    // Rejecting "only period 1 matters" means period 2 has an effect.
    const bool effect1 = rejected("critical_2");
    const bool effect2 = rejected("critical_1");
    if (effect1 && effect2) {
        if (!rejected("cumulative")) return "cumulative";
        return std::abs(v.beta1()) >= std::abs(v.beta2()) ? "sensitive_1" : "sensitive_2";
    }
    if (effect1) return "critical_1";
    if (effect2) return "critical_2";
    return "null";
}

EffectEstimate lifecourse_estimands(const Frame& f, const std::string& a1, const std::string& a2, const std::string& y,
                                    const std::vector<std::string>& confounders, const std::vector<double>& a2_levels)
{
    if (a2_levels.size() < 2) throw InputError("CDE of the first period needs at least two levels of the second");
    EstimandRequest cde;
    cde.kind = EstimandKind::cde;
    cde.exposure = a1;
    cde.baseline_confounders = confounders;
    cde.outcome_model.response = y;
    cde.outcome_model.terms = {Term::intercept(), Term::main(a1), Term::main(a2), Term::interaction(a1, a2)};
    for (const auto& c : confounders) cde.outcome_model.terms.push_back(Term::main(c));
    for (double level : a2_levels) cde.fixed_mediator_values.push_back({{a2, level}});
    const EffectEstimate cdes = estimate_cde(cde, f, 0);

    EstimandRequest tce;
    tce.kind = EstimandKind::tce;
    tce.exposure = a2;
    tce.baseline_confounders = confounders;
    tce.baseline_confounders.push_back(a1);
    tce.outcome_model.response = y;
    tce.outcome_model.terms = {Term::intercept(), Term::main(a2), Term::main(a1)};
    for (const auto& c : confounders) tce.outcome_model.terms.push_back(Term::main(c));
    const double tce2 = estimate_tce(tce, f).point("TCE");

    EffectEstimate out;
    for (std::size_t i = 0; i < a2_levels.size(); ++i) {
        out.set(evaluation_label("CDE1", {{a2, a2_levels[i]}}), cdes.components[i].second.point);
    }
    out.set("TCE2", tce2);
    out.diagnostics.set("n", static_cast<double>(f.n_rows()));
    return out;
}

std::string classify_by_estimands(const std::vector<ComponentEstimate>& cde1, const ComponentEstimate& tce2,
                                  double tolerance)
{
    if (cde1.size() < 2) throw InputError("classification needs the CDE at two or more levels");
    if (!(tolerance > 0.0)) throw InputError("tolerance must be positive");
    auto se_or_zero = [](const ComponentEstimate& c) { return std::isfinite(c.se) ? c.se : 0.0; };
    const double z = normal_quantile(0.975);

    double scale = std::abs(tce2.point);
    for (const auto& c : cde1) scale = std::max(scale, std::abs(c.point));
    for (std::size_t i = 0; i < cde1.size(); ++i) {
        for (std::size_t j = i + 1; j < cde1.size(); ++j) {
            const double gap = std::abs(cde1[i].point - cde1[j].point);
            const double band = z * std::hypot(se_or_zero(cde1[i]), se_or_zero(cde1[j]));
            if (gap > band && gap > 1e-12 * scale) return "pathway";
        }
    }

    // CDE1 does not vary; compare its median evaluation with TCE2.
    std::vector<ComponentEstimate> sorted = cde1;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.point < b.point; });
    const ComponentEstimate& cde = sorted[sorted.size() / 2];

    auto covers_zero = [](const ComponentEstimate& c) { return !c.has_interval() || (c.ci_low <= 0.0 && c.ci_high >= 0.0); };
    // A relative tolerance degenerates when both are near zero, so two
    // intervals that both cover zero count as zero on their own.
    auto near_zero = [&](const ComponentEstimate& c, const ComponentEstimate& other) {
        if (!covers_zero(c)) return false;
        if (c.has_interval() && other.has_interval() && covers_zero(other)) return true;
        return std::abs(c.point) < tolerance * std::abs(other.point);
    };
    const bool zero1 = near_zero(cde, tce2) || (cde.point == 0.0 && tce2.point == 0.0);
    const bool zero2 = near_zero(tce2, cde) || (cde.point == 0.0 && tce2.point == 0.0);
    if (zero1 && zero2) return "null";
    if (zero1) return "critical_2";
    if (zero2) return "critical_1";

    const double diff = std::abs(cde.point - tce2.point);
    const bool within_tolerance = diff <= tolerance * std::max(std::abs(cde.point), std::abs(tce2.point));
    bool within_cis = true;
    if (cde.has_interval() && tce2.has_interval()) {
        within_cis = cde.ci_low <= tce2.ci_high && tce2.ci_low <= cde.ci_high;
    }
    if (within_tolerance && within_cis) return "cumulative";
    return std::abs(cde.point) > std::abs(tce2.point) ? "sensitive_1" : "sensitive_2";
}

}  // namespace lcausal
