#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lcausal/estimate.hpp"
#include "lcausal/frame.hpp"
#include "lcausal/regress.hpp"

namespace lcausal {

enum class EstimandKind { tce, cde, interventional, interventional_multi, cdm, sem_paths };

std::string to_string(EstimandKind kind);
EstimandKind parse_estimand_kind(const std::string& text);

/// Declarative description of a target contrast and the working models
/// used to estimate it by g-computation.
struct EstimandRequest {
    EstimandKind kind = EstimandKind::tce;
    std::string exposure;
    double exposed_level = 1.0;
    double reference_level = 0.0;
    /// Ordered mediator blocks (interventional kinds).
    std::vector<std::vector<std::string>> mediator_blocks;
    /// One map per evaluation point (CDE and CDM).
    std::vector<std::map<std::string, double>> fixed_mediator_values;
    std::vector<std::string> baseline_confounders;
    std::vector<std::string> intermediate_confounders;
    ModelSpec outcome_model;
    /// One model per mediator column. For multiple blocks these are the
    /// sequential joint models; per-block marginal models drop the terms
    /// that reference other blocks.
    std::vector<ModelSpec> mediator_models;
    /// One model per intermediate confounder, in drawing order.
    std::vector<ModelSpec> intermediate_models;
    /// Exposure-and-confounders model for the TCE of a multi-block request;
    /// defaults to the outcome model without mediator terms.
    std::optional<ModelSpec> total_model;
    std::size_t mc_draws = 200;

    const std::string& outcome() const { return outcome_model.response; }
    /// Mediator columns in block order (or fixed-value keys for CDE/CDM).
    std::vector<std::string> mediators() const;
    /// Checks kind-specific fields, disjoint roles and which columns each
    /// model may reference. Throws InputError.
    void validate() const;
};

/// Dispatches on request.kind. `seed` drives every Monte-Carlo draw; each
/// individual gets a substream derived from the seed and the individual's
/// observed covariate values, so results do not depend on row order or
/// thread count.
EffectEstimate estimate(const EstimandRequest& req, const Frame& f, std::uint64_t seed);

/// (1/n) sum_i [m(a, C_i) - m(a*, C_i)]. Component "TCE".
EffectEstimate estimate_tce(const EstimandRequest& req, const Frame& f);
/// Components "CDE(v)" per evaluation point; sequential g-formula over the
/// intermediate confounders when present.
EffectEstimate estimate_cde(const EstimandRequest& req, const Frame& f, std::uint64_t seed);
/// Components "IDE", "IIE", "total" (telescoping convention).
EffectEstimate estimate_interventional(const EstimandRequest& req, const Frame& f, std::uint64_t seed);
/// Components "TCE", "IDE", "IIE_all", "IIE_1".., "remainder".
EffectEstimate estimate_interventional_multi(const EstimandRequest& req, const Frame& f, std::uint64_t seed);
/// Components "CDM(v)": disparity standardized within exposure strata
/// with the mediator fixed.
EffectEstimate estimate_cdm(const EstimandRequest& req, const Frame& f);

/// Linear path calculus over gaussian main-effect models. Components
/// "direct", "indirect", "total".
EffectEstimate sem_paths(const FittedModel& outcome_model, const std::vector<FittedModel>& mediator_models,
                         const std::string& exposure);
/// Fits the request's outcome, intermediate and mediator models and
/// applies sem_paths.
EffectEstimate estimate_sem_paths(const EstimandRequest& req, const Frame& f);

/// Component label for a CDE/CDM evaluation point: "CDE(1)" or
/// "CDE(m1=0,m2=1)".
std::string evaluation_label(const std::string& prefix, const std::map<std::string, double>& values);

}  // namespace lcausal
