#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lcausal/frame.hpp"
#include "lcausal/iv.hpp"
#include "lcausal/regress.hpp"

namespace lcausal {

/// One structural equation. Continuous nodes: value = intercept +
/// sum(coef * term) + noise_sd * z. Binary nodes: value = [Phi(z) <
/// logistic(intercept + sum(coef * term))]. Terms may only reference
/// earlier nodes.
struct SemNode {
    std::string name;
    ColumnKind kind = ColumnKind::continuous;
    double intercept = 0.0;
    std::vector<std::pair<Term, double>> terms;
    double noise_sd = 1.0;
    /// Latent nodes are simulated but not written to the frame.
    bool latent = false;
    /// Pair-level nodes take one value per twin pair.
    bool pair_level = false;

    double coefficient(const std::string& label) const;
};

enum class DgpKind {
    linear_chain,
    three_node,
    parallel_mediators,
    lifecourse,
    disparity,
    alspac_like,
    alspac_growth,
    twin_pairs,
    iv_encouragement,
    exposure_error,
    mediator_error,
    mr_summary,
};

std::string to_string(DgpKind kind);
DgpKind parse_dgp_kind(const std::string& text);

/// Parametric data-generating process.
struct DgpSpec {
    DgpKind kind = DgpKind::linear_chain;
    std::vector<SemNode> nodes;
    /// Rows (pairs for twin_pairs, variants ignored for mr_summary).
    std::size_t n = 1000;
    std::uint64_t seed = 1;
    /// Defaults for truth queries.
    std::string exposure;
    std::string outcome;
    /// Kind-level scalars (reliability, MR design, ...).
    std::map<std::string, double> params;
    /// Every noise sd is multiplied by this factor at generation time.
    double noise_scale = 1.0;
    /// Recalibrate continuous noise so every node has unit variance
    /// (main-effect linear nodes only).
    bool unit_variance = false;

    const SemNode& node(const std::string& name) const;
    SemNode& node(const std::string& name);
    bool has_node(const std::string& name) const;
    std::size_t index(const std::string& name) const;

    /// "child<-term" sets a coefficient (adding the term when absent),
    /// "child.noise" / "child.intercept" set those fields, any other key
    /// must name an existing kind-level parameter.
    void set(const std::string& key, double value);
    /// Re-derives dependent quantities (noise calibration, reliability
    /// driven error variances) after edits. Called by set().
    void finalize();
    /// Throws InputError on malformed specs.
    void validate() const;

    /// True when every node is continuous with main-effect terms only.
    bool is_linear() const;
};

/// Preset specs. `variant` selects a sub-design (e.g. lifecourse model
/// types "cumulative", "critical_1", ...; twin designs "shared", "nonshared").
DgpSpec make_dgp(DgpKind kind, const std::string& variant = "");
/// Accepts "kind" or "kind:variant".
DgpSpec make_dgp(const std::string& kind_and_variant);
std::vector<std::string> dgp_variants(DgpKind kind);

/// Deterministic for a fixed seed; rows parallelize over counter-based
/// per-row streams. twin_pairs frames carry pair cluster labels.
Frame generate(const DgpSpec& spec);
MrSummary generate_mr(const DgpSpec& spec);

/// Target of a truth query. Blocks are ordered mediator column lists;
/// `fixed` holds mediator values for CDE/CDM.
struct TruthQuery {
    enum class Kind { tce, cde, ide, iie, interventional_total, ide_multi, iie_all, iie_k, remainder, cdm };

    Kind kind = Kind::tce;
    std::string exposure;
    std::vector<std::vector<std::string>> blocks;
    std::vector<std::pair<std::string, double>> fixed;
    std::size_t block = 0;  // 1-based, iie_k only
    double exposed = 1.0;
    double reference = 0.0;
};

/// Grammar: NAME[:exposure][|args]. NAME is TCE, CDE, IDE, IIE, total,
/// IDE_multi, IIE_all, IIE_<k>, remainder, CDM. args are "m=v,..." for CDE
/// and CDM, else blocks separated by ';' with columns separated by ','.
/// "TCE_<exposure>" is accepted as a synonym of "TCE:<exposure>".
TruthQuery parse_truth_query(const std::string& text, const DgpSpec& spec);

struct Truth {
    double value = 0.0;
    double mc_se = 0.0;
    bool closed_form = false;
};

struct MonteCarloOptions {
    std::size_t draws = 1000000;
    std::uint64_t seed = 0x5eed;
};

/// Closed form via path calculus when the exposure's descendants are
/// linear and the query allows it; Monte-Carlo world simulation otherwise.
Truth evaluate_truth(const DgpSpec& spec, const TruthQuery& q, const MonteCarloOptions& mc = {});
/// Path-calculus truth; throws InputError when not available.
Truth closed_form_truth(const DgpSpec& spec, const TruthQuery& q);
/// Brute-force evaluator: simulates individuals under the intervened
/// worlds with common random numbers across arms.
Truth monte_carlo_truth(const DgpSpec& spec, const TruthQuery& q, const MonteCarloOptions& mc = {});

double truth(const DgpSpec& spec, const std::string& estimand);

/// Truth queries worth reporting for a preset (used by the CLI).
std::vector<std::string> default_truth_queries(const DgpSpec& spec);

}  // namespace lcausal
