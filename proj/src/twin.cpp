#include "lcausal/twin.hpp"

#include <cmath>

#include "lcausal/error.hpp"
#include "lcausal/regress.hpp"
#include "lcausal/stats.hpp"

namespace lcausal {

std::string to_string(CovariateMode mode)
{
    switch (mode) {
    case CovariateMode::none: return "none";
    case CovariateMode::target_only: return "target_only";
    case CovariateMode::both_twins: return "both_twins";
    }
    return "?";
}

CovariateMode parse_covariate_mode(const std::string& text)
{
    if (text == "none") return CovariateMode::none;
    if (text == "target_only" || text == "target-only") return CovariateMode::target_only;
    if (text == "both_twins" || text == "both-twins") return CovariateMode::both_twins;
    throw InputError("unknown covariate mode '" + text + "'");
}

namespace {

/// partner[i] is the other member of row i's pair.
std::vector<std::size_t> partners(const Frame& f)
{
    validate_pairs(f);
    const auto& codes = f.cluster_codes();
    std::vector<std::size_t> first(f.n_clusters(), f.n_rows());
    std::vector<std::size_t> partner(f.n_rows());
    for (std::size_t i = 0; i < f.n_rows(); ++i) {
        std::size_t& slot = first[codes[i]];
        if (slot == f.n_rows()) {
            slot = i;
        } else {
            partner[i] = slot;
            partner[slot] = i;
        }
    }
    return partner;
}

void set_component(EffectEstimate& est, const std::string& name, const FittedModel& m, const std::string& label)
{
    est.set(name, m.coefficient(label));
    auto& c = est.at(name);
    c.se = m.std_error(label);
    const double q = normal_quantile(0.975);
    c.ci_low = c.point - q * c.se;
    c.ci_high = c.point + q * c.se;
}

void reject_binary_outcome(const Frame& f, const std::string& y)
{
    if (f.kind(y) == ColumnKind::binary) {
        throw InputError("twin estimators use an identity link; binary outcome '" + y +
                         "' is not supported because conditional and marginal logit effects differ");
    }
}

std::string fresh_name(const Frame& f, const std::string& base)
{
    std::string name = base;
    while (f.has(name)) name += "_";
    return name;
}

}  // namespace

void validate_pairs(const Frame& f)
{
    if (!f.has_clusters()) throw InputError("twin data need pair identifiers");
    std::vector<std::size_t> size(f.n_clusters(), 0);
    for (std::size_t c : f.cluster_codes()) ++size[c];
    for (std::size_t s : size) {
        if (s != 2) throw InputError("every pair must have exactly two members; found a pair with " + std::to_string(s));
    }
    if (f.n_clusters() < 2) throw InputError("twin estimators need at least two pairs");
}

Frame with_pair_mean(const Frame& f, const std::string& col, const std::string& name)
{
    const auto p = partners(f);
    const auto v = f.values(col);
    std::vector<double> out(f.n_rows());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * (v[i] + v[p[i]]);
    Frame g = f;
    g.set_column(name, ColumnKind::continuous, std::move(out));
    return g;
}

Frame with_cotwin(const Frame& f, const std::string& col, const std::string& name)
{
    const auto p = partners(f);
    const auto v = f.values(col);
    std::vector<double> out(f.n_rows());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[p[i]];
    Frame g = f;
    g.set_column(name, f.kind(col), std::move(out));
    return g;
}

EffectEstimate naive_clustered(const Frame& f, const std::string& x, const std::string& y,
                               const std::vector<std::string>& covariates)
{
    validate_pairs(f);
    reject_binary_outcome(f, y);
    ModelSpec spec;
    spec.response = y;
    spec.terms = {Term::intercept(), Term::main(x)};
    for (const auto& c : covariates) spec.terms.push_back(Term::main(c));
    const FittedModel m = fit(spec, f, CovKind::cluster);
    EffectEstimate est;
    set_component(est, "beta", m, x);
    est.diagnostics.set("pairs", static_cast<double>(f.n_clusters()));
    est.diagnostics.set("n", static_cast<double>(f.n_rows()));
    return est;
}

EffectEstimate between_within(const Frame& f, const std::string& x, const std::string& y, CovariateMode mode,
                              const std::string& v)
{
    validate_pairs(f);
    reject_binary_outcome(f, y);
    if (mode != CovariateMode::none && (v.empty() || !f.has(v))) {
        throw InputError("covariate mode " + to_string(mode) + " needs the non-shared covariate column");
    }
    const auto p = partners(f);
    const auto xv = f.values(x);
    std::size_t discordant = 0;
    for (std::size_t i = 0; i < xv.size(); ++i) discordant += xv[i] != xv[p[i]];
    if (discordant == 0) {
        throw EstimationError("every pair is concordant on '" + x + "'; the within-pair effect is not identified");
    }

    const std::string xbar = fresh_name(f, x + "_pair_mean");
    Frame g = with_pair_mean(f, x, xbar);
    ModelSpec spec;
    spec.response = y;
    spec.terms = {Term::intercept(), Term::main(x), Term::main(xbar)};
    if (mode != CovariateMode::none) spec.terms.push_back(Term::main(v));
    EffectEstimate est;
    if (mode == CovariateMode::both_twins) {
        const std::string co = fresh_name(g, v + "_cotwin");
        g = with_cotwin(g, v, co);
        if (g.column(co).values == g.column(v).values) {
            est.diagnostics.note("covariate is identical within every pair; co-twin term omitted");
        } else {
            spec.terms.push_back(Term::main(co));
        }
    }
    const FittedModel m = fit(spec, g, CovKind::cluster);
    set_component(est, "beta_W", m, x);
    est.diagnostics.set("beta_B", m.coefficient(xbar));
    est.diagnostics.set("beta_B_se", m.std_error(xbar));
    est.diagnostics.set("pairs", static_cast<double>(f.n_clusters()));
    est.diagnostics.set("discordant_pairs", static_cast<double>(discordant / 2));
    if (f.kind(x) == ColumnKind::binary) {
        est.diagnostics.note("binary exposure: the within-pair effect applies to the exposure-discordant pairs");
    }
    return est;
}

}  // namespace lcausal
