#include "lcausal/estimands.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>

#include "lcausal/error.hpp"
#include "lcausal/parallel.hpp"
#include "lcausal/rng.hpp"

namespace lcausal {

std::string to_string(EstimandKind kind)
{
    switch (kind) {
    case EstimandKind::tce: return "TCE";
    case EstimandKind::cde: return "CDE";
    case EstimandKind::interventional: return "INTERVENTIONAL";
    case EstimandKind::interventional_multi: return "INTERVENTIONAL_MULTI";
    case EstimandKind::cdm: return "CDM";
    case EstimandKind::sem_paths: return "SEM_PATHS";
    }
    return "?";
}

EstimandKind parse_estimand_kind(const std::string& text)
{
    std::string t;
    for (char c : text) t += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (t == "TCE") return EstimandKind::tce;
    if (t == "CDE") return EstimandKind::cde;
    if (t == "INTERVENTIONAL") return EstimandKind::interventional;
    if (t == "INTERVENTIONAL_MULTI") return EstimandKind::interventional_multi;
    if (t == "CDM") return EstimandKind::cdm;
    if (t == "SEM_PATHS" || t == "SEM") return EstimandKind::sem_paths;
    throw InputError("unknown estimand kind '" + text + "'");
}

std::string evaluation_label(const std::string& prefix, const std::map<std::string, double>& values)
{
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", v);
        return std::string(buf);
    };
    std::string out = prefix + "(";
    if (values.size() == 1) {
        out += num(values.begin()->second);
    } else {
        bool first = true;
        for (const auto& [k, v] : values) {
            if (!first) out += ",";
            first = false;
            out += k + "=" + num(v);
        }
    }
    return out + ")";
}

std::vector<std::string> EstimandRequest::mediators() const
{
    std::vector<std::string> out;
    if (kind == EstimandKind::cde || kind == EstimandKind::cdm) {
        if (!fixed_mediator_values.empty()) {
            for (const auto& [k, v] : fixed_mediator_values.front()) out.push_back(k);
        }
        return out;
    }
    for (const auto& block : mediator_blocks) out.insert(out.end(), block.begin(), block.end());
    return out;
}

namespace {

using Names = std::set<std::string>;

Names to_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

void check_allowed(const ModelSpec& m, const Names& allowed, const std::string& role)
{
    for (const auto& col : m.columns()) {
        if (!allowed.contains(col)) {
            throw InputError(role + " model for '" + m.response + "' references '" + col +
                             "', which is not an allowed predictor here");
        }
    }
}

const ModelSpec* find_model(const std::vector<ModelSpec>& models, const std::string& response)
{
    for (const auto& m : models) {
        if (m.response == response) return &m;
    }
    return nullptr;
}

void check_intermediate_models(const EstimandRequest& r)
{
    if (r.intermediate_confounders.empty()) {
        if (!r.intermediate_models.empty()) throw InputError("intermediate models given without intermediate confounders");
        return;
    }
    Names allowed = to_set(r.baseline_confounders);
    allowed.insert(r.exposure);
    for (const auto& l : r.intermediate_confounders) {
        const ModelSpec* m = find_model(r.intermediate_models, l);
        if (!m) throw InputError("missing intermediate model for '" + l + "'");
        m->validate();
        check_allowed(*m, allowed, "intermediate");
        allowed.insert(l);
    }
    if (r.intermediate_models.size() != r.intermediate_confounders.size()) {
        throw InputError("one intermediate model per intermediate confounder is required");
    }
}

void check_fixed_values(const EstimandRequest& r)
{
    if (r.fixed_mediator_values.empty()) throw InputError(to_string(r.kind) + " requires fixed mediator values");
    const auto& first = r.fixed_mediator_values.front();
    if (first.empty()) throw InputError("fixed mediator values must name at least one mediator");
    for (const auto& point : r.fixed_mediator_values) {
        if (point.size() != first.size() ||
            !std::equal(point.begin(), point.end(), first.begin(), [](const auto& a, const auto& b) { return a.first == b.first; })) {
            throw InputError("every fixed-value point must name the same mediators");
        }
        for (const auto& [k, v] : point) {
            if (!std::isfinite(v)) throw InputError("fixed value for '" + k + "' is not finite");
        }
    }
}

}  // namespace

void EstimandRequest::validate() const
{
    if (exposure.empty()) throw InputError("estimand request has no exposure");
    if (outcome_model.response.empty()) throw InputError("estimand request has no outcome model");
    if (!std::isfinite(exposed_level) || !std::isfinite(reference_level)) throw InputError("exposure levels must be finite");
    if (mc_draws < 1) throw InputError("mc_draws must be at least 1");
    outcome_model.validate();

    const auto meds = mediators();
    {
        std::map<std::string, std::string> role;
        auto claim = [&](const std::string& col, const std::string& what) {
            auto [it, fresh] = role.emplace(col, what);
            if (!fresh) throw InputError("column '" + col + "' is used as both " + it->second + " and " + what);
        };
        claim(exposure, "exposure");
        claim(outcome(), "outcome");
        for (const auto& m : meds) claim(m, "mediator");
        for (const auto& c : baseline_confounders) claim(c, "baseline confounder");
        for (const auto& l : intermediate_confounders) claim(l, "intermediate confounder");
    }

    const Names C = to_set(baseline_confounders);
    const Names L = to_set(intermediate_confounders);
    Names base = C;
    base.insert(exposure);

    switch (kind) {
    case EstimandKind::tce: {
        check_allowed(outcome_model, base, "outcome");
        if (!outcome_model.references(exposure)) throw InputError("TCE outcome model must include the exposure");
        for (const auto& c : baseline_confounders) {
            if (!outcome_model.references(c)) throw InputError("TCE outcome model must include confounder '" + c + "'");
        }
        break;
    }
    case EstimandKind::cde:
    case EstimandKind::cdm: {
        check_fixed_values(*this);
        Names allowed = base;
        allowed.insert(L.begin(), L.end());
        allowed.insert(meds.begin(), meds.end());
        check_allowed(outcome_model, allowed, "outcome");
        if (!outcome_model.references(exposure)) throw InputError("outcome model must include the exposure");
        if (kind == EstimandKind::cde) check_intermediate_models(*this);
        break;
    }
    case EstimandKind::interventional:
    case EstimandKind::interventional_multi: {
        const bool multi = kind == EstimandKind::interventional_multi;
        if (!multi && mediator_blocks.size() != 1) throw InputError("INTERVENTIONAL requires exactly one mediator block");
        if (multi && mediator_blocks.size() < 2) throw InputError("INTERVENTIONAL_MULTI requires at least two mediator blocks");
        if (multi && !intermediate_confounders.empty()) {
            throw InputError("intermediate confounders are not supported with multiple mediator blocks");
        }
        for (const auto& b : mediator_blocks) {
            if (b.empty()) throw InputError("mediator blocks must be nonempty");
        }
        check_intermediate_models(*this);
        Names allowed = base;
        allowed.insert(L.begin(), L.end());
        for (const auto& m : meds) {
            const ModelSpec* spec = find_model(mediator_models, m);
            if (!spec) throw InputError("missing mediator model for '" + m + "'");
            spec->validate();
            check_allowed(*spec, allowed, "mediator");
            allowed.insert(m);
        }
        if (mediator_models.size() != meds.size()) throw InputError("one mediator model per mediator column is required");
        check_allowed(outcome_model, allowed, "outcome");
        if (total_model) {
            total_model->validate();
            if (total_model->response != outcome()) throw InputError("total model must share the outcome");
            check_allowed(*total_model, base, "total");
        }
        break;
    }
    case EstimandKind::sem_paths: {
        if (mediator_blocks.empty()) throw InputError("SEM_PATHS requires mediator blocks");
        for (const auto& m : meds) {
            if (!find_model(mediator_models, m)) throw InputError("missing mediator model for '" + m + "'");
        }
        for (const auto& l : intermediate_confounders) {
            if (!find_model(intermediate_models, l)) throw InputError("missing intermediate model for '" + l + "'");
        }
        break;
    }
    }
}

namespace {

/// Row buffer over the columns that any model in a request touches, with
/// the observed values of the frame for filling.
struct Workspace {
    VariableLayout layout;
    std::vector<std::span<const double>> observed;
    std::size_t exposure = 0;

    Workspace(const Frame& f, const EstimandRequest& r, const std::vector<const ModelSpec*>& models)
    {
        auto add = [&](const std::string& name) {
            if (!layout.find(name)) {
                if (!f.has(name)) throw InputError("column '" + name + "' not found in data");
                layout.add(name);
                observed.push_back(f.values(name));
            }
        };
        add(r.exposure);
        for (const auto& c : r.baseline_confounders) add(c);
        for (const auto& l : r.intermediate_confounders) add(l);
        for (const auto& m : r.mediators()) add(m);
        for (const auto* m : models) {
            for (const auto& col : m->columns()) add(col);
        }
        exposure = layout.index(r.exposure);
    }

    std::size_t slot(const std::string& name) const { return layout.index(name); }

    void fill(std::size_t i, std::vector<double>& row) const
    {
        row.resize(observed.size());
        for (std::size_t s = 0; s < observed.size(); ++s) row[s] = observed[s][i];
    }

    /// Stream for individual i, keyed by the row's observed values so that
    /// estimates do not depend on row order.
    std::uint64_t stream(std::uint64_t seed, std::size_t i) const
    {
        std::uint64_t h = 0x243f6a8885a308d3ULL;
        for (const auto& col : observed) h = splitmix64(h ^ std::bit_cast<std::uint64_t>(col[i] + 0.0));
        return derive_seed(seed, h);
    }
};

struct DrawModel {
    std::size_t slot;
    BoundModel model;
};

/// Calls body(i, out) for every individual, where out has `width` slots,
/// then sums each slot over individuals in index order.
std::vector<double> sum_over_individuals(std::size_t n, std::size_t width,
                                         const std::function<void(std::size_t, double*)>& body)
{
    std::vector<double> per(n * width, 0.0);
    parallel_for(n, [&](std::size_t i) { body(i, per.data() + i * width); });
    std::vector<double> total(width, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t w = 0; w < width; ++w) total[w] += per[i * width + w];
    }
    return total;
}

thread_local std::vector<double> tl_row;
thread_local std::vector<double> tl_z;

/// Share of rows whose binary-confounder stratum does not cover both
/// exposure levels within its observed exposure range.
void positivity(const EstimandRequest& r, const Frame& f, EffectEstimate& est)
{
    std::vector<std::span<const double>> strata_cols;
    for (const auto& c : r.baseline_confounders) {
        if (f.kind(c) == ColumnKind::binary) strata_cols.push_back(f.values(c));
    }
    const auto a = f.values(r.exposure);
    const std::size_t n = f.n_rows();
    // Stratum id per row, then the exposure range of each stratum.
    std::map<std::vector<double>, std::size_t> ids;
    std::vector<std::size_t> stratum(n, 0);
    std::vector<std::pair<double, double>> range;
    std::vector<double> key(strata_cols.size());
    if (strata_cols.empty() && n > 0) range.emplace_back(a[0], a[0]);
    for (std::size_t i = 0; i < n; ++i) {
        if (!strata_cols.empty()) {
            for (std::size_t j = 0; j < strata_cols.size(); ++j) key[j] = strata_cols[j][i];
            const auto [it, fresh] = ids.try_emplace(key, range.size());
            if (fresh) range.emplace_back(a[i], a[i]);
            stratum[i] = it->second;
        }
        auto& [mn, mx] = range[stratum[i]];
        mn = std::min(mn, a[i]);
        mx = std::max(mx, a[i]);
    }
    const double lo = std::min(r.exposed_level, r.reference_level);
    const double hi = std::max(r.exposed_level, r.reference_level);
    std::size_t bad = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& [mn, mx] = range[stratum[i]];
        if (lo < mn || hi > mx) ++bad;
    }
    const double frac = n ? static_cast<double>(bad) / static_cast<double>(n) : 0.0;
    est.diagnostics.set("positivity_violation_fraction", frac);
    if (bad > 0) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "positivity: %.4g of predictions use exposure levels outside the observed support of their stratum",
                      frac);
        est.diagnostics.warn(buf);
    }
}

void warn_binary_gaussian(const Frame& f, const FittedModel& m, EffectEstimate& est)
{
    if (m.spec().family == Family::gaussian && f.kind(m.spec().response) == ColumnKind::binary) {
        est.diagnostics.warn("mediator '" + m.spec().response + "' is binary but modelled as gaussian");
    }
}

std::vector<DrawModel> fit_intermediates(const EstimandRequest& r, const Frame& f, const Workspace& ws)
{
    std::vector<DrawModel> out;
    for (const auto& l : r.intermediate_confounders) {
        const FittedModel fm = fit(*find_model(r.intermediate_models, l), f);
        out.push_back({ws.slot(l), fm.bind(ws.layout)});
    }
    return out;
}

std::vector<const ModelSpec*> all_models(const EstimandRequest& r)
{
    std::vector<const ModelSpec*> out{&r.outcome_model};
    for (const auto& m : r.intermediate_models) out.push_back(&m);
    for (const auto& m : r.mediator_models) out.push_back(&m);
    return out;
}

void base_diagnostics(const EstimandRequest& r, const Frame& f, EffectEstimate& est, bool monte_carlo)
{
    est.diagnostics.set("n", static_cast<double>(f.n_rows()));
    if (monte_carlo) est.diagnostics.set("K", static_cast<double>(r.mc_draws));
}

}  // namespace

EffectEstimate estimate_tce(const EstimandRequest& req, const Frame& f)
{
    EstimandRequest r = req;
    r.kind = EstimandKind::tce;
    r.validate();
    if (f.n_rows() == 0) throw InputError("empty frame");
    const FittedModel fm = fit(r.outcome_model, f);
    Workspace ws(f, r, {&r.outcome_model});
    const BoundModel m = fm.bind(ws.layout);
    const double a = r.exposed_level, a0 = r.reference_level;
    const std::size_t x = ws.exposure;
    const auto sums = sum_over_individuals(f.n_rows(), 1, [&](std::size_t i, double* out) {
        ws.fill(i, tl_row);
        tl_row[x] = a;
        const double m1 = m.mean(tl_row);
        tl_row[x] = a0;
        out[0] = m1 - m.mean(tl_row);
    });
    EffectEstimate est;
    est.set("TCE", sums[0] / static_cast<double>(f.n_rows()));
    base_diagnostics(r, f, est, false);
    positivity(r, f, est);
    return est;
}

EffectEstimate estimate_cde(const EstimandRequest& req, const Frame& f, std::uint64_t seed)
{
    EstimandRequest r = req;
    r.kind = EstimandKind::cde;
    r.validate();
    if (f.n_rows() == 0) throw InputError("empty frame");
    const FittedModel fm = fit(r.outcome_model, f);
    Workspace ws(f, r, all_models(r));
    const BoundModel outcome = fm.bind(ws.layout);
    const auto inter = fit_intermediates(r, f, ws);
    const auto meds = r.mediators();
    std::vector<std::size_t> med_slots;
    for (const auto& m : meds) med_slots.push_back(ws.slot(m));

    const std::size_t n = f.n_rows();
    const std::size_t P = r.fixed_mediator_values.size();
    const std::size_t K = inter.empty() ? 1 : r.mc_draws;
    const double a = r.exposed_level, a0 = r.reference_level;
    const std::size_t x = ws.exposure;

    const auto sums = sum_over_individuals(n, P, [&](std::size_t i, double* out) {
        ws.fill(i, tl_row);
        Rng rng(ws.stream(seed, i));
        tl_z.resize(inter.size());
        std::vector<double> acc(P, 0.0);
        for (std::size_t k = 0; k < K; ++k) {
            for (auto& z : tl_z) z = rng.normal();
            for (std::size_t p = 0; p < P; ++p) {
                std::size_t j = 0;
                for (const auto& [name, v] : r.fixed_mediator_values[p]) tl_row[med_slots[j++]] = v;
                double arm[2];
                const double levels[2] = {a, a0};
                for (int s = 0; s < 2; ++s) {
                    tl_row[x] = levels[s];
                    for (std::size_t l = 0; l < inter.size(); ++l) tl_row[inter[l].slot] = inter[l].model.draw(tl_row, tl_z[l]);
                    arm[s] = outcome.mean(tl_row);
                }
                acc[p] += arm[0] - arm[1];
            }
        }
        for (std::size_t p = 0; p < P; ++p) out[p] = acc[p] / static_cast<double>(K);
    });

    EffectEstimate est;
    for (std::size_t p = 0; p < P; ++p) {
        est.set(evaluation_label("CDE", r.fixed_mediator_values[p]), sums[p] / static_cast<double>(n));
    }
    base_diagnostics(r, f, est, !inter.empty());
    positivity(r, f, est);
    for (std::size_t j = 0; j < meds.size(); ++j) {
        const auto obs = f.values(meds[j]);
        const auto [mn, mx] = std::minmax_element(obs.begin(), obs.end());
        for (const auto& point : r.fixed_mediator_values) {
            const double v = point.at(meds[j]);
            if (v < *mn || v > *mx) {
                est.diagnostics.warn("fixed value for '" + meds[j] + "' lies outside its observed range");
                break;
            }
        }
    }
    return est;
}

EffectEstimate estimate_interventional(const EstimandRequest& req, const Frame& f, std::uint64_t seed)
{
    EstimandRequest r = req;
    r.kind = EstimandKind::interventional;
    r.validate();
    if (f.n_rows() == 0) throw InputError("empty frame");
    Workspace ws(f, r, all_models(r));
    const BoundModel outcome = fit(r.outcome_model, f).bind(ws.layout);
    const auto inter = fit_intermediates(r, f, ws);
    EffectEstimate est;
    std::vector<DrawModel> meds;
    for (const auto& m : r.mediator_blocks.front()) {
        const FittedModel fm = fit(*find_model(r.mediator_models, m), f);
        warn_binary_gaussian(f, fm, est);
        meds.push_back({ws.slot(m), fm.bind(ws.layout)});
    }

    const std::size_t n = f.n_rows();
    const std::size_t K = r.mc_draws;
    const double a = r.exposed_level, a0 = r.reference_level;
    const std::size_t x = ws.exposure;
    const std::size_t nl = inter.size(), nm = meds.size();

    // Arms: 0 = mu(a, a*), 1 = mu(a*, a*), 2 = mu(a, a).
    const auto sums = sum_over_individuals(n, 3, [&](std::size_t i, double* out) {
        ws.fill(i, tl_row);
        Rng rng(ws.stream(seed, i));
        tl_z.resize(nl + nm);
        double acc[3] = {0.0, 0.0, 0.0};
        const double xs[3] = {a, a0, a};
        const double gs[3] = {a0, a0, a};
        for (std::size_t k = 0; k < K; ++k) {
            for (auto& z : tl_z) z = rng.normal();
            for (int arm = 0; arm < 3; ++arm) {
                tl_row[x] = xs[arm];
                for (std::size_t l = 0; l < nl; ++l) tl_row[inter[l].slot] = inter[l].model.draw(tl_row, tl_z[l]);
                tl_row[x] = gs[arm];
                for (std::size_t m = 0; m < nm; ++m) tl_row[meds[m].slot] = meds[m].model.draw(tl_row, tl_z[nl + m]);
                tl_row[x] = xs[arm];
                acc[arm] += outcome.mean(tl_row);
            }
        }
        for (int arm = 0; arm < 3; ++arm) out[arm] = acc[arm] / static_cast<double>(K);
    });
    const double dn = static_cast<double>(n);
    const double mu_a_ref = sums[0] / dn, mu_ref_ref = sums[1] / dn, mu_a_a = sums[2] / dn;
    est.set("IDE", mu_a_ref - mu_ref_ref);
    est.set("IIE", mu_a_a - mu_a_ref);
    est.set("total", mu_a_a - mu_ref_ref);
    base_diagnostics(r, f, est, true);
    positivity(r, f, est);
    return est;
}

EffectEstimate estimate_interventional_multi(const EstimandRequest& req, const Frame& f, std::uint64_t seed)
{
    EstimandRequest r = req;
    r.kind = EstimandKind::interventional_multi;
    r.validate();
    if (f.n_rows() == 0) throw InputError("empty frame");
    std::set<std::string> seen;
    for (const auto& b : r.mediator_blocks) {
        for (const auto& m : b) {
            if (!seen.insert(m).second) throw InputError("mediator '" + m + "' appears in more than one block");
        }
    }
    Workspace ws(f, r, all_models(r));
    const BoundModel outcome = fit(r.outcome_model, f).bind(ws.layout);
    EffectEstimate est;

    // Joint models in block order; marginal models drop other-block terms.
    std::vector<DrawModel> joint;
    std::vector<std::vector<DrawModel>> marginal(r.mediator_blocks.size());
    for (std::size_t b = 0; b < r.mediator_blocks.size(); ++b) {
        std::set<std::string> others;
        for (std::size_t o = 0; o < r.mediator_blocks.size(); ++o) {
            if (o != b) others.insert(r.mediator_blocks[o].begin(), r.mediator_blocks[o].end());
        }
        for (const auto& m : r.mediator_blocks[b]) {
            const ModelSpec& spec = *find_model(r.mediator_models, m);
            const FittedModel fj = fit(spec, f);
            warn_binary_gaussian(f, fj, est);
            joint.push_back({ws.slot(m), fj.bind(ws.layout)});
            marginal[b].push_back({ws.slot(m), fit(spec.without(others), f).bind(ws.layout)});
        }
    }

    const std::size_t n = f.n_rows();
    const std::size_t K = r.mc_draws;
    const std::size_t nb = r.mediator_blocks.size();
    const std::size_t nm = joint.size();
    const double a = r.exposed_level, a0 = r.reference_level;
    const std::size_t x = ws.exposure;

    // Slots: 0 = joint(a, a*), 1 = joint(a*, a*), 2 = joint(a, a),
    // 3 = marginal all at a*, 4 + b = marginal with block b at a.
    const std::size_t width = 4 + nb;
    const auto sums = sum_over_individuals(n, width, [&](std::size_t i, double* out) {
        ws.fill(i, tl_row);
        Rng rng(ws.stream(seed, i));
        tl_z.resize(2 * nm);
        std::vector<double> acc(width, 0.0);
        const double xs[3] = {a, a0, a};
        const double gs[3] = {a0, a0, a};
        for (std::size_t k = 0; k < K; ++k) {
            for (auto& z : tl_z) z = rng.normal();
            for (int arm = 0; arm < 3; ++arm) {
                tl_row[x] = gs[arm];
                for (std::size_t m = 0; m < nm; ++m) tl_row[joint[m].slot] = joint[m].model.draw(tl_row, tl_z[m]);
                tl_row[x] = xs[arm];
                acc[arm] += outcome.mean(tl_row);
            }
            for (std::size_t shifted = 0; shifted <= nb; ++shifted) {
                // shifted == nb means no block is shifted.
                std::size_t zi = nm;
                for (std::size_t b = 0; b < nb; ++b) {
                    tl_row[x] = b == shifted ? a : a0;
                    for (const auto& dm : marginal[b]) tl_row[dm.slot] = dm.model.draw(tl_row, tl_z[zi++]);
                }
                tl_row[x] = a;
                acc[shifted == nb ? 3 : 4 + shifted] += outcome.mean(tl_row);
            }
        }
        for (std::size_t w = 0; w < width; ++w) out[w] = acc[w] / static_cast<double>(K);
    });
    const double dn = static_cast<double>(n);

    EstimandRequest total = r;
    total.kind = EstimandKind::tce;
    if (r.total_model) {
        total.outcome_model = *r.total_model;
    } else {
        total.outcome_model = r.outcome_model.without(to_set(r.mediators()));
    }
    const double tce = estimate_tce(total, f).point("TCE");

    const double ide = (sums[0] - sums[1]) / dn;
    const double iie_all = (sums[2] - sums[0]) / dn;
    est.set("TCE", tce);
    est.set("IDE", ide);
    est.set("IIE_all", iie_all);
    double sum_k = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
        const double iie = (sums[4 + b] - sums[3]) / dn;
        est.set("IIE_" + std::to_string(b + 1), iie);
        sum_k += iie;
    }
    est.set("remainder", tce - ide - sum_k);
    base_diagnostics(r, f, est, true);
    positivity(r, f, est);
    return est;
}

EffectEstimate estimate_cdm(const EstimandRequest& req, const Frame& f)
{
    EstimandRequest r = req;
    r.kind = EstimandKind::cdm;
    r.validate();
    if (f.n_rows() == 0) throw InputError("empty frame");
    const auto av = f.values(r.exposure);
    for (double v : av) {
        if (v != 0.0 && v != 1.0) throw InputError("CDM requires a binary exposure; '" + r.exposure + "' is not 0/1");
    }
    std::size_t n1 = 0;
    for (double v : av) n1 += v == 1.0;
    const std::size_t n0 = f.n_rows() - n1;
    if (n1 == 0 || n0 == 0) throw EstimationError("CDM: an exposure stratum is empty");

    Workspace ws(f, r, {&r.outcome_model});
    const BoundModel outcome = fit(r.outcome_model, f).bind(ws.layout);
    const auto meds = r.mediators();
    std::vector<std::size_t> med_slots;
    for (const auto& m : meds) med_slots.push_back(ws.slot(m));
    const std::size_t P = r.fixed_mediator_values.size();
    const std::size_t x = ws.exposure;

    const auto sums = sum_over_individuals(f.n_rows(), 2 * P, [&](std::size_t i, double* out) {
        ws.fill(i, tl_row);
        const bool exposed = av[i] == 1.0;
        tl_row[x] = av[i];
        for (std::size_t p = 0; p < P; ++p) {
            std::size_t j = 0;
            for (const auto& [name, v] : r.fixed_mediator_values[p]) tl_row[med_slots[j++]] = v;
            const double m = outcome.mean(tl_row);
            out[2 * p] = exposed ? m : 0.0;
            out[2 * p + 1] = exposed ? 0.0 : m;
        }
    });
    EffectEstimate est;
    for (std::size_t p = 0; p < P; ++p) {
        est.set(evaluation_label("CDM", r.fixed_mediator_values[p]),
                sums[2 * p] / static_cast<double>(n1) - sums[2 * p + 1] / static_cast<double>(n0));
    }
    base_diagnostics(r, f, est, false);
    est.diagnostics.set("n_exposed", static_cast<double>(n1));
    est.diagnostics.set("n_unexposed", static_cast<double>(n0));
    return est;
}

EffectEstimate sem_paths(const FittedModel& outcome_model, const std::vector<FittedModel>& mediator_models,
                         const std::string& exposure)
{
    std::map<std::string, const FittedModel*> by_response;
    auto admit = [&](const FittedModel& m) {
        if (m.spec().family != Family::gaussian) throw InputError("path calculus needs gaussian models; '" + m.spec().response + "' is not");
        if (!m.spec().main_effects_only()) {
            throw InputError("path calculus needs main-effect terms only; model for '" + m.spec().response +
                             "' has interaction or power terms");
        }
        if (!by_response.emplace(m.spec().response, &m).second) {
            throw InputError("two path models share the response '" + m.spec().response + "'");
        }
    };
    admit(outcome_model);
    for (const auto& m : mediator_models) admit(m);
    const std::string& y = outcome_model.spec().response;
    if (by_response.contains(exposure)) throw InputError("the exposure cannot be a modelled response in path calculus");

    // Sum of coefficient products over every directed path from the
    // exposure to `node`, memoized; on-stack marks catch cycles.
    std::map<std::string, double> memo;
    std::set<std::string> on_stack;
    std::function<double(const std::string&)> paths_to = [&](const std::string& node) -> double {
        if (node == exposure) return 1.0;
        auto it = memo.find(node);
        if (it != memo.end()) return it->second;
        auto model = by_response.find(node);
        if (model == by_response.end()) return 0.0;
        if (!on_stack.insert(node).second) throw InputError("path models form a cycle through '" + node + "'");
        double total = 0.0;
        for (const auto& term : model->second->spec().terms) {
            if (term.kind != Term::Kind::main) continue;
            const std::string& parent = term.columns.front();
            if (parent != exposure && !by_response.contains(parent)) continue;
            total += model->second->coefficient(term.label()) * paths_to(parent);
        }
        on_stack.erase(node);
        memo[node] = total;
        return total;
    };

    const double total = paths_to(y);
    const auto idx = outcome_model.spec().find(Term::main(exposure));
    const double direct = idx ? outcome_model.coefficients()[static_cast<Eigen::Index>(*idx)] : 0.0;
    EffectEstimate est;
    est.set("direct", direct);
    est.set("indirect", total - direct);
    est.set("total", total);
    return est;
}

EffectEstimate estimate_sem_paths(const EstimandRequest& req, const Frame& f)
{
    EstimandRequest r = req;
    r.kind = EstimandKind::sem_paths;
    r.validate();
    const FittedModel outcome = fit(r.outcome_model, f);
    std::vector<FittedModel> others;
    for (const auto& m : r.intermediate_models) others.push_back(fit(m, f));
    for (const auto& m : r.mediator_models) others.push_back(fit(m, f));
    EffectEstimate est = sem_paths(outcome, others, r.exposure);
    const double scale = r.exposed_level - r.reference_level;
    for (auto& [name, c] : est.components) c.point *= scale;
    est.diagnostics.set("n", static_cast<double>(f.n_rows()));
    return est;
}

EffectEstimate estimate(const EstimandRequest& req, const Frame& f, std::uint64_t seed)
{
    switch (req.kind) {
    case EstimandKind::tce: return estimate_tce(req, f);
    case EstimandKind::cde: return estimate_cde(req, f, seed);
    case EstimandKind::interventional: return estimate_interventional(req, f, seed);
    case EstimandKind::interventional_multi: return estimate_interventional_multi(req, f, seed);
    case EstimandKind::cdm: return estimate_cdm(req, f);
    case EstimandKind::sem_paths: return estimate_sem_paths(req, f);
    }
    throw InputError("unknown estimand kind");
}

}  // namespace lcausal
