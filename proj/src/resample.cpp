#include "lcausal/resample.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "lcausal/error.hpp"
#include "lcausal/parallel.hpp"
#include "lcausal/rng.hpp"
#include "lcausal/stats.hpp"

namespace lcausal {

std::string to_string(ResampleMode mode) { return mode == ResampleMode::iid ? "iid" : "cluster"; }
std::string to_string(CiMethod method) { return method == CiMethod::percentile ? "percentile" : "normal"; }

ResampleMode parse_resample_mode(const std::string& text)
{
    if (text == "iid" || text == "iid-rows" || text == "rows") return ResampleMode::iid;
    if (text == "cluster") return ResampleMode::cluster;
    throw InputError("unknown resampling mode '" + text + "'");
}

CiMethod parse_ci_method(const std::string& text)
{
    if (text == "percentile") return CiMethod::percentile;
    if (text == "normal") return CiMethod::normal;
    throw InputError("unknown CI method '" + text + "'");
}

void BootstrapPlan::validate() const
{
    if (replicates < 2) throw InputError("bootstrap needs at least 2 replicates");
    if (!(level > 0.0 && level < 1.0)) throw InputError("confidence level must lie in (0, 1)");
    if (!(max_failure_share >= 0.0 && max_failure_share < 1.0)) throw InputError("failure share must lie in [0, 1)");
}

Frame resample_frame(const Frame& f, ResampleMode mode, std::uint64_t seed)
{
    Rng rng(seed);
    const std::size_t n = f.n_rows();
    if (mode == ResampleMode::iid) {
        std::vector<std::size_t> rows(n);
        for (auto& r : rows) r = rng.below(n);
        return f.take_rows(rows);
    }
    if (!f.has_clusters()) throw InputError("cluster resampling needs cluster labels");
    const std::size_t k = f.n_clusters();
    std::vector<std::vector<std::size_t>> members(k);
    const auto& codes = f.cluster_codes();
    for (std::size_t i = 0; i < n; ++i) members[codes[i]].push_back(i);
    std::vector<std::size_t> rows, labels;
    rows.reserve(n);
    labels.reserve(n);
    for (std::size_t j = 0; j < k; ++j) {
        const std::size_t c = rng.below(k);
        for (std::size_t i : members[c]) {
            rows.push_back(i);
            labels.push_back(j);
        }
    }
    Frame out = f.take_rows(rows);
    out.set_cluster_codes(std::move(labels));
    return out;
}

void summarize_replicates(ComponentEstimate& c, std::vector<double> values, CiMethod method, double level)
{
    const std::size_t b = values.size();
    if (b < 2) throw BootstrapAbort("fewer than 2 successful bootstrap replicates");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(b);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    c.se = std::sqrt(ss / static_cast<double>(b - 1));
    const double alpha = 1.0 - level;
    if (method == CiMethod::normal) {
        const double q = normal_quantile(1.0 - alpha / 2.0);
        c.ci_low = c.point - q * c.se;
        c.ci_high = c.point + q * c.se;
        return;
    }
    std::sort(values.begin(), values.end());
    const double last = static_cast<double>(b - 1);
    // The tolerance keeps 1 - 0.9 != 0.1 from shifting an index.
    const auto lo = static_cast<std::size_t>(std::floor(last * alpha / 2.0 + 1e-9));
    const auto hi = static_cast<std::size_t>(std::ceil(last * (1.0 - alpha / 2.0) - 1e-9));
    c.ci_low = values[lo];
    c.ci_high = values[std::min(hi, b - 1)];
}

BootstrapResult bootstrap(const BootstrapPlan& plan, const Frame& f, const Statistic& statistic)
{
    plan.validate();
    BootstrapResult result;
    result.estimate = statistic(f, plan.master_seed);
    const auto names = result.estimate.names();
    const std::size_t B = plan.replicates;

    std::vector<std::optional<std::vector<double>>> values(B);
    std::vector<std::string> errors(B);
    parallel_for(B, [&](std::size_t r) {
        try {
            const Frame boot = resample_frame(f, plan.mode, derive_seed(plan.master_seed, r, 0));
            const EffectEstimate e = statistic(boot, derive_seed(plan.master_seed, r, 1));
            std::vector<double> row;
            row.reserve(names.size());
            for (const auto& name : names) {
                if (!e.has(name)) throw EstimationError("replicate lacks component '" + name + "'");
                const double v = e.point(name);
                if (!std::isfinite(v)) throw EstimationError("replicate component '" + name + "' is not finite");
                row.push_back(v);
            }
            values[r] = std::move(row);
        } catch (const std::exception& e) {
            errors[r] = e.what();
        }
    });

    result.replicates.assign(names.size(), {});
    for (std::size_t r = 0; r < B; ++r) {
        if (!values[r]) {
            ++result.failures;
            if (result.failure_messages.size() < 5) {
                result.failure_messages.push_back("replicate " + std::to_string(r) + ": " + errors[r]);
            }
            continue;
        }
        for (std::size_t c = 0; c < names.size(); ++c) result.replicates[c].push_back((*values[r])[c]);
    }
    auto& diag = result.estimate.diagnostics;
    diag.set("bootstrap_replicates", static_cast<double>(B));
    diag.set("bootstrap_failures", static_cast<double>(result.failures));
    if (static_cast<double>(result.failures) > plan.max_failure_share * static_cast<double>(B)) {
        std::string msg = std::to_string(result.failures) + " of " + std::to_string(B) + " bootstrap replicates failed";
        if (!result.failure_messages.empty()) msg += " (first: " + result.failure_messages.front() + ")";
        throw BootstrapAbort(msg);
    }
    if (result.failures > 0) {
        diag.warn(std::to_string(result.failures) + " bootstrap replicate(s) failed and were excluded");
    }
    for (std::size_t c = 0; c < names.size(); ++c) {
        summarize_replicates(result.estimate.at(names[c]), result.replicates[c], plan.ci, plan.level);
    }
    return result;
}

}  // namespace lcausal
