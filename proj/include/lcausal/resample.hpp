#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lcausal/estimate.hpp"
#include "lcausal/frame.hpp"

namespace lcausal {

enum class ResampleMode { iid, cluster };
enum class CiMethod { percentile, normal };

std::string to_string(ResampleMode mode);
std::string to_string(CiMethod method);
ResampleMode parse_resample_mode(const std::string& text);
CiMethod parse_ci_method(const std::string& text);

struct BootstrapPlan {
    std::size_t replicates = 1000;
    ResampleMode mode = ResampleMode::iid;
    std::uint64_t master_seed = 1;
    CiMethod ci = CiMethod::percentile;
    double level = 0.95;
    /// Share of failed replicates above which the run aborts.
    double max_failure_share = 0.10;

    void validate() const;
};

/// Estimator applied to each resampled frame. The seed drives any
/// Monte-Carlo work inside the statistic.
using Statistic = std::function<EffectEstimate(const Frame&, std::uint64_t)>;

struct BootstrapResult {
    /// Point estimates from the original frame with se and CI filled in.
    EffectEstimate estimate;
    /// replicates[c][r]: value of component c in successful replicate r.
    std::vector<std::vector<double>> replicates;
    std::size_t failures = 0;
    std::vector<std::string> failure_messages;
};

/// Rows drawn for replicate r: iid rows, or whole clusters relabelled so
/// that a cluster drawn twice counts as two clusters.
Frame resample_frame(const Frame& f, ResampleMode mode, std::uint64_t seed);

/// Replicate r resamples with derive_seed(master, r, 0) and runs the
/// statistic with derive_seed(master, r, 1); the original frame uses
/// master_seed itself. Results do not depend on thread count. Throws
/// BootstrapAbort when too many replicates fail.
BootstrapResult bootstrap(const BootstrapPlan& plan, const Frame& f, const Statistic& statistic);

/// Fills se and CI of `c` from replicate values.
void summarize_replicates(ComponentEstimate& c, std::vector<double> values, CiMethod method, double level);

}  // namespace lcausal
