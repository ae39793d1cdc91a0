#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace lcausal {

struct ComponentEstimate {
    double point = 0.0;
    double se = std::numeric_limits<double>::quiet_NaN();
    double ci_low = std::numeric_limits<double>::quiet_NaN();
    double ci_high = std::numeric_limits<double>::quiet_NaN();

    bool has_interval() const { return std::isfinite(ci_low) && std::isfinite(ci_high); }
};

struct Diagnostics {
    std::vector<std::pair<std::string, double>> values;
    std::vector<std::string> warnings;
    std::vector<std::string> notes;

    void set(const std::string& key, double value);
    /// NaN when absent.
    double get(const std::string& key) const;
    void warn(std::string message) { warnings.push_back(std::move(message)); }
    void note(std::string message) { notes.push_back(std::move(message)); }
};

/// Named effect components in a stable, insertion-defined order.
struct EffectEstimate {
    std::vector<std::pair<std::string, ComponentEstimate>> components;
    Diagnostics diagnostics;

    bool has(const std::string& name) const;
    const ComponentEstimate& at(const std::string& name) const;
    ComponentEstimate& at(const std::string& name);
    double point(const std::string& name) const { return at(name).point; }
    /// Adds a component or overwrites the point of an existing one.
    void set(const std::string& name, double point);
    std::vector<std::string> names() const;
};

}  // namespace lcausal
