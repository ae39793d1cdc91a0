#include "lcausal/estimate.hpp"

#include "lcausal/error.hpp"

namespace lcausal {

void Diagnostics::set(const std::string& key, double value)
{
    for (auto& [k, v] : values) {
        if (k == key) {
            v = value;
            return;
        }
    }
    values.emplace_back(key, value);
}

double Diagnostics::get(const std::string& key) const
{
    for (const auto& [k, v] : values) {
        if (k == key) return v;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

bool EffectEstimate::has(const std::string& name) const
{
    for (const auto& c : components) {
        if (c.first == name) return true;
    }
    return false;
}

const ComponentEstimate& EffectEstimate::at(const std::string& name) const
{
    for (const auto& c : components) {
        if (c.first == name) return c.second;
    }
    throw InputError("no component named '" + name + "'");
}

ComponentEstimate& EffectEstimate::at(const std::string& name)
{
    for (auto& c : components) {
        if (c.first == name) return c.second;
    }
    throw InputError("no component named '" + name + "'");
}

void EffectEstimate::set(const std::string& name, double point)
{
    for (auto& c : components) {
        if (c.first == name) {
            c.second.point = point;
            return;
        }
    }
    components.emplace_back(name, ComponentEstimate{point});
}

std::vector<std::string> EffectEstimate::names() const
{
    std::vector<std::string> out;
    out.reserve(components.size());
    for (const auto& c : components) out.push_back(c.first);
    return out;
}

}  // namespace lcausal
