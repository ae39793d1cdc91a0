#include "lcausal/merr.hpp"

#include <cstdlib>
#include <span>

#include "lcausal/error.hpp"
#include "lcausal/stats.hpp"

namespace lcausal {

void Reliability::validate() const
{
    if (!(r > 0.0 && r <= 1.0)) throw InputError("reliability must lie in (0, 1]");
    if (!std::isnan(se_r) && !(se_r >= 0.0 && std::isfinite(se_r))) {
        throw InputError("reliability standard error must be finite and non-negative");
    }
}

Reliability Reliability::parse(const std::string& text)
{
    Reliability rel;
    const auto comma = text.find(',');
    auto number = [&](const std::string& s) {
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (s.empty() || end != s.c_str() + s.size()) throw InputError("cannot parse reliability '" + text + "'");
        return v;
    };
    rel.r = number(text.substr(0, comma));
    if (comma != std::string::npos) rel.se_r = number(text.substr(comma + 1));
    rel.validate();
    return rel;
}

double disattenuate(double beta, const Reliability& rel)
{
    rel.validate();
    return beta / rel.r;
}

ComponentEstimate disattenuate(const ComponentEstimate& beta, const Reliability& rel)
{
    rel.validate();
    ComponentEstimate out;
    out.point = beta.point / rel.r;
    if (std::isfinite(beta.se)) {
        double var = beta.se * beta.se / (rel.r * rel.r);
        if (std::isfinite(rel.se_r)) var += beta.point * beta.point * rel.se_r * rel.se_r / std::pow(rel.r, 4);
        out.se = std::sqrt(var);
        const double q = normal_quantile(0.975);
        out.ci_low = out.point - q * out.se;
        out.ci_high = out.point + q * out.se;
    }
    return out;
}

IndirectCorrection correct_indirect(double total_effect, double iie_naive, const Reliability& rel)
{
    IndirectCorrection c;
    c.total = total_effect;
    c.iie = disattenuate(iie_naive, rel);
    c.direct = total_effect - c.iie;
    return c;
}

GrowthFeatures growth_features(const Frame& f, const std::vector<std::string>& measure_cols,
                               const std::vector<double>& ages, double centering_age)
{
    if (measure_cols.size() < 2) throw InputError("growth features need at least two measurement columns");
    if (ages.size() != measure_cols.size()) throw InputError("one age per measurement column is required");
    for (std::size_t k = 0; k < ages.size(); ++k) {
        if (!std::isfinite(ages[k])) throw InputError("ages must be finite");
        if (k > 0 && ages[k] == ages[k - 1]) throw InputError("duplicate measurement age");
        if (k > 0 && ages[k] < ages[k - 1]) throw InputError("measurement ages must be strictly increasing");
    }
    if (!std::isfinite(centering_age)) throw InputError("centering age must be finite");

    const std::size_t K = ages.size();
    std::vector<double> t(K);
    double tbar = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        t[k] = ages[k] - centering_age;
        tbar += t[k];
    }
    tbar /= static_cast<double>(K);
    double stt = 0.0;
    for (double tk : t) stt += (tk - tbar) * (tk - tbar);

    std::vector<std::span<const double>> cols;
    for (const auto& c : measure_cols) cols.push_back(f.values(c));
    GrowthFeatures g;
    g.centering_age = centering_age;
    g.n_points = K;
    g.size.resize(f.n_rows());
    g.velocity.resize(f.n_rows());
    for (std::size_t i = 0; i < f.n_rows(); ++i) {
        double ybar = 0.0;
        for (std::size_t k = 0; k < K; ++k) ybar += cols[k][i];
        ybar /= static_cast<double>(K);
        double sty = 0.0;
        for (std::size_t k = 0; k < K; ++k) sty += (t[k] - tbar) * (cols[k][i] - ybar);
        const double slope = sty / stt;
        g.velocity[i] = slope;
        g.size[i] = ybar - slope * tbar;
    }
    return g;
}

Frame extract_growth(const Frame& f, const std::vector<std::string>& measure_cols, const std::vector<double>& ages,
                     double centering_age, const std::string& size_name, const std::string& velocity_name)
{
    if (f.has(size_name) || f.has(velocity_name) || size_name == velocity_name) {
        throw InputError("growth feature column names must be new and distinct");
    }
    GrowthFeatures g = growth_features(f, measure_cols, ages, centering_age);
    Frame out = f;
    out.set_column(size_name, ColumnKind::continuous, std::move(g.size));
    out.set_column(velocity_name, ColumnKind::continuous, std::move(g.velocity));
    return out;
}

}  // namespace lcausal
