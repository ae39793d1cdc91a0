#include "lcausal/simgen.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "lcausal/error.hpp"
#include "lcausal/parallel.hpp"
#include "lcausal/rng.hpp"

namespace lcausal {

namespace {

Term parse_term_label(const std::string& label)
{
    if (label == "1") return Term::intercept();
    const auto spec = ModelSpec::parse("_ ~ 0 + " + label);
    if (spec.terms.size() != 1) throw InputError("bad term '" + label + "'");
    return spec.terms[0];
}

std::string trim(const std::string& s)
{
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, sep)) out.push_back(trim(part));
    return out;
}

SemNode continuous(std::string name, std::vector<std::pair<std::string, double>> terms, double noise_sd,
                   double intercept = 0.0)
{
    SemNode n;
    n.name = std::move(name);
    n.intercept = intercept;
    n.noise_sd = noise_sd;
    for (auto& [label, coef] : terms) n.terms.emplace_back(parse_term_label(label), coef);
    return n;
}

SemNode binary(std::string name, std::vector<std::pair<std::string, double>> terms, double intercept)
{
    SemNode n = continuous(std::move(name), std::move(terms), 0.0, intercept);
    n.kind = ColumnKind::binary;
    return n;
}

SemNode latent(SemNode n)
{
    n.latent = true;
    return n;
}

// Index-compiled structural equations.
class Sem {
public:
    explicit Sem(const DgpSpec& spec) : noise_scale_(spec.noise_scale)
    {
        for (const auto& node : spec.nodes) {
            Equation eq;
            eq.binary = node.kind == ColumnKind::binary;
            eq.intercept = node.intercept;
            eq.noise_sd = node.noise_sd * spec.noise_scale;
            for (const auto& [term, coef] : node.terms) {
                if (term.kind == Term::Kind::intercept) {
                    eq.intercept += coef;
                    continue;
                }
                Compiled c;
                c.kind = term.kind;
                c.exponent = term.exponent;
                c.coef = coef;
                c.a = spec.index(term.columns[0]);
                if (term.columns.size() > 1) c.b = spec.index(term.columns[1]);
                if (term.columns.size() > 2) c.c = spec.index(term.columns[2]);
                eq.terms.push_back(c);
            }
            equations_.push_back(std::move(eq));
        }
    }

    std::size_t size() const { return equations_.size(); }

    double linear_predictor(std::size_t j, const double* v) const
    {
        const auto& eq = equations_[j];
        double s = eq.intercept;
        for (const auto& t : eq.terms) {
            switch (t.kind) {
            case Term::Kind::main: s += t.coef * v[t.a]; break;
            case Term::Kind::power: s += t.coef * std::pow(v[t.a], t.exponent); break;
            case Term::Kind::interaction: s += t.coef * v[t.a] * v[t.b]; break;
            case Term::Kind::triple: s += t.coef * v[t.a] * v[t.b] * v[t.c]; break;
            case Term::Kind::intercept: break;
            }
        }
        return s;
    }

    double value(std::size_t j, const double* v, double z) const
    {
        const double eta = linear_predictor(j, v);
        const auto& eq = equations_[j];
        if (eq.binary) return normal_cdf(z) < logistic(eta) ? 1.0 : 0.0;
        return eta + eq.noise_sd * z;
    }

private:
    struct Compiled {
        Term::Kind kind = Term::Kind::main;
        std::size_t a = 0, b = 0, c = 0;
        int exponent = 1;
        double coef = 0.0;
    };
    struct Equation {
        bool binary = false;
        double intercept = 0.0;
        double noise_sd = 0.0;
        std::vector<Compiled> terms;
    };

    double noise_scale_;
    std::vector<Equation> equations_;
};

// Implied covariance of main-effect linear continuous nodes, used to
// calibrate unit variances.
void calibrate_unit_variance(DgpSpec& spec)
{
    const std::size_t n = spec.nodes.size();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) {
        auto& node = spec.nodes[j];
        Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
        for (const auto& [term, coef] : node.terms) {
            if (term.kind == Term::Kind::intercept) continue;
            if (term.kind != Term::Kind::main) {
                throw InputError("unit-variance calibration needs main-effect terms only");
            }
            b[static_cast<Eigen::Index>(spec.index(term.columns[0]))] += coef;
        }
        const double explained = b.dot(cov * b);
        if (explained >= 1.0) {
            throw InputError("coefficients of '" + node.name + "' explain variance >= 1; cannot calibrate unit variance");
        }
        node.noise_sd = std::sqrt(1.0 - explained);
        const Eigen::VectorXd cross = cov * b;
        const auto jj = static_cast<Eigen::Index>(j);
        for (Eigen::Index k = 0; k < jj; ++k) {
            cov(jj, k) = cross[k];
            cov(k, jj) = cross[k];
        }
        cov(jj, jj) = 1.0;
    }
}

struct LifecourseBetas {
    const char* name;
    double b0, b1, b2, b3;
};

constexpr LifecourseBetas lifecourse_variants[] = {
    {"cumulative", 0.0, 0.3, 0.3, 0.0},   {"critical_1", 0.0, 0.4, 0.0, 0.0},
    {"critical_2", 0.0, 0.0, 0.4, 0.0},   {"sensitive_1", 0.0, 0.4, 0.15, 0.0},
    {"sensitive_2", 0.0, 0.15, 0.4, 0.0}, {"pathway", 0.0, 0.2, 0.2, 0.25},
    {"null", 0.0, 0.0, 0.0, 0.0},         {"additive", 0.0, 0.1, 0.25, 0.0},
    {"interaction", 0.0, 0.1, 0.25, 0.2},
};

std::vector<std::pair<std::string, double>> confounder_terms_alspac_bw()
{
    return {{"c_edu", 0.1}, {"c_occ", 0.05}, {"c_smoke", -0.3}, {"c_mbmi", 0.15}};
}

void add_alspac_confounders(DgpSpec& s)
{
    s.nodes.push_back(continuous("c_edu", {}, 1.0));
    s.nodes.push_back(continuous("c_occ", {{"c_edu", 0.4}}, 0.92));
    s.nodes.push_back(binary("c_smoke", {{"c_edu", -0.5}}, -1.0));
    s.nodes.push_back(continuous("c_mbmi", {{"c_edu", -0.2}}, 0.98));
    s.nodes.push_back(continuous("c_psych", {{"c_edu", -0.2}, {"c_smoke", 0.2}}, 0.97));
    s.nodes.push_back(continuous("bw", confounder_terms_alspac_bw(), 0.95, 0.09));
}

}  // namespace

double SemNode::coefficient(const std::string& label) const
{
    const Term t = parse_term_label(label);
    for (const auto& [term, coef] : terms) {
        if (term.same_as(t)) return coef;
    }
    return 0.0;
}

std::string to_string(DgpKind kind)
{
    switch (kind) {
    case DgpKind::linear_chain: return "linear_chain";
    case DgpKind::three_node: return "three_node";
    case DgpKind::parallel_mediators: return "parallel_mediators";
    case DgpKind::lifecourse: return "lifecourse";
    case DgpKind::disparity: return "disparity";
    case DgpKind::alspac_like: return "alspac_like";
    case DgpKind::alspac_growth: return "alspac_growth";
    case DgpKind::twin_pairs: return "twin_pairs";
    case DgpKind::iv_encouragement: return "iv_encouragement";
    case DgpKind::exposure_error: return "exposure_error";
    case DgpKind::mediator_error: return "mediator_error";
    case DgpKind::mr_summary: return "mr_summary";
    }
    return {};
}

DgpKind parse_dgp_kind(const std::string& text)
{
    for (auto k : {DgpKind::linear_chain, DgpKind::three_node, DgpKind::parallel_mediators, DgpKind::lifecourse,
                   DgpKind::disparity, DgpKind::alspac_like, DgpKind::alspac_growth, DgpKind::twin_pairs,
                   DgpKind::iv_encouragement, DgpKind::exposure_error, DgpKind::mediator_error,
                   DgpKind::mr_summary}) {
        if (to_string(k) == text) return k;
    }
    throw InputError("unknown simulation kind '" + text + "'");
}

const SemNode& DgpSpec::node(const std::string& name) const { return nodes[index(name)]; }
SemNode& DgpSpec::node(const std::string& name) { return nodes[index(name)]; }

bool DgpSpec::has_node(const std::string& name) const
{
    return std::any_of(nodes.begin(), nodes.end(), [&](const SemNode& n) { return n.name == name; });
}

std::size_t DgpSpec::index(const std::string& name) const
{
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].name == name) return i;
    }
    throw InputError("simulation kind " + to_string(kind) + " has no variable '" + name + "'");
}

void DgpSpec::set(const std::string& key, double value)
{
    if (!std::isfinite(value)) throw InputError("value for '" + key + "' must be finite");
    if (const auto arrow = key.find("<-"); arrow != std::string::npos) {
        auto& child = node(trim(key.substr(0, arrow)));
        const Term t = parse_term_label(trim(key.substr(arrow + 2)));
        if (t.kind == Term::Kind::intercept) {
            child.intercept = value;
        } else {
            for (const auto& c : t.columns) {
                if (index(c) >= index(child.name)) {
                    throw InputError("term '" + t.label() + "' of '" + child.name + "' must reference earlier variables");
                }
            }
            bool found = false;
            for (auto& [term, coef] : child.terms) {
                if (term.same_as(t)) {
                    coef = value;
                    found = true;
                }
            }
            if (!found) child.terms.emplace_back(t, value);
        }
    } else if (key.size() > 6 && key.ends_with(".noise")) {
        if (value < 0) throw InputError("noise sd must be >= 0");
        node(key.substr(0, key.size() - 6)).noise_sd = value;
        unit_variance = false;
    } else if (key.size() > 10 && key.ends_with(".intercept")) {
        node(key.substr(0, key.size() - 10)).intercept = value;
    } else if (key == "noise_scale") {
        if (value < 0) throw InputError("noise_scale must be >= 0");
        noise_scale = value;
    } else if (params.contains(key)) {
        params[key] = value;
    } else {
        throw InputError("unknown parameter '" + key + "' for simulation kind " + to_string(kind));
    }
    finalize();
}

void DgpSpec::finalize()
{
    if (unit_variance) calibrate_unit_variance(*this);
    if (kind == DgpKind::exposure_error || kind == DgpKind::mediator_error) {
        const double r = params.at("reliability");
        if (!(r > 0.0 && r <= 1.0)) throw InputError("reliability must lie in (0, 1]");
        // Error variance set so that r is the share of the (conditional)
        // true-score variance in the observed measure.
        const std::string truth_node = kind == DgpKind::exposure_error ? "x_true" : "m_true";
        const std::string observed = kind == DgpKind::exposure_error ? "x" : "m";
        const double true_var = std::pow(node(truth_node).noise_sd, 2);
        node(observed).noise_sd = std::sqrt(true_var * (1.0 - r) / r);
    }
    validate();
}

void DgpSpec::validate() const
{
    if (n < 1) throw InputError("n must be >= 1");
    if (noise_scale < 0) throw InputError("noise_scale must be >= 0");
    for (std::size_t j = 0; j < nodes.size(); ++j) {
        const auto& node = nodes[j];
        if (node.name.empty()) throw InputError("variables need names");
        if (!(node.noise_sd >= 0.0)) throw InputError("noise sd of '" + node.name + "' must be >= 0");
        for (std::size_t k = 0; k < j; ++k) {
            if (nodes[k].name == node.name) throw InputError("duplicate variable '" + node.name + "'");
        }
        for (const auto& [term, coef] : node.terms) {
            if (!std::isfinite(coef)) throw InputError("coefficients must be finite");
            for (const auto& c : term.columns) {
                if (index(c) >= j) {
                    throw InputError("term '" + term.label() + "' of '" + node.name + "' must reference earlier variables");
                }
                if (node.pair_level && !nodes[index(c)].pair_level) {
                    throw InputError("pair-level variable '" + node.name + "' may only depend on pair-level variables");
                }
            }
        }
    }
    if (!exposure.empty() && !has_node(exposure)) throw InputError("unknown exposure '" + exposure + "'");
    if (!outcome.empty() && !has_node(outcome)) throw InputError("unknown outcome '" + outcome + "'");
}

bool DgpSpec::is_linear() const
{
    for (const auto& node : nodes) {
        if (node.kind != ColumnKind::continuous) return false;
        for (const auto& [term, coef] : node.terms) {
            if (term.kind != Term::Kind::main && term.kind != Term::Kind::intercept && coef != 0.0) return false;
        }
    }
    return true;
}

DgpSpec make_dgp(DgpKind kind, const std::string& variant)
{
    DgpSpec s;
    s.kind = kind;
    auto reject_variant = [&] {
        if (!variant.empty()) throw InputError("simulation kind " + to_string(kind) + " has no variant '" + variant + "'");
    };
    switch (kind) {
    case DgpKind::linear_chain:
        reject_variant();
        s.nodes = {continuous("c", {}, 1.0), continuous("a1", {{"c", 0.5}}, 1.0),
                   continuous("l", {{"a1", 0.3}, {"c", 0.2}}, 1.0),
                   continuous("a2", {{"a1", 0.4}, {"l", 0.3}, {"c", 0.2}}, 1.0),
                   continuous("y", {{"a1", 0.1}, {"a2", 0.25}, {"l", 0.2}, {"c", 0.3}}, 1.0)};
        s.exposure = "a1";
        s.outcome = "y";
        s.unit_variance = true;
        break;
    case DgpKind::three_node:
        s.nodes = {continuous("a1", {}, 1.0), continuous("a2", {{"a1", 0.4}}, 1.0),
                   continuous("y", {{"a1", 0.1}, {"a2", 0.25}}, 1.0)};
        s.exposure = "a1";
        s.outcome = "y";
        if (variant == "no_mediation") {
            s.node("a2").terms[0].second = 0.0;
        } else {
            reject_variant();
        }
        break;
    case DgpKind::parallel_mediators:
        s.nodes = {continuous("c", {}, 1.0), continuous("a", {{"c", 0.4}}, 1.0),
                   continuous("m1", {{"a", 0.5}, {"c", 0.2}}, 1.0), continuous("m2", {{"a", 0.3}, {"c", 0.2}}, 1.0),
                   continuous("y", {{"a", 0.1}, {"m1", 0.3}, {"m2", 0.4}, {"c", 0.3}}, 1.0)};
        s.exposure = "a";
        s.outcome = "y";
        if (variant == "null") {
            s.node("m1").terms[0].second = 0.0;
            s.node("m2").terms[0].second = 0.0;
        } else {
            reject_variant();
        }
        break;
    case DgpKind::lifecourse: {
        const std::string v = variant.empty() ? "cumulative" : variant;
        const LifecourseBetas* b = nullptr;
        for (const auto& cand : lifecourse_variants) {
            if (v == cand.name) b = &cand;
        }
        if (!b) throw InputError("unknown lifecourse model type '" + v + "'");
        s.nodes = {continuous("c", {}, 1.0), continuous("a1", {{"c", 0.3}}, 1.0),
                   continuous("a2", {{"a1", 0.3}, {"c", 0.2}}, 1.0),
                   continuous("y", {{"a1", b->b1}, {"a2", b->b2}, {"a1:a2", b->b3}, {"c", 0.2}}, 1.0, b->b0)};
        s.exposure = "a1";
        s.outcome = "y";
        break;
    }
    case DgpKind::disparity:
        s.nodes = {continuous("c", {}, 1.0), binary("a", {{"c", 0.5}}, 0.0),
                   continuous("m", {{"a", 0.5}, {"c", 0.3}}, 1.0),
                   continuous("y", {{"a", 0.3}, {"m", 0.4}, {"c", 0.3}}, 1.0)};
        s.exposure = "a";
        s.outcome = "y";
        if (variant == "inert_mediator") {
            s.node("y").terms[1].second = 0.0;
        } else if (variant == "fully_mediated") {
            // No direct edge and no confounding of the disparity itself.
            s.node("y").terms[0].second = 0.0;
            s.node("a").terms[0].second = 0.0;
        } else {
            reject_variant();
        }
        break;
    case DgpKind::alspac_like: {
        reject_variant();
        add_alspac_confounders(s);
        s.nodes.push_back(
            continuous("bmi7", {{"bw", 0.2}, {"c_mbmi", 0.35}, {"c_edu", -0.1}, {"c_smoke", 0.1}}, 0.85));
        for (int age = 8; age <= 12; ++age) {
            const std::string prev = "bmi" + std::to_string(age - 1);
            s.nodes.push_back(continuous("bmi" + std::to_string(age), {{prev, 0.8}, {"bw", 0.05}, {"c_mbmi", 0.06}}, 0.5));
        }
        s.nodes.push_back(continuous("be",
                                     {{"bw", 0.02},
                                      {"bw^2", 0.04},
                                      {"bmi12", 0.25},
                                      {"bmi12^2", 0.06},
                                      {"bw:bmi12", 0.03},
                                      {"c_psych", 0.15},
                                      {"c_edu", -0.05},
                                      {"c_mbmi", 0.05}},
                                     0.9));
        s.exposure = "bw";
        s.outcome = "be";
        break;
    }
    case DgpKind::alspac_growth: {
        reject_variant();
        add_alspac_confounders(s);
        s.nodes.push_back(latent(continuous("size", {{"bw", 0.25}, {"c_mbmi", 0.3}, {"c_edu", -0.1}}, 0.8)));
        s.nodes.push_back(latent(continuous("vel", {{"bw", 0.1}, {"c_mbmi", 0.05}}, 0.15)));
        for (int age = 7; age <= 12; ++age) {
            s.nodes.push_back(continuous("bmi" + std::to_string(age), {{"size", 1.0}, {"vel", age - 9.5}}, 0.3));
        }
        s.nodes.push_back(
            continuous("be", {{"bw", 0.02}, {"size", 0.3}, {"c_psych", 0.15}, {"c_edu", -0.05}}, 0.9));
        s.exposure = "bw";
        s.outcome = "be";
        break;
    }
    case DgpKind::twin_pairs: {
        SemNode u = latent(continuous("u", {}, 1.0));
        u.pair_level = true;
        SemNode mz = binary("mz", {}, 0.0);
        mz.pair_level = true;
        s.nodes = {u, mz, continuous("y1", {{"u", 0.5}}, 1.0), continuous("x", {{"u", 0.6}, {"y1", 0.5}}, 1.0),
                   continuous("y2", {{"x", 0.15}, {"u", 0.5}, {"y1", 0.4}}, 1.0)};
        s.exposure = "x";
        s.outcome = "y2";
        if (variant == "shared") {
            s.set("x<-y1", 0.0);
            s.set("y2<-y1", 0.0);
        } else if (variant == "unconfounded") {
            s.set("x<-y1", 0.0);
            s.set("y2<-y1", 0.0);
            s.set("x<-u", 0.0);
            s.set("y2<-u", 0.0);
        } else if (!variant.empty() && variant != "nonshared") {
            reject_variant();
        }
        break;
    }
    case DgpKind::iv_encouragement:
        s.nodes = {binary("z", {}, 0.0), latent(continuous("u", {}, 1.0)), continuous("c", {}, 1.0),
                   continuous("a", {{"z", 0.4}, {"u", 0.5}, {"c", 0.2}}, 1.0),
                   continuous("y", {{"a", 0.5}, {"u", 0.5}, {"c", 0.2}}, 1.0)};
        s.exposure = "a";
        s.outcome = "y";
        if (variant == "noiseless") {
            s.set("a<-u", 0.0);
            s.set("y<-u", 0.0);
            s.set("a.noise", 0.0);
            s.set("y.noise", 0.0);
        } else if (variant == "irrelevant") {
            s.set("a<-z", 0.0);
        } else {
            reject_variant();
        }
        break;
    case DgpKind::exposure_error:
        reject_variant();
        s.params["reliability"] = 0.7;
        s.nodes = {latent(continuous("x_true", {}, 1.0)), continuous("x", {{"x_true", 1.0}}, 0.0),
                   continuous("y", {{"x_true", 0.4}}, 1.0)};
        s.exposure = "x_true";
        s.outcome = "y";
        break;
    case DgpKind::mediator_error:
        reject_variant();
        s.params["reliability"] = 0.7;
        s.nodes = {continuous("a", {}, 1.0), latent(continuous("m_true", {{"a", 0.5}}, 1.0)),
                   continuous("m", {{"m_true", 1.0}}, 0.0), continuous("y", {{"a", 0.2}, {"m_true", 0.4}}, 1.0)};
        s.exposure = "a";
        s.outcome = "y";
        break;
    case DgpKind::mr_summary:
        s.params = {{"variants", 50},        {"theta", 0.3},         {"pleiotropy", 0.02},
                    {"gamma_low", 0.05},     {"gamma_high", 0.25},   {"se_exposure", 0.01},
                    {"se_outcome", 0.02}};
        s.n = 50;
        if (variant == "balanced") {
            s.params["pleiotropy"] = 0.0;
        } else {
            reject_variant();
        }
        break;
    }
    s.finalize();
    return s;
}

DgpSpec make_dgp(const std::string& kind_and_variant)
{
    const auto colon = kind_and_variant.find(':');
    if (colon == std::string::npos) return make_dgp(parse_dgp_kind(kind_and_variant));
    return make_dgp(parse_dgp_kind(kind_and_variant.substr(0, colon)), kind_and_variant.substr(colon + 1));
}

std::vector<std::string> dgp_variants(DgpKind kind)
{
    switch (kind) {
    case DgpKind::three_node: return {"no_mediation"};
    case DgpKind::parallel_mediators: return {"null"};
    case DgpKind::lifecourse: {
        std::vector<std::string> out;
        for (const auto& v : lifecourse_variants) out.emplace_back(v.name);
        return out;
    }
    case DgpKind::disparity: return {"inert_mediator", "fully_mediated"};
    case DgpKind::twin_pairs: return {"nonshared", "shared", "unconfounded"};
    case DgpKind::iv_encouragement: return {"noiseless", "irrelevant"};
    case DgpKind::mr_summary: return {"balanced"};
    default: return {};
    }
}

Frame generate(const DgpSpec& spec)
{
    if (spec.kind == DgpKind::mr_summary) throw InputError("mr_summary produces summary statistics; use generate_mr");
    spec.validate();
    const Sem sem(spec);
    const std::size_t k = sem.size();
    const bool twins = spec.kind == DgpKind::twin_pairs;
    const std::size_t units = spec.n;
    const std::size_t rows = twins ? 2 * units : units;
    std::vector<double> values(rows * k);

    constexpr std::size_t chunk = 1024;
    const std::size_t chunks = (units + chunk - 1) / chunk;
    parallel_for(chunks, [&](std::size_t c) {
        std::vector<double> v0(k), v1(k);
        const std::size_t end = std::min(units, (c + 1) * chunk);
        for (std::size_t u = c * chunk; u < end; ++u) {
            Rng rng(derive_seed(spec.seed, u));
            if (!twins) {
                for (std::size_t j = 0; j < k; ++j) v0[j] = sem.value(j, v0.data(), rng.normal());
                std::copy(v0.begin(), v0.end(), values.begin() + static_cast<std::ptrdiff_t>(u * k));
                continue;
            }
            for (std::size_t j = 0; j < k; ++j) {
                if (spec.nodes[j].pair_level) {
                    v0[j] = sem.value(j, v0.data(), rng.normal());
                    v1[j] = v0[j];
                } else {
                    v0[j] = sem.value(j, v0.data(), rng.normal());
                    v1[j] = sem.value(j, v1.data(), rng.normal());
                }
            }
            std::copy(v0.begin(), v0.end(), values.begin() + static_cast<std::ptrdiff_t>(2 * u * k));
            std::copy(v1.begin(), v1.end(), values.begin() + static_cast<std::ptrdiff_t>((2 * u + 1) * k));
        }
    });

    Frame f;
    for (std::size_t j = 0; j < k; ++j) {
        if (spec.nodes[j].latent) continue;
        std::vector<double> col(rows);
        for (std::size_t r = 0; r < rows; ++r) col[r] = values[r * k + j];
        f.set_column(spec.nodes[j].name, spec.nodes[j].kind, std::move(col));
    }
    if (twins) {
        std::vector<std::size_t> codes(rows);
        for (std::size_t r = 0; r < rows; ++r) codes[r] = r / 2;
        f.set_cluster_codes(std::move(codes));
    }
    return f;
}

MrSummary generate_mr(const DgpSpec& spec)
{
    if (spec.kind != DgpKind::mr_summary) throw InputError("generate_mr needs the mr_summary kind");
    const auto& p = spec.params;
    const double variants = p.at("variants");
    if (!(variants >= 3) || variants != std::floor(variants)) throw InputError("variants must be an integer >= 3");
    const double lo = p.at("gamma_low");
    const double hi = p.at("gamma_high");
    const double se_x = p.at("se_exposure");
    const double se_y = p.at("se_outcome");
    if (!(hi >= lo) || !(se_x > 0) || !(se_y > 0)) throw InputError("invalid mr_summary parameters");
    const auto j_max = static_cast<std::size_t>(variants);
    MrSummary s;
    for (std::size_t j = 0; j < j_max; ++j) {
        Rng rng(derive_seed(spec.seed, j));
        const double gamma = lo + (hi - lo) * rng.uniform();
        s.beta_exposure.push_back(gamma + se_x * rng.normal());
        s.se_exposure.push_back(se_x);
        s.beta_outcome.push_back(p.at("pleiotropy") + p.at("theta") * gamma + se_y * rng.normal());
        s.se_outcome.push_back(se_y);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Truth queries

TruthQuery parse_truth_query(const std::string& text, const DgpSpec& spec)
{
    TruthQuery q;
    std::string head = text;
    std::string args;
    if (const auto bar = text.find('|'); bar != std::string::npos) {
        head = trim(text.substr(0, bar));
        args = trim(text.substr(bar + 1));
    }
    std::string name = head;
    if (const auto colon = head.find(':'); colon != std::string::npos) {
        name = trim(head.substr(0, colon));
        q.exposure = trim(head.substr(colon + 1));
    }
    if (q.exposure.empty() && name.starts_with("TCE_") && spec.has_node(name.substr(4))) {
        q.exposure = name.substr(4);
        name = "TCE";
    }
    if (q.exposure.empty() && name.starts_with("TCE_")) {
        // Case-insensitive node match, e.g. TCE_A1.
        std::string want = name.substr(4);
        std::transform(want.begin(), want.end(), want.begin(), [](unsigned char ch) { return std::tolower(ch); });
        if (spec.has_node(want)) {
            q.exposure = want;
            name = "TCE";
        }
    }
    if (q.exposure.empty()) q.exposure = spec.exposure;
    if (q.exposure.empty() || !spec.has_node(q.exposure)) throw InputError("truth query '" + text + "' has no valid exposure");

    auto parse_blocks = [&] {
        if (args.empty()) throw InputError("truth query '" + text + "' needs mediator columns after '|'");
        for (const auto& block : split(args, ';')) {
            std::vector<std::string> cols;
            for (const auto& c : split(block, ',')) {
                if (c.empty()) continue;
                spec.index(c);
                cols.push_back(c);
            }
            if (cols.empty()) throw InputError("empty mediator block in '" + text + "'");
            q.blocks.push_back(cols);
        }
    };
    auto parse_fixed = [&] {
        if (args.empty()) throw InputError("truth query '" + text + "' needs mediator values after '|'");
        for (const auto& item : split(args, ',')) {
            const auto eq = item.find('=');
            if (eq == std::string::npos) throw InputError("expected m=value in '" + text + "'");
            const std::string col = trim(item.substr(0, eq));
            spec.index(col);
            try {
                q.fixed.emplace_back(col, std::stod(item.substr(eq + 1)));
            } catch (const std::exception&) {
                throw InputError("bad mediator value in '" + text + "'");
            }
        }
    };

    if (name == "TCE") {
        q.kind = TruthQuery::Kind::tce;
    } else if (name == "CDE") {
        q.kind = TruthQuery::Kind::cde;
        parse_fixed();
    } else if (name == "CDM") {
        q.kind = TruthQuery::Kind::cdm;
        parse_fixed();
    } else if (name == "IDE" || name == "IIE" || name == "total") {
        q.kind = name == "IDE" ? TruthQuery::Kind::ide
                 : name == "IIE" ? TruthQuery::Kind::iie
                                 : TruthQuery::Kind::interventional_total;
        parse_blocks();
        if (q.blocks.size() != 1) throw InputError("'" + name + "' takes a single mediator block");
    } else if (name == "IDE_multi" || name == "IIE_all" || name == "remainder") {
        q.kind = name == "IDE_multi" ? TruthQuery::Kind::ide_multi
                 : name == "IIE_all" ? TruthQuery::Kind::iie_all
                                     : TruthQuery::Kind::remainder;
        parse_blocks();
    } else if (name.starts_with("IIE_")) {
        q.kind = TruthQuery::Kind::iie_k;
        try {
            q.block = static_cast<std::size_t>(std::stoul(name.substr(4)));
        } catch (const std::exception&) {
            throw InputError("unknown truth estimand '" + name + "'");
        }
        parse_blocks();
        if (q.block < 1 || q.block > q.blocks.size()) throw InputError("block index out of range in '" + text + "'");
    } else {
        throw InputError("unknown truth estimand '" + name + "'");
    }
    return q;
}

namespace {

void check_query(const DgpSpec& spec, const TruthQuery& q)
{
    if (spec.kind == DgpKind::mr_summary) throw InputError("mr_summary has no structural truths");
    if (spec.outcome.empty()) throw InputError("simulation spec has no outcome");
    const auto x = spec.index(q.exposure);
    if (q.exposure == spec.outcome) throw InputError("exposure and outcome must differ");
    std::vector<std::string> seen;
    for (const auto& b : q.blocks) {
        for (const auto& c : b) {
            if (spec.index(c) == x || c == spec.outcome) throw InputError("mediators must differ from exposure and outcome");
            if (std::find(seen.begin(), seen.end(), c) != seen.end()) throw InputError("mediator '" + c + "' listed twice");
            seen.push_back(c);
        }
    }
    for (const auto& [c, v] : q.fixed) {
        if (spec.index(c) == x || c == spec.outcome) throw InputError("fixed nodes must differ from exposure and outcome");
    }
    if (q.kind == TruthQuery::Kind::cdm && spec.node(q.exposure).kind != ColumnKind::binary) {
        throw InputError("CDM needs a binary exposure");
    }
    const bool multi = q.kind == TruthQuery::Kind::ide_multi || q.kind == TruthQuery::Kind::iie_all ||
                       q.kind == TruthQuery::Kind::iie_k || q.kind == TruthQuery::Kind::remainder;
    if (multi && q.blocks.size() < 2) throw InputError("multi-mediator truths need at least 2 blocks");
}

std::vector<char> descendant_mask(const DgpSpec& spec, std::size_t x)
{
    std::vector<char> desc(spec.nodes.size(), 0);
    desc[x] = 1;
    for (std::size_t j = x + 1; j < spec.nodes.size(); ++j) {
        for (const auto& [term, coef] : spec.nodes[j].terms) {
            for (const auto& c : term.columns) {
                if (desc[spec.index(c)] && coef != 0.0) desc[j] = 1;
            }
        }
    }
    desc[x] = 0;
    return desc;
}

}  // namespace

Truth closed_form_truth(const DgpSpec& spec, const TruthQuery& q)
{
    check_query(spec, q);
    if (q.kind == TruthQuery::Kind::cdm) throw InputError("CDM truths have no closed form here");
    const std::size_t n = spec.nodes.size();
    const std::size_t x = spec.index(q.exposure);
    const std::size_t y = spec.index(spec.outcome);
    const auto desc = descendant_mask(spec, x);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) {
        if (!desc[j]) continue;
        const auto& node = spec.nodes[j];
        if (node.kind != ColumnKind::continuous) {
            throw InputError("closed form needs continuous descendants of the exposure ('" + node.name + "' is binary)");
        }
        for (const auto& [term, coef] : node.terms) {
            if (term.kind == Term::Kind::intercept || coef == 0.0) continue;
            if (term.kind != Term::Kind::main) {
                throw InputError("closed form needs linear main-effect equations ('" + node.name + "' has " +
                                 term.label() + ")");
            }
            B(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(spec.index(term.columns[0]))) += coef;
        }
    }
    const auto I = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    auto total = [&](const Eigen::MatrixXd& b) -> Eigen::MatrixXd { return (I - b).inverse(); };
    const auto X = static_cast<Eigen::Index>(x);
    const auto Y = static_cast<Eigen::Index>(y);
    const double delta = q.exposed - q.reference;

    std::vector<std::size_t> mediators;
    for (const auto& b : q.blocks) {
        for (const auto& c : b) mediators.push_back(spec.index(c));
    }

    Truth t;
    t.closed_form = true;
    switch (q.kind) {
    case TruthQuery::Kind::tce: t.value = delta * total(B)(Y, X); break;
    case TruthQuery::Kind::cde: {
        Eigen::MatrixXd b = B;
        for (const auto& [c, v] : q.fixed) b.row(static_cast<Eigen::Index>(spec.index(c))).setZero();
        t.value = delta * total(b)(Y, X);
        break;
    }
    case TruthQuery::Kind::ide:
    case TruthQuery::Kind::iie:
    case TruthQuery::Kind::interventional_total: {
        Eigen::MatrixXd bx = B;
        double via_g = 0.0;
        for (auto m : mediators) bx(static_cast<Eigen::Index>(m), X) = 0.0;
        const Eigen::MatrixXd tx = total(bx);
        for (auto m : mediators) via_g += B(static_cast<Eigen::Index>(m), X) * tx(Y, static_cast<Eigen::Index>(m));
        const double ide = delta * tx(Y, X);
        const double iie = delta * via_g;
        t.value = q.kind == TruthQuery::Kind::ide ? ide : q.kind == TruthQuery::Kind::iie ? iie : ide + iie;
        break;
    }
    case TruthQuery::Kind::ide_multi:
    case TruthQuery::Kind::iie_all:
    case TruthQuery::Kind::iie_k:
    case TruthQuery::Kind::remainder: {
        const Eigen::MatrixXd full = total(B);
        Eigen::MatrixXd cut = B;
        for (auto m : mediators) cut.row(static_cast<Eigen::Index>(m)).setZero();
        const Eigen::MatrixXd tc = total(cut);
        auto block_effect = [&](const std::vector<std::string>& block) {
            double s = 0.0;
            for (const auto& c : block) {
                const auto m = static_cast<Eigen::Index>(spec.index(c));
                s += tc(Y, m) * full(m, X);
            }
            return delta * s;
        };
        const double ide = delta * tc(Y, X);
        double sum_k = 0.0;
        for (const auto& b : q.blocks) sum_k += block_effect(b);
        if (q.kind == TruthQuery::Kind::ide_multi) t.value = ide;
        if (q.kind == TruthQuery::Kind::iie_all) t.value = sum_k;
        if (q.kind == TruthQuery::Kind::iie_k) t.value = block_effect(q.blocks[q.block - 1]);
        if (q.kind == TruthQuery::Kind::remainder) t.value = delta * full(Y, X) - ide - sum_k;
        break;
    }
    case TruthQuery::Kind::cdm: break;
    }
    return t;
}

Truth monte_carlo_truth(const DgpSpec& spec, const TruthQuery& q, const MonteCarloOptions& mc)
{
    check_query(spec, q);
    if (mc.draws < 2) throw InputError("Monte-Carlo truth needs at least 2 draws");
    const Sem sem(spec);
    const std::size_t k = sem.size();
    const std::size_t x = spec.index(q.exposure);
    const std::size_t y = spec.index(spec.outcome);
    const double a = q.exposed;
    const double a_ref = q.reference;

    // Per-node role in the target world.
    std::vector<int> block_of(k, -1);
    for (std::size_t b = 0; b < q.blocks.size(); ++b) {
        for (const auto& c : q.blocks[b]) block_of[spec.index(c)] = static_cast<int>(b);
    }
    std::vector<char> is_fixed(k, 0);
    std::vector<double> fixed_value(k, 0.0);
    for (const auto& [c, v] : q.fixed) {
        is_fixed[spec.index(c)] = 1;
        fixed_value[spec.index(c)] = v;
    }
    const std::size_t n_blocks = q.blocks.size();

    // Simulates one world in place. exposure < 0 means "natural".
    // Block nodes are copied from `sources[block]` when given, or computed
    // with the exposure input replaced by `draw_exposure` when set.
    struct WorldSpec {
        bool set_exposure = false;
        double exposure = 0.0;
        bool fix_mediators = false;
        const std::vector<const double*>* sources = nullptr;
        bool draw_override = false;
        double draw_exposure = 0.0;
    };
    auto world = [&](std::vector<double>& v, const std::vector<double>& z, const WorldSpec& w) {
        for (std::size_t j = 0; j < k; ++j) {
            if (j == x && w.set_exposure) {
                v[j] = w.exposure;
            } else if (w.fix_mediators && is_fixed[j]) {
                v[j] = fixed_value[j];
            } else if (w.sources && block_of[j] >= 0) {
                v[j] = (*w.sources)[static_cast<std::size_t>(block_of[j])][j];
            } else if (w.draw_override && block_of[j] >= 0) {
                const double saved = v[x];
                v[x] = w.draw_exposure;
                v[j] = sem.value(j, v.data(), z[j]);
                v[x] = saved;
            } else {
                v[j] = sem.value(j, v.data(), z[j]);
            }
        }
    };

    // Per-individual contributions; CDM needs (value, stratum).
    constexpr std::size_t chunk = 4096;
    const std::size_t chunks = (mc.draws + chunk - 1) / chunk;
    struct Acc {
        double sum[2] = {0, 0};
        double sumsq[2] = {0, 0};
        double count[2] = {0, 0};
    };
    std::vector<Acc> acc(chunks);
    const bool is_cdm = q.kind == TruthQuery::Kind::cdm;

    parallel_for(chunks, [&](std::size_t c) {
        Acc local;
        std::vector<double> z(k), v(k), w1(k), w2(k), w3(k), w4(k);
        std::vector<std::vector<double>> zb(n_blocks, std::vector<double>(k));
        std::vector<std::vector<double>> wb_exp(n_blocks, std::vector<double>(k));
        std::vector<std::vector<double>> wb_ref(n_blocks, std::vector<double>(k));
        const std::size_t end = std::min(mc.draws, (c + 1) * chunk);
        for (std::size_t i = c * chunk; i < end; ++i) {
            Rng rng(derive_seed(mc.seed, i));
            for (auto& e : z) e = rng.normal();
            double contribution = 0.0;
            int stratum = 0;
            auto outcome_in = [&](std::vector<double>& buf, const WorldSpec& w) {
                world(buf, z, w);
                return buf[y];
            };
            switch (q.kind) {
            case TruthQuery::Kind::tce:
                contribution = outcome_in(w1, {true, a}) - outcome_in(w2, {true, a_ref});
                break;
            case TruthQuery::Kind::cde:
                contribution = outcome_in(w1, {true, a, true}) - outcome_in(w2, {true, a_ref, true});
                break;
            case TruthQuery::Kind::ide:
            case TruthQuery::Kind::iie:
            case TruthQuery::Kind::interventional_total: {
                auto mu = [&](std::vector<double>& buf, double xv, double g) {
                    WorldSpec w{true, xv};
                    w.draw_override = true;
                    w.draw_exposure = g;
                    return outcome_in(buf, w);
                };
                if (q.kind == TruthQuery::Kind::ide) contribution = mu(w1, a, a_ref) - mu(w2, a_ref, a_ref);
                if (q.kind == TruthQuery::Kind::iie) contribution = mu(w1, a, a) - mu(w2, a, a_ref);
                if (q.kind == TruthQuery::Kind::interventional_total) contribution = mu(w1, a, a) - mu(w2, a_ref, a_ref);
                break;
            }
            case TruthQuery::Kind::ide_multi:
            case TruthQuery::Kind::iie_all:
            case TruthQuery::Kind::iie_k:
            case TruthQuery::Kind::remainder: {
                for (std::size_t b = 0; b < n_blocks; ++b) {
                    for (auto& e : zb[b]) e = rng.normal();
                }
                // Joint mediator worlds share the individual's noise.
                world(w3, z, {true, a});
                world(w4, z, {true, a_ref});
                const std::vector<const double*> joint_exp(n_blocks, w3.data());
                const std::vector<const double*> joint_ref(n_blocks, w4.data());
                auto mu_from = [&](double xv, const std::vector<const double*>& src) {
                    WorldSpec w{true, xv};
                    w.sources = &src;
                    world(v, z, w);
                    return v[y];
                };
                const double ide = mu_from(a, joint_ref) - mu_from(a_ref, joint_ref);
                const double iie_all = mu_from(a, joint_exp) - mu_from(a, joint_ref);
                // Marginal block worlds use independent noise per block.
                for (std::size_t b = 0; b < n_blocks; ++b) {
                    world(wb_exp[b], zb[b], {true, a});
                    world(wb_ref[b], zb[b], {true, a_ref});
                }
                std::vector<const double*> src(n_blocks);
                for (std::size_t b = 0; b < n_blocks; ++b) src[b] = wb_ref[b].data();
                const double base = mu_from(a, src);
                double sum_k = 0.0;
                double this_k = 0.0;
                for (std::size_t b = 0; b < n_blocks; ++b) {
                    src[b] = wb_exp[b].data();
                    const double e = mu_from(a, src) - base;
                    src[b] = wb_ref[b].data();
                    sum_k += e;
                    if (b + 1 == q.block) this_k = e;
                }
                const double tce = outcome_in(w1, {true, a}) - outcome_in(w2, {true, a_ref});
                if (q.kind == TruthQuery::Kind::ide_multi) contribution = ide;
                if (q.kind == TruthQuery::Kind::iie_all) contribution = iie_all;
                if (q.kind == TruthQuery::Kind::iie_k) contribution = this_k;
                if (q.kind == TruthQuery::Kind::remainder) contribution = tce - ide - sum_k;
                break;
            }
            case TruthQuery::Kind::cdm: {
                world(w1, z, {});
                stratum = w1[x] > 0.5 ? 1 : 0;
                contribution = outcome_in(w2, {false, 0.0, true});
                break;
            }
            }
            local.sum[stratum] += contribution;
            local.sumsq[stratum] += contribution * contribution;
            local.count[stratum] += 1.0;
        }
        acc[c] = local;
    });

    Acc total;
    for (const auto& part : acc) {
        for (int s = 0; s < 2; ++s) {
            total.sum[s] += part.sum[s];
            total.sumsq[s] += part.sumsq[s];
            total.count[s] += part.count[s];
        }
    }
    auto mean_var = [&](int s) {
        const double m = total.sum[s] / total.count[s];
        const double var = (total.sumsq[s] - total.count[s] * m * m) / (total.count[s] - 1.0);
        return std::pair{m, std::max(var, 0.0)};
    };
    Truth t;
    if (is_cdm) {
        if (total.count[0] < 2 || total.count[1] < 2) throw EstimationError("CDM truth: an exposure stratum is empty");
        const auto [m1, v1] = mean_var(1);
        const auto [m0, v0] = mean_var(0);
        t.value = m1 - m0;
        t.mc_se = std::sqrt(v1 / total.count[1] + v0 / total.count[0]);
    } else {
        const auto [m, var] = mean_var(0);
        t.value = m;
        t.mc_se = std::sqrt(var / total.count[0]);
    }
    return t;
}

Truth evaluate_truth(const DgpSpec& spec, const TruthQuery& q, const MonteCarloOptions& mc)
{
    if (q.kind != TruthQuery::Kind::cdm) {
        try {
            return closed_form_truth(spec, q);
        } catch (const InputError&) {
            check_query(spec, q);
        }
    }
    return monte_carlo_truth(spec, q, mc);
}

double truth(const DgpSpec& spec, const std::string& estimand)
{
    return evaluate_truth(spec, parse_truth_query(estimand, spec)).value;
}

std::vector<std::string> default_truth_queries(const DgpSpec& spec)
{
    switch (spec.kind) {
    case DgpKind::linear_chain: return {"TCE:a1", "CDE:a1|a2=0", "IDE:a1|a2", "IIE:a1|a2"};
    case DgpKind::three_node: return {"TCE:a1", "IDE:a1|a2", "IIE:a1|a2"};
    case DgpKind::parallel_mediators:
        return {"TCE:a", "IDE_multi:a|m1;m2", "IIE_1:a|m1;m2", "IIE_2:a|m1;m2", "remainder:a|m1;m2"};
    case DgpKind::lifecourse: return {"TCE:a1", "TCE:a2", "CDE:a1|a2=-1", "CDE:a1|a2=0", "CDE:a1|a2=1"};
    case DgpKind::disparity: return {"TCE:a", "CDM:a|m=0", "CDM:a|m=1"};
    case DgpKind::alspac_like: {
        const std::string blocks = "|bmi7,bmi8,bmi9;bmi10,bmi11,bmi12";
        return {"TCE:bw", "CDE:bw|bmi12=0", "IDE_multi:bw" + blocks, "IIE_1:bw" + blocks, "IIE_2:bw" + blocks,
                "remainder:bw" + blocks};
    }
    case DgpKind::alspac_growth: return {"TCE:bw", "IIE_1:bw|size;vel", "IIE_2:bw|size;vel"};
    case DgpKind::twin_pairs: return {"TCE:x"};
    case DgpKind::iv_encouragement: return {"TCE:a"};
    case DgpKind::exposure_error: return {"TCE:x_true"};
    case DgpKind::mediator_error: return {"TCE:a", "IDE:a|m_true", "IIE:a|m_true"};
    case DgpKind::mr_summary: return {};
    }
    return {};
}

}  // namespace lcausal
