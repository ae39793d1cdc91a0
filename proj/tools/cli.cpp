#include "cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "lcausal/dag.hpp"
#include "lcausal/error.hpp"
#include "lcausal/estimands.hpp"
#include "lcausal/frame.hpp"
#include "lcausal/iv.hpp"
#include "lcausal/lifecourse.hpp"
#include "lcausal/merr.hpp"
#include "lcausal/parallel.hpp"
#include "lcausal/resample.hpp"
#include "lcausal/simgen.hpp"
#include "lcausal/stats.hpp"
#include "lcausal/twin.hpp"

namespace lcausal::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string sha256_hex(const std::string& bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 failed");
    }
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

namespace {

constexpr const char* schema_version = "1";

/// Options shared by the config-driven subcommands.
struct Options {
    std::string config_path;
    std::string out_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> boot;
    std::string ci;
    std::optional<double> level;
    std::string reliability;
    std::string growth_from;
    std::string ages;
    std::optional<double> center;
    std::string mode;
    std::string method;
    unsigned threads = 0;
};

struct Loaded {
    json config;
    fs::path base_dir;
    std::string digest;
};

// ---------------------------------------------------------------- config

Loaded load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config '" + path + "'");
    Loaded l;
    try {
        l.config = json::parse(in);
    } catch (const json::exception& e) {
        throw InputError("config '" + path + "' is not valid JSON: " + e.what());
    }
    if (!l.config.is_object()) throw InputError("config must be a JSON object");
    l.base_dir = fs::path(path).parent_path();
    l.digest = sha256_hex(l.config.dump());
    return l;
}

const json& require(const json& obj, const std::string& key, const std::string& where)
{
    if (!obj.is_object() || !obj.contains(key)) throw InputError(where + ": missing '" + key + "'");
    return obj.at(key);
}

template <class T>
T get_or(const json& obj, const std::string& key, T fallback)
{
    if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw InputError("bad value for '" + key + "': " + e.what());
    }
}

std::vector<std::string> strings(const json& obj, const std::string& key)
{
    return get_or<std::vector<std::string>>(obj, key, {});
}

std::vector<std::string> split_list(const std::string& text)
{
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<double> split_numbers(const std::string& text)
{
    std::vector<double> out;
    for (const auto& s : split_list(text)) {
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (end != s.c_str() + s.size()) throw InputError("cannot parse number '" + s + "'");
        out.push_back(v);
    }
    return out;
}

fs::path resolve(const Loaded& l, const std::string& p)
{
    const fs::path path(p);
    return path.is_absolute() ? path : l.base_dir / path;
}

std::string analysis_key(const json& config)
{
    const json& a = require(config, "analysis", "config");
    if (!a.is_object() || a.size() != 1) {
        throw InputError("'analysis' must hold exactly one block (estimand, lifecourse, twin, iv or dag)");
    }
    return a.begin().key();
}

const json& analysis_block(const json& config, const std::string& expected)
{
    const std::string key = analysis_key(config);
    if (key != expected) throw InputError("this command expects an '" + expected + "' analysis block, found '" + key + "'");
    return config.at("analysis").at(key);
}

// ---------------------------------------------------------------- data

struct Data {
    Frame frame;
    std::size_t dropped = 0;
    std::string path;
};

Schema parse_schema(const json& s)
{
    Schema schema;
    if (s.is_object()) {
        for (const auto& [name, kind] : s.items()) schema.emplace_back(name, parse_schema_kind(kind.get<std::string>()));
    } else if (s.is_array()) {
        for (const auto& entry : s) {
            schema.emplace_back(entry.at(0).get<std::string>(), parse_schema_kind(entry.at(1).get<std::string>()));
        }
    } else {
        throw InputError("data.schema must be an object or a list of [name, kind] pairs");
    }
    if (schema.empty()) throw InputError("data.schema is empty");
    return schema;
}

void apply_growth(Frame& f, const std::vector<std::string>& cols, const std::vector<double>& ages, double center,
                  const std::string& size_name, const std::string& velocity_name)
{
    f = extract_growth(f, cols, ages, center, size_name, velocity_name);
}

Data load_data(const Loaded& l, const Options& opt)
{
    const json& d = require(l.config, "data", "config");
    Data out;
    out.path = require(d, "path", "data").get<std::string>();
    auto loaded = load_frame(resolve(l, out.path).string(), parse_schema(require(d, "schema", "data")));
    out.frame = std::move(loaded.frame);
    out.dropped = loaded.dropped_rows;

    for (const auto& t : get_or<json>(l.config, "transforms", json::array())) {
        if (!t.is_object() || t.size() != 1) throw InputError("each transform must be a single-key object");
        const std::string kind = t.begin().key();
        const json& arg = t.begin().value();
        if (kind == "standardize") {
            out.frame = standardize(out.frame, arg.get<std::vector<std::string>>()).first;
        } else if (kind == "log") {
            out.frame = log_transform(out.frame, arg.get<std::vector<std::string>>());
        } else if (kind == "growth") {
            apply_growth(out.frame, require(arg, "columns", "growth").get<std::vector<std::string>>(),
                         require(arg, "ages", "growth").get<std::vector<double>>(),
                         require(arg, "center", "growth").get<double>(), get_or<std::string>(arg, "size", "size"),
                         get_or<std::string>(arg, "velocity", "velocity"));
        } else {
            throw InputError("unknown transform '" + kind + "'");
        }
    }
    if (!opt.growth_from.empty()) {
        if (opt.ages.empty() || !opt.center) throw InputError("--growth-from needs --ages and --center");
        apply_growth(out.frame, split_list(opt.growth_from), split_numbers(opt.ages), *opt.center, "size", "velocity");
    }
    return out;
}

// ---------------------------------------------------------------- output

json number(double v)
{
    if (!std::isfinite(v)) return nullptr;
    return v;
}

json estimates_json(const EffectEstimate& e)
{
    json out = json::object();
    for (const auto& [name, c] : e.components) {
        out[name] = {{"point", number(c.point)}, {"se", number(c.se)}, {"ci_low", number(c.ci_low)},
                     {"ci_high", number(c.ci_high)}};
    }
    return out;
}

json diagnostics_json(const Diagnostics& d)
{
    json values = json::object();
    for (const auto& [k, v] : d.values) values[k] = number(v);
    return {{"values", values}, {"warnings", d.warnings}, {"notes", d.notes}};
}

json options_json(const Options& opt)
{
    json o = json::object();
    if (opt.boot) o["boot"] = *opt.boot;
    if (!opt.ci.empty()) o["ci"] = opt.ci;
    if (opt.level) o["level"] = *opt.level;
    if (!opt.reliability.empty()) o["reliability"] = opt.reliability;
    if (!opt.growth_from.empty()) {
        o["growth_from"] = opt.growth_from;
        o["ages"] = opt.ages;
        if (opt.center) o["center"] = *opt.center;
    }
    if (!opt.mode.empty()) o["mode"] = opt.mode;
    if (!opt.method.empty()) o["method"] = opt.method;
    return o;
}

json base_result(const std::string& command, std::optional<std::uint64_t> seed, const std::string& digest,
                 const Options& opt)
{
    json r;
    r["meta"] = {{"version", LCAUSAL_VERSION},
                 {"schema_version", schema_version},
                 {"command", command},
                 {"seed", seed ? json(*seed) : json(nullptr)},
                 {"config_digest", digest},
                 {"options", options_json(opt)}};
    return r;
}

void write_result(const json& result, const Loaded* l, const Options& opt, std::ostream& out)
{
    std::string path = opt.out_path;
    if (path.empty() && l) {
        const std::string configured = get_or<std::string>(l->config, "output", "");
        if (!configured.empty()) path = resolve(*l, configured).string();
    }
    const std::string text = result.dump(2) + "\n";
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write result to '" + path + "'");
    f << text;
}

// ---------------------------------------------------------------- inference

std::optional<BootstrapPlan> bootstrap_plan(const Loaded& l, const Options& opt, std::uint64_t seed,
                                            ResampleMode default_mode)
{
    const json b = get_or<json>(l.config, "bootstrap", json::object());
    const std::size_t replicates = opt.boot ? *opt.boot : get_or<std::size_t>(b, "replicates", 0);
    if (replicates == 0) return std::nullopt;
    BootstrapPlan plan;
    plan.replicates = replicates;
    plan.master_seed = seed;
    plan.mode = b.contains("mode") ? parse_resample_mode(b.at("mode").get<std::string>()) : default_mode;
    plan.ci = parse_ci_method(!opt.ci.empty() ? opt.ci : get_or<std::string>(b, "ci", "percentile"));
    plan.level = opt.level ? *opt.level : get_or<double>(b, "level", 0.95);
    plan.max_failure_share = get_or<double>(b, "max_failure_share", 0.10);
    plan.validate();
    return plan;
}

json inference_json(const std::optional<BootstrapPlan>& plan, const BootstrapResult* r)
{
    if (!plan) return {{"method", "model"}};
    return {{"method", "bootstrap"},
            {"replicates", plan->replicates},
            {"mode", to_string(plan->mode)},
            {"ci", to_string(plan->ci)},
            {"level", plan->level},
            {"failures", r ? r->failures : 0}};
}

/// Runs the statistic once, or under the bootstrap when a plan is given.
EffectEstimate infer(const std::optional<BootstrapPlan>& plan, const Frame& f, std::uint64_t seed,
                     const Statistic& stat, json& inference)
{
    if (!plan) {
        inference = inference_json(plan, nullptr);
        return stat(f, seed);
    }
    const BootstrapResult r = bootstrap(*plan, f, stat);
    inference = inference_json(plan, &r);
    return r.estimate;
}

// ---------------------------------------------------------------- estimate

Family family_for(const Frame& f, const std::string& response)
{
    return f.has(response) && f.kind(response) == ColumnKind::binary ? Family::binomial : Family::gaussian;
}

ModelSpec model_from(const json& j, const Frame& f)
{
    if (j.is_string()) {
        const std::string formula = j.get<std::string>();
        const auto tilde = formula.find('~');
        std::string response = formula.substr(0, tilde == std::string::npos ? 0 : tilde);
        response.erase(0, response.find_first_not_of(" \t"));
        response.erase(response.find_last_not_of(" \t") + 1);
        return ModelSpec::parse(formula, family_for(f, response));
    }
    const std::string formula = require(j, "formula", "model").get<std::string>();
    ModelSpec m = ModelSpec::parse(formula);
    m.family = j.contains("family") ? parse_family(j.at("family").get<std::string>()) : family_for(f, m.response);
    return m;
}

ModelSpec default_model(const std::string& response, const std::vector<std::string>& regressors, const Frame& f)
{
    ModelSpec m;
    m.response = response;
    m.family = family_for(f, response);
    m.terms.push_back(Term::intercept());
    for (const auto& r : regressors) m.terms.push_back(Term::main(r));
    return m;
}

template <class... Lists>
std::vector<std::string> concat(const Lists&... lists)
{
    std::vector<std::string> out;
    (out.insert(out.end(), lists.begin(), lists.end()), ...);
    return out;
}

EstimandRequest parse_request(const json& j, const Frame& f)
{
    EstimandRequest r;
    r.kind = parse_estimand_kind(require(j, "kind", "estimand").get<std::string>());
    r.exposure = require(j, "exposure", "estimand").get<std::string>();
    r.exposed_level = get_or<double>(j, "exposed", 1.0);
    r.reference_level = get_or<double>(j, "reference", 0.0);
    r.baseline_confounders = strings(j, "confounders");
    r.intermediate_confounders = strings(j, "intermediate_confounders");
    r.mc_draws = get_or<std::size_t>(j, "mc_draws", r.mc_draws);
    r.mediator_blocks = get_or<std::vector<std::vector<std::string>>>(j, "mediator_blocks", {});
    if (r.mediator_blocks.empty() && j.contains("mediators")) r.mediator_blocks = {strings(j, "mediators")};
    r.fixed_mediator_values = get_or<std::vector<std::map<std::string, double>>>(j, "fixed", {});

    const auto& C = r.baseline_confounders;
    const auto& L = r.intermediate_confounders;
    const auto mediators = r.mediators();
    if (j.contains("outcome_model")) {
        r.outcome_model = model_from(j.at("outcome_model"), f);
    } else {
        const std::string y = require(j, "outcome", "estimand (without outcome_model)").get<std::string>();
        r.outcome_model = r.kind == EstimandKind::tce ? default_model(y, concat(std::vector{r.exposure}, C), f)
                                                      : default_model(y, concat(std::vector{r.exposure}, mediators, C, L), f);
    }
    if (j.contains("mediator_models")) {
        for (const auto& m : j.at("mediator_models")) r.mediator_models.push_back(model_from(m, f));
    } else if (r.kind == EstimandKind::interventional || r.kind == EstimandKind::interventional_multi ||
               r.kind == EstimandKind::sem_paths) {
        std::vector<std::string> earlier;
        for (const auto& m : mediators) {
            r.mediator_models.push_back(default_model(m, concat(std::vector{r.exposure}, C, L, earlier), f));
            earlier.push_back(m);
        }
    }
    if (j.contains("intermediate_models")) {
        for (const auto& m : j.at("intermediate_models")) r.intermediate_models.push_back(model_from(m, f));
    } else {
        std::vector<std::string> earlier;
        for (const auto& l : L) {
            r.intermediate_models.push_back(default_model(l, concat(std::vector{r.exposure}, C, earlier), f));
            earlier.push_back(l);
        }
    }
    if (j.contains("total_model")) r.total_model = model_from(j.at("total_model"), f);
    r.validate();
    return r;
}

/// Applies a reliability correction to an estimate in place.
void correct(EffectEstimate& e, EstimandKind kind, const Reliability& rel, bool model_se)
{
    if (kind == EstimandKind::tce) {
        auto& c = e.at("TCE");
        c = model_se ? disattenuate(c, rel) : ComponentEstimate{disattenuate(c.point, rel)};
    } else if (kind == EstimandKind::interventional) {
        const auto fixed = correct_indirect(e.point("total"), e.point("IIE"), rel);
        e.at("IIE") = ComponentEstimate{fixed.iie};
        e.at("IDE") = ComponentEstimate{fixed.direct};
    } else {
        throw InputError("--reliability applies to TCE (mismeasured exposure) or INTERVENTIONAL (mismeasured mediator) only");
    }
}

json run_estimate(const Loaded& l, const Options& opt)
{
    if (!opt.seed) throw InputError("estimate requires --seed");
    const std::uint64_t seed = *opt.seed;
    const Data data = load_data(l, opt);
    const EstimandRequest req = parse_request(analysis_block(l.config, "estimand"), data.frame);
    std::optional<Reliability> rel;
    if (!opt.reliability.empty()) rel = Reliability::parse(opt.reliability);
    if (rel && req.kind != EstimandKind::tce && req.kind != EstimandKind::interventional) {
        throw InputError("--reliability applies to TCE (mismeasured exposure) or INTERVENTIONAL (mismeasured mediator) only");
    }

    const auto plan = bootstrap_plan(l, opt, seed, data.frame.has_clusters() ? ResampleMode::cluster : ResampleMode::iid);
    const Statistic stat = [&](const Frame& g, std::uint64_t s) {
        EffectEstimate e = estimate(req, g, s);
        if (rel) correct(e, req.kind, *rel, !plan.has_value());
        return e;
    };
    json inference;
    const EffectEstimate e = infer(plan, data.frame, seed, stat, inference);
    if (rel && req.kind == EstimandKind::interventional) {
        inference["note"] = "mediator correction assumes a linear mediator and outcome";
    }

    json r = base_result("estimate", seed, l.digest, opt);
    r["data"] = {{"path", data.path}, {"n_rows", data.frame.n_rows()}, {"dropped_rows", data.dropped}};
    r["analysis"] = {{"kind", to_string(req.kind)}, {"exposure", req.exposure}, {"outcome", req.outcome()}};
    r["inference"] = inference;
    r["estimates"] = estimates_json(e);
    r["diagnostics"] = diagnostics_json(e.diagnostics);
    return r;
}

// ---------------------------------------------------------------- lifecourse

json test_json(const ConstraintTest& t, double level)
{
    return {{"statistic", number(t.statistic)}, {"df1", t.df1}, {"df2", t.df2}, {"p_value", number(t.p_value)},
            {"rejected", t.p_value < level}};
}

json run_lifecourse(const Loaded& l, const Options& opt)
{
    const std::uint64_t seed = opt.seed ? *opt.seed : get_or<std::uint64_t>(l.config, "seed", 1);
    const Data data = load_data(l, opt);
    const json& j = analysis_block(l.config, "lifecourse");
    const std::string a1 = require(j, "a1", "lifecourse").get<std::string>();
    const std::string a2 = require(j, "a2", "lifecourse").get<std::string>();
    const std::string y = require(j, "outcome", "lifecourse").get<std::string>();
    const auto C = strings(j, "confounders");
    const double alpha = get_or<double>(j, "alpha", 0.05);
    const LifecourseVerdict v = compare_nested(data.frame, a1, a2, y, C, alpha);

    EffectEstimate coefs;
    const double q = normal_quantile(0.975);
    for (const auto& term : v.fitted_full.spec().terms) {
        const std::string label = term.label();
        ComponentEstimate c{v.fitted_full.coefficient(label), v.fitted_full.std_error(label)};
        c.ci_low = c.point - q * c.se;
        c.ci_high = c.point + q * c.se;
        coefs.components.emplace_back(label, c);
    }
    json tests = json::object();
    for (const char* name : {"no_synergy", "cumulative", "critical_1", "critical_2"}) {
        tests[name] = test_json(v.submodel_tests.at(name), v.test_level);
    }
    json verdict = {{"classification", v.classification},
                    {"alpha", v.alpha},
                    {"test_level", v.test_level},
                    {"beta1", number(v.beta1())},
                    {"beta2", number(v.beta2())},
                    {"beta3", number(v.beta3())},
                    {"tests", tests}};

    json r = base_result("lifecourse", opt.seed ? std::optional(seed) : std::nullopt, l.digest, opt);
    r["data"] = {{"path", data.path}, {"n_rows", data.frame.n_rows()}, {"dropped_rows", data.dropped}};
    r["analysis"] = {{"a1", a1}, {"a2", a2}, {"outcome", y}};
    r["verdict"] = verdict;
    r["estimates"] = estimates_json(coefs);
    Diagnostics diag;
    diag.set("n", static_cast<double>(data.frame.n_rows()));

    const auto levels = get_or<std::vector<double>>(j, "a2_levels", {});
    if (!levels.empty()) {
        const auto plan = bootstrap_plan(l, opt, seed, ResampleMode::iid);
        const Statistic stat = [&](const Frame& g, std::uint64_t) { return lifecourse_estimands(g, a1, a2, y, C, levels); };
        json inference;
        const EffectEstimate e = infer(plan, data.frame, seed, stat, inference);
        std::vector<ComponentEstimate> cde1;
        for (const auto& [name, c] : e.components) {
            if (name != "TCE2") cde1.push_back(c);
        }
        r["inference"] = inference;
        r["estimand_evidence"] = {{"classification", classify_by_estimands(cde1, e.at("TCE2"))},
                                  {"estimates", estimates_json(e)}};
    } else {
        r["inference"] = {{"method", "model"}};
    }
    r["diagnostics"] = diagnostics_json(diag);
    return r;
}

// ---------------------------------------------------------------- twin

json run_twin(const Loaded& l, const Options& opt)
{
    const std::uint64_t seed = opt.seed ? *opt.seed : get_or<std::uint64_t>(l.config, "seed", 1);
    const Data data = load_data(l, opt);
    const json& j = analysis_block(l.config, "twin");
    const std::string x = require(j, "exposure", "twin").get<std::string>();
    const std::string y = require(j, "outcome", "twin").get<std::string>();
    const std::string v = get_or<std::string>(j, "covariate", "");
    const auto covariates = strings(j, "covariates");
    const std::string mode = !opt.mode.empty() ? opt.mode : get_or<std::string>(j, "mode", "bw");

    Statistic stat;
    if (mode == "naive") {
        stat = [&](const Frame& g, std::uint64_t) { return naive_clustered(g, x, y, covariates); };
    } else if (mode == "bw") {
        const CovariateMode cm = v.empty() ? CovariateMode::none : CovariateMode::target_only;
        stat = [&, cm](const Frame& g, std::uint64_t) { return between_within(g, x, y, cm, v); };
    } else if (mode == "bw-cotwin") {
        if (v.empty()) throw InputError("--mode bw-cotwin needs a 'covariate' in the twin block");
        stat = [&](const Frame& g, std::uint64_t) { return between_within(g, x, y, CovariateMode::both_twins, v); };
    } else {
        throw InputError("unknown twin mode '" + mode + "' (naive, bw, bw-cotwin)");
    }
    validate_pairs(data.frame);
    const auto plan = bootstrap_plan(l, opt, seed, ResampleMode::cluster);
    if (plan && plan->mode != ResampleMode::cluster) throw InputError("twin bootstrap must resample whole pairs (mode cluster)");
    json inference;
    const EffectEstimate e = infer(plan, data.frame, seed, stat, inference);

    json r = base_result("twin", opt.seed ? std::optional(seed) : std::nullopt, l.digest, opt);
    r["data"] = {{"path", data.path}, {"n_rows", data.frame.n_rows()}, {"dropped_rows", data.dropped}};
    r["analysis"] = {{"mode", mode}, {"exposure", x}, {"outcome", y}, {"covariate", v.empty() ? json(nullptr) : json(v)}};
    r["inference"] = inference;
    r["estimates"] = estimates_json(e);
    r["diagnostics"] = diagnostics_json(e.diagnostics);
    return r;
}

// ---------------------------------------------------------------- iv

json run_iv(const Loaded& l, const Options& opt)
{
    const std::uint64_t seed = opt.seed ? *opt.seed : get_or<std::uint64_t>(l.config, "seed", 1);
    const json& j = analysis_block(l.config, "iv");
    const std::string method = !opt.method.empty() ? opt.method : get_or<std::string>(j, "method", "tsls");
    json r = base_result("iv", opt.seed ? std::optional(seed) : std::nullopt, l.digest, opt);

    if (method == "mr-egger" || method == "mr_egger") {
        const json& d = require(l.config, "data", "config");
        const std::string path = require(d, "path", "data").get<std::string>();
        const MrSummary s = load_mr_summary(resolve(l, path).string());
        const EffectEstimate e = mr_egger(s, get_or<double>(j, "level", 0.95));
        r["data"] = {{"path", path}, {"n_rows", s.size()}, {"dropped_rows", 0}};
        r["analysis"] = {{"method", "mr-egger"}};
        r["inference"] = {{"method", "model"}};
        r["estimates"] = estimates_json(e);
        r["diagnostics"] = diagnostics_json(e.diagnostics);
        return r;
    }

    const Data data = load_data(l, opt);
    const std::string a = require(j, "exposure", "iv").get<std::string>();
    const std::string y = require(j, "outcome", "iv").get<std::string>();
    Statistic stat;
    if (method == "wald") {
        const std::string z = require(j, "instrument", "iv").get<std::string>();
        stat = [=](const Frame& g, std::uint64_t) { return wald_ratio(g, z, a, y); };
    } else if (method == "tsls") {
        auto zs = strings(j, "instruments");
        if (zs.empty() && j.contains("instrument")) zs = {j.at("instrument").get<std::string>()};
        const auto covariates = strings(j, "covariates");
        stat = [=](const Frame& g, std::uint64_t) { return tsls(g, zs, a, y, covariates); };
    } else {
        throw InputError("unknown iv method '" + method + "' (wald, tsls, mr-egger)");
    }
    const auto plan = bootstrap_plan(l, opt, seed, data.frame.has_clusters() ? ResampleMode::cluster : ResampleMode::iid);
    json inference;
    const EffectEstimate e = infer(plan, data.frame, seed, stat, inference);
    r["data"] = {{"path", data.path}, {"n_rows", data.frame.n_rows()}, {"dropped_rows", data.dropped}};
    r["analysis"] = {{"method", method}, {"exposure", a}, {"outcome", y}};
    r["inference"] = inference;
    r["estimates"] = estimates_json(e);
    r["diagnostics"] = diagnostics_json(e.diagnostics);
    return r;
}

// ---------------------------------------------------------------- dag

std::string read_text(const fs::path& p)
{
    std::ifstream in(p);
    if (!in) throw InputError("cannot open '" + p.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct DagQuery {
    std::string exposure, outcome;
    std::vector<std::string> dsep;
    std::vector<std::string> given;
};

json run_dag(const std::string& input, const DagQuery& cli_query, const Options& opt, std::ostream& out)
{
    std::string text;
    DagQuery q = cli_query;
    std::string digest;
    std::optional<Loaded> l;
    if (fs::path(input).extension() == ".json") {
        l = load_config(input);
        const json& j = analysis_block(l->config, "dag");
        text = j.contains("graph") ? j.at("graph").get<std::string>()
                                   : read_text(resolve(*l, require(j, "graph_file", "dag").get<std::string>()));
        if (q.exposure.empty()) q.exposure = get_or<std::string>(j, "exposure", "");
        if (q.outcome.empty()) q.outcome = get_or<std::string>(j, "outcome", "");
        if (q.dsep.empty()) q.dsep = strings(j, "dsep");
        if (q.given.empty()) q.given = strings(j, "given");
        digest = l->digest;
    } else {
        text = read_text(input);
        digest = sha256_hex(text);
    }
    const CausalDag g = CausalDag::parse(text);

    json r = base_result("dag", std::nullopt, digest, opt);
    json result = {{"nodes", g.nodes()}, {"latent", g.latent()}, {"selected", g.selected()}};
    if (!q.exposure.empty() || !q.outcome.empty()) {
        if (q.exposure.empty() || q.outcome.empty()) throw InputError("backdoor queries need both --exposure and --outcome");
        json sets = json::array();
        for (const auto& s : backdoor_adjustment_sets(g, q.exposure, q.outcome)) sets.push_back(s);
        result["backdoor"] = {{"exposure", q.exposure},
                              {"outcome", q.outcome},
                              {"identifiable", !sets.empty()},
                              {"minimal_sets", sets}};
    }
    if (!q.dsep.empty()) {
        if (q.dsep.size() != 2) throw InputError("--dsep takes exactly two nodes, e.g. --dsep x,y");
        const NodeSet z(q.given.begin(), q.given.end());
        result["d_separation"] = {{"x", q.dsep[0]}, {"y", q.dsep[1]}, {"given", z},
                                  {"separated", d_separated(g, q.dsep[0], q.dsep[1], z)}};
    }
    r["dag"] = result;
    write_result(r, l ? &*l : nullptr, opt, out);
    return r;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string kind;
    std::size_t n = 1000;
    std::uint64_t seed = 1;
    std::string out;
    std::vector<std::string> sets;
    std::string truth_out;
};

void run_simulate(const SimulateArgs& a, std::ostream& out)
{
    DgpSpec spec = make_dgp(a.kind);
    spec.n = a.n;
    spec.seed = a.seed;
    for (const auto& kv : a.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw InputError("--set expects key=value, got '" + kv + "'");
        char* end = nullptr;
        const std::string value = kv.substr(eq + 1);
        const double v = std::strtod(value.c_str(), &end);
        if (value.empty() || end != value.c_str() + value.size()) throw InputError("--set value is not a number: '" + kv + "'");
        spec.set(kv.substr(0, eq), v);
    }
    spec.validate();

    std::ofstream file(a.out, std::ios::binary);
    if (!file) throw InputError("cannot write '" + a.out + "'");
    if (spec.kind == DgpKind::mr_summary) {
        write_mr_summary(file, generate_mr(spec));
    } else {
        write_csv(file, generate(spec), spec.kind == DgpKind::twin_pairs ? "pair_id" : "");
    }

    if (!a.truth_out.empty()) {
        json truths = json::object();
        for (const auto& name : default_truth_queries(spec)) {
            const Truth t = evaluate_truth(spec, parse_truth_query(name, spec));
            truths[name] = {{"value", t.value}, {"mc_se", t.mc_se}, {"closed_form", t.closed_form}};
        }
        json doc = {{"kind", a.kind}, {"n", a.n}, {"seed", a.seed}, {"truth", truths}};
        if (a.truth_out == "-") {
            out << doc.dump(2) << "\n";
        } else {
            std::ofstream t(a.truth_out, std::ios::binary);
            if (!t) throw InputError("cannot write '" + a.truth_out + "'");
            t << doc.dump(2) << "\n";
        }
    }
}

// ---------------------------------------------------------------- wiring

void add_common(CLI::App* sub, Options& opt, bool seed_required)
{
    sub->add_option("config", opt.config_path, "Analysis config (JSON)")->required();
    sub->add_option("--out,-o", opt.out_path, "Result file (default: config 'output', else stdout)");
    auto* seed = sub->add_option("--seed", opt.seed, "Master seed for every random draw");
    if (seed_required) seed->required();
    sub->add_option("--boot", opt.boot, "Bootstrap replicates (0 = model-based inference)");
    sub->add_option("--ci", opt.ci, "Bootstrap interval: percentile or normal");
    sub->add_option("--level", opt.level, "Confidence level");
    sub->add_option("--growth-from", opt.growth_from, "Comma-separated repeated measures to summarize as size/velocity");
    sub->add_option("--ages", opt.ages, "Comma-separated ages of the --growth-from columns");
    sub->add_option("--center", opt.center, "Centering age for the size feature");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Causal effect estimation for life course data", "lcausal"};
    app.require_subcommand(1);
    app.set_version_flag("--version", LCAUSAL_VERSION);
    Options opt;
    app.add_option("--threads", opt.threads, "Worker threads (0 = LCAUSAL_THREADS or hardware)");

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic data set");
    simulate->add_option("--kind", sim.kind, "DGP kind, optionally kind:variant")->required();
    simulate->add_option("--n", sim.n, "Rows (pairs for twin_pairs, variants for mr_summary)");
    simulate->add_option("--seed", sim.seed, "Seed");
    simulate->add_option("--out,-o", sim.out, "Output file")->required();
    simulate->add_option("--set", sim.sets, "Override a DGP parameter, e.g. y<-a1=0.2");
    simulate->add_option("--truth", sim.truth_out, "Write true estimand values as JSON ('-' for stdout)");

    auto* est = app.add_subcommand("estimate", "Estimate a causal estimand");
    add_common(est, opt, true);
    est->add_option("--reliability", opt.reliability, "Reliability r[,se] of the mismeasured variable");

    auto* lc = app.add_subcommand("lifecourse", "Select among life-course models");
    add_common(lc, opt, false);

    auto* tw = app.add_subcommand("twin", "Twin-pair regressions");
    add_common(tw, opt, false);
    tw->add_option("--mode", opt.mode, "naive, bw or bw-cotwin")->check(CLI::IsMember({"naive", "bw", "bw-cotwin"}));

    auto* ivc = app.add_subcommand("iv", "Instrumental-variable estimators");
    add_common(ivc, opt, false);
    ivc->add_option("--method", opt.method, "wald, tsls or mr-egger")->check(CLI::IsMember({"wald", "tsls", "mr-egger"}));

    std::string dag_input;
    DagQuery dq;
    std::string dsep, given;
    auto* dagc = app.add_subcommand("dag", "Query a causal graph");
    dagc->add_option("graph", dag_input, "Graph text file, or a JSON config with a dag block")->required();
    dagc->add_option("--exposure", dq.exposure, "Exposure for backdoor sets");
    dagc->add_option("--outcome", dq.outcome, "Outcome for backdoor sets");
    dagc->add_option("--dsep", dsep, "Two nodes x,y to test for d-separation");
    dagc->add_option("--given", given, "Comma-separated conditioning set");
    dagc->add_option("--out,-o", opt.out_path, "Result file (default stdout)");

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream msg;
        const int code = app.exit(e, out, msg);
        err << msg.str();
        return code == 0 ? ExitCode::ok : ExitCode::config_error;
    }

    try {
        set_thread_count(opt.threads);
        if (simulate->parsed()) {
            run_simulate(sim, out);
        } else if (dagc->parsed()) {
            dq.dsep = split_list(dsep);
            dq.given = split_list(given);
            run_dag(dag_input, dq, opt, out);
        } else {
            const Loaded l = load_config(opt.config_path);
            json r;
            if (est->parsed()) r = run_estimate(l, opt);
            else if (lc->parsed()) r = run_lifecourse(l, opt);
            else if (tw->parsed()) r = run_twin(l, opt);
            else r = run_iv(l, opt);
            write_result(r, &l, opt, out);
        }
        return ExitCode::ok;
    } catch (const InputError& e) {
        err << "lcausal: config error: " << e.what() << "\n";
        return ExitCode::config_error;
    } catch (const json::exception& e) {
        err << "lcausal: config error: " << e.what() << "\n";
        return ExitCode::config_error;
    } catch (const BootstrapAbort& e) {
        err << "lcausal: bootstrap aborted: " << e.what() << "\n";
        return ExitCode::bootstrap_abort;
    } catch (const EstimationError& e) {
        err << "lcausal: estimation failed: " << e.what() << "\n";
        return ExitCode::estimation_error;
    } catch (const std::exception& e) {
        err << "lcausal: error: " << e.what() << "\n";
        return ExitCode::internal_error;
    }
}

}  // namespace lcausal::cli
