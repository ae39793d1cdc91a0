#include "lcausal/regress.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lcausal/error.hpp"

namespace lcausal {

std::string to_string(Family family) { return family == Family::binomial ? "binomial" : "gaussian"; }

Family parse_family(const std::string& text)
{
    if (text == "gaussian" || text == "gaussian-identity" || text == "linear") return Family::gaussian;
    if (text == "binomial" || text == "binomial-logit" || text == "logit" || text == "logistic") {
        return Family::binomial;
    }
    throw InputError("unknown model family '" + text + "'");
}

CovKind parse_cov_kind(const std::string& text)
{
    if (text == "model") return CovKind::model;
    if (text == "robust") return CovKind::robust;
    if (text == "cluster") return CovKind::cluster;
    throw InputError("unknown covariance kind '" + text + "'");
}

Term Term::power(std::string col, int k)
{
    if (k < 2) throw InputError("power term needs exponent >= 2");
    return {Kind::power, {std::move(col)}, k};
}

std::string Term::label() const
{
    switch (kind) {
    case Kind::intercept: return "1";
    case Kind::main: return columns[0];
    case Kind::power: return columns[0] + "^" + std::to_string(exponent);
    case Kind::interaction: return columns[0] + ":" + columns[1];
    case Kind::triple: return columns[0] + ":" + columns[1] + ":" + columns[2];
    }
    return {};
}

bool Term::references(const std::string& col) const
{
    return std::find(columns.begin(), columns.end(), col) != columns.end();
}

bool Term::same_as(const Term& other) const
{
    if (kind != other.kind || exponent != other.exponent) return false;
    auto a = columns;
    auto b = other.columns;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return a == b;
}

namespace {

std::string strip(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\n");
    return std::string(s.substr(first, last - first + 1));
}

Term parse_term(const std::string& text)
{
    if (text == "1") return Term::intercept();
    if (const auto caret = text.find('^'); caret != std::string::npos) {
        const std::string col = strip(text.substr(0, caret));
        const std::string exp = strip(text.substr(caret + 1));
        int k = 0;
        try {
            k = std::stoi(exp);
        } catch (...) {
            throw InputError("bad exponent in term '" + text + "'");
        }
        if (col.empty() || col.find(':') != std::string::npos) throw InputError("bad power term '" + text + "'");
        return Term::power(col, k);
    }
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ':')) {
        part = strip(part);
        if (part.empty()) throw InputError("empty factor in term '" + text + "'");
        parts.push_back(part);
    }
    switch (parts.size()) {
    case 1: return Term::main(parts[0]);
    case 2: return Term::interaction(parts[0], parts[1]);
    case 3: return Term::triple(parts[0], parts[1], parts[2]);
    default: throw InputError("only pairwise and triple interactions are supported: '" + text + "'");
    }
}

}  // namespace

ModelSpec ModelSpec::parse(std::string_view formula, Family family)
{
    const auto tilde = formula.find('~');
    if (tilde == std::string_view::npos) throw InputError("formula needs '~': '" + std::string(formula) + "'");
    ModelSpec spec;
    spec.family = family;
    spec.response = strip(formula.substr(0, tilde));
    if (spec.response.empty()) throw InputError("formula has no response");

    const std::string rhs = strip(formula.substr(tilde + 1));
    bool suppress = false;
    bool explicit_intercept = false;
    std::string token;
    int sign = 1;
    auto flush = [&] {
        const std::string t = strip(token);
        token.clear();
        if (t.empty()) return;
        if (t == "0" || (t == "1" && sign < 0)) {
            suppress = true;
        } else if (sign < 0) {
            throw InputError("term removal is only supported for the intercept");
        } else if (t == "1") {
            explicit_intercept = true;
        } else {
            spec.terms.push_back(parse_term(t));
        }
    };
    for (char ch : rhs) {
        if (ch == '+' || ch == '-') {
            flush();
            sign = ch == '-' ? -1 : 1;
        } else {
            token.push_back(ch);
        }
    }
    flush();
    if (explicit_intercept && suppress) throw InputError("formula both includes and removes the intercept");
    if (!suppress) spec.terms.insert(spec.terms.begin(), Term::intercept());
    spec.validate();
    return spec;
}

std::string ModelSpec::formula() const
{
    std::string out = response + " ~ ";
    if (!has_intercept()) out += "0";
    bool first = !has_intercept() ? false : true;
    for (const auto& t : terms) {
        if (!first) out += " + ";
        out += t.label();
        first = false;
    }
    return out;
}

std::vector<std::string> ModelSpec::columns() const
{
    std::vector<std::string> out;
    for (const auto& t : terms) {
        for (const auto& c : t.columns) {
            if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
        }
    }
    return out;
}

bool ModelSpec::references(const std::string& col) const
{
    return std::any_of(terms.begin(), terms.end(), [&](const Term& t) { return t.references(col); });
}

std::optional<std::size_t> ModelSpec::find(const Term& term) const
{
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (terms[i].same_as(term)) return i;
    }
    return std::nullopt;
}

std::optional<std::size_t> ModelSpec::find(const std::string& label) const
{
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (terms[i].label() == label) return i;
    }
    // Accept a reordered interaction label.
    if (label.find(':') != std::string::npos) {
        try {
            return find(parse_term(label));
        } catch (const InputError&) {
        }
    }
    return std::nullopt;
}

bool ModelSpec::main_effects_only() const
{
    return std::all_of(terms.begin(), terms.end(), [](const Term& t) {
        return t.kind == Term::Kind::intercept || t.kind == Term::Kind::main;
    });
}

ModelSpec ModelSpec::without(const std::set<std::string>& cols) const
{
    ModelSpec out = *this;
    std::erase_if(out.terms, [&](const Term& t) {
        return std::any_of(t.columns.begin(), t.columns.end(), [&](const std::string& c) { return cols.contains(c); });
    });
    return out;
}

void ModelSpec::validate() const
{
    if (response.empty()) throw InputError("model has no response");
    if (terms.empty()) throw InputError("model '" + response + "' has no terms");
    for (std::size_t i = 0; i < terms.size(); ++i) {
        for (std::size_t j = i + 1; j < terms.size(); ++j) {
            if (terms[i].same_as(terms[j])) throw InputError("duplicate term '" + terms[i].label() + "'");
        }
        if (terms[i].references(response)) {
            throw InputError("term '" + terms[i].label() + "' references the response");
        }
    }
}

VariableLayout::VariableLayout(std::vector<std::string> names)
{
    for (auto& n : names) add(n);
}

std::size_t VariableLayout::add(const std::string& name)
{
    const auto [it, inserted] = index_.emplace(name, names_.size());
    if (inserted) names_.push_back(name);
    return it->second;
}

std::size_t VariableLayout::index(const std::string& name) const
{
    const auto it = index_.find(name);
    if (it == index_.end()) throw InputError("variable '" + name + "' is not available");
    return it->second;
}

std::optional<std::size_t> VariableLayout::find(const std::string& name) const
{
    const auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

double logistic(double eta)
{
    if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

double BoundModel::linear_predictor(std::span<const double> row) const
{
    double eta = 0.0;
    for (std::size_t j = 0; j < slots_.size(); ++j) {
        const Slot& s = slots_[j];
        double x = 1.0;
        switch (s.kind) {
        case Term::Kind::intercept: break;
        case Term::Kind::main: x = row[s.a]; break;
        case Term::Kind::power: x = std::pow(row[s.a], s.exponent); break;
        case Term::Kind::interaction: x = row[s.a] * row[s.b]; break;
        case Term::Kind::triple: x = row[s.a] * row[s.b] * row[s.c]; break;
        }
        eta += coefficients_[j] * x;
    }
    return eta;
}

double BoundModel::mean(std::span<const double> row) const
{
    const double eta = linear_predictor(row);
    return family_ == Family::binomial ? logistic(eta) : eta;
}

double BoundModel::draw(std::span<const double> row, double z) const
{
    const double m = mean(row);
    if (family_ == Family::binomial) return normal_cdf(z) < m ? 1.0 : 0.0;
    return m + residual_sd_ * z;
}

double FittedModel::coefficient(const std::string& label) const { return coefficients_[term_index(label)]; }

double FittedModel::std_error(const std::string& label) const
{
    const auto j = term_index(label);
    return std::sqrt(covariance_(j, j));
}

std::size_t FittedModel::term_index(const std::string& label) const
{
    const auto j = spec_.find(label);
    if (!j) throw InputError("model for '" + spec_.response + "' has no term '" + label + "'");
    return *j;
}

Eigen::VectorXd FittedModel::linear_predictor(const Frame& rows) const
{
    return design_matrix(spec_, rows) * coefficients_;
}

Eigen::VectorXd FittedModel::predict_mean(const Frame& rows) const
{
    Eigen::VectorXd eta = linear_predictor(rows);
    if (spec_.family == Family::binomial) {
        for (Eigen::Index i = 0; i < eta.size(); ++i) eta[i] = logistic(eta[i]);
    }
    return eta;
}

std::vector<double> FittedModel::simulate_response(const Frame& rows, Rng& rng) const
{
    const Eigen::VectorXd mu = predict_mean(rows);
    std::vector<double> out(static_cast<std::size_t>(mu.size()));
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double z = rng.normal();
        if (spec_.family == Family::binomial) {
            out[i] = normal_cdf(z) < mu[static_cast<Eigen::Index>(i)] ? 1.0 : 0.0;
        } else {
            out[i] = mu[static_cast<Eigen::Index>(i)] + residual_sd_ * z;
        }
    }
    return out;
}

BoundModel FittedModel::bind(const VariableLayout& layout) const
{
    BoundModel b;
    b.family_ = spec_.family;
    b.residual_sd_ = residual_sd_;
    b.coefficients_.assign(coefficients_.data(), coefficients_.data() + coefficients_.size());
    for (const auto& t : spec_.terms) {
        BoundModel::Slot s{t.kind};
        s.exponent = t.exponent;
        if (!t.columns.empty()) s.a = layout.index(t.columns[0]);
        if (t.columns.size() > 1) s.b = layout.index(t.columns[1]);
        if (t.columns.size() > 2) s.c = layout.index(t.columns[2]);
        b.slots_.push_back(s);
    }
    return b;
}

Eigen::MatrixXd design_matrix(const ModelSpec& spec, const Frame& frame)
{
    const auto n = static_cast<Eigen::Index>(frame.n_rows());
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(spec.terms.size()));
    for (std::size_t j = 0; j < spec.terms.size(); ++j) {
        const Term& t = spec.terms[j];
        auto col = x.col(static_cast<Eigen::Index>(j));
        if (t.kind == Term::Kind::intercept) {
            col.setOnes();
            continue;
        }
        std::vector<std::span<const double>> v;
        for (const auto& c : t.columns) {
            if (!frame.has(c)) throw InputError("missing column '" + c + "' for model of '" + spec.response + "'");
            v.push_back(frame.values(c));
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto r = static_cast<std::size_t>(i);
            switch (t.kind) {
            case Term::Kind::main: col[i] = v[0][r]; break;
            case Term::Kind::power: col[i] = std::pow(v[0][r], t.exponent); break;
            case Term::Kind::interaction: col[i] = v[0][r] * v[1][r]; break;
            case Term::Kind::triple: col[i] = v[0][r] * v[1][r] * v[2][r]; break;
            case Term::Kind::intercept: break;
            }
        }
    }
    return x;
}

namespace {

constexpr double kRankTolerance = 1e-9;
constexpr double kScoreTolerance = 1e-10;
constexpr int kMaxIterations = 100;
constexpr double kSeparationBound = 1e4;

/// (X'WX)^{-1} from a column-pivoted QR of sqrt(W) X.
Eigen::MatrixXd inverse_from_qr(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr)
{
    const Eigen::Index p = qr.cols();
    const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd rinv =
        r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    const Eigen::MatrixXd inner = rinv * rinv.transpose();
    const auto& perm = qr.colsPermutation();
    Eigen::MatrixXd out = perm * inner * perm.transpose();
    return 0.5 * (out + out.transpose());
}

void check_rank(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr, const ModelSpec& spec)
{
    const Eigen::Index p = qr.cols();
    if (qr.rows() < p) {
        throw RankDeficientError("model for '" + spec.response + "' has " + std::to_string(p) +
                                 " terms but only " + std::to_string(qr.rows()) + " rows");
    }
    if (qr.rank() == p) return;
    std::string offending;
    const auto& idx = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < p; ++k) {
        if (!offending.empty()) offending += ", ";
        offending += spec.terms[static_cast<std::size_t>(idx[k])].label();
    }
    throw RankDeficientError("rank-deficient design for '" + spec.response + "': term(s) " + offending +
                             " are linearly dependent on the others");
}

Eigen::ColPivHouseholderQR<Eigen::MatrixXd> decompose(const Eigen::MatrixXd& x)
{
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x.rows(), x.cols());
    qr.setThreshold(kRankTolerance);
    qr.compute(x);
    return qr;
}

/// Sandwich covariance from per-row score contributions (rows of `scores`).
Eigen::MatrixXd sandwich(const Eigen::MatrixXd& bread, const Eigen::MatrixXd& scores, const Frame& frame,
                         CovKind kind, std::size_t p)
{
    const auto n = static_cast<double>(scores.rows());
    Eigen::MatrixXd meat;
    double factor = 1.0;
    if (kind == CovKind::robust) {
        meat = scores.transpose() * scores;
        factor = n / (n - static_cast<double>(p));
    } else {
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(frame.n_clusters()), scores.cols());
        const auto& codes = frame.cluster_codes();
        for (Eigen::Index i = 0; i < scores.rows(); ++i) {
            sums.row(static_cast<Eigen::Index>(codes[static_cast<std::size_t>(i)])) += scores.row(i);
        }
        meat = sums.transpose() * sums;
        const auto g = static_cast<double>(frame.n_clusters());
        factor = g / (g - 1.0) * (n - 1.0) / (n - static_cast<double>(p));
    }
    Eigen::MatrixXd v = factor * bread * meat * bread;
    return 0.5 * (v + v.transpose());
}

}  // namespace

FittedModel fit(const ModelSpec& spec, const Frame& frame, CovKind cov_kind)
{
    spec.validate();
    if (!frame.has(spec.response)) throw InputError("missing response column '" + spec.response + "'");
    if (cov_kind == CovKind::cluster) {
        if (!frame.has_clusters()) throw InputError("cluster covariance requires cluster labels");
        if (frame.n_clusters() < 2) throw InputError("cluster covariance requires at least 2 clusters");
    }
    const Eigen::MatrixXd x = design_matrix(spec, frame);
    const auto yspan = frame.values(spec.response);
    const Eigen::Map<const Eigen::VectorXd> y(yspan.data(), static_cast<Eigen::Index>(yspan.size()));
    const auto n = x.rows();
    const auto p = x.cols();

    FittedModel m;
    m.spec_ = spec;
    m.cov_kind_ = cov_kind;
    m.n_obs_ = static_cast<std::size_t>(n);
    const bool robust_needs_df = cov_kind != CovKind::model && n <= p;
    if (robust_needs_df) throw RankDeficientError("sandwich covariance needs more rows than terms");

    if (spec.family == Family::gaussian) {
        const auto qr = decompose(x);
        check_rank(qr, spec);
        m.coefficients_ = qr.solve(Eigen::VectorXd(y));
        const Eigen::VectorXd resid = y - x * m.coefficients_;
        m.rss_ = resid.squaredNorm();
        m.residual_sd_ = n > p ? std::sqrt(m.rss_ / static_cast<double>(n - p)) : 0.0;
        const Eigen::MatrixXd xtx_inv = inverse_from_qr(qr);
        if (cov_kind == CovKind::model) {
            m.covariance_ = m.residual_sd_ * m.residual_sd_ * xtx_inv;
        } else {
            const Eigen::MatrixXd scores = x.array().colwise() * resid.array();
            m.covariance_ = sandwich(xtx_inv, scores, frame, cov_kind, static_cast<std::size_t>(p));
        }
        return m;
    }

    for (Eigen::Index i = 0; i < n; ++i) {
        if (y[i] != 0.0 && y[i] != 1.0) {
            throw InputError("binomial response '" + spec.response + "' must be binary");
        }
    }
    check_rank(decompose(x), spec);

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd mu(n);
    Eigen::VectorXd w(n);
    auto update = [&](const Eigen::VectorXd& b) {
        const Eigen::VectorXd eta = x * b;
        double loglik = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            mu[i] = logistic(eta[i]);
            w[i] = mu[i] * (1.0 - mu[i]);
            // log(1 + e^eta) computed stably.
            const double softplus = eta[i] > 0 ? eta[i] + std::log1p(std::exp(-eta[i])) : std::log1p(std::exp(eta[i]));
            loglik += y[i] * eta[i] - softplus;
        }
        return loglik;
    };

    double loglik = update(beta);
    Eigen::VectorXd score = x.transpose() * (y - mu);
    int iter = 0;
    bool converged = score.lpNorm<Eigen::Infinity>() < kScoreTolerance;
    while (!converged && iter < kMaxIterations) {
        ++iter;
        if ((w.array() <= 0.0).any()) {
            throw ConvergenceError("logistic fit for '" + spec.response + "' hit fitted probabilities of 0 or 1 (perfect separation)");
        }
        const Eigen::VectorXd sw = w.array().sqrt();
        const Eigen::MatrixXd xw = x.array().colwise() * sw.array();
        const Eigen::VectorXd zw = (y - mu).array() / sw.array();
        const auto qr = decompose(xw);
        if (qr.rank() < p) {
            throw ConvergenceError("logistic fit for '" + spec.response + "' lost rank during iteration (separation)");
        }
        Eigen::VectorXd step = qr.solve(zw);
        Eigen::VectorXd candidate = beta + step;
        double cand_loglik = update(candidate);
        for (int half = 0; half < 30 && !(cand_loglik >= loglik - 1e-12 * std::abs(loglik)); ++half) {
            step *= 0.5;
            candidate = beta + step;
            cand_loglik = update(candidate);
        }
        beta = candidate;
        loglik = cand_loglik;
        if (beta.lpNorm<Eigen::Infinity>() > kSeparationBound) {
            throw ConvergenceError("logistic fit for '" + spec.response + "' diverged (|coefficient| > 1e4): perfect separation");
        }
        score = x.transpose() * (y - mu);
        const double step_norm = step.lpNorm<Eigen::Infinity>();
        converged = score.lpNorm<Eigen::Infinity>() < kScoreTolerance ||
                    step_norm <= 1e-14 * (1.0 + beta.lpNorm<Eigen::Infinity>());
    }
    if (!converged) {
        throw ConvergenceError("logistic fit for '" + spec.response + "' did not converge in 100 iterations");
    }
    m.coefficients_ = beta;
    m.convergence_ = {iter, score.lpNorm<Eigen::Infinity>()};
    const Eigen::VectorXd sw = w.array().sqrt();
    const Eigen::MatrixXd xw = x.array().colwise() * sw.array();
    const auto qr = decompose(xw);
    if (qr.rank() < p) throw ConvergenceError("logistic information matrix is singular (separation)");
    const Eigen::MatrixXd info_inv = inverse_from_qr(qr);
    if (cov_kind == CovKind::model) {
        m.covariance_ = info_inv;
    } else {
        const Eigen::MatrixXd scores = x.array().colwise() * (y - mu).array();
        m.covariance_ = sandwich(info_inv, scores, frame, cov_kind, static_cast<std::size_t>(p));
    }
    return m;
}

}  // namespace lcausal
