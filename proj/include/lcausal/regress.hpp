#pragma once

#include <Eigen/Dense>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lcausal/frame.hpp"
#include "lcausal/rng.hpp"

namespace lcausal {

enum class Family { gaussian, binomial };

std::string to_string(Family family);
Family parse_family(const std::string& text);

/// One column of a design matrix.
struct Term {
    enum class Kind { intercept, main, power, interaction, triple };

    Kind kind = Kind::intercept;
    std::vector<std::string> columns;
    int exponent = 1;

    static Term intercept() { return {Kind::intercept, {}, 1}; }
    static Term main(std::string col) { return {Kind::main, {std::move(col)}, 1}; }
    static Term power(std::string col, int k);
    static Term interaction(std::string a, std::string b) { return {Kind::interaction, {std::move(a), std::move(b)}, 1}; }
    static Term triple(std::string a, std::string b, std::string c)
    {
        return {Kind::triple, {std::move(a), std::move(b), std::move(c)}, 1};
    }

    /// "1", "x", "x^2", "a:b", "a:b:c".
    std::string label() const;
    bool references(const std::string& col) const;
    /// Same kind, exponent and column multiset.
    bool same_as(const Term& other) const;
};

/// Declarative regression: response ~ terms, with family/link.
struct ModelSpec {
    std::string response;
    Family family = Family::gaussian;
    std::vector<Term> terms;

    /// Parses "y ~ 1 + a1 + a2 + a1:a2 + a2^2". The intercept is implicit
    /// unless the right-hand side contains "0" or "-1".
    static ModelSpec parse(std::string_view formula, Family family = Family::gaussian);
    std::string formula() const;

    /// Regressor columns referenced by any term (response excluded).
    std::vector<std::string> columns() const;
    bool references(const std::string& col) const;
    std::optional<std::size_t> find(const Term& term) const;
    std::optional<std::size_t> find(const std::string& label) const;
    bool has_intercept() const { return find(Term::intercept()).has_value(); }
    /// True when every non-intercept term is a main effect.
    bool main_effects_only() const;

    /// Copy with every term that references any of `cols` removed.
    ModelSpec without(const std::set<std::string>& cols) const;

    /// Throws InputError on duplicate terms or repeated intercepts.
    void validate() const;
};

enum class CovKind { model, robust, cluster };

CovKind parse_cov_kind(const std::string& text);

struct Convergence {
    int iterations = 0;
    double score_norm = 0.0;
};

/// Maps variable names to slots of a flat row buffer.
class VariableLayout {
public:
    VariableLayout() = default;
    explicit VariableLayout(std::vector<std::string> names);

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    std::size_t index(const std::string& name) const;
    std::optional<std::size_t> find(const std::string& name) const;
    std::size_t add(const std::string& name);

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// A fitted model compiled against a VariableLayout for per-row evaluation
/// inside Monte-Carlo loops.
class BoundModel {
public:
    double linear_predictor(std::span<const double> row) const;
    double mean(std::span<const double> row) const;
    /// One draw from the fitted conditional law, driven by a standard normal
    /// innovation z: gaussian -> mean + sd*z, binomial -> [Phi(z) < p].
    double draw(std::span<const double> row, double z) const;

    Family family() const { return family_; }
    double residual_sd() const { return residual_sd_; }

private:
    friend class FittedModel;

    struct Slot {
        Term::Kind kind;
        std::size_t a = 0, b = 0, c = 0;
        int exponent = 1;
    };

    std::vector<Slot> slots_;
    std::vector<double> coefficients_;
    Family family_ = Family::gaussian;
    double residual_sd_ = 0.0;
};

class FittedModel {
public:
    const ModelSpec& spec() const { return spec_; }
    const Eigen::VectorXd& coefficients() const { return coefficients_; }
    const Eigen::MatrixXd& covariance() const { return covariance_; }
    CovKind cov_kind() const { return cov_kind_; }
    /// sqrt(RSS / (n - p)) for gaussian fits; 0 for binomial.
    double residual_sd() const { return residual_sd_; }
    double rss() const { return rss_; }
    std::size_t n_obs() const { return n_obs_; }
    std::size_t df_residual() const { return n_obs_ > static_cast<std::size_t>(coefficients_.size()) ? n_obs_ - coefficients_.size() : 0; }
    const Convergence& convergence() const { return convergence_; }

    double coefficient(const std::string& label) const;
    double std_error(const std::string& label) const;
    std::size_t term_index(const std::string& label) const;

    Eigen::VectorXd linear_predictor(const Frame& rows) const;
    Eigen::VectorXd predict_mean(const Frame& rows) const;
    /// gaussian -> mean + residual_sd * N(0,1); binomial -> Bernoulli(p).
    std::vector<double> simulate_response(const Frame& rows, Rng& rng) const;

    /// Compiles the model against a layout; throws if a referenced column is
    /// absent from the layout.
    BoundModel bind(const VariableLayout& layout) const;

    /// Overrides the residual sd used for gaussian draws (testing hook).
    void set_residual_sd(double sd) { residual_sd_ = sd; }

private:
    friend FittedModel fit(const ModelSpec&, const Frame&, CovKind);

    ModelSpec spec_;
    Eigen::VectorXd coefficients_;
    Eigen::MatrixXd covariance_;
    CovKind cov_kind_ = CovKind::model;
    double residual_sd_ = 0.0;
    double rss_ = 0.0;
    std::size_t n_obs_ = 0;
    Convergence convergence_;
};

/// Builds the n x p design matrix. Throws InputError on a missing column.
Eigen::MatrixXd design_matrix(const ModelSpec& spec, const Frame& frame);

/// Least squares (gaussian) via column-pivoted QR, or IRLS (binomial).
/// Throws RankDeficientError naming the dependent columns, ConvergenceError
/// on non-convergence or separation, InputError on bad inputs.
FittedModel fit(const ModelSpec& spec, const Frame& frame, CovKind cov_kind = CovKind::model);

double logistic(double eta);

}  // namespace lcausal
