#include "lcausal/iv.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "lcausal/error.hpp"
#include "lcausal/regress.hpp"
#include "lcausal/stats.hpp"

namespace lcausal {

namespace {

void set_normal_ci(ComponentEstimate& c, double level = 0.95)
{
    const double q = normal_quantile(0.5 + level / 2.0);
    c.ci_low = c.point - q * c.se;
    c.ci_high = c.point + q * c.se;
}

Eigen::VectorXd column(const Frame& f, const std::string& name)
{
    const auto v = f.values(name);
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

struct LeastSquares {
    Eigen::VectorXd beta;
    Eigen::MatrixXd xtx_inv;
    double rss = 0.0;
};

LeastSquares least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::string& what)
{
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-9);
    if (qr.rank() < X.cols()) throw RankDeficientError(what + ": design is rank deficient");
    LeastSquares out;
    out.beta = qr.solve(y);
    const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(X.cols(), X.cols()).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd r_inv =
        r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(X.cols(), X.cols()));
    const Eigen::MatrixXd p = qr.colsPermutation();
    out.xtx_inv = p * r_inv * r_inv.transpose() * p.transpose();
    out.rss = (y - X * out.beta).squaredNorm();
    return out;
}

}  // namespace

void MrSummary::validate() const
{
    const std::size_t j = beta_exposure.size();
    if (se_exposure.size() != j || beta_outcome.size() != j || se_outcome.size() != j) {
        throw InputError("summary statistics columns have unequal lengths");
    }
    if (j < 3) throw InputError("MR-Egger needs at least 3 variants");
    for (std::size_t i = 0; i < j; ++i) {
        if (!std::isfinite(beta_exposure[i]) || !std::isfinite(beta_outcome[i])) {
            throw InputError("summary statistics must be finite");
        }
        if (!(se_exposure[i] > 0.0) || !(se_outcome[i] > 0.0) || !std::isfinite(se_exposure[i]) ||
            !std::isfinite(se_outcome[i])) {
            throw InputError("summary standard errors must be positive");
        }
    }
}

MrSummary read_mr_summary(std::istream& in)
{
    const Schema schema{{"beta_exposure", SchemaKind::continuous},
                        {"se_exposure", SchemaKind::continuous},
                        {"beta_outcome", SchemaKind::continuous},
                        {"se_outcome", SchemaKind::continuous}};
    const auto loaded = read_frame(in, schema);
    const Frame& f = loaded.frame;
    auto vec = [&](const char* name) {
        const auto v = f.values(name);
        return std::vector<double>(v.begin(), v.end());
    };
    MrSummary s{vec("beta_exposure"), vec("se_exposure"), vec("beta_outcome"), vec("se_outcome")};
    s.validate();
    return s;
}

MrSummary load_mr_summary(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open summary file '" + path + "'");
    return read_mr_summary(in);
}

void write_mr_summary(std::ostream& out, const MrSummary& s)
{
    out << "beta_exposure,se_exposure,beta_outcome,se_outcome\n" << std::setprecision(17);
    for (std::size_t i = 0; i < s.size(); ++i) {
        out << s.beta_exposure[i] << ',' << s.se_exposure[i] << ',' << s.beta_outcome[i] << ',' << s.se_outcome[i]
            << '\n';
    }
}

EffectEstimate wald_ratio(const Frame& f, const std::string& z, const std::string& a, const std::string& y)
{
    if (f.kind(z) != ColumnKind::binary) throw InputError("instrument '" + z + "' must be binary");
    const auto zv = f.values(z);
    const auto av = f.values(a);
    const auto yv = f.values(y);
    double n[2] = {0, 0}, sa[2] = {0, 0}, sy[2] = {0, 0};
    for (std::size_t i = 0; i < zv.size(); ++i) {
        const int g = zv[i] > 0.5 ? 1 : 0;
        n[g] += 1;
        sa[g] += av[i];
        sy[g] += yv[i];
    }
    if (n[0] < 2 || n[1] < 2) throw InputError("instrument '" + z + "' needs at least 2 rows at each level");
    double ma[2], my[2], vaa[2] = {0, 0}, vyy[2] = {0, 0}, vay[2] = {0, 0};
    for (int g = 0; g < 2; ++g) {
        ma[g] = sa[g] / n[g];
        my[g] = sy[g] / n[g];
    }
    for (std::size_t i = 0; i < zv.size(); ++i) {
        const int g = zv[i] > 0.5 ? 1 : 0;
        const double da = av[i] - ma[g];
        const double dy = yv[i] - my[g];
        vaa[g] += da * da;
        vyy[g] += dy * dy;
        vay[g] += da * dy;
    }
    for (int g = 0; g < 2; ++g) {
        vaa[g] /= (n[g] - 1) * n[g];
        vyy[g] /= (n[g] - 1) * n[g];
        vay[g] /= (n[g] - 1) * n[g];
    }
    const double itt_a = ma[1] - ma[0];
    const double itt_y = my[1] - my[0];
    if (itt_a == 0.0) throw EstimationError("instrument has no effect on the exposure (zero denominator)");
    const double var_a = vaa[0] + vaa[1];
    const double var_y = vyy[0] + vyy[1];
    const double cov = vay[0] + vay[1];
    const double ratio = itt_y / itt_a;

    EffectEstimate out;
    out.set("wald_ratio", ratio);
    auto& c = out.at("wald_ratio");
    c.se = std::sqrt(std::max(0.0, var_y - 2.0 * ratio * cov + ratio * ratio * var_a)) / std::abs(itt_a);
    set_normal_ci(c);
    auto& d = out.diagnostics;
    d.set("n", static_cast<double>(zv.size()));
    d.set("itt_outcome", itt_y);
    d.set("itt_exposure", itt_a);
    d.set("itt_exposure_se", std::sqrt(var_a));
    if (std::abs(itt_a) < 10.0 * std::sqrt(var_a)) {
        d.warn("weak instrument: exposure contrast is less than 10 standard errors from zero");
    }
    d.note("the ratio estimates an average causal effect only under effect homogeneity; under monotonicity it is "
           "the effect among compliers");
    return out;
}

EffectEstimate tsls(const Frame& f, const std::vector<std::string>& instruments, const std::string& a,
                    const std::string& y, const std::vector<std::string>& covariates)
{
    if (instruments.empty()) throw InputError("two-stage least squares needs at least one instrument");
    const auto n = static_cast<Eigen::Index>(f.n_rows());
    const auto q = static_cast<Eigen::Index>(instruments.size());
    const auto k = static_cast<Eigen::Index>(covariates.size());
    for (const auto& name : instruments) {
        if (!f.has(name)) throw InputError("missing instrument column '" + name + "'");
    }
    for (const auto& name : covariates) {
        if (!f.has(name)) throw InputError("missing covariate column '" + name + "'");
    }
    if (!f.has(a) || !f.has(y)) throw InputError("missing exposure or outcome column");

    Eigen::MatrixXd W(n, 1 + k);  // exogenous regressors
    W.col(0).setOnes();
    for (Eigen::Index j = 0; j < k; ++j) W.col(1 + j) = column(f, covariates[static_cast<std::size_t>(j)]);
    Eigen::MatrixXd Zfull(n, 1 + k + q);
    Zfull << W, Eigen::MatrixXd::Zero(n, q);
    for (Eigen::Index j = 0; j < q; ++j) Zfull.col(1 + k + j) = column(f, instruments[static_cast<std::size_t>(j)]);
    const Eigen::VectorXd av = column(f, a);
    const Eigen::VectorXd yv = column(f, y);
    if (n <= 2 + k + q) throw InputError("too few rows for two-stage least squares");

    const auto first = least_squares(Zfull, av, "first stage");
    const auto restricted = least_squares(W, av, "first stage (no instruments)");
    const double df_full = static_cast<double>(n - Zfull.cols());
    double f_stat = std::numeric_limits<double>::infinity();
    if (first.rss > 0.0) {
        f_stat = ((restricted.rss - first.rss) / static_cast<double>(q)) / (first.rss / df_full);
    } else if (restricted.rss == 0.0) {
        f_stat = 0.0;
    }
    const Eigen::VectorXd a_hat = Zfull * first.beta;

    Eigen::MatrixXd Xhat(n, 2 + k);
    Xhat << W.col(0), a_hat, W.rightCols(k);
    Eigen::MatrixXd Xobs(n, 2 + k);
    Xobs << W.col(0), av, W.rightCols(k);
    const auto second = least_squares(Xhat, yv, "second stage");
    const Eigen::VectorXd resid = yv - Xobs * second.beta;
    const double df = static_cast<double>(n - Xhat.cols());
    const double sigma2 = resid.squaredNorm() / df;
    const Eigen::MatrixXd cov = sigma2 * second.xtx_inv;

    EffectEstimate out;
    out.set("tsls", second.beta[1]);
    auto& c = out.at("tsls");
    c.se = std::sqrt(std::max(0.0, cov(1, 1)));
    set_normal_ci(c);
    for (Eigen::Index j = 0; j < k; ++j) {
        const std::string name = covariates[static_cast<std::size_t>(j)];
        out.set(name, second.beta[2 + j]);
        auto& cc = out.at(name);
        cc.se = std::sqrt(std::max(0.0, cov(2 + j, 2 + j)));
        set_normal_ci(cc);
    }
    auto& d = out.diagnostics;
    d.set("n", static_cast<double>(n));
    d.set("first_stage_F", f_stat);
    d.set("first_stage_df1", static_cast<double>(q));
    d.set("first_stage_df2", df_full);
    if (!(f_stat >= 10.0)) d.warn("weak instrument: first-stage F statistic below 10");
    return out;
}

MrSummary orient(const MrSummary& s)
{
    MrSummary out = s;
    for (std::size_t j = 0; j < out.size(); ++j) {
        if (out.beta_exposure[j] < 0.0) {
            out.beta_exposure[j] = -out.beta_exposure[j];
            out.beta_outcome[j] = -out.beta_outcome[j];
        }
    }
    return out;
}

EffectEstimate mr_egger(const MrSummary& summary, double level)
{
    summary.validate();
    if (!(level > 0.0 && level < 1.0)) throw InputError("confidence level must lie in (0, 1)");
    const MrSummary s = orient(summary);
    const auto J = static_cast<Eigen::Index>(s.size());
    Eigen::MatrixXd X(J, 2);
    Eigen::VectorXd yv(J);
    for (Eigen::Index j = 0; j < J; ++j) {
        const auto i = static_cast<std::size_t>(j);
        if (s.beta_exposure[i] == 0.0) throw InputError("exposure beta of variant " + std::to_string(i + 1) + " is zero");
        const double w = 1.0 / s.se_outcome[i];
        X(j, 0) = w;
        X(j, 1) = w * s.beta_exposure[i];
        yv[j] = w * s.beta_outcome[i];
    }
    const auto fit = least_squares(X, yv, "MR-Egger");
    const double df = static_cast<double>(J - 2);
    const double sigma = std::sqrt(fit.rss / df);
    // Multiplicative random effects, never below the fixed-effect SEs.
    const double scale = std::max(1.0, sigma);
    const double tq = t_quantile(0.5 + level / 2.0, df);

    EffectEstimate out;
    const char* names[2] = {"intercept", "slope"};
    for (int j = 1; j >= 0; --j) {
        out.set(names[j], fit.beta[j]);
        auto& c = out.at(names[j]);
        c.se = std::sqrt(fit.xtx_inv(j, j)) * scale;
        c.ci_low = c.point - tq * c.se;
        c.ci_high = c.point + tq * c.se;
    }
    auto& d = out.diagnostics;
    d.set("variants", static_cast<double>(J));
    d.set("residual_sigma", sigma);
    d.set("df", df);
    d.set("slope_intercept_cov", fit.xtx_inv(0, 1) * scale * scale);
    const double t_int = out.at("intercept").point / out.at("intercept").se;
    d.set("intercept_t", t_int);
    d.set("intercept_p", t_two_sided_p(t_int, df));
    d.note("intercept estimates average directional pleiotropy; slope is the causal estimate under InSIDE");
    return out;
}

}  // namespace lcausal
