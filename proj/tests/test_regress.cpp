#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lcausal/error.hpp"
#include "lcausal/regress.hpp"
#include "lcausal/rng.hpp"

using namespace lcausal;

namespace {

Frame linear_data(std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<double> x(n), z(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.normal();
        z[i] = 0.5 * x[i] + rng.normal();
        y[i] = 0.5 + 0.3 * x[i] - 0.2 * z[i] + 0.1 * x[i] * z[i] + (0.5 + 0.5 * std::abs(x[i])) * rng.normal();
    }
    Frame f;
    f.set_column("x", ColumnKind::continuous, x);
    f.set_column("z", ColumnKind::continuous, z);
    f.set_column("y", ColumnKind::continuous, y);
    return f;
}

Frame logit_data(std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.normal();
        y[i] = rng.bernoulli(logistic(-0.3 + 0.8 * x[i])) ? 1.0 : 0.0;
    }
    Frame f;
    f.set_column("x", ColumnKind::continuous, x);
    f.set_column("y", ColumnKind::binary, y);
    return f;
}

}  // namespace

TEST(ModelSpec, ParseAndFormat)
{
    const auto spec = ModelSpec::parse("y ~ 1 + a1 + a2 + a1:a2 + a2^2");
    ASSERT_EQ(spec.terms.size(), 5u);
    EXPECT_EQ(spec.terms[3].kind, Term::Kind::interaction);
    EXPECT_EQ(spec.terms[4].exponent, 2);
    EXPECT_EQ(spec.formula(), "y ~ 1 + a1 + a2 + a1:a2 + a2^2");

    const auto implicit = ModelSpec::parse("y ~ x");
    EXPECT_TRUE(implicit.has_intercept());
    const auto none = ModelSpec::parse("y ~ 0 + x");
    EXPECT_FALSE(none.has_intercept());
    EXPECT_TRUE(ModelSpec::parse("y ~ a + b:c").references("c"));
}

TEST(ModelSpec, RejectsBadSpecs)
{
    EXPECT_THROW(ModelSpec::parse("y ~ x + x").validate(), InputError);
    EXPECT_THROW(ModelSpec::parse("y ~ a:b + b:a").validate(), InputError);
    EXPECT_THROW(ModelSpec::parse("y x"), InputError);
    EXPECT_THROW(ModelSpec::parse("y ~ a:b:c:d"), InputError);
    EXPECT_THROW(ModelSpec::parse("y ~ x^1"), InputError);
}

TEST(Fit, ExactInterpolation)
{
    Frame f;
    f.set_column("x", ColumnKind::continuous, {0, 1});
    f.set_column("y", ColumnKind::continuous, {1, 3});
    const auto m = fit(ModelSpec::parse("y ~ 1 + x"), f);
    EXPECT_NEAR(m.coefficients()[0], 1.0, 1e-14);
    EXPECT_NEAR(m.coefficients()[1], 2.0, 1e-14);
}

TEST(Fit, LogitSymmetricDesignHasZeroIntercept)
{
    std::vector<double> x, y;
    const double xs[] = {-2.0, -1.0, -0.5, 0.5, 1.0, 2.0};
    const double ys[] = {0, 0, 1, 0, 1, 1};
    for (int i = 0; i < 6; ++i) {
        x.push_back(xs[i]);
        y.push_back(ys[i]);
        x.push_back(-xs[i]);
        y.push_back(1 - ys[i]);
    }
    Frame f;
    f.set_column("x", ColumnKind::continuous, x);
    f.set_column("y", ColumnKind::binary, y);
    const auto m = fit(ModelSpec::parse("y ~ x", Family::binomial), f);
    EXPECT_NEAR(m.coefficients()[0], 0.0, 1e-8);
    EXPECT_GT(m.coefficients()[1], 0.0);
}

TEST(Fit, SimulatedSlopeWithinThreeSe)
{
    Rng rng(2024);
    const std::size_t n = 10000;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.normal();
        y[i] = 0.5 + 0.3 * x[i] + rng.normal();
    }
    Frame f;
    f.set_column("x", ColumnKind::continuous, x);
    f.set_column("y", ColumnKind::continuous, y);
    const auto m = fit(ModelSpec::parse("y ~ x"), f);
    EXPECT_LT(std::abs(m.coefficient("x") - 0.3), 3.0 * m.std_error("x"));
    EXPECT_NEAR(m.residual_sd(), 1.0, 0.05);
}

TEST(Fit, SingletonClustersCollapseToRobust)
{
    Frame f = linear_data(300, 5);
    std::vector<std::size_t> codes(f.n_rows());
    std::iota(codes.begin(), codes.end(), 0);
    f.set_cluster_codes(codes);
    const auto spec = ModelSpec::parse("y ~ x + z + x:z");
    const auto robust = fit(spec, f, CovKind::robust);
    const auto cluster = fit(spec, f, CovKind::cluster);
    EXPECT_LT((robust.covariance() - cluster.covariance()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Fit, RobustCovarianceMatchesExplicitSandwich)
{
    const Frame f = linear_data(200, 9);
    const auto spec = ModelSpec::parse("y ~ x + z");
    const auto m = fit(spec, f, CovKind::robust);
    const Eigen::MatrixXd X = design_matrix(spec, f);
    Eigen::VectorXd y(f.n_rows());
    for (std::size_t i = 0; i < f.n_rows(); ++i) y[i] = f.values("y")[i];
    const Eigen::VectorXd e = y - X * m.coefficients();
    const Eigen::MatrixXd bread = (X.transpose() * X).inverse();
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(3, 3);
    for (Eigen::Index i = 0; i < X.rows(); ++i) meat += e[i] * e[i] * X.row(i).transpose() * X.row(i);
    const double n = static_cast<double>(X.rows());
    const Eigen::MatrixXd expected = n / (n - 3.0) * bread * meat * bread;
    EXPECT_LT((expected - m.covariance()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Fit, ClusterRequiresLabels)
{
    const Frame f = linear_data(50, 1);
    EXPECT_THROW(fit(ModelSpec::parse("y ~ x"), f, CovKind::cluster), InputError);
}

TEST(Fit, RankDeficiencyNamesColumns)
{
    Frame f = linear_data(40, 3);
    std::vector<double> dup(f.values("x").begin(), f.values("x").end());
    for (auto& v : dup) v *= 2.0;
    f.set_column("x2", ColumnKind::continuous, dup);
    try {
        fit(ModelSpec::parse("y ~ x + z + x2"), f);
        FAIL() << "expected RankDeficientError";
    } catch (const RankDeficientError& e) {
        const std::string msg = e.what();
        EXPECT_TRUE(msg.find("x2") != std::string::npos || msg.find("x") != std::string::npos) << msg;
    }
}

TEST(Fit, PerfectSeparationFails)
{
    Frame f;
    f.set_column("x", ColumnKind::continuous, {-3, -2, -1, 1, 2, 3});
    f.set_column("y", ColumnKind::binary, {0, 0, 0, 1, 1, 1});
    EXPECT_THROW(fit(ModelSpec::parse("y ~ x", Family::binomial), f), ConvergenceError);
}

TEST(Fit, GaussianResidualsOrthogonalAndRssMinimal)
{
    const Frame f = linear_data(500, 11);
    const auto spec = ModelSpec::parse("y ~ x + z + x:z + z^2");
    const auto m = fit(spec, f);
    const Eigen::MatrixXd X = design_matrix(spec, f);
    Eigen::VectorXd y(f.n_rows());
    for (std::size_t i = 0; i < f.n_rows(); ++i) y[i] = f.values("y")[i];
    const Eigen::VectorXd e = y - X * m.coefficients();
    const double n = static_cast<double>(f.n_rows());
    EXPECT_LT((X.transpose() * e).cwiseAbs().maxCoeff() / n, 1e-8);
    EXPECT_NEAR(e.squaredNorm(), m.rss(), 1e-9 * m.rss());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        for (double d : {-1e-3, 1e-3}) {
            Eigen::VectorXd b = m.coefficients();
            b[j] += d;
            EXPECT_GE((y - X * b).squaredNorm(), m.rss());
        }
    }
    // Covariance is symmetric positive semidefinite.
    const Eigen::MatrixXd& v = m.covariance();
    EXPECT_LT((v - v.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(v);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-15);
}

TEST(Fit, LogitScoreVanishesAtSolution)
{
    const Frame f = logit_data(2000, 17);
    const auto spec = ModelSpec::parse("y ~ x", Family::binomial);
    const auto m = fit(spec, f);
    const Eigen::MatrixXd X = design_matrix(spec, f);
    Eigen::VectorXd score = Eigen::VectorXd::Zero(2);
    const Eigen::VectorXd eta = X * m.coefficients();
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        score += (f.values("y")[i] - logistic(eta[i])) * X.row(i).transpose();
    }
    EXPECT_LT(score.cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT(m.convergence().score_norm, 1e-8);
    EXPECT_GT(m.convergence().iterations, 0);
    EXPECT_LT(std::abs(m.coefficient("x") - 0.8), 3.0 * m.std_error("x"));
}

TEST(Fit, RowOrderInvariance)
{
    const Frame f = linear_data(300, 21);
    std::vector<std::size_t> order(f.n_rows());
    std::iota(order.begin(), order.end(), 0);
    std::reverse(order.begin(), order.end());
    std::rotate(order.begin(), order.begin() + 77, order.end());
    const Frame g = f.take_rows(order);
    const auto spec = ModelSpec::parse("y ~ x + z + x:z");
    const auto a = fit(spec, f);
    const auto b = fit(spec, g);
    EXPECT_LT((a.coefficients() - b.coefficients()).cwiseAbs().maxCoeff(), 1e-10);

    const Frame lf = logit_data(300, 2);
    const auto la = fit(ModelSpec::parse("y ~ x", Family::binomial), lf);
    const auto lb = fit(ModelSpec::parse("y ~ x", Family::binomial), lf.take_rows(order));
    EXPECT_LT((la.coefficients() - lb.coefficients()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Predict, MeansAndIdentities)
{
    Frame f;
    f.set_column("x", ColumnKind::continuous, {0, 1});
    f.set_column("y", ColumnKind::continuous, {1, 3});
    const auto m = fit(ModelSpec::parse("y ~ x"), f);
    Frame row;
    row.set_column("x", ColumnKind::continuous, {0});
    EXPECT_NEAR(m.predict_mean(row)[0], 1.0, 1e-14);

    Frame missing;
    missing.set_column("w", ColumnKind::continuous, {0});
    EXPECT_THROW(m.predict_mean(missing), InputError);

    const Frame g = linear_data(400, 8);
    const auto lm = fit(ModelSpec::parse("y ~ x + z + x:z"), g);
    EXPECT_NEAR(lm.predict_mean(g).mean(), mean(g.values("y")), 1e-10);

    Frame lf;
    lf.set_column("x", ColumnKind::continuous, {-1, -1, 1, 1});
    lf.set_column("y", ColumnKind::binary, {0, 1, 0, 1});
    const auto logit = fit(ModelSpec::parse("y ~ x", Family::binomial), lf);
    for (double p : logit.predict_mean(lf)) EXPECT_NEAR(p, 0.5, 1e-12);
    const auto lg = fit(ModelSpec::parse("y ~ x", Family::binomial), logit_data(300, 4));
    const auto probs = lg.predict_mean(logit_data(300, 5));
    EXPECT_GT(probs.minCoeff(), 0.0);
    EXPECT_LT(probs.maxCoeff(), 1.0);
}

TEST(Simulate, DeterministicAndDegenerate)
{
    const Frame g = linear_data(100, 8);
    auto m = fit(ModelSpec::parse("y ~ x + z"), g);
    Rng r1(7), r2(7);
    EXPECT_EQ(m.simulate_response(g, r1), m.simulate_response(g, r2));

    m.set_residual_sd(0.0);
    Rng r3(99);
    const auto draws = m.simulate_response(g, r3);
    const auto means = m.predict_mean(g);
    for (std::size_t i = 0; i < draws.size(); ++i) EXPECT_EQ(draws[i], means[i]);
}

TEST(Simulate, LawOfLargeNumbers)
{
    const Frame g = linear_data(500, 12);
    const auto m = fit(ModelSpec::parse("y ~ x + z"), g);
    const std::size_t n = 100000;
    const std::vector<std::size_t> rows(n, 3);
    const Frame at = g.take_rows(rows);
    Rng rng(31);
    const auto draws = m.simulate_response(at, rng);
    const double mu = m.predict_mean(at)[0];
    EXPECT_LT(std::abs(mean(draws) - mu), 4.0 * m.residual_sd() / std::sqrt(static_cast<double>(n)));
    EXPECT_NEAR(sample_sd(draws), m.residual_sd(), 0.02 * m.residual_sd());
}

TEST(Bind, AgreesWithFramePrediction)
{
    const Frame g = linear_data(50, 13);
    const auto m = fit(ModelSpec::parse("y ~ x + z + x:z + z^2"), g);
    const VariableLayout layout({"z", "y", "x"});
    const BoundModel b = m.bind(layout);
    const auto means = m.predict_mean(g);
    for (std::size_t i = 0; i < g.n_rows(); ++i) {
        const double row[] = {g.values("z")[i], 0.0, g.values("x")[i]};
        EXPECT_NEAR(b.mean(row), means[i], 1e-12);
        EXPECT_DOUBLE_EQ(b.draw(row, 1.5), b.mean(row) + 1.5 * m.residual_sd());
    }
    EXPECT_THROW(m.bind(VariableLayout({"x"})), InputError);
}
