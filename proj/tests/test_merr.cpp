#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "lcausal/error.hpp"
#include "lcausal/estimands.hpp"
#include "lcausal/merr.hpp"
#include "lcausal/regress.hpp"
#include "lcausal/simgen.hpp"

using namespace lcausal;

namespace {

Reliability rel(double r, double se = NAN)
{
    Reliability out;
    out.r = r;
    out.se_r = se;
    return out;
}

}  // namespace

TEST(Disattenuate, Arithmetic)
{
    EXPECT_DOUBLE_EQ(disattenuate(0.5, rel(0.8)), 0.625);
    EXPECT_EQ(disattenuate(0.37, rel(1.0)), 0.37);
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        const double b = rng.normal();
        const double r = 0.05 + 0.95 * rng.uniform();
        EXPECT_NEAR(disattenuate(b, rel(r)) * r, b, 1e-12);
    }
    EXPECT_THROW(disattenuate(0.5, rel(0.0)), InputError);
    EXPECT_THROW(disattenuate(0.5, rel(1.2)), InputError);
}

TEST(Disattenuate, DeltaMethodSe)
{
    ComponentEstimate b;
    b.point = 0.28;
    b.se = 0.02;
    const auto plain = disattenuate(b, rel(0.7));
    EXPECT_NEAR(plain.se, 0.02 / 0.7, 1e-15);
    const auto full = disattenuate(b, rel(0.7, 0.05));
    // Var(b/r) ~ se_b^2/r^2 + b^2 se_r^2/r^4.
    EXPECT_NEAR(full.se, std::sqrt(0.0004 / 0.49 + 0.0784 * 0.0025 / 0.2401), 1e-12);
    EXPECT_LT(full.ci_low, full.point);
}

TEST(Disattenuate, ParsesReliability)
{
    const auto a = Reliability::parse("0.7,0.05");
    EXPECT_EQ(a.r, 0.7);
    EXPECT_EQ(a.se_r, 0.05);
    EXPECT_TRUE(std::isnan(Reliability::parse("0.9").se_r));
    EXPECT_THROW(Reliability::parse("x"), InputError);
    EXPECT_THROW(Reliability::parse("0"), InputError);
}

TEST(Disattenuate, ClassicalExposureError)
{
    DgpSpec spec = make_dgp("exposure_error");
    spec.n = 20000;
    const Frame f = generate(spec);
    const auto m = fit(ModelSpec::parse("y ~ x"), f);
    const double se = m.std_error("x");
    EXPECT_NEAR(m.coefficient("x"), 0.7 * 0.4, 3 * se);
    ComponentEstimate b;
    b.point = m.coefficient("x");
    b.se = se;
    const auto c = disattenuate(b, rel(0.7));
    EXPECT_NEAR(c.point, 0.4, 3 * c.se);
}

TEST(CorrectIndirect, Arithmetic)
{
    const auto c = correct_indirect(0.30, 0.20, rel(0.8));
    EXPECT_DOUBLE_EQ(c.iie, 0.25);
    EXPECT_NEAR(c.direct, 0.05, 1e-15);
    const auto same = correct_indirect(0.3, 0.2, rel(1.0));
    EXPECT_EQ(same.iie, 0.2);
    EXPECT_EQ(same.direct + same.iie, 0.3);
}

TEST(CorrectIndirect, PreservesTotal)
{
    Rng rng(2);
    for (int i = 0; i < 5000; ++i) {
        const double total = rng.normal();
        const double iie = rng.normal();
        const auto c = correct_indirect(total, iie, rel(0.1 + 0.9 * rng.uniform()));
        // direct is the rounded difference, so the sum is off by at most
        // one ulp of the larger addend.
        const double ulp = std::nextafter(std::max(std::abs(c.iie), std::abs(c.direct)), INFINITY) -
                           std::max(std::abs(c.iie), std::abs(c.direct));
        EXPECT_LE(std::abs(c.iie + c.direct - total), ulp);
        EXPECT_EQ(c.total, total);
    }
}

TEST(CorrectIndirect, MismeasuredMediator)
{
    DgpSpec spec = make_dgp("mediator_error");
    spec.n = 20000;
    const Frame f = generate(spec);
    EstimandRequest r;
    r.kind = EstimandKind::interventional;
    r.exposure = "a";
    r.mediator_blocks = {{"m"}};
    r.outcome_model = ModelSpec::parse("y ~ a + m");
    r.mediator_models = {ModelSpec::parse("m ~ a")};
    r.mc_draws = 10;
    const auto naive = estimate_interventional(r, f, 1);
    // Truth: direct 0.2, indirect 0.5 * 0.4.
    EXPECT_GT(naive.point("IDE"), 0.23);
    const auto c = correct_indirect(naive.point("total"), naive.point("IIE"), rel(0.7));
    EXPECT_NEAR(c.direct, 0.2, 0.03);
    EXPECT_NEAR(c.iie, 0.2, 0.03);
}

TEST(Growth, ExactLine)
{
    Frame f;
    f.set_column("b7", ColumnKind::continuous, {10, 5});
    f.set_column("b9", ColumnKind::continuous, {12, 5});
    f.set_column("b11", ColumnKind::continuous, {14, 5});
    const auto g = growth_features(f, {"b7", "b9", "b11"}, {7, 9, 11}, 9);
    EXPECT_NEAR(g.size[0], 12, 1e-12);
    EXPECT_NEAR(g.velocity[0], 1, 1e-12);
    EXPECT_NEAR(g.size[1], 5, 1e-12);
    EXPECT_EQ(g.velocity[1], 0.0);
    EXPECT_EQ(g.n_points, 3u);
}

TEST(Growth, ShiftEquivariance)
{
    DgpSpec spec = make_dgp("alspac_growth");
    spec.n = 200;
    const Frame f = generate(spec);
    const std::vector<std::string> cols{"bmi7", "bmi8", "bmi9", "bmi10", "bmi11", "bmi12"};
    const std::vector<double> ages{7, 8, 9, 10, 11, 12};
    const auto a = growth_features(f, cols, ages, 9.5);
    std::vector<double> shifted;
    for (double v : ages) shifted.push_back(v + 3.25);
    const auto b = growth_features(f, cols, shifted, 12.75);
    for (std::size_t i = 0; i < f.n_rows(); ++i) {
        EXPECT_NEAR(a.size[i], b.size[i], 1e-12);
        EXPECT_NEAR(a.velocity[i], b.velocity[i], 1e-12);
    }
}

TEST(Growth, Errors)
{
    Frame f;
    f.set_column("a", ColumnKind::continuous, {1, 2});
    f.set_column("b", ColumnKind::continuous, {1, 2});
    EXPECT_THROW(growth_features(f, {"a"}, {7}, 7), InputError);
    EXPECT_THROW(growth_features(f, {"a", "b"}, {7, 7}, 7), InputError);
    EXPECT_THROW(growth_features(f, {"a", "b"}, {8, 7}, 7), InputError);
    EXPECT_THROW(extract_growth(f, {"a", "b"}, {7, 8}, 7, "a", "v"), InputError);
    const Frame g = extract_growth(f, {"a", "b"}, {7, 8}, 7);
    EXPECT_TRUE(g.has("size") && g.has("velocity"));
}

TEST(Growth, SizeCarriesTheIndirectEffect)
{
    DgpSpec spec = make_dgp("alspac_growth");
    spec.n = 8000;
    spec.seed = 5;
    const Frame raw = generate(spec);
    const Frame f = extract_growth(raw, {"bmi7", "bmi8", "bmi9", "bmi10", "bmi11", "bmi12"}, {7, 8, 9, 10, 11, 12}, 9.5);
    EstimandRequest r;
    r.kind = EstimandKind::interventional_multi;
    r.exposure = "bw";
    r.baseline_confounders = {"c_edu", "c_occ", "c_smoke", "c_mbmi", "c_psych"};
    r.mediator_blocks = {{"size"}, {"velocity"}};
    const std::string c = " + c_edu + c_occ + c_smoke + c_mbmi + c_psych";
    r.outcome_model = ModelSpec::parse("be ~ bw + size + velocity" + c);
    r.mediator_models = {ModelSpec::parse("size ~ bw" + c), ModelSpec::parse("velocity ~ bw + size" + c)};
    r.mc_draws = 10;
    const auto e = estimate_interventional_multi(r, f, 3);
    // Latent size effect of bw is 0.25 and size -> be is 0.3.
    EXPECT_NEAR(e.point("IIE_1"), 0.075, 0.03);
    EXPECT_LT(std::abs(e.point("IIE_2")), 0.01);
    EXPECT_GT(e.point("IIE_1"), 5 * std::abs(e.point("IIE_2")));
}
