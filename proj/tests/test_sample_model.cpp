// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace infsamp;
using testutil::make_sample;
using testutil::max_abs_diff;
using testutil::to_library;

namespace
{
DiscreteJointDist two_point(double p0 = 0.5, double p1 = 0.5)
{
    return {{0, 1}, {{0}}, Eigen::Vector2d(p0, p1)};
}

PiFunction pi_col(double a, double b)
{
    return {Eigen::Vector2d(a, b)};
}
}  // namespace

TEST(ExactSamplePdf, HandBayes)
{
    auto fs = exact_sample_pdf(two_point(), pi_col(0.2, 0.4));
    EXPECT_NEAR(fs.p(0, 0), 1.0 / 3, 1e-15);
    EXPECT_NEAR(fs.p(1, 0), 2.0 / 3, 1e-15);
}

TEST(ExactSamplePdf, ConstantInYIsIgnorable)
{
    std::mt19937_64 eng(1);
    auto in = oracle::random_instance(eng, 5, 3);
    for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t i = 0; i < 5; ++i)
            in.pi[i][j] = in.pi[0][j];
    auto [fp, pi] = to_library(in);
    auto fs = exact_sample_pdf(fp, pi);
    EXPECT_LT((fs.conditional() - fp.conditional()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ExactSamplePdf, MatchesJointBayesOracleAndNormalizes)
{
    std::mt19937_64 eng(2);
    for (int t = 0; t < 100; ++t)
    {
        auto in = oracle::random_instance(eng, 1 + t % 8, 1 + t % 4);
        auto [fp, pi] = to_library(in);
        auto fs = exact_sample_pdf(fp, pi);
        EXPECT_NEAR(fs.p.sum(), 1.0, 1e-14);
        EXPECT_LT(max_abs_diff(fs.p, oracle::sample_joint(in.p, in.pi)), 1e-14);
    }
}

TEST(ExactSamplePdf, RejectsBadInput)
{
    EXPECT_THROW(exact_sample_pdf(two_point(0.5, 0.4), pi_col(0.2, 0.4)), Error);
    EXPECT_THROW(exact_sample_pdf(two_point(), pi_col(0.0, 0.4)), Error);
    EXPECT_THROW(exact_sample_pdf(two_point(), pi_col(0.2, 1.2)), Error);
}

TEST(RecoverPopulationPdf, RoundTripHandCase)
{
    auto fp = two_point();
    auto pi = pi_col(0.2, 0.4);
    auto back = recover_population_pdf(exact_sample_pdf(fp, pi), pi);
    EXPECT_NEAR(back.p(0, 0), 0.5, 1e-15);
    EXPECT_NEAR(back.p(1, 0), 0.5, 1e-15);
}

TEST(RecoverPopulationPdf, ConstantPiIsIdentity)
{
    std::mt19937_64 eng(3);
    auto in = oracle::random_instance(eng, 6, 1);
    auto [fs, pi] = to_library(in);
    pi.pi.setConstant(0.3);
    EXPECT_LT((recover_population_pdf(fs, pi).p - fs.p).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(RecoverPopulationPdf, RandomRoundTripsAgainstOracle)
{
    std::mt19937_64 eng(4);
    double worst = 0;
    for (int t = 0; t < 100; ++t)
    {
        auto in = oracle::random_instance(eng, 1 + t % 8, 1 + t % 4);
        auto [fp, pi] = to_library(in);
        auto fs = exact_sample_pdf(fp, pi);
        auto back = recover_population_pdf(fs, pi);
        worst = std::max(worst, (back.p - fp.p).cwiseAbs().maxCoeff());
        // Recovery from the oracle's f_s via f_s / pi normalization.
        auto ofs = oracle::sample_joint(in.p, in.pi);
        EXPECT_LT(max_abs_diff(back.p, oracle::population_joint(ofs, in.pi)), 1e-13);
    }
    EXPECT_LT(worst, 1e-10);
}

TEST(RecoverPopulationPdf, InfiniteWeightIsUnrecoverable)
{
    try
    {
        recover_population_pdf(two_point(), pi_col(1e-320, 0.5));
        FAIL();
    }
    catch (Error const& e)
    {
        EXPECT_EQ(e.kind(), ErrorKind::unrecoverable_support);
        EXPECT_EQ(e.index(), 0u);
    }
}

TEST(ComplementPdf, HandDefinitionForm)
{
    auto c = exact_complement_pdf(two_point(), pi_col(0.2, 0.4));
    EXPECT_NEAR(c.definition.p(1, 0), 3.0 / 7, 1e-15);
    EXPECT_NEAR(c.definition.p(0, 0), 4.0 / 7, 1e-15);
    EXPECT_NEAR(c.moment.p(1, 0), 3.0 / 7, 1e-15);
}

TEST(ComplementPdf, ConstantPiGivesPopulation)
{
    std::mt19937_64 eng(5);
    auto in = oracle::random_instance(eng, 4, 3);
    auto [fp, pi] = to_library(in);
    pi.pi.setConstant(0.6);
    auto c = exact_complement_pdf(fp, pi);
    EXPECT_LT((c.definition.p - fp.p).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((c.moment.p - fp.p).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ComplementPdf, DualFormsAgreeAndMatchOracle)
{
    std::mt19937_64 eng(6);
    double worst = 0;
    for (int t = 0; t < 100; ++t)
    {
        auto in = oracle::random_instance(eng, 1 + t % 8, 1 + t % 4);
        auto [fp, pi] = to_library(in);
        auto c = exact_complement_pdf(fp, pi);
        worst = std::max(worst, (c.definition.p - c.moment.p).cwiseAbs().maxCoeff());
        EXPECT_LT(max_abs_diff(c.definition.p, oracle::complement_joint(in.p, in.pi)), 1e-14);
    }
    EXPECT_LT(worst, 1e-10);
}

TEST(ComplementPdf, CertainSelectionEmptiesComplement)
{
    DiscreteJointDist fp{{0, 1}, {{0}, {1}}, Eigen::Matrix2d::Constant(0.25)};
    PiFunction pi{Eigen::Matrix2d::Constant(0.5)};
    pi.pi.col(1).setOnes();
    try
    {
        exact_complement_pdf(fp, pi);
        FAIL();
    }
    catch (Error const& e)
    {
        EXPECT_EQ(e.kind(), ErrorKind::empty_complement);
        EXPECT_EQ(e.index(), 1u);
    }
}

TEST(Ignorability, Verdicts)
{
    DiscreteJointDist fp{{0, 1}, {{0}, {1}}, Eigen::Matrix2d::Constant(0.25)};
    PiFunction z_only{Eigen::Matrix2d::Zero()};
    z_only.pi.col(0).setConstant(0.3);
    z_only.pi.col(1).setConstant(0.8);
    EXPECT_TRUE(ignorability_check(fp, z_only, 1e-12));
    EXPECT_FALSE(ignorability_check(two_point(), pi_col(0.2, 0.4), 1e-12));
    EXPECT_TRUE(ignorability_check(two_point(), pi_col(0.7, 0.7), 0.0));
}

TEST(ExactIdentities, MixtureAndFixedPoint)
{
    std::mt19937_64 eng(7);
    for (int t = 0; t < 100; ++t)
    {
        auto in = oracle::random_instance(eng, 1 + t % 8, 1 + t % 4);
        if (t % 3 == 0)
            for (std::size_t j = 0; j < in.pi.front().size(); ++j)
                for (auto& row : in.pi)
                    row[j] = in.pi[0][j];
        auto [fp, pi] = to_library(in);
        auto rep = identity_residuals(fp, pi);
        ASSERT_TRUE(rep.mixture.has_value());
        EXPECT_LT(*rep.mixture, 1e-12);
        if (t % 3 == 0)
        {
            EXPECT_TRUE(rep.ignorable);
            ASSERT_TRUE(rep.fixed_point.has_value());
            EXPECT_LT(*rep.fixed_point, 1e-12);
        }
    }
}

TEST(EstimateEsw, ConstantWeights)
{
    auto s = make_sample({1, 4, 2, 8, 5}, {3, 3, 3, 3, 3}, {{0}, {1}, {0}, {1}, {2}});
    for (auto form : {EswForm::linear, EswForm::log_linear})
    {
        auto m = estimate_esw(s, form, ZFit::regression);
        for (Eigen::Index i = 0; i < 5; ++i)
        {
            EXPECT_NEAR(m.predict(s.y[i], s.z.row(i)), 3.0, 1e-12);
            EXPECT_NEAR(m.predict_z(s.z.row(i)), 3.0, 1e-12);
        }
    }
}

TEST(EstimateEsw, NoiselessLogLinearRecovery)
{
    std::vector<double> y{-1, 0, 0.5, 2, 3, 4.5}, w;
    for (double v : y)
        w.push_back(std::exp(0.1 + 0.2 * v));
    auto s = make_sample(y, w, {{1}, {0}, {2}, {1}, {0}, {3}});
    auto m = estimate_esw(s, EswForm::log_linear, ZFit::regression);
    EXPECT_NEAR(m.coef_yz[0], 0.1, 1e-8);
    EXPECT_NEAR(m.coef_yz[1], 0.2, 1e-8);
    EXPECT_NEAR(m.coef_yz[2], 0.0, 1e-8);
}

TEST(EstimateEsw, ErrorContracts)
{
    auto few = make_sample({1, 2, 3}, {1, 1, 1}, {{0}, {1}, {2}});
    EXPECT_THROW(estimate_esw(few), Error);

    auto flat_y = make_sample({2, 2, 2, 2, 2}, {1, 2, 3, 4, 5}, {{0}, {1}, {0}, {1}, {2}});
    try
    {
        estimate_esw(flat_y, EswForm::linear, ZFit::regression);
        FAIL();
    }
    catch (Error const& e)
    {
        EXPECT_EQ(e.kind(), ErrorKind::singular_design);
    }

    // Linear fit of w = (1,1,1,1,100) on y = 0..4 is negative at y = 0.
    auto neg = make_sample({0, 1, 2, 3, 4}, {1, 1, 1, 1, 100});
    try
    {
        estimate_esw(neg, EswForm::linear, ZFit::regression);
        FAIL();
    }
    catch (Error const& e)
    {
        EXPECT_EQ(e.kind(), ErrorKind::invalid_weight_model);
    }
}

TEST(EstimateEsw, OutcomeCoefficientHasSignOfMinusSelectionSlope)
{
    PopulationModel pm;
    pm.beta = {1, 1};
    pm.covariates = {CovariateSpec::standard_normal()};
    auto pop = generate_population(pm, 20000, 31);
    InclusionModel m;
    m.a_y = 0.5;
    m.target_n = 1000;
    auto p = compute_inclusion_probs(pop, m);
    int negative = 0;
    for (int r = 0; r < 200; ++r)
    {
        auto s = draw_sample(pop, p.combined, derive_seed(77, r));
        negative += estimate_esw(s, EswForm::log_linear).coef_yz[1] < 0;
    }
    EXPECT_EQ(negative, 200);
}

TEST(PredictTotal, ConstantWeightsCollapseToExpansion)
{
    std::vector<double> y{2, 4, 9, 1};
    double N = 10;
    auto s = make_sample(y, std::vector<double>(4, N / 4), {{0}, {0}, {0}, {0}});
    std::map<LevelKey, double> counts{{{0.0}, N - 4}};
    auto r = predict_total(s, counts);
    EXPECT_NEAR(r.scalar(), N * 4.0, 1e-12);
    EXPECT_NEAR(r.scalar(), N * hajek_mean(s).scalar(), 1e-12);
}

TEST(PredictTotal, CensusIsExactSum)
{
    auto s = make_sample({2, 4, 9}, {1, 1, 1}, {{0}, {1}, {1}});
    std::map<LevelKey, double> counts{{{0.0}, 0}, {{1.0}, 0}};
    EXPECT_EQ(predict_total(s, counts).scalar(), 15.0);
}

TEST(PredictTotal, HandMomentForm)
{
    // Ratio (1*2 + 2*4) / (1 + 2) = 10/3 for each of 5 nonsampled units.
    auto s = make_sample({2, 4}, {2, 3}, {{1}, {1}});
    std::map<LevelKey, double> counts{{{1.0}, 5}};
    EXPECT_NEAR(predict_total(s, counts).scalar(), 6.0 + 50.0 / 3.0, 1e-13);
}

TEST(PredictTotal, ModeledModeUsesFittedWeights)
{
    auto s = make_sample({2, 4, 9}, {2, 3, 5}, {{0}, {0}, {0}});
    std::map<LevelKey, double> counts{{{0.0}, 7}};
    auto esw = EswModel::constant(4.0);
    auto r = predict_total(s, counts, PredictMode::modeled, &esw);
    EXPECT_NEAR(r.scalar(), 15.0 + 7 * 5.0, 1e-12);
}

TEST(PredictTotal, ErrorContracts)
{
    auto s = make_sample({2, 4}, {1, 1}, {{0}, {1}});
    std::map<LevelKey, double> unseen{{{2.0}, 3}};
    try
    {
        predict_total(s, unseen);
        FAIL();
    }
    catch (Error const& e)
    {
        EXPECT_EQ(e.kind(), ErrorKind::unsupported_level);
    }
    std::map<LevelKey, double> needed{{{0.0}, 3}};
    try
    {
        predict_total(s, needed);
        FAIL();
    }
    catch (Error const& e)
    {
        EXPECT_EQ(e.kind(), ErrorKind::degenerate_weights);
    }
}

namespace
{
struct Toy
{
    DiscreteJointDist fp;
    PiFunction pi;
    std::vector<LevelKey> z_all;
    Sample s;
};

Toy toy()
{
    // y in {0, 1}; z in {0, 1}; joint p(y, z).
    Eigen::Matrix2d p;
    p << 0.1, 0.3, 0.2, 0.4;
    Eigen::Matrix2d pi;
    pi << 0.3, 0.6, 0.7, 0.2;
    Toy t{{{0, 1}, {{0}, {1}}, p}, {pi}, {{0}, {1}, {1}}, {}};
    t.s = make_sample({1, 0}, {1, 1}, {{0}, {1}});
    t.s.unit_ids = {0, 2};
    return t;
}
}  // namespace

TEST(FullLikelihood, MatchesDirectProduct)
{
    auto t = toy();
    // f_p(y | z): z=0 column (0.1, 0.2)/0.3, z=1 column (0.3, 0.4)/0.7.
    double fp1_z0 = 0.2 / 0.3, fp0_z1 = 0.3 / 0.7, fp1_z1 = 0.4 / 0.7;
    double unit0 = 0.7 * fp1_z0;                    // y=1, z=0, sampled
    double unit2 = 0.6 * fp0_z1;                    // y=0, z=1, sampled
    double unit1 = 1 - (0.6 * fp0_z1 + 0.2 * fp1_z1);  // z=1, not sampled
    double direct = std::log(unit0 * unit1 * unit2);
    auto ll = full_log_likelihood(t.fp, t.pi, t.s, t.z_all);
    EXPECT_NEAR(ll.value, direct, 1e-12);
    EXPECT_FALSE(ll.offending_unit);
    EXPECT_LE(ll.value, 0.0);
}

TEST(FullLikelihood, CensusReducesToPopulationLikelihood)
{
    auto t = toy();
    t.pi.pi.setOnes();
    auto s = make_sample({1, 0, 1}, {1, 1, 1}, {{0}, {1}, {1}});
    double expect = std::log(0.2 / 0.3) + std::log(0.3 / 0.7) + std::log(0.4 / 0.7);
    EXPECT_NEAR(full_log_likelihood(t.fp, t.pi, s, t.z_all).value, expect, 1e-14);
}

TEST(FullLikelihood, ZeroFactorGivesMinusInfinityWithUnit)
{
    auto t = toy();
    t.fp.p << 0.0, 0.3, 0.3, 0.4;  // f_p(y=0 | z=0) = 0
    auto s = make_sample({0}, {1}, {{0}});
    s.unit_ids = {0};
    auto ll = full_log_likelihood(t.fp, t.pi, s, t.z_all);
    EXPECT_TRUE(std::isinf(ll.value) && ll.value < 0);
    ASSERT_TRUE(ll.offending_unit);
    EXPECT_EQ(*ll.offending_unit, 0u);
}

TEST(FullLikelihood, NeverPositiveOnRandomInstances)
{
    std::mt19937_64 eng(9);
    std::uniform_real_distribution<double> u;
    for (int t = 0; t < 50; ++t)
    {
        auto in = oracle::random_instance(eng, 3, 2);
        auto [fp, pi] = to_library(in);
        std::vector<LevelKey> z_all;
        std::vector<double> ys, ws;
        std::vector<std::vector<double>> zs;
        std::vector<std::size_t> ids;
        for (std::size_t j = 0; j < 6; ++j)
        {
            z_all.push_back({static_cast<double>(j % 2)});
            if (u(eng) < 0.5)
            {
                ids.push_back(j);
                ys.push_back(static_cast<double>(j % 3));
                ws.push_back(1);
                zs.push_back(z_all.back());
            }
        }
        auto s = make_sample(ys, ws, zs);
        s.unit_ids = ids;
        EXPECT_LE(full_log_likelihood(fp, pi, s, z_all).value, 0.0);
    }
}
