#include <random>

#include <gtest/gtest.h>

#include "tvbound/moment_core.hpp"

using namespace tvbound;

TEST(MonomialCount, BinomialValues)
{
    EXPECT_EQ(monomial_count(1, 4), 5u);
    EXPECT_EQ(monomial_count(2, 2), 6u);
    EXPECT_EQ(monomial_count(2, 4), 15u);
    EXPECT_EQ(monomial_count(3, 3), 20u);
    EXPECT_EQ(monomial_count(1, 0), 1u);
}

TEST(MonomialBasis, GradedOrderInTwoVariables)
{
    const MonomialBasis b(2, 2);
    ASSERT_EQ(b.size(), 6u);
    const std::vector<MultiIndex> expected = {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
    for (std::size_t i = 0; i < expected.size(); ++i)
    {
        EXPECT_EQ(b[i], expected[i]) << i;
        EXPECT_EQ(b.index_of(expected[i]), i);
    }
    EXPECT_THROW(b.index_of(MultiIndex{3, 0}), DegreeTooLow);
    EXPECT_THROW(b.index_of(MultiIndex{1}), DimensionMismatch);
}

TEST(MonomialBasis, RankAgreesWithEnumeration)
{
    for (int d = 1; d <= 4; ++d)
    {
        const MonomialBasis b(d, 5);
        ASSERT_EQ(b.size(), monomial_count(d, 5));
        for (std::size_t i = 0; i < b.size(); ++i)
        {
            EXPECT_EQ(graded_rank(b[i]), i);
        }
    }
}

TEST(Hankel, UnivariatePatternIsHankel)
{
    const Eigen::MatrixXi p = hankel_pattern(1, 3);
    for (int i = 0; i < 4; ++i)
    {
        for (int j = 0; j < 4; ++j)
        {
            EXPECT_EQ(p(i, j), i + j);
        }
    }
}

TEST(Hankel, AdjointIsTranspose)
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    const Eigen::MatrixXi pat = hankel_pattern(2, 2);
    const Eigen::Index s2     = static_cast<Eigen::Index>(monomial_count(2, 4));
    const Eigen::VectorXd y   = Eigen::VectorXd::NullaryExpr(s2, [&] { return g(rng); });
    Eigen::MatrixXd w         = Eigen::MatrixXd::NullaryExpr(6, 6, [&] { return g(rng); });
    w                         = (w + w.transpose()).eval();
    const double lhs          = (hankel(pat, y).array() * w.array()).sum();
    const double rhs          = y.dot(hankel_adjoint(pat, w, s2));
    EXPECT_NEAR(lhs, rhs, 1e-12 * (1 + std::abs(lhs)));
}

TEST(MomentSequence, AccessAndArithmetic)
{
    const auto a = MomentSequence::univariate({1.0, 0.5, 0.25});
    const auto b = MomentSequence::univariate({1.0, -0.5, 0.25});
    EXPECT_DOUBLE_EQ(a.mass(), 1.0);
    EXPECT_DOUBLE_EQ(a[MultiIndex{1}], 0.5);
    EXPECT_DOUBLE_EQ((a - b)[MultiIndex{1}], 1.0);
    EXPECT_DOUBLE_EQ((a + b)[MultiIndex{2}], 0.5);
    EXPECT_DOUBLE_EQ((2.0 * a)[MultiIndex{0}], 2.0);
    EXPECT_EQ(a.truncated(1).max_degree(), 1);
    EXPECT_THROW(a.truncated(3), DegreeTooLow);
    EXPECT_THROW(a[MultiIndex{3}], DegreeTooLow);
    EXPECT_THROW(a - MomentSequence::zeros(2, 2), DimensionMismatch);
}

TEST(MomentMatrix, StandardNormalLevelTwo)
{
    const auto seq        = MomentSequence::univariate({1, 0, 1, 0, 3});
    const MomentMatrix mm = moment_matrix(seq, 2);
    Eigen::Matrix3d expected;
    expected << 1, 0, 1, 0, 1, 0, 1, 0, 3;
    EXPECT_TRUE(mm.entries.isApprox(expected));
    EXPECT_THROW(moment_matrix(seq, 3), DegreeTooLow);
}

TEST(Polynomial, EvaluationAndProduct)
{
    // p = 1 + 2x - y^2, q = x + y
    const auto p = Polynomial::from_terms(2, {{{0, 0}, 1.0}, {{1, 0}, 2.0}, {{0, 2}, -1.0}});
    const auto q = Polynomial::from_terms(2, {{{1, 0}, 1.0}, {{0, 1}, 1.0}});
    const Eigen::Vector2d x(0.3, -1.2);
    EXPECT_NEAR(p(x), 1 + 0.6 - 1.44, 1e-14);
    EXPECT_NEAR((p * q)(x), p(x) * q(x), 1e-13);
    EXPECT_EQ(p.effective_degree(), 2);
    EXPECT_EQ(Polynomial(1, 3).effective_degree(), -1);
}

TEST(Polynomial, GramPolynomialMatchesQuadraticForm)
{
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g;
    Eigen::MatrixXd gm = Eigen::MatrixXd::NullaryExpr(6, 6, [&] { return g(rng); });
    gm                 = (gm + gm.transpose()).eval();
    const Polynomial p = gram_polynomial(gm, 2, 2);
    const MonomialBasis b(2, 2);
    for (int t = 0; t < 5; ++t)
    {
        const Eigen::Vector2d x(g(rng), g(rng));
        Eigen::VectorXd v(6);
        for (std::size_t i = 0; i < 6; ++i)
        {
            v(static_cast<Eigen::Index>(i)) = std::pow(x(0), b[i][0]) * std::pow(x(1), b[i][1]);
        }
        EXPECT_NEAR(p(x), v.dot(gm * v), 1e-10);
    }
}

TEST(Riesz, IsTheLinearFunctional)
{
    const auto seq = MomentSequence::univariate({1, 0, 1, 0, 3});
    // E[(1 - x^2)^2] = 1 - 2 + 3 for a standard normal.
    const auto p = Polynomial::from_terms(1, {{{0}, 1.0}, {{2}, -2.0}, {{4}, 1.0}});
    EXPECT_NEAR(riesz(seq, p), 2.0, 1e-14);
    const auto high = Polynomial::from_terms(1, {{{5}, 1.0}});
    EXPECT_THROW(riesz(seq, high), DegreeTooLow);
}

TEST(AffineFrame, RoundTripsSequences)
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-2, 2);
    // moments of atoms at x_i, weights w_i, in two variables
    std::vector<Eigen::Vector2d> pts;
    std::vector<double> ws;
    for (int i = 0; i < 4; ++i)
    {
        pts.emplace_back(u(rng), u(rng));
        ws.push_back(0.25);
    }
    const MonomialBasis b(2, 4);
    Eigen::VectorXd vals = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b.size()));
    for (std::size_t k = 0; k < b.size(); ++k)
    {
        for (std::size_t i = 0; i < pts.size(); ++i)
        {
            vals(static_cast<Eigen::Index>(k)) +=
                ws[i] * std::pow(pts[i](0), b[k][0]) * std::pow(pts[i](1), b[k][1]);
        }
    }
    const MomentSequence seq(2, 4, vals);
    AffineFrame f{Eigen::Vector2d(0.4, -0.3), 1.7};
    const MomentSequence there = to_frame(seq, f);
    // Frame moments equal moments of the mapped atoms.
    for (std::size_t k = 0; k < b.size(); ++k)
    {
        double direct = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i)
        {
            const Eigen::VectorXd y = f.to_frame(pts[i]);
            direct += ws[i] * std::pow(y(0), b[k][0]) * std::pow(y(1), b[k][1]);
        }
        EXPECT_NEAR(there.at(k), direct, 1e-12);
    }
    const MomentSequence back = from_frame(there, f);
    EXPECT_LT((back.values() - seq.values()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(AffineFrame, NormalizingFrameCentresAndScales)
{
    // Atoms at 10 and 12: centre 11, 2n-th root of the centred 2n-th moment is 1.
    const auto seq = MomentSequence::univariate({1.0, 11.0, 122.0, 1364.0, 15272.0});
    const MomentSequence* one[] = {&seq};
    const AffineFrame f = normalizing_frame(one, 2);
    EXPECT_NEAR(f.center(0), 11.0, 1e-12);
    EXPECT_NEAR(f.scale, 1.0, 1e-9);
}
