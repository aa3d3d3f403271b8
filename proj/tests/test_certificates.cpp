#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tvbound/certificates.hpp"
#include "tvbound/measures.hpp"

using namespace tvbound;

namespace
{

MomentSequence gauss(double m, double s, int deg)
{
    return moments(gaussian(m, s), 1, deg);
}

MomentSequence dirac(double x, int deg)
{
    return moments(atomic(AtomicMeasure::univariate({{x, 1.0}})), 1, deg);
}

} // namespace

TEST(Certificate, IdenticalMeasuresGiveZero)
{
    const auto r = solve_level(gauss(0, 1, 4), gauss(0, 1, 4), 2);
    const auto c = recover_certificate(r);
    EXPECT_NEAR(c.dual_value, 0.0, 1e-6);
}

TEST(Certificate, DiracPair)
{
    const auto mu = dirac(0, 2);
    const auto nu = dirac(0.1, 2);
    const auto c  = recover_certificate(solve_level(mu, nu, 1));
    EXPECT_NEAR(verify_certificate(c, mu, nu), 2.0, 1e-4);
}

TEST(Certificate, FirstLevelGaussian)
{
    const auto mu = gauss(0, 0.1, 2);
    const auto nu = gauss(1, 0.1, 2);
    const auto c  = recover_certificate(solve_level(mu, nu, 1));
    EXPECT_NEAR(verify_certificate(c, mu, nu), 1.9231, 1e-3);
}

TEST(Certificate, VerifiedValueTracksPrimal)
{
    const std::pair<double, double> cases[][2] = {
        {{0, 0.1}, {1, 0.5}},
        {{0, 0.5}, {1, 0.5}},
        {{0.5, 0.1}, {1, 0.1}},
        {{0.8, 0.05}, {1, 0.1}},
    };
    for (const auto& [a, b] : cases)
    {
        for (int n = 1; n <= 4; ++n)
        {
            const auto mu = gauss(a.first, a.second, 2 * n);
            const auto nu = gauss(b.first, b.second, 2 * n);
            const auto r  = solve_level(mu, nu, n);
            const auto c  = recover_certificate(r);
            const double v = verify_certificate(c, mu, nu);
            EXPECT_LE(v, r.rho_n + 1e-6);
            EXPECT_NEAR(v, r.rho_n, 1e-4) << a.first << " " << b.first << " n=" << n;
        }
    }
}

TEST(Certificate, NegativeEigenvalueIsRejected)
{
    const auto mu = gauss(0, 0.2, 4);
    const auto nu = gauss(1, 0.2, 4);
    auto c        = recover_certificate(solve_level(mu, nu, 2));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.gram_sigma1);
    Eigen::VectorXd ev = es.eigenvalues();
    ev(0)              = -1e-3;
    c.gram_sigma1      = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    EXPECT_THROW(verify_certificate(c, mu, nu), CertificateMismatch);
}

TEST(Certificate, BrokenIdentityIsRejected)
{
    const auto mu = gauss(0, 0.2, 4);
    const auto nu = gauss(1, 0.2, 4);
    auto c        = recover_certificate(solve_level(mu, nu, 2));
    Eigen::VectorXd p = c.p.coefficients();
    p(1) += 1e-3;
    c.p = Polynomial(1, 4, p);
    EXPECT_THROW(verify_certificate(c, mu, nu), CertificateMismatch);
}

TEST(Certificate, TrivialIsValidWithValueZero)
{
    const auto c = DualCertificate::trivial(1, 3);
    EXPECT_DOUBLE_EQ(verify_certificate(c, gauss(0, 1, 6), gauss(2, 0.3, 6)), 0.0);
    EXPECT_THROW(verify_certificate(c, gauss(0, 1, 4), gauss(2, 0.3, 4)), DegreeTooLow);
}

TEST(Certificate, UnsolvedLevelHasNoCertificate)
{
    EXPECT_THROW(recover_certificate(HierarchyResult{}), CertificateMismatch);
}

TEST(Certificate, PolynomialInequalitiesOnGrid)
{
    // sigma1 >= p - 1 and psi1 >= -p - 1 pointwise, so sigma1 - p + 1 = sigma0 >= 0.
    const auto mu = gauss(0, 0.1, 6);
    const auto nu = gauss(1, 0.5, 6);
    const auto c  = recover_certificate(solve_level(mu, nu, 3));
    const auto s1 = gram_polynomial(c.gram_sigma1, 1, 3);
    const auto t1 = gram_polynomial(c.gram_psi1, 1, 3);
    double worst  = -1e300;
    for (int i = 0; i <= 1000; ++i)
    {
        Eigen::VectorXd y(1);
        y(0) = -3.0 + 6.0 * i / 1000.0;
        const double p = c.p(y);
        worst          = std::max({worst, p - 1 - s1(y), -p - 1 - t1(y)});
    }
    EXPECT_LE(worst, 1e-6);
}

TEST(ClosedForms, NishiyamaExamples)
{
    EXPECT_NEAR(nishiyama_bound(0, 0.1, 1, 0.1), 1.9231, 1e-4);
    EXPECT_DOUBLE_EQ(nishiyama_bound(0.3, 0.4, 0.3, 0.2), 0.0);
    EXPECT_NEAR(nishiyama_bound(0, 0.5, 1, 0.5), 1.0, 1e-12);
    EXPECT_THROW(nishiyama_bound(0, 0, 1, 1), std::invalid_argument);
}

TEST(ClosedForms, PinskerAndHellingerEdgeCases)
{
    EXPECT_DOUBLE_EQ(pinsker_upper(0.0), 0.0);
    const auto [lo, hi] = hellinger_bounds(0.0);
    EXPECT_DOUBLE_EQ(lo, 0.0);
    EXPECT_DOUBLE_EQ(hi, 0.0);
    EXPECT_THROW(pinsker_upper(-1.0), std::invalid_argument);
    EXPECT_DOUBLE_EQ(hellinger_bounds(1.0).second, 2.0);
}

TEST(ClosedForms, SandwichExactTv)
{
    const double cases[][4] = {
        {0, 0.1, 1, 0.1}, {0, 0.2, 1, 0.5}, {0.5, 0.1, 1, 0.5}, {0.8, 0.05, 1, 0.01}, {0, 1, 0.1, 1.2},
    };
    for (const auto& c : cases)
    {
        const double tv = oracle::gaussian_tv(c[0], c[1], c[2], c[3]);
        EXPECT_GE(pinsker_upper(gaussian_kl(c[0], c[1], c[2], c[3])), tv - 1e-12);
        const auto [lo, hi] = hellinger_bounds(gaussian_hellinger(c[0], c[1], c[2], c[3]));
        EXPECT_LE(lo, tv + 1e-12);
        EXPECT_GE(hi, tv - 1e-12);
        EXPECT_LE(nishiyama_bound(c[0], c[1], c[2], c[3]), tv + 1e-12);
    }
}
