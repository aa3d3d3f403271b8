///
/// \file certificates.hpp
///
/// Dual SOS certificates for the level-n relaxation and closed-form comparison
/// bounds.
///
/// A certificate is a polynomial p of degree 2n and four Gram matrices on the
/// degree-n basis such that
///
///     1 - p = sigma0 - sigma1,     1 + p = psi0 - psi1,
///
/// with every Gram matrix PSD. Any such tuple gives the lower bound
///
///     L(mu - nu)(p) - L(mu)(sigma1) - L(nu)(psi1)  <=  rho_n  <=  TV.
///
/// Certificates are expressed in the affine frame of the solve that produced
/// them; verification maps the input moments into that frame first.
///
#ifndef TVBOUND_CERTIFICATES_HPP
#define TVBOUND_CERTIFICATES_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "tvbound/errors.hpp"
#include "tvbound/moment_core.hpp"
#include "tvbound/relaxation.hpp"

namespace tvbound
{

struct DualCertificate
{
    int level     = 1;
    int dimension = 1;
    AffineFrame frame;
    Polynomial p;
    Eigen::MatrixXd gram_sigma0;
    Eigen::MatrixXd gram_sigma1;
    Eigen::MatrixXd gram_psi0;
    Eigen::MatrixXd gram_psi1;
    double dual_value = 0.0;

    /// p = 0, sigma0 = psi0 = 1, sigma1 = psi1 = 0: always valid, value 0.
    static DualCertificate trivial(int dimension, int n)
    {
        DualCertificate c;
        c.level               = n;
        c.dimension           = dimension;
        c.frame               = AffineFrame::identity(dimension);
        c.p                   = Polynomial(dimension, 2 * n);
        const auto s1         = static_cast<Eigen::Index>(monomial_count(dimension, n));
        c.gram_sigma0         = Eigen::MatrixXd::Zero(s1, s1);
        c.gram_sigma0(0, 0)   = 1.0;
        c.gram_psi0           = c.gram_sigma0;
        c.gram_sigma1         = Eigen::MatrixXd::Zero(s1, s1);
        c.gram_psi1           = c.gram_sigma1;
        return c;
    }
};

struct CertificateCheck
{
    double value = 0.0;
    double identity_residual = 0.0;
    double min_eigenvalue[4] = {0.0, 0.0, 0.0, 0.0};
};

inline constexpr double certificate_identity_tol = 1e-6;
inline constexpr double certificate_psd_tol      = 1e-8;

/// Checks both coefficient identities and the Gram spectra, then evaluates
/// the dual objective on `mu`, `nu`. Throws CertificateMismatch naming the
/// first violated condition.
inline CertificateCheck check_certificate(const DualCertificate& cert, const MomentSequence& mu,
                                          const MomentSequence& nu)
{
    const int n = cert.level;
    const int d = cert.dimension;
    if (mu.dimension() != d || nu.dimension() != d)
    {
        throw DimensionMismatch("verify_certificate: moment and certificate dimensions differ");
    }
    if (mu.max_degree() < 2 * n || nu.max_degree() < 2 * n)
    {
        throw DegreeTooLow("verify_certificate: level " + std::to_string(n) +
                           " needs moments of degree " + std::to_string(2 * n));
    }
    const auto s1 = static_cast<Eigen::Index>(monomial_count(d, n));
    const auto s2 = static_cast<Eigen::Index>(monomial_count(d, 2 * n));
    if (cert.p.coefficients().size() != s2)
    {
        throw DimensionMismatch("verify_certificate: p has the wrong number of coefficients");
    }

    CertificateCheck out;
    const std::pair<const char*, const Eigen::MatrixXd*> grams[] = {
        {"sigma0", &cert.gram_sigma0},
        {"sigma1", &cert.gram_sigma1},
        {"psi0", &cert.gram_psi0},
        {"psi1", &cert.gram_psi1},
    };
    for (int k = 0; k < 4; ++k)
    {
        const auto& [name, g] = grams[k];
        if (g->rows() != s1 || g->cols() != s1)
        {
            throw DimensionMismatch(std::string("verify_certificate: Gram matrix ") + name +
                                    " has the wrong size");
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (*g + g->transpose()),
                                                          Eigen::EigenvaluesOnly);
        out.min_eigenvalue[k] = es.eigenvalues()(0);
        if (!(out.min_eigenvalue[k] >= -certificate_psd_tol))
        {
            throw CertificateMismatch(std::string("Gram matrix ") + name +
                                      " is not PSD: eigenvalue " +
                                      std::to_string(out.min_eigenvalue[k]));
        }
    }

    const Eigen::VectorXd s0 = gram_polynomial(cert.gram_sigma0, d, n).coefficients();
    const Eigen::VectorXd g1 = gram_polynomial(cert.gram_sigma1, d, n).coefficients();
    const Eigen::VectorXd t0 = gram_polynomial(cert.gram_psi0, d, n).coefficients();
    const Eigen::VectorXd t1 = gram_polynomial(cert.gram_psi1, d, n).coefficients();
    Eigen::VectorXd one      = Eigen::VectorXd::Zero(s2);
    one(0)                   = 1.0;
    const Eigen::VectorXd& p = cert.p.coefficients();

    const double r1 = (one - p - (s0 - g1)).cwiseAbs().maxCoeff();
    const double r2 = (one + p - (t0 - t1)).cwiseAbs().maxCoeff();
    out.identity_residual = std::max(r1, r2);
    if (!(r1 <= certificate_identity_tol))
    {
        throw CertificateMismatch("identity 1 - p = sigma0 - sigma1 violated by " +
                                  std::to_string(r1));
    }
    if (!(r2 <= certificate_identity_tol))
    {
        throw CertificateMismatch("identity 1 + p = psi0 - psi1 violated by " +
                                  std::to_string(r2));
    }

    const MomentSequence mu_f = to_frame(mu.truncated(2 * n), cert.frame);
    const MomentSequence nu_f = to_frame(nu.truncated(2 * n), cert.frame);
    out.value = riesz(mu_f - nu_f, cert.p) - riesz(mu_f, Polynomial(d, 2 * n, g1)) -
                riesz(nu_f, Polynomial(d, 2 * n, t1));
    return out;
}

/// Independently recomputed dual value of `cert`; a lower bound on rho_n.
inline double verify_certificate(const DualCertificate& cert, const MomentSequence& mu,
                                 const MomentSequence& nu)
{
    return check_certificate(cert, mu, nu).value;
}

namespace detail
{

/// Folds the multipliers Y of the kernel equalities M(phi) K = 0 into the
/// Gram pair (G0, G1). In the basis [P K] (range, kernel of the bounding
/// moment matrix) both matrices receive the same completion
///
///     D = eps P P^T + P W K^T + K W^T P^T + K X K^T
///
/// on top of G0 + sym(Y K^T) and G1. Only the eps term is visible to the
/// value, since the bounding moment matrix annihilates K; it costs
/// eps tr(P^T M P) and is only used when the range blocks are too close to
/// singular. W splits the
/// range/kernel cross term of sym(Y K^T) between the two matrices in
/// proportion to their range blocks and X closes both Schur complements.
inline void absorb_kernel(const FacialSplit& split, const Eigen::MatrixXd& y, Eigen::MatrixXd& g0,
                          Eigen::MatrixXd& g1, double ridge = 1e-9)
{
    const Eigen::MatrixXd& k = split.kernel;
    if (k.cols() == 0)
    {
        return;
    }
    const Eigen::MatrixXd& pr = split.range;
    const Eigen::Index nk     = k.cols();
    const Eigen::MatrixXd ys  = 0.5 * (y * k.transpose() + k * y.transpose());
    Eigen::MatrixXd a0        = -sym(k.transpose() * ys * k);
    Eigen::MatrixXd a1        = Eigen::MatrixXd::Zero(nk, nk);
    Eigen::MatrixXd d         = Eigen::MatrixXd::Zero(g0.rows(), g0.cols());
    if (pr.cols() > 0)
    {
        const Eigen::Index r     = pr.cols();
        const Eigen::MatrixXd a  = pr.transpose() * ys * k;
        Eigen::MatrixXd l0       = sym(pr.transpose() * g0 * pr);
        Eigen::MatrixXd l1       = sym(pr.transpose() * g1 * pr);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ss(l0 + l1, Eigen::EigenvaluesOnly);
        const double floor = ridge * std::max(1.0, ss.eigenvalues().cwiseAbs().maxCoeff());
        const double eps   = 0.5 * std::max(0.0, floor - ss.eigenvalues()(0));
        l0 += eps * Eigen::MatrixXd::Identity(r, r);
        l1 += eps * Eigen::MatrixXd::Identity(r, r);
        const Eigen::MatrixXd u  = (l0 + l1).llt().solve(a);
        const Eigen::MatrixXd w  = -l1 * u;
        a0 += sym(u.transpose() * l0 * u);
        a1                       = sym(u.transpose() * l1 * u);
        const Eigen::MatrixXd pwk = pr * w * k.transpose();
        d = eps * pr * pr.transpose() + pwk + pwk.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a0, Eigen::EigenvaluesOnly);
    const double scale = std::max({1.0, es.eigenvalues().cwiseAbs().maxCoeff(), a1.norm()});
    const double shift = std::max(0.0, -es.eigenvalues()(0)) + 1e-9 * scale;
    const Eigen::MatrixXd x = a0 + a1 + shift * Eigen::MatrixXd::Identity(nk, nk);
    d += k * x * k.transpose();
    g0 += ys + d;
    g1 += d;
}

} // namespace detail

/// Certificate from the multipliers of an optimal level solve. Throws
/// CertificateMismatch if the recovered tuple fails verification.
inline DualCertificate recover_certificate(const HierarchyResult& result)
{
    if (!result.optimal() || !result.duals)
    {
        throw CertificateMismatch("recover_certificate: level " + std::to_string(result.level) +
                                  " has no optimal multipliers");
    }
    const LevelDuals& ld = *result.duals;
    auto min_eig = [](const Eigen::MatrixXd& g) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (g + g.transpose()), Eigen::EigenvaluesOnly);
        return es.eigenvalues()(0);
    };
    DualCertificate c;
    c.level     = result.level;
    c.dimension = result.dimension;
    c.frame     = result.frame;
    c.p         = Polynomial(result.dimension, 2 * result.level, ld.p);
    // A nearly singular range block makes the fold lose digits; a larger
    // ridge trades a little value for a well conditioned completion.
    for (double ridge = 1e-9; ridge <= 1e-4 * (1 + 1e-12); ridge *= 10.0)
    {
        c.gram_sigma0 = ld.lambda0;
        c.gram_sigma1 = ld.lambda1;
        c.gram_psi0   = ld.gamma0;
        c.gram_psi1   = ld.gamma1;
        detail::absorb_kernel(ld.mu_split, ld.mult_mu, c.gram_sigma0, c.gram_sigma1, ridge);
        detail::absorb_kernel(ld.nu_split, ld.mult_nu, c.gram_psi0, c.gram_psi1, ridge);
        const double worst = std::min({min_eig(c.gram_sigma0), min_eig(c.gram_sigma1),
                                       min_eig(c.gram_psi0), min_eig(c.gram_psi1)});
        if (worst >= -0.1 * certificate_psd_tol)
        {
            break;
        }
    }
    c.dual_value = check_certificate(c, result.mu_frame, result.nu_frame).value;
    return c;
}

/// Closed-form level-one bound from means and standard deviations:
/// 2 D^2 / ((s1 + s2)^2 + D^2), D = m1 - m2.
inline double nishiyama_bound(double m1, double s1, double m2, double s2)
{
    if (!(s1 > 0.0) || !(s2 > 0.0))
    {
        throw std::invalid_argument("nishiyama_bound: standard deviations must be positive");
    }
    const double d2 = (m1 - m2) * (m1 - m2);
    return 2.0 * d2 / ((s1 + s2) * (s1 + s2) + d2);
}

/// Pinsker upper bound on the [0, 2] scale: sqrt(2 KL).
inline double pinsker_upper(double kl)
{
    if (!(kl >= 0.0))
    {
        throw std::invalid_argument("pinsker_upper: KL divergence must be nonnegative");
    }
    return std::sqrt(2.0 * kl);
}

/// Bounds on the [0, 2] scale from the Hellinger distance h in [0, 1]
/// (h^2 = 1 - Bhattacharyya coefficient): (2 h^2, min(2, 2 sqrt(2) h)).
inline std::pair<double, double> hellinger_bounds(double h)
{
    if (!(h >= 0.0))
    {
        throw std::invalid_argument("hellinger_bounds: distance must be nonnegative");
    }
    return {2.0 * h * h, std::min(2.0, 2.0 * std::numbers::sqrt2 * h)};
}

/// KL(N(m1, s1^2) || N(m2, s2^2)).
inline double gaussian_kl(double m1, double s1, double m2, double s2)
{
    if (!(s1 > 0.0) || !(s2 > 0.0))
    {
        throw std::invalid_argument("gaussian_kl: standard deviations must be positive");
    }
    const double d = m1 - m2;
    return std::log(s2 / s1) + (s1 * s1 + d * d) / (2.0 * s2 * s2) - 0.5;
}

/// Hellinger distance in [0, 1] between N(m1, s1^2) and N(m2, s2^2).
inline double gaussian_hellinger(double m1, double s1, double m2, double s2)
{
    if (!(s1 > 0.0) || !(s2 > 0.0))
    {
        throw std::invalid_argument("gaussian_hellinger: standard deviations must be positive");
    }
    const double v  = s1 * s1 + s2 * s2;
    const double d  = m1 - m2;
    const double bc = std::sqrt(2.0 * s1 * s2 / v) * std::exp(-d * d / (4.0 * v));
    return std::sqrt(std::max(0.0, 1.0 - bc));
}

} // namespace tvbound

#endif
