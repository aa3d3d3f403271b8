#ifndef TVBOUND_EXTRACTION_HPP
#define TVBOUND_EXTRACTION_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tvbound/errors.hpp"
#include "tvbound/measures.hpp"
#include "tvbound/moment_core.hpp"
#include "tvbound/relaxation.hpp"

namespace tvbound
{

inline constexpr double default_rank_tol = 1e-6;

struct FlatnessReport
{
    std::vector<int> ranks;
    bool flat      = false;
    int flat_rank  = 0;
    double rank_tol = default_rank_tol;
};

namespace detail
{

inline void require_univariate(const MomentSequence& seq, int n, const char* who)
{
    if (seq.dimension() != 1)
    {
        throw UnsupportedDimension(std::string(who) + ": atom extraction is univariate only");
    }
    if (n < 1)
    {
        throw std::invalid_argument(std::string(who) + ": level must be positive");
    }
    if (seq.max_degree() < 2 * n)
    {
        throw DegreeTooLow(std::string(who) + ": need moments of degree " + std::to_string(2 * n));
    }
}

/// Ranks of M_0..M_n measured against the largest singular value of M_n.
inline FlatnessReport rank_profile(const MomentSequence& seq, int n, double rank_tol)
{
    const Eigen::MatrixXd mn = moment_matrix(seq, n).entries;
    FlatnessReport rep;
    rep.rank_tol = rank_tol;
    const double top =
        mn.size() > 0 ? Eigen::JacobiSVD<Eigen::MatrixXd>(mn).singularValues()(0) : 0.0;
    int running = 0;
    for (int k = 0; k <= n; ++k)
    {
        const Eigen::VectorXd sv =
            Eigen::JacobiSVD<Eigen::MatrixXd>(mn.topLeftCorner(k + 1, k + 1)).singularValues();
        int r = 0;
        if (top > 0.0)
        {
            r = static_cast<int>((sv.array() > rank_tol * top).count());
        }
        running = std::max(running, r);
        rep.ranks.push_back(running);
    }
    rep.flat      = rep.ranks[static_cast<std::size_t>(n)] == rep.ranks[static_cast<std::size_t>(n - 1)];
    rep.flat_rank = rep.ranks.back();
    return rep;
}

/// Shift-operator extraction of r atoms from M_n.
inline std::vector<Atom> shift_atoms(const MomentSequence& seq, int n, int r, double rank_tol)
{
    if (r == 0)
    {
        return {};
    }
    const Eigen::MatrixXd mn = moment_matrix(seq, n).entries;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mn);
    const Eigen::VectorXd lam = es.eigenvalues().tail(r).cwiseMax(0.0);
    const Eigen::MatrixXd v   = es.eigenvectors().rightCols(r) * lam.cwiseSqrt().asDiagonal();

    const Eigen::MatrixXd low = v.topRows(n);
    const Eigen::MatrixXd up  = v.bottomRows(n);
    const Eigen::MatrixXd x   = low.completeOrthogonalDecomposition().solve(up);
    Eigen::EigenSolver<Eigen::MatrixXd> shift(x);
    const Eigen::VectorXcd ev = shift.eigenvalues();
    const double spread       = std::max(1.0, ev.cwiseAbs().maxCoeff());
    std::vector<double> pts;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
    {
        if (std::abs(ev(i).imag()) > 1e-6 * spread)
        {
            throw IllConditioned("extract_atoms: shift operator has complex eigenvalues");
        }
        pts.push_back(ev(i).real());
    }
    std::sort(pts.begin(), pts.end());

    Eigen::MatrixXd vand(r, r);
    Eigen::VectorXd rhs(r);
    for (int k = 0; k < r; ++k)
    {
        rhs(k) = seq.at(static_cast<std::size_t>(k));
        for (int i = 0; i < r; ++i)
        {
            vand(k, i) = std::pow(pts[static_cast<std::size_t>(i)], k);
        }
    }
    const Eigen::VectorXd w = vand.colPivHouseholderQr().solve(rhs);

    double scale = 0.0;
    double worst = 0.0;
    for (int k = 0; k <= 2 * n; ++k)
    {
        double recon = 0.0;
        for (int i = 0; i < r; ++i)
        {
            recon += w(i) * std::pow(pts[static_cast<std::size_t>(i)], k);
        }
        const double m = seq.at(static_cast<std::size_t>(k));
        scale          = std::max(scale, std::abs(m));
        worst          = std::max(worst, std::abs(recon - m));
    }
    if (worst > 1e-6 * std::max(scale, 1e-300))
    {
        throw IllConditioned("extract_atoms: atoms reproduce the moments only to " +
                             std::to_string(worst / std::max(scale, 1e-300)) + " (relative)");
    }
    const double mass = std::max(std::abs(seq.mass()), 1e-300);
    std::vector<Atom> out;
    for (int i = 0; i < r; ++i)
    {
        if (w(i) < -10.0 * rank_tol * mass)
        {
            throw IllConditioned("extract_atoms: negative weight " + std::to_string(w(i)));
        }
        out.push_back({Eigen::VectorXd::Constant(1, pts[static_cast<std::size_t>(i)]), w(i)});
    }
    return out;
}

inline MomentSequence atom_moments(const AtomicMeasure& m, int max_degree)
{
    std::vector<Eigen::VectorXd> pts;
    std::vector<double> ws;
    for (const Atom& a : m.atoms)
    {
        pts.push_back(a.point);
        ws.push_back(a.weight);
    }
    return MomentSequence(1, max_degree, atomic_moments(pts, ws, 1, max_degree));
}

inline AtomicMeasure map_atoms(std::vector<Atom> atoms, const AffineFrame& frame)
{
    AtomicMeasure m;
    for (Atom& a : atoms)
    {
        a.point = frame.from_frame(a.point);
        m.atoms.push_back(std::move(a));
    }
    return m;
}

} // namespace detail

/// Rank profile of M_0..M_n, reported nondecreasing. Works in the coordinates
/// of `seq`; rescaling a clustered sequence here would only amplify rounding,
/// so callers with badly scaled data should move it to a frame first.
inline FlatnessReport flatness(const MomentSequence& seq, int n, double rank_tol = default_rank_tol)
{
    detail::require_univariate(seq, n, "flatness");
    if (!(rank_tol > 0.0))
    {
        throw std::invalid_argument("flatness: rank_tol must be positive");
    }
    return detail::rank_profile(seq.truncated(2 * n), n, rank_tol);
}

inline AtomicMeasure extract_atoms(const MomentSequence& seq, int n,
                                   double rank_tol = default_rank_tol)
{
    const FlatnessReport rep = flatness(seq, n, rank_tol);
    if (!rep.flat)
    {
        throw NotFlat("extract_atoms: rank(M_n) = " + std::to_string(rep.ranks.back()) +
                      " but rank(M_(n-1)) = " + std::to_string(rep.ranks[rep.ranks.size() - 2]));
    }
    AtomicMeasure m;
    m.atoms = detail::shift_atoms(seq.truncated(2 * n), n, rep.flat_rank, rank_tol);
    return m;
}

/// Atoms of the optimal (phi, psi) pair of a level solve, in original
/// coordinates. Extraction runs on the solver's frame moments.
inline std::pair<AtomicMeasure, AtomicMeasure> recover_hahn_jordan(const HierarchyResult& result,
                                                                   double rank_tol = default_rank_tol)
{
    if (result.dimension != 1)
    {
        throw UnsupportedDimension("recover_hahn_jordan: atom extraction is univariate only");
    }
    const int n = result.level;
    AtomicMeasure pos = extract_atoms(result.phi_frame, n, rank_tol);
    AtomicMeasure neg = extract_atoms(result.psi_frame, n, rank_tol);

    const MomentSequence target = result.mu_frame.truncated(2 * n) - result.nu_frame.truncated(2 * n);
    const MomentSequence got =
        detail::atom_moments(pos, 2 * n) - detail::atom_moments(neg, 2 * n);
    const double scale = std::max(1.0, target.values().cwiseAbs().maxCoeff());
    const double err   = (got.values() - target.values()).cwiseAbs().maxCoeff();
    if (err > 1e-5 * scale)
    {
        throw IllConditioned("recover_hahn_jordan: extracted atoms miss mu - nu moments by " +
                             std::to_string(err));
    }
    return {detail::map_atoms(std::move(pos.atoms), result.frame),
            detail::map_atoms(std::move(neg.atoms), result.frame)};
}

} // namespace tvbound

#endif
