///
/// \file relaxation.hpp
///
/// The level-n moment relaxation of the total-variation problem
///
///     rho_n = min  phi_0 + psi_0
///             s.t. phi_a - psi_a = mu_a - nu_a          (|a| <= 2n)
///                  0 <= M_n(phi) <= M_n(mu)
///                  0 <= M_n(psi) <= M_n(nu)
///
/// where <= is the Loewner order. `assemble` produces this program verbatim.
/// `solve_level` solves an equivalent, better conditioned program: the data
/// is first moved to a centred and scaled frame, exact kernels of M_n(mu) and
/// M_n(nu) are split off as linear equalities, and the remaining LMIs are
/// congruence-transformed so the upper bounds become identities.
///
#ifndef TVBOUND_RELAXATION_HPP
#define TVBOUND_RELAXATION_HPP

#include <chrono>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tvbound/conic_solver.hpp"
#include "tvbound/errors.hpp"
#include "tvbound/measures.hpp"
#include "tvbound/moment_core.hpp"

namespace tvbound
{

enum class MeasureTag
{
    Phi,
    Psi,
};

struct DecodeEntry
{
    MeasureTag tag;
    MultiIndex index;
};

struct RelaxationProblem
{
    int level     = 1;
    int dimension = 1;
    MomentSequence mu;
    MomentSequence nu;
    ConicProgram program;
    std::vector<DecodeEntry> decode;
};

/// Builds the level-n program in the coordinates of the given sequences.
/// Variables are [phi; psi], each indexed by the degree-2n basis.
inline RelaxationProblem assemble(const MomentSequence& mu, const MomentSequence& nu, int n)
{
    if (n < 1)
    {
        throw std::invalid_argument("assemble: level must be positive");
    }
    if (mu.dimension() != nu.dimension())
    {
        throw DimensionMismatch("assemble: mu and nu live in different dimensions");
    }
    if (mu.max_degree() < 2 * n || nu.max_degree() < 2 * n)
    {
        throw DegreeTooLow("assemble: level " + std::to_string(n) + " needs moments of degree " +
                           std::to_string(2 * n));
    }
    const int d            = mu.dimension();
    const MonomialBasis b2(d, 2 * n);
    const auto s2          = static_cast<Eigen::Index>(b2.size());
    const auto s1          = static_cast<Eigen::Index>(monomial_count(d, n));
    const Eigen::MatrixXi pattern = hankel_pattern(d, n);

    RelaxationProblem rp;
    rp.level     = n;
    rp.dimension = d;
    rp.mu        = mu.truncated(2 * n);
    rp.nu        = nu.truncated(2 * n);

    ConicProgram& prog = rp.program;
    prog.objective     = Eigen::VectorXd::Zero(2 * s2);
    prog.objective(0)  = 1.0;
    prog.objective(s2) = 1.0;
    prog.eq_matrix     = Eigen::MatrixXd::Zero(s2, 2 * s2);
    prog.eq_matrix.leftCols(s2).setIdentity();
    prog.eq_matrix.rightCols(s2) = -Eigen::MatrixXd::Identity(s2, s2);
    prog.eq_rhs                  = rp.mu.values() - rp.nu.values();

    std::vector<Eigen::MatrixXd> e(static_cast<std::size_t>(s2), Eigen::MatrixXd::Zero(s1, s1));
    for (Eigen::Index j = 0; j < s1; ++j)
    {
        for (Eigen::Index i = 0; i < s1; ++i)
        {
            e[static_cast<std::size_t>(pattern(i, j))](i, j) = 1.0;
        }
    }
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(s1, s1);
    auto block = [&](const Eigen::MatrixXd& constant, bool on_phi, double sign) {
        LmiBlock blk;
        blk.constant = constant;
        blk.coefficients.assign(static_cast<std::size_t>(2 * s2), zero);
        for (Eigen::Index a = 0; a < s2; ++a)
        {
            blk.coefficients[static_cast<std::size_t>(on_phi ? a : s2 + a)] =
                sign * e[static_cast<std::size_t>(a)];
        }
        return blk;
    };
    prog.blocks.push_back(block(zero, true, 1.0));
    prog.blocks.push_back(block(hankel(pattern, rp.mu.values()), true, -1.0));
    prog.blocks.push_back(block(zero, false, 1.0));
    prog.blocks.push_back(block(hankel(pattern, rp.nu.values()), false, -1.0));

    for (const MultiIndex& a : b2)
    {
        rp.decode.push_back({MeasureTag::Phi, a});
    }
    for (const MultiIndex& a : b2)
    {
        rp.decode.push_back({MeasureTag::Psi, a});
    }
    return rp;
}

struct RelaxationSettings
{
    SolverSettings solver;
    bool scaling      = true;
    double kernel_tol = 1e-12;
};

/// Eigen-split of a moment matrix into its numerical range and kernel.
struct FacialSplit
{
    Eigen::MatrixXd range;
    Eigen::VectorXd range_eigs;
    Eigen::MatrixXd kernel;

    /// Congruence T with T M T^T = I on the range.
    Eigen::MatrixXd congruence() const
    {
        return range_eigs.cwiseSqrt().cwiseInverse().asDiagonal() * range.transpose();
    }
};

inline FacialSplit facial_split(const Eigen::MatrixXd& m, double rel_tol)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double top          = std::max(ev.cwiseAbs().maxCoeff(), 0.0);
    Eigen::Index k            = 0;
    while (k < ev.size() && ev(k) <= rel_tol * top)
    {
        ++k;
    }
    FacialSplit f;
    f.kernel     = es.eigenvectors().leftCols(k);
    f.range      = es.eigenvectors().rightCols(ev.size() - k);
    f.range_eigs = ev.tail(ev.size() - k);
    return f;
}

/// Multipliers of the level program mapped back to the canonical form, in
/// frame coordinates. `lambda*` / `gamma*` are the Gram matrices dual to
/// M(phi) >= 0, M(mu) - M(phi) >= 0, M(psi) >= 0, M(nu) - M(psi) >= 0; `p`
/// multiplies the moment-matching equalities; `mult_*` multiply the kernel
/// equalities M(phi) K_mu = 0 and M(psi) K_nu = 0.
struct LevelDuals
{
    Eigen::VectorXd p;
    Eigen::MatrixXd lambda0;
    Eigen::MatrixXd lambda1;
    Eigen::MatrixXd gamma0;
    Eigen::MatrixXd gamma1;
    FacialSplit mu_split;
    FacialSplit nu_split;
    Eigen::MatrixXd mult_mu;
    Eigen::MatrixXd mult_nu;
};

struct HierarchyResult
{
    int level     = 0;
    int dimension = 1;
    double rho_n  = std::numeric_limits<double>::quiet_NaN();
    MomentSequence phi;
    MomentSequence psi;
    AffineFrame frame;
    MomentSequence mu_frame;
    MomentSequence nu_frame;
    MomentSequence phi_frame;
    MomentSequence psi_frame;
    SolveStatus status     = SolveStatus::NumericalFailure;
    double primal_residual = std::numeric_limits<double>::infinity();
    double dual_residual   = std::numeric_limits<double>::infinity();
    double gap             = std::numeric_limits<double>::infinity();
    double dual_value      = std::numeric_limits<double>::quiet_NaN();
    int iterations         = 0;
    double wall_ms         = 0.0;
    std::optional<LevelDuals> duals;

    bool optimal() const
    {
        return status == SolveStatus::Optimal;
    }
};

class SolverFailure : public Error
{
public:
    explicit SolverFailure(HierarchyResult partial)
        : Error("level " + std::to_string(partial.level) + ": solver stopped with status " +
                to_string(partial.status)),
          partial_(std::move(partial))
    {
    }

    SolveStatus status() const noexcept
    {
        return partial_.status;
    }

    const HierarchyResult& partial() const noexcept
    {
        return partial_;
    }

private:
    HierarchyResult partial_;
};

namespace detail
{

/// Conditioned level program plus what is needed to undo the conditioning.
struct ConditionedLevel
{
    ConicProgram program;
    FacialSplit mu_split;
    FacialSplit nu_split;
    Eigen::Index s1 = 0;
    Eigen::Index s2 = 0;
};

inline ConditionedLevel condition(const RelaxationProblem& rp, double kernel_tol)
{
    const int d                   = rp.dimension;
    const int n                   = rp.level;
    const Eigen::MatrixXi pattern = hankel_pattern(d, n);
    ConditionedLevel out;
    out.s1 = pattern.rows();
    out.s2 = static_cast<Eigen::Index>(monomial_count(d, 2 * n));
    const Eigen::Index s1 = out.s1;
    const Eigen::Index s2 = out.s2;

    out.mu_split = facial_split(hankel(pattern, rp.mu.values()), kernel_tol);
    out.nu_split = facial_split(hankel(pattern, rp.nu.values()), kernel_tol);

    std::vector<Eigen::MatrixXd> e(static_cast<std::size_t>(s2), Eigen::MatrixXd::Zero(s1, s1));
    for (Eigen::Index j = 0; j < s1; ++j)
    {
        for (Eigen::Index i = 0; i < s1; ++i)
        {
            e[static_cast<std::size_t>(pattern(i, j))](i, j) = 1.0;
        }
    }

    ConicProgram& prog = out.program;
    prog.objective     = rp.program.objective;

    const Eigen::Index k_mu = out.mu_split.kernel.cols();
    const Eigen::Index k_nu = out.nu_split.kernel.cols();
    const Eigen::Index rows = s2 + s1 * (k_mu + k_nu);
    prog.eq_matrix          = Eigen::MatrixXd::Zero(rows, 2 * s2);
    prog.eq_rhs             = Eigen::VectorXd::Zero(rows);
    prog.eq_matrix.topRows(s2) = rp.program.eq_matrix;
    prog.eq_rhs.head(s2)       = rp.program.eq_rhs;
    auto kernel_rows = [&](const Eigen::MatrixXd& kernel, Eigen::Index row0, Eigen::Index col0) {
        for (Eigen::Index a = 0; a < s2; ++a)
        {
            const Eigen::MatrixXd ek = e[static_cast<std::size_t>(a)] * kernel;
            for (Eigen::Index j = 0; j < kernel.cols(); ++j)
            {
                for (Eigen::Index i = 0; i < s1; ++i)
                {
                    prog.eq_matrix(row0 + j * s1 + i, col0 + a) = ek(i, j);
                }
            }
        }
    };
    kernel_rows(out.mu_split.kernel, s2, 0);
    kernel_rows(out.nu_split.kernel, s2 + s1 * k_mu, s2);

    auto blocks = [&](const FacialSplit& split, Eigen::Index col0) {
        const Eigen::Index r = split.range.cols();
        if (r == 0)
        {
            return;
        }
        const Eigen::MatrixXd t    = split.congruence();
        const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(r, r);
        LmiBlock lower;
        LmiBlock upper;
        lower.constant = zero;
        upper.constant = Eigen::MatrixXd::Identity(r, r);
        lower.coefficients.assign(static_cast<std::size_t>(2 * s2), zero);
        upper.coefficients.assign(static_cast<std::size_t>(2 * s2), zero);
        for (Eigen::Index a = 0; a < s2; ++a)
        {
            const Eigen::MatrixXd te = sym(t * e[static_cast<std::size_t>(a)] * t.transpose());
            lower.coefficients[static_cast<std::size_t>(col0 + a)] = te;
            upper.coefficients[static_cast<std::size_t>(col0 + a)] = -te;
        }
        prog.blocks.push_back(std::move(lower));
        prog.blocks.push_back(std::move(upper));
    };
    blocks(out.mu_split, 0);
    blocks(out.nu_split, s2);
    return out;
}

/// Equality multipliers are unique only up to the left null space of the
/// equality matrix. Among the equivalent choices, pick the one whose kernel
/// multipliers have the smallest component along the range of the bounding
/// moment matrices; that component is what the certificate must dominate
/// with its range Gram blocks.
inline Eigen::VectorXd normalise_multipliers(const ConditionedLevel& cl, const Eigen::VectorXd& y)
{
    const Eigen::MatrixXd& a = cl.program.eq_matrix;
    const Eigen::Index s1    = cl.s1;
    const Eigen::Index s2    = cl.s2;
    const Eigen::Index k_mu  = cl.mu_split.kernel.cols();
    const Eigen::Index k_nu  = cl.nu_split.kernel.cols();
    if (k_mu + k_nu == 0)
    {
        return y;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullU);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double cut          = 1e-10 * std::max(1.0, sv.size() > 0 ? sv(0) : 0.0);
    Eigen::Index r            = 0;
    while (r < sv.size() && sv(r) > cut)
    {
        ++r;
    }
    const Eigen::MatrixXd left_null = svd.matrixU().rightCols(a.rows() - r);
    if (left_null.cols() == 0)
    {
        return y;
    }
    // Rows of q extract P^T Y for each side, flattened column-major.
    const Eigen::Index r_mu = cl.mu_split.range.cols();
    const Eigen::Index r_nu = cl.nu_split.range.cols();
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(r_mu * k_mu + r_nu * k_nu, a.rows());
    for (Eigen::Index j = 0; j < k_mu; ++j)
    {
        q.block(j * r_mu, s2 + j * s1, r_mu, s1) = cl.mu_split.range.transpose();
    }
    for (Eigen::Index j = 0; j < k_nu; ++j)
    {
        q.block(r_mu * k_mu + j * r_nu, s2 + s1 * k_mu + j * s1, r_nu, s1) =
            cl.nu_split.range.transpose();
    }
    const Eigen::MatrixXd qn = q * left_null;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(qn);
    cod.setThreshold(1e-8);
    const Eigen::VectorXd shift = left_null * cod.solve(-(q * y));
    const bool stationary = (a.transpose() * shift).norm() <= 1e-10 * (1.0 + y.norm());
    if (!stationary || (q * (y + shift)).norm() >= (q * y).norm())
    {
        return y;
    }
    return y + shift;
}

inline LevelDuals map_duals(const ConditionedLevel& cl, const SolveResult& sr)
{
    LevelDuals ld;
    const Eigen::Index s1 = cl.s1;
    const Eigen::Index s2 = cl.s2;
    ld.mu_split           = cl.mu_split;
    ld.nu_split           = cl.nu_split;
    std::size_t blk       = 0;
    auto grams = [&](const FacialSplit& split, Eigen::MatrixXd& g0, Eigen::MatrixXd& g1) {
        if (split.range.cols() == 0)
        {
            g0 = Eigen::MatrixXd::Zero(s1, s1);
            g1 = Eigen::MatrixXd::Zero(s1, s1);
            return;
        }
        const Eigen::MatrixXd t = split.congruence();
        g0 = sym(t.transpose() * sr.block_duals[blk++] * t);
        g1 = sym(t.transpose() * sr.block_duals[blk++] * t);
    };
    grams(cl.mu_split, ld.lambda0, ld.lambda1);
    grams(cl.nu_split, ld.gamma0, ld.gamma1);
    const Eigen::Index k_mu = cl.mu_split.kernel.cols();
    const Eigen::Index k_nu = cl.nu_split.kernel.cols();
    const Eigen::VectorXd y = normalise_multipliers(cl, sr.eq_duals);
    ld.p                    = y.head(s2);
    ld.mult_mu = Eigen::Map<const Eigen::MatrixXd>(y.data() + s2, s1, k_mu);
    ld.mult_nu = Eigen::Map<const Eigen::MatrixXd>(y.data() + s2 + s1 * k_mu, s1, k_nu);
    return ld;
}

} // namespace detail

/// Solves level n. Throws SolverFailure (carrying the partial result) unless
/// the solver certifies optimality.
inline HierarchyResult solve_level(const MomentSequence& mu, const MomentSequence& nu, int n,
                                   const RelaxationSettings& settings = {})
{
    const auto start = std::chrono::steady_clock::now();
    (void)assemble(mu, nu, n);

    const MomentSequence mu_n = mu.truncated(2 * n);
    const MomentSequence nu_n = nu.truncated(2 * n);
    AffineFrame frame         = AffineFrame::identity(mu.dimension());
    if (settings.scaling)
    {
        const MomentSequence* seqs[] = {&mu_n, &nu_n};
        frame                        = normalizing_frame(seqs, n);
    }

    HierarchyResult res;
    res.level     = n;
    res.dimension = mu.dimension();
    res.frame     = frame;
    res.mu_frame  = to_frame(mu_n, frame);
    res.nu_frame  = to_frame(nu_n, frame);

    const RelaxationProblem rp        = assemble(res.mu_frame, res.nu_frame, n);
    const detail::ConditionedLevel cl = detail::condition(rp, settings.kernel_tol);
    const SolveResult sr              = solve(cl.program, settings.solver);

    res.status          = sr.status;
    res.iterations      = sr.iterations;
    res.primal_residual = sr.primal_residual;
    res.dual_residual   = sr.dual_residual;
    res.gap             = sr.gap;
    res.rho_n           = sr.primal_value;
    res.dual_value      = sr.dual_value;
    if (sr.x.size() == 2 * cl.s2)
    {
        const int d   = res.dimension;
        res.phi_frame = MomentSequence(d, 2 * n, sr.x.head(cl.s2));
        res.psi_frame = MomentSequence(d, 2 * n, sr.x.tail(cl.s2));
        res.phi       = from_frame(res.phi_frame, frame);
        res.psi       = from_frame(res.psi_frame, frame);
    }
    if (sr.optimal())
    {
        res.duals = detail::map_duals(cl, sr);
    }
    res.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (!sr.optimal())
    {
        throw SolverFailure(std::move(res));
    }
    return res;
}

struct HierarchyRun
{
    std::vector<HierarchyResult> levels;
    bool monotone = true;

    bool all_optimal() const
    {
        return std::all_of(levels.begin(), levels.end(),
                           [](const HierarchyResult& r) { return r.optimal(); });
    }
};

/// Solves levels n_min..n_max. Failed levels are kept with their status.
/// `parallel` runs the levels concurrently; results stay in level order.
inline HierarchyRun solve_hierarchy(const MomentSequence& mu, const MomentSequence& nu, int n_min,
                                    int n_max, const RelaxationSettings& settings = {},
                                    bool parallel = false)
{
    if (n_min < 1 || n_max < n_min)
    {
        throw std::invalid_argument("solve_hierarchy: empty or invalid level range");
    }
    auto one = [&](int n) {
        try
        {
            return solve_level(mu, nu, n, settings);
        }
        catch (const SolverFailure& f)
        {
            return f.partial();
        }
    };
    HierarchyRun run;
    if (parallel)
    {
        std::vector<std::future<HierarchyResult>> jobs;
        for (int n = n_min; n <= n_max; ++n)
        {
            jobs.push_back(std::async(std::launch::async, one, n));
        }
        for (auto& j : jobs)
        {
            run.levels.push_back(j.get());
        }
    }
    else
    {
        for (int n = n_min; n <= n_max; ++n)
        {
            run.levels.push_back(one(n));
        }
    }
    const double slack = 2.0 * settings.solver.tol;
    const HierarchyResult* prev = nullptr;
    for (const auto& r : run.levels)
    {
        if (!r.optimal())
        {
            continue;
        }
        if (prev != nullptr && r.rho_n < prev->rho_n - slack)
        {
            run.monotone = false;
        }
        prev = &r;
    }
    return run;
}

inline HierarchyRun solve_hierarchy(const MeasureSpec& mu, const MeasureSpec& nu, int n_min,
                                    int n_max, const RelaxationSettings& settings = {},
                                    bool parallel = false)
{
    const int d = dimension_of(mu);
    if (dimension_of(nu) != d)
    {
        throw DimensionMismatch("solve_hierarchy: mu and nu live in different dimensions");
    }
    return solve_hierarchy(moments(mu, d, 2 * n_max), moments(nu, d, 2 * n_max), n_min, n_max,
                           settings, parallel);
}

} // namespace tvbound

#endif
