///
/// \file conic_solver.hpp
///
/// Dense primal-dual interior-point solver for linear programs over products
/// of PSD cones:
///
///     minimise    c^T x + offset
///     subject to  A x = b,
///                 F0_j + sum_i x_i F_ij  >= 0   (PSD, one block per j).
///
/// The dual is
///
///     maximise    offset - sum_j <F0_j, Z_j> + b^T y
///     subject to  sum_j <F_ij, Z_j> + (A^T y)_i = c_i,   Z_j >= 0.
///
/// Equalities are removed by an explicit null-space parametrisation. The
/// remaining coordinates are rotated so that the block maps are orthonormal in
/// the trace inner product. The core is a Mehrotra predictor-corrector method
/// with Nesterov-Todd scaling. Residuals and the gap are always measured on
/// the caller's program, not on the transformed one.
///
#ifndef TVBOUND_CONIC_SOLVER_HPP
#define TVBOUND_CONIC_SOLVER_HPP

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tvbound/errors.hpp"

namespace tvbound
{

/// Affine matrix map x -> constant + sum_i x_i coefficients[i], required PSD.
struct LmiBlock
{
    Eigen::MatrixXd constant;
    std::vector<Eigen::MatrixXd> coefficients;

    Eigen::Index size() const
    {
        return constant.rows();
    }

    Eigen::MatrixXd evaluate(const Eigen::VectorXd& x) const
    {
        Eigen::MatrixXd m = constant;
        for (std::size_t i = 0; i < coefficients.size(); ++i)
        {
            if (x(static_cast<Eigen::Index>(i)) != 0.0)
            {
                m += x(static_cast<Eigen::Index>(i)) * coefficients[i];
            }
        }
        return m;
    }
};

struct ConicProgram
{
    Eigen::VectorXd objective;
    double objective_offset = 0.0;
    Eigen::MatrixXd eq_matrix;
    Eigen::VectorXd eq_rhs;
    std::vector<LmiBlock> blocks;

    Eigen::Index variables() const
    {
        return objective.size();
    }

    Eigen::Index equalities() const
    {
        return eq_matrix.rows();
    }

    void validate() const
    {
        const Eigen::Index m = variables();
        if (eq_matrix.rows() != eq_rhs.size() || (eq_matrix.rows() > 0 && eq_matrix.cols() != m))
        {
            throw DimensionMismatch("ConicProgram: equality system has wrong shape");
        }
        for (const auto& b : blocks)
        {
            if (b.constant.rows() != b.constant.cols() || b.constant.rows() == 0)
            {
                throw DimensionMismatch("ConicProgram: blocks must be square and nonempty");
            }
            if (static_cast<Eigen::Index>(b.coefficients.size()) != m)
            {
                throw DimensionMismatch("ConicProgram: block needs one coefficient per variable");
            }
            auto check = [&](const Eigen::MatrixXd& f) {
                if (f.rows() != b.size() || f.cols() != b.size())
                {
                    throw DimensionMismatch("ConicProgram: coefficient size differs from block");
                }
                if ((f - f.transpose()).norm() > 1e-12 * (1.0 + f.norm()))
                {
                    throw std::invalid_argument("ConicProgram: block matrices must be symmetric");
                }
            };
            check(b.constant);
            for (const auto& f : b.coefficients)
            {
                check(f);
            }
        }
    }
};

enum class SolveStatus
{
    Optimal,
    MaxIter,
    NumericalFailure,
    Infeasible,
};

inline std::string to_string(SolveStatus s)
{
    switch (s)
    {
    case SolveStatus::Optimal:
        return "optimal";
    case SolveStatus::MaxIter:
        return "max_iter";
    case SolveStatus::NumericalFailure:
        return "numerical_failure";
    case SolveStatus::Infeasible:
        return "infeasible";
    }
    return "unknown";
}

struct SolverSettings
{
    double tol   = 1e-8;
    int max_iter = 100;
};

struct SolveResult
{
    SolveStatus status = SolveStatus::NumericalFailure;
    Eigen::VectorXd x;
    double primal_value = std::numeric_limits<double>::quiet_NaN();
    double dual_value   = std::numeric_limits<double>::quiet_NaN();
    std::vector<Eigen::MatrixXd> block_duals;
    Eigen::VectorXd eq_duals;
    double primal_residual = std::numeric_limits<double>::infinity();
    double dual_residual   = std::numeric_limits<double>::infinity();
    double gap             = std::numeric_limits<double>::infinity();
    int iterations         = 0;

    bool optimal() const
    {
        return status == SolveStatus::Optimal;
    }
};

namespace detail
{

using Blocks = std::vector<Eigen::MatrixXd>;

inline double inner(const Blocks& a, const Blocks& b)
{
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j)
    {
        s += a[j].cwiseProduct(b[j]).sum();
    }
    return s;
}

inline double norm(const Blocks& a)
{
    return std::sqrt(inner(a, a));
}

inline Eigen::MatrixXd sym(const Eigen::MatrixXd& m)
{
    return 0.5 * (m + m.transpose());
}

inline Eigen::Index svec_length(Eigen::Index n)
{
    return n * (n + 1) / 2;
}

inline void svec_into(const Eigen::MatrixXd& m, Eigen::Ref<Eigen::VectorXd> out)
{
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < m.cols(); ++j)
    {
        for (Eigen::Index i = j; i < m.rows(); ++i)
        {
            out(k++) = (i == j) ? m(i, j) : std::numbers::sqrt2 * m(i, j);
        }
    }
}

inline Eigen::MatrixXd smat(const Eigen::Ref<const Eigen::VectorXd>& v, Eigen::Index n)
{
    Eigen::MatrixXd m(n, n);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < n; ++j)
    {
        for (Eigen::Index i = j; i < n; ++i)
        {
            const double value = (i == j) ? v(k) : v(k) / std::numbers::sqrt2;
            m(i, j) = value;
            m(j, i) = value;
            ++k;
        }
    }
    return m;
}

/// Largest t in (0, inf] keeping lambda + t * d PSD, in the NT-scaled space.
inline double max_step(const Eigen::VectorXd& lambda, const Eigen::MatrixXd& d)
{
    const Eigen::VectorXd inv_sqrt = lambda.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd m        = inv_sqrt.asDiagonal() * d * inv_sqrt.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym(m), Eigen::EigenvaluesOnly);
    const double e = es.eigenvalues()(0);
    return e < 0.0 ? -1.0 / e : std::numeric_limits<double>::infinity();
}

/// The program after equality elimination and variable orthonormalisation:
/// minimise c^T u + offset subject to G0 + sum_k u_k G_k >= 0, where the G_k
/// are orthonormal and the caller's x is x0 + map * u.
struct ReducedProgram
{
    Blocks g0;
    std::vector<Blocks> g;
    Eigen::VectorXd c;
    double offset = 0.0;
    Eigen::VectorXd x0;
    Eigen::MatrixXd map;
};

struct EqualityFactor
{
    Eigen::MatrixXd u_r;
    Eigen::VectorXd s_r;
    Eigen::MatrixXd v_r;
    Eigen::MatrixXd null;
};

class IpmCore
{
public:
    IpmCore(const ConicProgram& prog, const SolverSettings& settings)
        : prog_(prog), settings_(settings)
    {
    }

    SolveResult run()
    {
        prog_.validate();
        SolveResult out;
        if (!reduce(out))
        {
            return out;
        }
        if (red_.g.empty())
        {
            return trivial();
        }
        return iterate();
    }

private:
    const ConicProgram& prog_;
    SolverSettings settings_;
    EqualityFactor eq_;
    ReducedProgram red_;
    double f0_norm_ = 0.0;
    double c_norm_  = 0.0;
    double b_norm_  = 0.0;

    /// Null-space elimination followed by orthonormalisation. Returns false if
    /// the program is detected infeasible or unbounded along the way.
    bool reduce(SolveResult& out)
    {
        const Eigen::Index m = prog_.variables();
        Eigen::VectorXd x0   = Eigen::VectorXd::Zero(m);
        Eigen::MatrixXd null = Eigen::MatrixXd::Identity(m, m);

        Blocks f0;
        for (const auto& b : prog_.blocks)
        {
            f0.push_back(b.constant);
        }
        f0_norm_ = norm(f0);
        c_norm_  = prog_.objective.norm();
        b_norm_  = prog_.eq_rhs.norm();

        if (prog_.equalities() > 0)
        {
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(prog_.eq_matrix,
                                                  Eigen::ComputeFullU | Eigen::ComputeFullV);
            const Eigen::VectorXd& sv = svd.singularValues();
            const double cut          = 1e-10 * std::max(1.0, sv.size() > 0 ? sv(0) : 0.0);
            Eigen::Index r            = 0;
            while (r < sv.size() && sv(r) > cut)
            {
                ++r;
            }
            eq_.u_r  = svd.matrixU().leftCols(r);
            eq_.s_r  = sv.head(r);
            eq_.v_r  = svd.matrixV().leftCols(r);
            eq_.null = svd.matrixV().rightCols(m - r);
            x0       = eq_.v_r * (eq_.s_r.cwiseInverse().asDiagonal() * (eq_.u_r.transpose() *
                                                                   prog_.eq_rhs));
            null     = eq_.null;
            const double inconsistency = (prog_.eq_matrix * x0 - prog_.eq_rhs).norm();
            if (inconsistency > 1e-8 * (1.0 + b_norm_))
            {
                out.status = SolveStatus::Infeasible;
                return false;
            }
        }

        // Blocks in the null-space coordinates w: x = x0 + null * w.
        const Eigen::Index p = null.cols();
        Blocks g0            = f0;
        std::vector<Blocks> gw(static_cast<std::size_t>(p));
        for (std::size_t j = 0; j < prog_.blocks.size(); ++j)
        {
            const auto& blk = prog_.blocks[j];
            for (Eigen::Index i = 0; i < m; ++i)
            {
                if (x0(i) != 0.0)
                {
                    g0[j] += x0(i) * blk.coefficients[static_cast<std::size_t>(i)];
                }
            }
            for (Eigen::Index k = 0; k < p; ++k)
            {
                Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(blk.size(), blk.size());
                for (Eigen::Index i = 0; i < m; ++i)
                {
                    if (null(i, k) != 0.0)
                    {
                        acc += null(i, k) * blk.coefficients[static_cast<std::size_t>(i)];
                    }
                }
                gw[static_cast<std::size_t>(k)].push_back(std::move(acc));
            }
        }
        const Eigen::VectorXd cw = null.transpose() * prog_.objective;

        Eigen::Index rows = 0;
        for (const auto& blk : prog_.blocks)
        {
            rows += svec_length(blk.size());
        }
        Eigen::MatrixXd bmat = Eigen::MatrixXd::Zero(rows, p);
        for (Eigen::Index k = 0; k < p; ++k)
        {
            Eigen::Index off = 0;
            for (const auto& gk : gw[static_cast<std::size_t>(k)])
            {
                const Eigen::Index len = svec_length(gk.rows());
                svec_into(gk, bmat.col(k).segment(off, len));
                off += len;
            }
        }

        Eigen::Index q = 0;
        Eigen::MatrixXd vq;
        Eigen::VectorXd sq;
        Eigen::MatrixXd uq;
        if (p > 0 && rows > 0)
        {
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(bmat, Eigen::ComputeFullU | Eigen::ComputeFullV);
            const Eigen::VectorXd& sv = svd.singularValues();
            const double cut          = 1e-10 * (sv.size() > 0 ? sv(0) : 0.0);
            while (q < sv.size() && sv(q) > cut)
            {
                ++q;
            }
            vq = svd.matrixV().leftCols(q);
            sq = sv.head(q);
            uq = svd.matrixU().leftCols(q);
            const Eigen::VectorXd c_free = svd.matrixV().rightCols(p - q).transpose() * cw;
            if (c_free.norm() > 1e-9 * (1.0 + cw.norm()))
            {
                // Objective decreases along a direction invisible to every block.
                out.status = SolveStatus::Infeasible;
                return false;
            }
        }
        else if (p > 0 && cw.norm() > 1e-9 * (1.0 + c_norm_))
        {
            out.status = SolveStatus::Infeasible;
            return false;
        }

        red_.g0     = std::move(g0);
        red_.offset = prog_.objective_offset + prog_.objective.dot(x0);
        red_.x0     = x0;
        red_.map    = q > 0 ? Eigen::MatrixXd(null * vq * sq.cwiseInverse().asDiagonal())
                            : Eigen::MatrixXd(m, 0);
        red_.c      = q > 0 ? Eigen::VectorXd(sq.cwiseInverse().asDiagonal() * (vq.transpose() * cw))
                            : Eigen::VectorXd(0);
        red_.g.assign(static_cast<std::size_t>(q), {});
        for (Eigen::Index k = 0; k < q; ++k)
        {
            Eigen::Index off = 0;
            for (const auto& blk : prog_.blocks)
            {
                const Eigen::Index len = svec_length(blk.size());
                red_.g[static_cast<std::size_t>(k)].push_back(
                    smat(uq.col(k).segment(off, len), blk.size()));
                off += len;
            }
        }
        return true;
    }

    SolveResult trivial()
    {
        SolveResult out;
        out.x = red_.x0;
        out.block_duals.clear();
        // The primal point is pinned. Every Z supported on the kernel of
        // F(x0) is optimal; the full kernel projector is the best-conditioned
        // choice for downstream use of the multipliers.
        double min_eig    = std::numeric_limits<double>::infinity();
        const double null = settings_.tol * (1.0 + f0_norm_);
        for (const auto& g : red_.g0)
        {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
            min_eig = std::min(min_eig, es.eigenvalues()(0));
            Eigen::Index k = 0;
            while (k < g.rows() && es.eigenvalues()(k) <= null)
            {
                ++k;
            }
            const Eigen::MatrixXd v = es.eigenvectors().leftCols(k);
            out.block_duals.push_back(v * v.transpose());
        }
        if (min_eig < -settings_.tol * (1.0 + f0_norm_))
        {
            out.status = SolveStatus::Infeasible;
            return out;
        }
        measure(out);
        out.status = SolveStatus::Optimal;
        return out;
    }

    Blocks apply(const Eigen::VectorXd& u) const
    {
        Blocks s;
        for (const auto& blk : red_.g0)
        {
            s.push_back(Eigen::MatrixXd::Zero(blk.rows(), blk.cols()));
        }
        for (std::size_t k = 0; k < red_.g.size(); ++k)
        {
            const double uk = u(static_cast<Eigen::Index>(k));
            for (std::size_t j = 0; j < s.size(); ++j)
            {
                s[j] += uk * red_.g[k][j];
            }
        }
        return s;
    }

    Eigen::VectorXd adjoint(const Blocks& z) const
    {
        Eigen::VectorXd out(static_cast<Eigen::Index>(red_.g.size()));
        for (std::size_t k = 0; k < red_.g.size(); ++k)
        {
            out(static_cast<Eigen::Index>(k)) = inner(red_.g[k], z);
        }
        return out;
    }

    /// Fills objective values, multipliers and residuals of `out` measured on
    /// the caller's program. Expects `out.x` and `out.block_duals` set.
    void measure(SolveResult& out) const
    {
        const Eigen::Index m = prog_.variables();
        double pres          = 0.0;
        for (std::size_t j = 0; j < prog_.blocks.size(); ++j)
        {
            const Eigen::MatrixXd f = prog_.blocks[j].evaluate(out.x);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f, Eigen::EigenvaluesOnly);
            const double neg = std::max(0.0, -es.eigenvalues()(0));
            pres             = std::max(pres, neg);
        }
        pres /= (1.0 + f0_norm_);
        if (prog_.equalities() > 0)
        {
            pres = std::max(pres, (prog_.eq_matrix * out.x - prog_.eq_rhs).norm() / (1.0 + b_norm_));
        }

        Eigen::VectorXd az = Eigen::VectorXd::Zero(m);
        double f0z         = 0.0;
        for (std::size_t j = 0; j < prog_.blocks.size(); ++j)
        {
            const auto& blk = prog_.blocks[j];
            const auto& z   = out.block_duals[j];
            f0z += blk.constant.cwiseProduct(z).sum();
            for (Eigen::Index i = 0; i < m; ++i)
            {
                az(i) += blk.coefficients[static_cast<std::size_t>(i)].cwiseProduct(z).sum();
            }
        }
        Eigen::VectorXd resid = prog_.objective - az;
        if (prog_.equalities() > 0)
        {
            out.eq_duals =
                eq_.u_r * (eq_.s_r.cwiseInverse().asDiagonal() * (eq_.v_r.transpose() * resid));
            resid -= prog_.eq_matrix.transpose() * out.eq_duals;
        }
        else
        {
            out.eq_duals.resize(0);
        }
        out.primal_value    = prog_.objective.dot(out.x) + prog_.objective_offset;
        out.dual_value      = prog_.objective_offset - f0z +
                         (prog_.equalities() > 0 ? prog_.eq_rhs.dot(out.eq_duals) : 0.0);
        out.primal_residual = pres;
        out.dual_residual   = resid.norm() / (1.0 + c_norm_);
        out.gap             = std::abs(out.primal_value - out.dual_value) /
                  (1.0 + std::abs(out.primal_value) + std::abs(out.dual_value));
    }

    struct Scaling
    {
        Eigen::VectorXd lambda;
        Eigen::MatrixXd r;
        Eigen::MatrixXd rinv;
        Eigen::MatrixXd winv;
    };

    static bool nt_scaling(const Eigen::MatrixXd& s, const Eigen::MatrixXd& z, Scaling& out)
    {
        Eigen::LLT<Eigen::MatrixXd> ls(s);
        Eigen::LLT<Eigen::MatrixXd> lz(z);
        if (ls.info() != Eigen::Success || lz.info() != Eigen::Success)
        {
            return false;
        }
        const Eigen::MatrixXd l_s = ls.matrixL();
        const Eigen::MatrixXd l_z = lz.matrixL();
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(l_z.transpose() * l_s,
                                              Eigen::ComputeFullU | Eigen::ComputeFullV);
        out.lambda = svd.singularValues();
        if (!(out.lambda.minCoeff() > 0.0) || !out.lambda.allFinite())
        {
            return false;
        }
        const Eigen::VectorXd isq = out.lambda.cwiseSqrt().cwiseInverse();
        out.r    = l_s * svd.matrixV() * isq.asDiagonal();
        out.rinv = isq.asDiagonal() * svd.matrixU().transpose() * l_z.transpose();
        out.winv = out.rinv.transpose() * out.rinv;
        return true;
    }

    struct Direction
    {
        Eigen::VectorXd du;
        Blocks ds;
        Blocks dz;
        Blocks ds_scaled;
        Blocks dz_scaled;
    };

    Direction direction(const std::vector<Scaling>& sc, const Eigen::LLT<Eigen::MatrixXd>& h,
                        const Blocks& t, const Blocks& rp, const Eigen::VectorXd& rd) const
    {
        const std::size_t nb = sc.size();
        Blocks rc(nb);
        Blocks wrw(nb);
        for (std::size_t j = 0; j < nb; ++j)
        {
            rc[j]  = sc[j].rinv.transpose() * t[j] * sc[j].rinv;
            wrw[j] = sc[j].winv * rp[j] * sc[j].winv;
        }
        const Eigen::VectorXd rhs = adjoint(rc) - adjoint(wrw) + rd;
        Direction d;
        d.du = h.solve(rhs);
        d.ds = apply(d.du);
        d.dz.resize(nb);
        d.ds_scaled.resize(nb);
        d.dz_scaled.resize(nb);
        for (std::size_t j = 0; j < nb; ++j)
        {
            d.ds[j] += rp[j];
            d.dz[j]        = sym(rc[j] - sc[j].winv * d.ds[j] * sc[j].winv);
            d.ds_scaled[j] = sym(sc[j].rinv * d.ds[j] * sc[j].rinv.transpose());
            d.dz_scaled[j] = sym(sc[j].r.transpose() * d.dz[j] * sc[j].r);
        }
        return d;
    }

    static std::pair<double, double> step_limits(const std::vector<Scaling>& sc, const Direction& d)
    {
        double ap = std::numeric_limits<double>::infinity();
        double ad = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < sc.size(); ++j)
        {
            ap = std::min(ap, max_step(sc[j].lambda, d.ds_scaled[j]));
            ad = std::min(ad, max_step(sc[j].lambda, d.dz_scaled[j]));
        }
        return {ap, ad};
    }

    SolveResult snapshot(const Eigen::VectorXd& u, const Blocks& z, int iter) const
    {
        SolveResult r;
        r.x           = red_.x0 + red_.map * u;
        r.block_duals = z;
        r.iterations  = iter;
        measure(r);
        return r;
    }

    static double worst(const SolveResult& r)
    {
        return std::max({r.primal_residual, r.dual_residual, r.gap});
    }

    SolveResult iterate()
    {
        const std::size_t nb = red_.g0.size();
        const auto p         = static_cast<Eigen::Index>(red_.g.size());
        double total_dim     = 0.0;
        for (const auto& g : red_.g0)
        {
            total_dim += static_cast<double>(g.rows());
        }

        Eigen::VectorXd u = Eigen::VectorXd::Zero(p);
        Blocks s(nb);
        Blocks z(nb);
        const double xi_s = std::max(1.0, norm(red_.g0) / std::sqrt(total_dim));
        const double xi_z = std::max(1.0, red_.c.norm() / std::sqrt(total_dim));
        for (std::size_t j = 0; j < nb; ++j)
        {
            const Eigen::Index n = red_.g0[j].rows();
            s[j]                 = xi_s * Eigen::MatrixXd::Identity(n, n);
            z[j]                 = xi_z * Eigen::MatrixXd::Identity(n, n);
        }

        SolveResult best;
        bool have_best = false;
        int stalls     = 0;
        SolveStatus fail = SolveStatus::MaxIter;

        for (int it = 0; it <= settings_.max_iter; ++it)
        {
            SolveResult cur = snapshot(u, z, it);
            if (!std::isfinite(worst(cur)) || !cur.x.allFinite())
            {
                fail = SolveStatus::NumericalFailure;
                break;
            }
            if (!have_best || worst(cur) < worst(best))
            {
                best      = cur;
                have_best = true;
            }
            if (worst(cur) <= settings_.tol)
            {
                cur.status = SolveStatus::Optimal;
                return cur;
            }
            if (it == settings_.max_iter)
            {
                break;
            }
            double trace_z = 0.0;
            for (const auto& zj : z)
            {
                trace_z += zj.trace();
            }
            if (u.norm() > 1e10 || trace_z > 1e10)
            {
                fail = SolveStatus::Infeasible;
                break;
            }

            Blocks rp = apply(u);
            for (std::size_t j = 0; j < nb; ++j)
            {
                rp[j] += red_.g0[j] - s[j];
            }
            const Eigen::VectorXd rd = adjoint(z) - red_.c;
            const double mu          = inner(s, z) / total_dim;

            std::vector<Scaling> sc(nb);
            bool ok = true;
            for (std::size_t j = 0; j < nb && ok; ++j)
            {
                ok = nt_scaling(s[j], z[j], sc[j]);
            }
            if (!ok)
            {
                fail = SolveStatus::NumericalFailure;
                break;
            }

            Eigen::MatrixXd h(p, p);
            {
                std::vector<Blocks> wgw(static_cast<std::size_t>(p), Blocks(nb));
                for (Eigen::Index l = 0; l < p; ++l)
                {
                    for (std::size_t j = 0; j < nb; ++j)
                    {
                        wgw[static_cast<std::size_t>(l)][j] =
                            sc[j].winv * red_.g[static_cast<std::size_t>(l)][j] * sc[j].winv;
                    }
                }
                for (Eigen::Index k = 0; k < p; ++k)
                {
                    for (Eigen::Index l = 0; l <= k; ++l)
                    {
                        const double v = inner(red_.g[static_cast<std::size_t>(k)],
                                               wgw[static_cast<std::size_t>(l)]);
                        h(k, l)        = v;
                        h(l, k)        = v;
                    }
                }
            }
            Eigen::LLT<Eigen::MatrixXd> hf(h);
            if (hf.info() != Eigen::Success)
            {
                const double reg = 1e-14 * std::max(1.0, h.diagonal().maxCoeff());
                hf.compute(h + reg * Eigen::MatrixXd::Identity(p, p));
                if (hf.info() != Eigen::Success)
                {
                    fail = SolveStatus::NumericalFailure;
                    break;
                }
            }

            // Predictor.
            Blocks t(nb);
            for (std::size_t j = 0; j < nb; ++j)
            {
                t[j] = -Eigen::MatrixXd(sc[j].lambda.asDiagonal());
            }
            const Direction aff = direction(sc, hf, t, rp, rd);
            auto [ap_aff, ad_aff] = step_limits(sc, aff);
            ap_aff = std::min(1.0, ap_aff);
            ad_aff = std::min(1.0, ad_aff);
            double mu_aff = 0.0;
            for (std::size_t j = 0; j < nb; ++j)
            {
                mu_aff += (s[j] + ap_aff * aff.ds[j]).cwiseProduct(z[j] + ad_aff * aff.dz[j]).sum();
            }
            mu_aff /= total_dim;
            const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

            // Corrector.
            for (std::size_t j = 0; j < nb; ++j)
            {
                const Eigen::VectorXd& lam = sc[j].lambda;
                const Eigen::Index n       = lam.size();
                Eigen::MatrixXd b          = -sym(aff.ds_scaled[j] * aff.dz_scaled[j]);
                for (Eigen::Index i = 0; i < n; ++i)
                {
                    b(i, i) += sigma * mu - lam(i) * lam(i);
                }
                for (Eigen::Index c = 0; c < n; ++c)
                {
                    for (Eigen::Index r = 0; r < n; ++r)
                    {
                        t[j](r, c) = 2.0 * b(r, c) / (lam(r) + lam(c));
                    }
                }
            }
            const Direction dir = direction(sc, hf, t, rp, rd);
            auto [ap, ad]       = step_limits(sc, dir);
            ap                  = std::min(1.0, 0.98 * ap);
            ad                  = std::min(1.0, 0.98 * ad);
            if (!std::isfinite(ap) || !std::isfinite(ad) || !dir.du.allFinite())
            {
                fail = SolveStatus::NumericalFailure;
                break;
            }
            u += ap * dir.du;
            for (std::size_t j = 0; j < nb; ++j)
            {
                s[j] = sym(s[j] + ap * dir.ds[j]);
                z[j] = sym(z[j] + ad * dir.dz[j]);
            }
            stalls = (ap < 1e-8 && ad < 1e-8) ? stalls + 1 : 0;
            if (stalls >= 3)
            {
                fail = SolveStatus::NumericalFailure;
                break;
            }
        }
        if (!have_best)
        {
            best.x = red_.x0;
        }
        best.status = fail;
        return best;
    }
};

} // namespace detail

inline SolveResult solve(const ConicProgram& program, const SolverSettings& settings = {})
{
    return detail::IpmCore(program, settings).run();
}

/// Plain-text sparse dump. One entry per line:
///
///     vars M
///     blocks N n_1 ... n_N
///     offset v
///     c i v
///     eq r i v        (coefficient of x_i in equality r)
///     rhs r v
///     f k b i j v     (k = 0: constant term, k > 0: coefficient of x_{k-1};
///                      block b, upper triangle i <= j, zero-based)
///
/// Zero entries are omitted. Values use round-trip precision.
inline void write_program(std::ostream& os, const ConicProgram& p)
{
    const auto old = os.precision(17);
    os << "vars " << p.variables() << "\n";
    os << "eqs " << p.equalities() << "\n";
    os << "blocks " << p.blocks.size();
    for (const auto& b : p.blocks)
    {
        os << ' ' << b.size();
    }
    os << "\noffset " << p.objective_offset << "\n";
    for (Eigen::Index i = 0; i < p.variables(); ++i)
    {
        if (p.objective(i) != 0.0)
        {
            os << "c " << i << ' ' << p.objective(i) << "\n";
        }
    }
    for (Eigen::Index r = 0; r < p.equalities(); ++r)
    {
        for (Eigen::Index i = 0; i < p.eq_matrix.cols(); ++i)
        {
            if (p.eq_matrix(r, i) != 0.0)
            {
                os << "eq " << r << ' ' << i << ' ' << p.eq_matrix(r, i) << "\n";
            }
        }
        if (p.eq_rhs(r) != 0.0)
        {
            os << "rhs " << r << ' ' << p.eq_rhs(r) << "\n";
        }
    }
    for (std::size_t b = 0; b < p.blocks.size(); ++b)
    {
        const auto& blk = p.blocks[b];
        for (std::size_t k = 0; k <= blk.coefficients.size(); ++k)
        {
            const Eigen::MatrixXd& f = k == 0 ? blk.constant : blk.coefficients[k - 1];
            for (Eigen::Index j = 0; j < f.cols(); ++j)
            {
                for (Eigen::Index i = 0; i <= j; ++i)
                {
                    if (f(i, j) != 0.0)
                    {
                        os << "f " << k << ' ' << b << ' ' << i << ' ' << j << ' ' << f(i, j)
                           << "\n";
                    }
                }
            }
        }
    }
    os.precision(old);
}

inline ConicProgram read_program(std::istream& is)
{
    ConicProgram p;
    std::string line;
    Eigen::Index m = -1;
    auto fail      = [](const std::string& why) -> void {
        throw std::invalid_argument("read_program: " + why);
    };
    while (std::getline(is, line))
    {
        if (line.empty() || line[0] == '#')
        {
            continue;
        }
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "vars")
        {
            ls >> m;
            p.objective = Eigen::VectorXd::Zero(m);
        }
        else if (tag == "eqs")
        {
            Eigen::Index r = 0;
            ls >> r;
            p.eq_matrix = Eigen::MatrixXd::Zero(r, std::max<Eigen::Index>(m, 0));
            p.eq_rhs    = Eigen::VectorXd::Zero(r);
        }
        else if (tag == "blocks")
        {
            std::size_t nb = 0;
            ls >> nb;
            for (std::size_t b = 0; b < nb; ++b)
            {
                Eigen::Index n = 0;
                ls >> n;
                LmiBlock blk;
                blk.constant = Eigen::MatrixXd::Zero(n, n);
                blk.coefficients.assign(static_cast<std::size_t>(std::max<Eigen::Index>(m, 0)),
                                        Eigen::MatrixXd::Zero(n, n));
                p.blocks.push_back(std::move(blk));
            }
        }
        else if (tag == "offset")
        {
            ls >> p.objective_offset;
        }
        else if (tag == "c")
        {
            Eigen::Index i = 0;
            ls >> i >> p.objective(i);
        }
        else if (tag == "eq")
        {
            Eigen::Index r = 0;
            Eigen::Index i = 0;
            ls >> r >> i >> p.eq_matrix(r, i);
        }
        else if (tag == "rhs")
        {
            Eigen::Index r = 0;
            ls >> r >> p.eq_rhs(r);
        }
        else if (tag == "f")
        {
            std::size_t k = 0;
            std::size_t b = 0;
            Eigen::Index i = 0;
            Eigen::Index j = 0;
            double v       = 0.0;
            ls >> k >> b >> i >> j >> v;
            if (b >= p.blocks.size())
            {
                fail("block index out of range");
            }
            Eigen::MatrixXd& f = k == 0 ? p.blocks[b].constant : p.blocks[b].coefficients.at(k - 1);
            f(i, j) = v;
            f(j, i) = v;
        }
        else
        {
            fail("unknown record '" + tag + "'");
        }
        if (ls.fail())
        {
            fail("malformed line '" + line + "'");
        }
    }
    if (m < 0)
    {
        fail("missing vars record");
    }
    if (p.eq_matrix.size() == 0)
    {
        p.eq_matrix.resize(0, m);
        p.eq_rhs.resize(0);
    }
    return p;
}

} // namespace tvbound

#endif
