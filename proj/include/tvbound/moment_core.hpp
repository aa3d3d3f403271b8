///
/// \file moment_core.hpp
///
/// Multi-index bookkeeping, truncated (pseudo-)moment sequences, the Riesz
/// functional and moment matrices.
///
/// Monomials of N^d_n are enumerated in graded lexicographic order: by total
/// degree first, then lexicographically with larger leading exponents first.
/// For d = 2 and n = 2 the basis reads 1, x, y, x^2, xy, y^2. Because the
/// order is graded, the basis of degree n is a prefix of the basis of any
/// degree m > n, so truncating a sequence is a prefix copy.
///
#ifndef TVBOUND_MOMENT_CORE_HPP
#define TVBOUND_MOMENT_CORE_HPP

#include <algorithm>
#include <cassert>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tvbound/errors.hpp"

namespace tvbound
{

/// Number of ways to write `total` as an ordered sum of `parts` nonnegative
/// integers.
inline std::int64_t compositions(int total, int parts)
{
    if (parts == 0)
    {
        return total == 0 ? 1 : 0;
    }
    // C(total + parts - 1, parts - 1)
    std::int64_t r = 1;
    const int k    = parts - 1;
    for (int i = 1; i <= k; ++i)
    {
        r = r * (total + i) / i;
    }
    return r;
}

/// Cardinal s(n) = C(n + d, n) of N^d_n.
inline std::size_t monomial_count(int dimension, int degree)
{
    if (degree < 0)
    {
        return 0;
    }
    return static_cast<std::size_t>(compositions(degree, dimension + 1));
}

class MultiIndex
{
public:
    MultiIndex() = default;

    explicit MultiIndex(std::vector<int> exponents) : exps_(std::move(exponents))
    {
        for (int e : exps_)
        {
            if (e < 0)
            {
                throw std::invalid_argument("MultiIndex: negative exponent");
            }
        }
    }

    MultiIndex(std::initializer_list<int> exponents)
        : MultiIndex(std::vector<int>(exponents))
    {
    }

    static MultiIndex zero(int dimension)
    {
        return MultiIndex(std::vector<int>(static_cast<std::size_t>(dimension), 0));
    }

    int dimension() const noexcept
    {
        return static_cast<int>(exps_.size());
    }

    int degree() const noexcept
    {
        return std::accumulate(exps_.begin(), exps_.end(), 0);
    }

    int operator[](int i) const
    {
        return exps_[static_cast<std::size_t>(i)];
    }

    const std::vector<int>& exponents() const noexcept
    {
        return exps_;
    }

    friend MultiIndex operator+(const MultiIndex& a, const MultiIndex& b)
    {
        if (a.dimension() != b.dimension())
        {
            throw DimensionMismatch("MultiIndex: adding indices of different dimension");
        }
        std::vector<int> out(a.exps_);
        for (std::size_t i = 0; i < out.size(); ++i)
        {
            out[i] += b.exps_[i];
        }
        return MultiIndex(std::move(out));
    }

    friend bool operator==(const MultiIndex&, const MultiIndex&) = default;

    /// Graded lexicographic order.
    friend std::strong_ordering operator<=>(const MultiIndex& a, const MultiIndex& b)
    {
        if (auto c = a.degree() <=> b.degree(); c != 0)
        {
            return c;
        }
        // within a degree, larger leading exponents come first
        for (std::size_t i = 0; i < a.exps_.size() && i < b.exps_.size(); ++i)
        {
            if (a.exps_[i] != b.exps_[i])
            {
                return b.exps_[i] <=> a.exps_[i];
            }
        }
        return a.exps_.size() <=> b.exps_.size();
    }

    std::string to_string() const
    {
        std::string s;
        for (std::size_t i = 0; i < exps_.size(); ++i)
        {
            if (i)
            {
                s += ';';
            }
            s += std::to_string(exps_[i]);
        }
        return s;
    }

private:
    std::vector<int> exps_;
};

/// Position of `alpha` in the graded lexicographic enumeration of N^d.
inline std::size_t graded_rank(const MultiIndex& alpha)
{
    const int d = alpha.dimension();
    const int k = alpha.degree();
    std::size_t rank = monomial_count(d, k - 1);
    int remaining     = k;
    for (int i = 0; i + 1 < d; ++i)
    {
        const int tail = d - i - 1;
        for (int v = alpha[i] + 1; v <= remaining; ++v)
        {
            rank += static_cast<std::size_t>(compositions(remaining - v, tail));
        }
        remaining -= alpha[i];
    }
    return rank;
}

namespace detail
{

inline void append_degree(int d, int remaining, std::vector<int>& prefix,
                          std::vector<MultiIndex>& out)
{
    const int pos = static_cast<int>(prefix.size());
    if (pos == d - 1)
    {
        prefix.push_back(remaining);
        out.emplace_back(prefix);
        prefix.pop_back();
        return;
    }
    for (int v = remaining; v >= 0; --v)
    {
        prefix.push_back(v);
        append_degree(d, remaining - v, prefix, out);
        prefix.pop_back();
    }
}

} // namespace detail

/// Ordered list of all multi-indices of N^d_n.
class MonomialBasis
{
public:
    MonomialBasis(int dimension, int degree) : dim_(dimension), deg_(degree)
    {
        if (dimension < 1)
        {
            throw std::invalid_argument("MonomialBasis: dimension must be positive");
        }
        if (degree < 0)
        {
            throw std::invalid_argument("MonomialBasis: degree must be nonnegative");
        }
        indices_.reserve(monomial_count(dimension, degree));
        std::vector<int> prefix;
        for (int k = 0; k <= degree; ++k)
        {
            detail::append_degree(dimension, k, prefix, indices_);
        }
    }

    int dimension() const noexcept
    {
        return dim_;
    }
    int degree() const noexcept
    {
        return deg_;
    }
    std::size_t size() const noexcept
    {
        return indices_.size();
    }
    const MultiIndex& operator[](std::size_t i) const
    {
        return indices_[i];
    }
    const std::vector<MultiIndex>& indices() const noexcept
    {
        return indices_;
    }
    auto begin() const noexcept
    {
        return indices_.begin();
    }
    auto end() const noexcept
    {
        return indices_.end();
    }

    std::size_t index_of(const MultiIndex& alpha) const
    {
        if (alpha.dimension() != dim_)
        {
            throw DimensionMismatch("MonomialBasis: index dimension mismatch");
        }
        if (alpha.degree() > deg_)
        {
            throw DegreeTooLow("MonomialBasis: index degree " + std::to_string(alpha.degree()) +
                               " exceeds basis degree " + std::to_string(deg_));
        }
        return graded_rank(alpha);
    }

private:
    int dim_;
    int deg_;
    std::vector<MultiIndex> indices_;
};

inline MonomialBasis basis_indices(int dimension, int degree)
{
    return MonomialBasis(dimension, degree);
}

/// Table of positions: entry (i, j) is the position of alpha_i + alpha_j in
/// the basis of degree 2n. This is the sparsity pattern shared by every
/// moment matrix of the given shape.
inline Eigen::MatrixXi hankel_pattern(int dimension, int degree)
{
    const MonomialBasis basis(dimension, degree);
    const auto s = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXi pattern(s, s);
    for (Eigen::Index i = 0; i < s; ++i)
    {
        for (Eigen::Index j = i; j < s; ++j)
        {
            const auto k = static_cast<int>(graded_rank(basis[static_cast<std::size_t>(i)] +
                                                        basis[static_cast<std::size_t>(j)]));
            pattern(i, j) = k;
            pattern(j, i) = k;
        }
    }
    return pattern;
}

/// A truncated real sequence indexed by N^d_K, K = max_degree.
class MomentSequence
{
public:
    MomentSequence() = default;

    MomentSequence(int dimension, int max_degree, Eigen::VectorXd values)
        : dim_(dimension), max_deg_(max_degree), values_(std::move(values))
    {
        if (dimension < 1)
        {
            throw std::invalid_argument("MomentSequence: dimension must be positive");
        }
        if (max_degree < 0)
        {
            throw std::invalid_argument("MomentSequence: negative degree");
        }
        if (static_cast<std::size_t>(values_.size()) != monomial_count(dimension, max_degree))
        {
            throw std::invalid_argument("MomentSequence: expected " +
                                        std::to_string(monomial_count(dimension, max_degree)) +
                                        " values, got " + std::to_string(values_.size()));
        }
    }

    static MomentSequence zeros(int dimension, int max_degree)
    {
        return MomentSequence(dimension, max_degree,
                              Eigen::VectorXd::Zero(static_cast<Eigen::Index>(
                                  monomial_count(dimension, max_degree))));
    }

    /// Univariate sequence (m_0, ..., m_K).
    static MomentSequence univariate(std::span<const double> values)
    {
        if (values.empty())
        {
            throw std::invalid_argument("MomentSequence: empty value list");
        }
        Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
        for (std::size_t i = 0; i < values.size(); ++i)
        {
            v(static_cast<Eigen::Index>(i)) = values[i];
        }
        return MomentSequence(1, static_cast<int>(values.size()) - 1, std::move(v));
    }

    static MomentSequence univariate(std::initializer_list<double> values)
    {
        return univariate(std::span<const double>(values.begin(), values.size()));
    }

    int dimension() const noexcept
    {
        return dim_;
    }
    int max_degree() const noexcept
    {
        return max_deg_;
    }
    const Eigen::VectorXd& values() const noexcept
    {
        return values_;
    }
    Eigen::VectorXd& values() noexcept
    {
        return values_;
    }
    std::size_t size() const noexcept
    {
        return static_cast<std::size_t>(values_.size());
    }

    double mass() const
    {
        return values_(0);
    }

    double at(std::size_t position) const
    {
        return values_(static_cast<Eigen::Index>(position));
    }

    double operator[](const MultiIndex& alpha) const
    {
        if (alpha.dimension() != dim_)
        {
            throw DimensionMismatch("MomentSequence: index dimension mismatch");
        }
        if (alpha.degree() > max_deg_)
        {
            throw DegreeTooLow("MomentSequence: moment of degree " +
                               std::to_string(alpha.degree()) + " requested, sequence has " +
                               std::to_string(max_deg_));
        }
        return values_(static_cast<Eigen::Index>(graded_rank(alpha)));
    }

    MomentSequence truncated(int degree) const
    {
        if (degree > max_deg_)
        {
            throw DegreeTooLow("MomentSequence: cannot truncate degree " +
                               std::to_string(max_deg_) + " to " + std::to_string(degree));
        }
        const auto n = static_cast<Eigen::Index>(monomial_count(dim_, degree));
        return MomentSequence(dim_, degree, values_.head(n));
    }

    friend MomentSequence operator-(const MomentSequence& a, const MomentSequence& b)
    {
        check_compatible(a, b);
        return MomentSequence(a.dim_, a.max_deg_, a.values_ - b.values_);
    }

    friend MomentSequence operator+(const MomentSequence& a, const MomentSequence& b)
    {
        check_compatible(a, b);
        return MomentSequence(a.dim_, a.max_deg_, a.values_ + b.values_);
    }

    friend MomentSequence operator*(double w, const MomentSequence& a)
    {
        return MomentSequence(a.dim_, a.max_deg_, w * a.values_);
    }

private:
    static void check_compatible(const MomentSequence& a, const MomentSequence& b)
    {
        if (a.dim_ != b.dim_)
        {
            throw DimensionMismatch("MomentSequence: dimension mismatch");
        }
        if (a.max_deg_ != b.max_deg_)
        {
            throw DegreeTooLow("MomentSequence: degree mismatch");
        }
    }

    int dim_     = 1;
    int max_deg_ = 0;
    Eigen::VectorXd values_ = Eigen::VectorXd::Zero(1);
};

/// Dense symmetric moment matrix M_n(seq), rows and columns indexed by N^d_n.
struct MomentMatrix
{
    int dimension = 1;
    int degree    = 0;
    Eigen::MatrixXd entries;
};

/// Build M_n from the pattern table; no intermediate allocations per entry.
inline Eigen::MatrixXd hankel(const Eigen::MatrixXi& pattern, const Eigen::VectorXd& values)
{
    Eigen::MatrixXd m(pattern.rows(), pattern.cols());
    for (Eigen::Index j = 0; j < pattern.cols(); ++j)
    {
        for (Eigen::Index i = 0; i < pattern.rows(); ++i)
        {
            m(i, j) = values(pattern(i, j));
        }
    }
    return m;
}

/// Adjoint of `hankel`: coefficient k collects every entry of `g` at
/// positions (i, j) with alpha_i + alpha_j = alpha_k. Applied to a Gram matrix
/// G it gives the coefficients of v_n(x)^T G v_n(x).
inline Eigen::VectorXd hankel_adjoint(const Eigen::MatrixXi& pattern, const Eigen::MatrixXd& g,
                                      Eigen::Index out_size)
{
    Eigen::VectorXd out = Eigen::VectorXd::Zero(out_size);
    for (Eigen::Index j = 0; j < pattern.cols(); ++j)
    {
        for (Eigen::Index i = 0; i < pattern.rows(); ++i)
        {
            out(pattern(i, j)) += g(i, j);
        }
    }
    return out;
}

inline MomentMatrix moment_matrix(const MomentSequence& seq, int n)
{
    if (n < 0)
    {
        throw std::invalid_argument("moment_matrix: negative order");
    }
    if (seq.max_degree() < 2 * n)
    {
        throw DegreeTooLow("moment_matrix: order " + std::to_string(n) + " needs degree " +
                           std::to_string(2 * n) + ", sequence has " +
                           std::to_string(seq.max_degree()));
    }
    return {seq.dimension(), n, hankel(hankel_pattern(seq.dimension(), n), seq.values())};
}

/// Polynomial in d variables with coefficients on the graded basis.
class Polynomial
{
public:
    Polynomial() = default;

    Polynomial(int dimension, int degree)
        : dim_(dimension), deg_(degree),
          coeffs_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(monomial_count(dimension, degree))))
    {
    }

    Polynomial(int dimension, int degree, Eigen::VectorXd coeffs)
        : dim_(dimension), deg_(degree), coeffs_(std::move(coeffs))
    {
        if (static_cast<std::size_t>(coeffs_.size()) != monomial_count(dimension, degree))
        {
            throw std::invalid_argument("Polynomial: coefficient count does not match degree");
        }
    }

    static Polynomial from_terms(int dimension,
                                 std::initializer_list<std::pair<MultiIndex, double>> terms)
    {
        return from_terms(dimension, std::vector<std::pair<MultiIndex, double>>(terms));
    }

    static Polynomial from_terms(int dimension,
                                 const std::vector<std::pair<MultiIndex, double>>& terms)
    {
        int deg = 0;
        for (const auto& [alpha, c] : terms)
        {
            if (alpha.dimension() != dimension)
            {
                throw DimensionMismatch("Polynomial: term dimension mismatch");
            }
            deg = std::max(deg, alpha.degree());
        }
        Polynomial p(dimension, deg);
        for (const auto& [alpha, c] : terms)
        {
            p.coeffs_(static_cast<Eigen::Index>(graded_rank(alpha))) += c;
        }
        return p;
    }

    int dimension() const noexcept
    {
        return dim_;
    }
    /// Nominal degree (size of the coefficient vector).
    int degree() const noexcept
    {
        return deg_;
    }
    const Eigen::VectorXd& coefficients() const noexcept
    {
        return coeffs_;
    }
    Eigen::VectorXd& coefficients() noexcept
    {
        return coeffs_;
    }

    /// Largest degree carrying a nonzero coefficient; -1 for the zero polynomial.
    int effective_degree() const
    {
        for (Eigen::Index i = coeffs_.size() - 1; i >= 0; --i)
        {
            if (coeffs_(i) != 0.0)
            {
                int k = 0;
                while (monomial_count(dim_, k) <= static_cast<std::size_t>(i))
                {
                    ++k;
                }
                return k;
            }
        }
        return -1;
    }

    double operator()(const Eigen::VectorXd& x) const
    {
        if (x.size() != dim_)
        {
            throw DimensionMismatch("Polynomial: evaluation point dimension mismatch");
        }
        const MonomialBasis basis(dim_, deg_);
        double acc = 0.0;
        for (std::size_t k = 0; k < basis.size(); ++k)
        {
            const double c = coeffs_(static_cast<Eigen::Index>(k));
            if (c == 0.0)
            {
                continue;
            }
            double m = 1.0;
            for (int i = 0; i < dim_; ++i)
            {
                m *= std::pow(x(i), basis[k][i]);
            }
            acc += c * m;
        }
        return acc;
    }

    double operator()(double x) const
    {
        return (*this)(Eigen::VectorXd::Constant(1, x));
    }

    friend Polynomial operator*(const Polynomial& a, const Polynomial& b)
    {
        if (a.dim_ != b.dim_)
        {
            throw DimensionMismatch("Polynomial: product of different dimensions");
        }
        const MonomialBasis ba(a.dim_, a.deg_);
        const MonomialBasis bb(b.dim_, b.deg_);
        Polynomial out(a.dim_, a.deg_ + b.deg_);
        for (std::size_t i = 0; i < ba.size(); ++i)
        {
            for (std::size_t j = 0; j < bb.size(); ++j)
            {
                out.coeffs_(static_cast<Eigen::Index>(graded_rank(ba[i] + bb[j]))) +=
                    a.coeffs_(static_cast<Eigen::Index>(i)) *
                    b.coeffs_(static_cast<Eigen::Index>(j));
            }
        }
        return out;
    }

private:
    int dim_ = 1;
    int deg_ = 0;
    Eigen::VectorXd coeffs_ = Eigen::VectorXd::Zero(1);
};

/// Polynomial v_n(x)^T G v_n(x) induced by a Gram matrix on the degree-n basis.
inline Polynomial gram_polynomial(const Eigen::MatrixXd& gram, int dimension, int n)
{
    const Eigen::MatrixXi pattern = hankel_pattern(dimension, n);
    if (gram.rows() != pattern.rows() || gram.cols() != pattern.cols())
    {
        throw DimensionMismatch("gram_polynomial: Gram matrix size does not match s(n)");
    }
    const auto out = static_cast<Eigen::Index>(monomial_count(dimension, 2 * n));
    return Polynomial(dimension, 2 * n, hankel_adjoint(pattern, gram, out));
}

/// Riesz functional: sum_alpha p_alpha * seq_alpha.
inline double riesz(const MomentSequence& seq, const Polynomial& poly)
{
    if (poly.dimension() != seq.dimension())
    {
        throw DimensionMismatch("riesz: polynomial and sequence dimensions differ");
    }
    const int eff = poly.effective_degree();
    if (eff > seq.max_degree())
    {
        throw DegreeTooLow("riesz: polynomial of degree " + std::to_string(eff) +
                           " exceeds sequence degree " + std::to_string(seq.max_degree()));
    }
    const Eigen::Index n = std::min<Eigen::Index>(poly.coefficients().size(),
                                                  static_cast<Eigen::Index>(seq.size()));
    return poly.coefficients().head(n).dot(seq.values().head(n));
}

/// Affine change of coordinates y = (x - center) / scale.
struct AffineFrame
{
    Eigen::VectorXd center;
    double scale = 1.0;

    static AffineFrame identity(int dimension)
    {
        return {Eigen::VectorXd::Zero(dimension), 1.0};
    }

    bool is_identity() const
    {
        return scale == 1.0 && (center.size() == 0 || center.isZero(0.0));
    }

    Eigen::VectorXd to_frame(const Eigen::VectorXd& x) const
    {
        return (x - center) / scale;
    }

    Eigen::VectorXd from_frame(const Eigen::VectorXd& y) const
    {
        return center + scale * y;
    }
};

namespace detail
{

inline double binomial(int n, int k)
{
    double r = 1.0;
    for (int i = 1; i <= k; ++i)
    {
        r = r * (n - k + i) / i;
    }
    return r;
}

/// Moments of the pushforward of `seq` through x -> shift + factor * x
/// (componentwise shift, common factor).
inline MomentSequence push_affine(const MomentSequence& seq, const Eigen::VectorXd& shift,
                                  double factor)
{
    const int d = seq.dimension();
    const MonomialBasis basis(d, seq.max_degree());
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis.size()));
    std::vector<int> j(static_cast<std::size_t>(d));
    for (std::size_t a = 0; a < basis.size(); ++a)
    {
        const MultiIndex& alpha = basis[a];
        // (shift + factor x)^alpha = sum_{j <= alpha} prod_i C(alpha_i, j_i)
        //   shift_i^(alpha_i - j_i) factor^{j_i} x_i^{j_i}
        std::fill(j.begin(), j.end(), 0);
        double acc = 0.0;
        while (true)
        {
            double coef = 1.0;
            int jdeg    = 0;
            for (int i = 0; i < d; ++i)
            {
                const auto ii = static_cast<std::size_t>(i);
                coef *= binomial(alpha[i], j[ii]);
                if (alpha[i] - j[ii] > 0)
                {
                    coef *= std::pow(shift(i), alpha[i] - j[ii]);
                }
                jdeg += j[ii];
            }
            if (coef != 0.0)
            {
                acc += coef * std::pow(factor, jdeg) *
                       seq.at(graded_rank(MultiIndex(j)));
            }
            int i = 0;
            for (; i < d; ++i)
            {
                const auto ii = static_cast<std::size_t>(i);
                if (j[ii] < alpha[i])
                {
                    ++j[ii];
                    break;
                }
                j[ii] = 0;
            }
            if (i == d)
            {
                break;
            }
        }
        out(static_cast<Eigen::Index>(a)) = acc;
    }
    return MomentSequence(d, seq.max_degree(), std::move(out));
}

} // namespace detail

/// Moments of the same measure expressed in frame coordinates.
inline MomentSequence to_frame(const MomentSequence& seq, const AffineFrame& frame)
{
    if (frame.center.size() != seq.dimension())
    {
        throw DimensionMismatch("to_frame: frame dimension mismatch");
    }
    return detail::push_affine(seq, -frame.center / frame.scale, 1.0 / frame.scale);
}

/// Inverse of `to_frame`.
inline MomentSequence from_frame(const MomentSequence& seq, const AffineFrame& frame)
{
    if (frame.center.size() != seq.dimension())
    {
        throw DimensionMismatch("from_frame: frame dimension mismatch");
    }
    return detail::push_affine(seq, frame.center, frame.scale);
}

/// Frame centring the first moments of the given sequences and shrinking the
/// largest normalised even moment of degree `2n` to one. Degenerate input
/// (all mass at the centre) gets scale 1.
inline AffineFrame normalizing_frame(std::span<const MomentSequence* const> seqs, int n)
{
    assert(!seqs.empty());
    const int d = seqs.front()->dimension();
    AffineFrame frame{Eigen::VectorXd::Zero(d), 1.0};
    int counted = 0;
    for (const MomentSequence* s : seqs)
    {
        if (s->mass() > 0.0 && s->max_degree() >= 1)
        {
            for (int i = 0; i < d; ++i)
            {
                std::vector<int> e(static_cast<std::size_t>(d), 0);
                e[static_cast<std::size_t>(i)] = 1;
                frame.center(i) += (*s)[MultiIndex(e)] / s->mass();
            }
            ++counted;
        }
    }
    if (counted > 0)
    {
        frame.center /= counted;
    }
    if (n < 1)
    {
        return frame;
    }
    double radius = 0.0;
    for (const MomentSequence* s : seqs)
    {
        if (s->mass() <= 0.0)
        {
            continue;
        }
        const MomentSequence centred =
            detail::push_affine(s->truncated(2 * n), -frame.center, 1.0);
        for (int i = 0; i < d; ++i)
        {
            std::vector<int> e(static_cast<std::size_t>(d), 0);
            e[static_cast<std::size_t>(i)] = 2 * n;
            const double m = centred[MultiIndex(e)] / s->mass();
            if (m > 0.0)
            {
                radius = std::max(radius, std::pow(m, 1.0 / (2.0 * n)));
            }
        }
    }
    if (radius > 0.0 && std::isfinite(radius))
    {
        frame.scale = radius;
    }
    return frame;
}

} // namespace tvbound

#endif
