///
/// \file measures.hpp
///
/// Declarative measure descriptions, their truncated moment sequences, and
/// exact / quadrature total-variation oracles used to validate the bounds.
///
/// Total variation is reported on the unnormalised scale: the total mass of
/// |mu - nu|, which is 2 for two mutually singular probability measures.
///
#ifndef TVBOUND_MEASURES_HPP
#define TVBOUND_MEASURES_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "tvbound/errors.hpp"
#include "tvbound/moment_core.hpp"

namespace tvbound
{

struct MeasureSpec;

struct Gaussian
{
    double mean   = 0.0;
    double stddev = 1.0;
};

struct Exponential
{
    double rate = 1.0;
};

struct Atom
{
    Eigen::VectorXd point;
    double weight = 0.0;
};

/// Finite atomic measure sum_i w_i delta_{x_i}.
struct AtomicMeasure
{
    std::vector<Atom> atoms;

    double mass() const
    {
        double m = 0.0;
        for (const auto& a : atoms)
        {
            m += a.weight;
        }
        return m;
    }

    int dimension() const
    {
        return atoms.empty() ? 1 : static_cast<int>(atoms.front().point.size());
    }

    static AtomicMeasure univariate(std::initializer_list<std::pair<double, double>> pw)
    {
        AtomicMeasure m;
        for (const auto& [x, w] : pw)
        {
            m.atoms.push_back({Eigen::VectorXd::Constant(1, x), w});
        }
        return m;
    }

    /// Equal weights 1/|points| on univariate points.
    static AtomicMeasure uniform(const std::vector<double>& points)
    {
        AtomicMeasure m;
        for (double x : points)
        {
            m.atoms.push_back({Eigen::VectorXd::Constant(1, x),
                               1.0 / static_cast<double>(points.size())});
        }
        return m;
    }
};

struct Empirical
{
    std::vector<Eigen::VectorXd> samples;
};

struct MixtureComponent;

struct Mixture
{
    std::vector<MixtureComponent> components;
};

struct MeasureSpec
{
    std::variant<Gaussian, AtomicMeasure, Mixture, Exponential, Empirical> kind;
};

struct MixtureComponent
{
    double weight = 0.0;
    MeasureSpec measure;
};

inline MeasureSpec gaussian(double mean, double stddev)
{
    return {Gaussian{mean, stddev}};
}

inline MeasureSpec exponential(double rate)
{
    return {Exponential{rate}};
}

inline MeasureSpec atomic(AtomicMeasure m)
{
    return {std::move(m)};
}

inline MeasureSpec mixture(std::vector<MixtureComponent> components)
{
    return {Mixture{std::move(components)}};
}

inline MeasureSpec empirical(std::vector<Eigen::VectorXd> samples)
{
    return {Empirical{std::move(samples)}};
}

template <class... Fs>
struct overloaded : Fs...
{
    using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

/// Dimension of the ambient space; validates the spec on the way.
inline int dimension_of(const MeasureSpec& spec)
{
    return std::visit(
        overloaded{
            [](const Gaussian& g) {
                if (!(g.stddev > 0.0))
                {
                    throw InvalidMeasure("gaussian: stddev must be positive");
                }
                return 1;
            },
            [](const Exponential& e) {
                if (!(e.rate > 0.0))
                {
                    throw InvalidMeasure("exponential: rate must be positive");
                }
                return 1;
            },
            [](const AtomicMeasure& a) {
                if (a.atoms.empty())
                {
                    throw InvalidMeasure("atomic: no atoms");
                }
                const auto d = a.atoms.front().point.size();
                for (const auto& atom : a.atoms)
                {
                    if (atom.point.size() != d || d == 0)
                    {
                        throw InvalidMeasure("atomic: inconsistent atom dimensions");
                    }
                    if (!(atom.weight > 0.0))
                    {
                        throw InvalidMeasure("atomic: weights must be strictly positive");
                    }
                }
                return static_cast<int>(d);
            },
            [](const Empirical& e) {
                if (e.samples.empty())
                {
                    throw EmptySample("empirical: no samples");
                }
                const auto d = e.samples.front().size();
                for (const auto& s : e.samples)
                {
                    if (s.size() != d || d == 0)
                    {
                        throw InvalidMeasure("empirical: inconsistent sample dimensions");
                    }
                }
                return static_cast<int>(d);
            },
            [](const Mixture& m) {
                if (m.components.empty())
                {
                    throw InvalidMeasure("mixture: no components");
                }
                double total = 0.0;
                int d        = -1;
                for (const auto& c : m.components)
                {
                    if (!(c.weight > 0.0))
                    {
                        throw InvalidMeasure("mixture: weights must be positive");
                    }
                    total += c.weight;
                    const int dc = dimension_of(c.measure);
                    if (d >= 0 && dc != d)
                    {
                        throw InvalidMeasure("mixture: component dimensions disagree");
                    }
                    d = dc;
                }
                if (std::abs(total - 1.0) > 1e-12)
                {
                    throw InvalidMeasure("mixture: weights sum to " + std::to_string(total) +
                                         ", expected 1");
                }
                return d;
            },
        },
        spec.kind);
}

namespace detail
{

/// Moments of the atoms {x_i} with weights w_i (weighted power sums).
inline Eigen::VectorXd atomic_moments(const std::vector<Eigen::VectorXd>& points,
                                      const std::vector<double>& weights, int d, int max_degree)
{
    const MonomialBasis basis(d, max_degree);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis.size()));
    Eigen::MatrixXd powers(d, max_degree + 1);
    for (std::size_t a = 0; a < points.size(); ++a)
    {
        for (int i = 0; i < d; ++i)
        {
            powers(i, 0) = 1.0;
            for (int k = 1; k <= max_degree; ++k)
            {
                powers(i, k) = powers(i, k - 1) * points[a](i);
            }
        }
        for (std::size_t k = 0; k < basis.size(); ++k)
        {
            double m = weights[a];
            for (int i = 0; i < d; ++i)
            {
                m *= powers(i, basis[k][i]);
            }
            out(static_cast<Eigen::Index>(k)) += m;
        }
    }
    return out;
}

} // namespace detail

inline MomentSequence empirical_moments(const std::vector<Eigen::VectorXd>& samples,
                                        int max_degree)
{
    if (samples.empty())
    {
        throw EmptySample("empirical_moments: empty sample");
    }
    const int d = dimension_of(empirical(samples));
    const std::vector<double> w(samples.size(), 1.0 / static_cast<double>(samples.size()));
    Eigen::VectorXd v = detail::atomic_moments(samples, w, d, max_degree);
    v(0) = 1.0;
    return MomentSequence(d, max_degree, std::move(v));
}

/// Exact truncated moments of `spec` up to `max_degree`.
inline MomentSequence moments(const MeasureSpec& spec, int d, int max_degree)
{
    const int spec_dim = dimension_of(spec);
    if (max_degree < 0)
    {
        throw std::invalid_argument("moments: negative degree");
    }
    return std::visit(
        overloaded{
            [&](const Gaussian& g) {
                if (d != 1)
                {
                    throw UnsupportedDimension("moments: gaussian specs are univariate");
                }
                std::vector<double> m(static_cast<std::size_t>(max_degree) + 1);
                m[0] = 1.0;
                if (max_degree >= 1)
                {
                    m[1] = g.mean;
                }
                const double var = g.stddev * g.stddev;
                for (int k = 2; k <= max_degree; ++k)
                {
                    const auto kk = static_cast<std::size_t>(k);
                    m[kk]         = g.mean * m[kk - 1] + (k - 1) * var * m[kk - 2];
                }
                return MomentSequence::univariate(m);
            },
            [&](const Exponential& e) {
                if (d != 1)
                {
                    throw UnsupportedDimension("moments: exponential specs are univariate");
                }
                std::vector<double> m(static_cast<std::size_t>(max_degree) + 1);
                m[0] = 1.0;
                for (int k = 1; k <= max_degree; ++k)
                {
                    const auto kk = static_cast<std::size_t>(k);
                    m[kk]         = m[kk - 1] * k / e.rate;
                }
                return MomentSequence::univariate(m);
            },
            [&](const AtomicMeasure& a) {
                if (spec_dim != d)
                {
                    throw DimensionMismatch("moments: atomic spec has dimension " +
                                            std::to_string(spec_dim));
                }
                std::vector<Eigen::VectorXd> pts;
                std::vector<double> ws;
                for (const auto& atom : a.atoms)
                {
                    pts.push_back(atom.point);
                    ws.push_back(atom.weight);
                }
                return MomentSequence(d, max_degree,
                                      detail::atomic_moments(pts, ws, d, max_degree));
            },
            [&](const Empirical& e) {
                if (spec_dim != d)
                {
                    throw DimensionMismatch("moments: empirical spec has dimension " +
                                            std::to_string(spec_dim));
                }
                return empirical_moments(e.samples, max_degree);
            },
            [&](const Mixture& m) {
                if (spec_dim != d)
                {
                    throw DimensionMismatch("moments: mixture spec has dimension " +
                                            std::to_string(spec_dim));
                }
                MomentSequence acc = MomentSequence::zeros(d, max_degree);
                for (const auto& c : m.components)
                {
                    acc = acc + c.weight * moments(c.measure, d, max_degree);
                }
                return acc;
            },
        },
        spec.kind);
}

/// Draws `count` i.i.d. points from `spec`.
inline std::vector<Eigen::VectorXd> draw_samples(const MeasureSpec& spec, std::size_t count,
                                                 std::mt19937_64& rng)
{
    const int d = dimension_of(spec);
    std::vector<Eigen::VectorXd> out;
    out.reserve(count);
    std::visit(
        overloaded{
            [&](const Gaussian& g) {
                std::normal_distribution<double> dist(g.mean, g.stddev);
                for (std::size_t i = 0; i < count; ++i)
                {
                    out.push_back(Eigen::VectorXd::Constant(1, dist(rng)));
                }
            },
            [&](const Exponential& e) {
                std::exponential_distribution<double> dist(e.rate);
                for (std::size_t i = 0; i < count; ++i)
                {
                    out.push_back(Eigen::VectorXd::Constant(1, dist(rng)));
                }
            },
            [&](const AtomicMeasure& a) {
                std::vector<double> w;
                for (const auto& atom : a.atoms)
                {
                    w.push_back(atom.weight);
                }
                std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
                for (std::size_t i = 0; i < count; ++i)
                {
                    out.push_back(a.atoms[pick(rng)].point);
                }
            },
            [&](const Empirical& e) {
                std::uniform_int_distribution<std::size_t> pick(0, e.samples.size() - 1);
                for (std::size_t i = 0; i < count; ++i)
                {
                    out.push_back(e.samples[pick(rng)]);
                }
            },
            [&](const Mixture& m) {
                std::vector<double> w;
                for (const auto& c : m.components)
                {
                    w.push_back(c.weight);
                }
                std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
                for (std::size_t i = 0; i < count; ++i)
                {
                    auto one = draw_samples(m.components[pick(rng)].measure, 1, rng);
                    out.push_back(std::move(one.front()));
                }
            },
        },
        spec.kind);
    (void)d;
    return out;
}

/// Unnormalised TV distance between two atomic measures: sum over the union
/// of supports of |mu(x) - nu(x)|. Points closer than `merge_tol` (max-norm)
/// are identified.
inline double exact_tv_atomic(const AtomicMeasure& mu, const AtomicMeasure& nu,
                              double merge_tol = 1e-9)
{
    struct Signed
    {
        Eigen::VectorXd point;
        double weight;
    };
    std::vector<Signed> all;
    for (const auto& a : mu.atoms)
    {
        all.push_back({a.point, a.weight});
    }
    for (const auto& a : nu.atoms)
    {
        all.push_back({a.point, -a.weight});
    }
    if (!all.empty())
    {
        const auto d = all.front().point.size();
        for (const auto& s : all)
        {
            if (s.point.size() != d)
            {
                throw DimensionMismatch("exact_tv_atomic: atom dimensions disagree");
            }
        }
    }
    // union-find on the proximity graph
    std::vector<std::size_t> parent(all.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t i) {
        while (parent[i] != i)
        {
            parent[i] = parent[parent[i]];
            i         = parent[i];
        }
        return i;
    };
    for (std::size_t i = 0; i < all.size(); ++i)
    {
        for (std::size_t j = i + 1; j < all.size(); ++j)
        {
            if ((all[i].point - all[j].point).lpNorm<Eigen::Infinity>() <= merge_tol)
            {
                parent[find(i)] = find(j);
            }
        }
    }
    std::vector<double> net(all.size(), 0.0);
    for (std::size_t i = 0; i < all.size(); ++i)
    {
        net[find(i)] += all[i].weight;
    }
    double tv = 0.0;
    for (double v : net)
    {
        tv += std::abs(v);
    }
    return tv;
}

/// Density of a univariate absolutely continuous spec.
inline double density(const MeasureSpec& spec, double x)
{
    return std::visit(
        overloaded{
            [&](const Gaussian& g) {
                const double z = (x - g.mean) / g.stddev;
                return std::exp(-0.5 * z * z) / (g.stddev * std::sqrt(2.0 * std::numbers::pi));
            },
            [&](const Exponential& e) { return x < 0.0 ? 0.0 : e.rate * std::exp(-e.rate * x); },
            [&](const Mixture& m) {
                double acc = 0.0;
                for (const auto& c : m.components)
                {
                    acc += c.weight * density(c.measure, x);
                }
                return acc;
            },
            [&](const AtomicMeasure&) -> double {
                throw InvalidMeasure("density: atomic measures have no density");
            },
            [&](const Empirical&) -> double {
                throw InvalidMeasure("density: empirical measures have no density");
            },
        },
        spec.kind);
}

/// True if the spec is a univariate gaussian/exponential or a mixture of them.
inline bool has_univariate_density(const MeasureSpec& spec)
{
    return std::visit(overloaded{
                          [](const Gaussian&) { return true; },
                          [](const Exponential&) { return true; },
                          [](const Mixture& m) {
                              return std::all_of(m.components.begin(), m.components.end(),
                                                 [](const MixtureComponent& c) {
                                                     return has_univariate_density(c.measure);
                                                 });
                          },
                          [](const auto&) { return false; },
                      },
                      spec.kind);
}

/// Flattens atomic, empirical and mixtures thereof into one atomic measure.
/// Returns false if the spec has a continuous part.
inline bool as_atomic(const MeasureSpec& spec, AtomicMeasure& out, double scale = 1.0)
{
    return std::visit(overloaded{
                          [&](const AtomicMeasure& a) {
                              for (const auto& atom : a.atoms)
                              {
                                  out.atoms.push_back({atom.point, scale * atom.weight});
                              }
                              return true;
                          },
                          [&](const Empirical& e) {
                              const double w = scale / static_cast<double>(e.samples.size());
                              for (const auto& s : e.samples)
                              {
                                  out.atoms.push_back({s, w});
                              }
                              return true;
                          },
                          [&](const Mixture& m) {
                              for (const auto& c : m.components)
                              {
                                  if (!as_atomic(c.measure, out, scale * c.weight))
                                  {
                                      return false;
                                  }
                              }
                              return true;
                          },
                          [](const auto&) { return false; },
                      },
                      spec.kind);
}

struct QuadratureSettings
{
    double abs_tol      = 1e-6;
    unsigned max_depth  = 20;
    int pieces          = 64;
    double tail_sigmas  = 40.0;
};

namespace detail
{

/// Integration window and natural breakpoints of a density spec.
inline void density_support(const MeasureSpec& spec, double tail, double& lo, double& hi,
                            std::vector<double>& breaks)
{
    std::visit(overloaded{
                   [&](const Gaussian& g) {
                       lo = std::min(lo, g.mean - tail * g.stddev);
                       hi = std::max(hi, g.mean + tail * g.stddev);
                       breaks.push_back(g.mean);
                       for (double k : {1.0, 2.0, 4.0, 8.0, 16.0})
                       {
                           breaks.push_back(g.mean - k * g.stddev);
                           breaks.push_back(g.mean + k * g.stddev);
                       }
                   },
                   [&](const Exponential& e) {
                       lo = std::min(lo, 0.0);
                       hi = std::max(hi, tail / e.rate);
                       breaks.push_back(0.0);
                   },
                   [&](const Mixture& m) {
                       for (const auto& c : m.components)
                       {
                           density_support(c.measure, tail, lo, hi, breaks);
                       }
                   },
                   [](const auto&) {},
               },
               spec.kind);
}

} // namespace detail

/// Quadrature of the integral of |f_mu - f_nu| over R.
inline double exact_tv_univariate_density(const MeasureSpec& mu, const MeasureSpec& nu,
                                          const QuadratureSettings& settings = {})
{
    if (!has_univariate_density(mu) || !has_univariate_density(nu))
    {
        throw InvalidMeasure("exact_tv_univariate_density: both specs need univariate densities");
    }
    (void)dimension_of(mu);
    (void)dimension_of(nu);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    std::vector<double> breaks;
    detail::density_support(mu, settings.tail_sigmas, lo, hi, breaks);
    detail::density_support(nu, settings.tail_sigmas, lo, hi, breaks);
    for (int i = 0; i <= settings.pieces; ++i)
    {
        breaks.push_back(lo + (hi - lo) * i / settings.pieces);
    }
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    // |f_mu - f_nu| has kinks where the densities cross; split there so each
    // piece is smooth.
    auto diff = [&](double x) { return density(mu, x) - density(nu, x); };
    std::vector<double> crossings;
    constexpr int probes = 16;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
    {
        double a  = breaks[i];
        double fa = diff(a);
        for (int k = 1; k <= probes; ++k)
        {
            const double b  = breaks[i] + (breaks[i + 1] - breaks[i]) * k / probes;
            const double fb = diff(b);
            if ((fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0))
            {
                std::uintmax_t iters = 64;
                const auto root      = boost::math::tools::toms748_solve(
                    diff, a, b, fa, fb, boost::math::tools::eps_tolerance<double>(50), iters);
                crossings.push_back(0.5 * (root.first + root.second));
            }
            a  = b;
            fa = fb;
        }
    }
    breaks.insert(breaks.end(), crossings.begin(), crossings.end());
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    auto f = [&](double x) { return std::abs(diff(x)); };
    // Boost's own tolerance is relative, which stalls on tail pieces whose
    // integral is near zero; bisect on an absolute budget instead.
    const double piece_tol = settings.abs_tol / static_cast<double>(breaks.size());
    double total = 0.0;
    double err   = 0.0;
    std::function<void(double, double, double, unsigned)> integrate =
        [&](double a, double b, double tol, unsigned depth) {
            double e       = 0.0;
            const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
                f, a, b, 0, 0.0, &e);
            if (e <= tol || depth >= settings.max_depth)
            {
                total += v;
                err += e;
                return;
            }
            const double mid = 0.5 * (a + b);
            integrate(a, mid, 0.5 * tol, depth + 1);
            integrate(mid, b, 0.5 * tol, depth + 1);
        };
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
    {
        integrate(breaks[i], breaks[i + 1], piece_tol, 0);
    }
    if (!(err <= settings.abs_tol) || !std::isfinite(total))
    {
        throw QuadratureNonConvergent("exact_tv_univariate_density: error estimate " +
                                      std::to_string(err) + " exceeds " +
                                      std::to_string(settings.abs_tol));
    }
    return total;
}

/// Closed-form TV between N(m1, s) and N(m2, s): 2 (2 Phi(|m1 - m2| / 2s) - 1).
inline double equal_variance_gaussian_tv(double m1, double m2, double s)
{
    const double z = std::abs(m1 - m2) / (2.0 * s);
    return 2.0 * std::erf(z / std::numbers::sqrt2);
}

} // namespace tvbound

#endif
