// Acceptance checks. Each criterion prints its detail lines followed by one
// "criterion k: PASS|FAIL" line; the exit status is nonzero if any selected
// criterion fails.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oracles.hpp"
#include "tvbound/certificates.hpp"
#include "tvbound/conic_solver.hpp"
#include "tvbound/extraction.hpp"
#include "tvbound/measures.hpp"
#include "tvbound/relaxation.hpp"

using namespace tvbound;

namespace
{

struct GaussRow
{
    double m1, s1, m2, s2;
    double rho[4];
};

// Reference values rho_1..rho_4 for Gaussian pairs.
const GaussRow gaussian_table[] = {
    {0.0, 0.1, 1.0, 0.1, {1.9231, 1.9936, 1.9991, 1.9997}},
    {0.0, 0.2, 1.0, 0.2, {1.7241, 1.9049, 1.9376, 1.939}},
    {0.0, 0.1, 1.0, 0.5, {1.4706, 1.6267, 1.6283, 1.7032}},
    {0.0, 0.5, 1.0, 0.5, {1.0000, 1.0000, 1.1653, 1.1897}},
    {0.5, 0.1, 1.0, 0.1, {1.7241, 1.9049, 1.9375, 1.9378}},
    {0.5, 0.1, 1.0, 0.5, {0.8197, 0.8497, 1.1249, 1.1294}},
    {0.8, 0.1, 1.0, 0.1, {1.000, 1.0000, 1.1645, 1.1709}},
    {0.8, 0.05, 1.0, 0.1, {1.2800, 1.3507, 1.4123, 1.4290}},
    {0.8, 0.05, 1.0, 0.01, {1.8349, 1.9616, 1.9785, 1.9852}},
};

struct Outcome
{
    bool pass = true;
    std::string summary;
};

void fail_if(Outcome& o, bool bad)
{
    if (bad)
    {
        o.pass = false;
    }
}

MomentSequence seq_of(const MeasureSpec& m, int deg)
{
    return moments(m, 1, deg);
}

MeasureSpec uniform_atoms(const std::vector<double>& pts)
{
    return atomic(AtomicMeasure::uniform(pts));
}

/// TV of two finite atomic measures by merging equal points.
double atomic_tv_oracle(const AtomicMeasure& a, const AtomicMeasure& b)
{
    std::map<double, double> signed_mass;
    for (const auto& x : a.atoms)
    {
        signed_mass[x.point(0)] += x.weight;
    }
    for (const auto& y : b.atoms)
    {
        signed_mass[y.point(0)] -= y.weight;
    }
    double tv = 0.0;
    for (const auto& [pt, w] : signed_mass)
    {
        tv += std::abs(w);
    }
    return tv;
}

/// Density of a Gaussian mixture, evaluated independently of the library.
double mixture_pdf(const MeasureSpec& spec, double x)
{
    if (const auto* g = std::get_if<Gaussian>(&spec.kind))
    {
        return oracle::normal_pdf(x, g->mean, g->stddev);
    }
    double acc = 0.0;
    for (const auto& c : std::get<Mixture>(spec.kind).components)
    {
        acc += c.weight * mixture_pdf(c.measure, x);
    }
    return acc;
}

struct Case
{
    std::string name;
    MeasureSpec mu;
    MeasureSpec nu;
    bool density = false;
    double tv     = 0.0;
};

std::vector<Case> case_matrix()
{
    std::vector<Case> out;
    char buf[96];
    for (const auto& r : gaussian_table)
    {
        std::snprintf(buf, sizeof buf, "N(%g,%g) vs N(%g,%g)", r.m1, r.s1, r.m2, r.s2);
        out.push_back({buf, gaussian(r.m1, r.s1), gaussian(r.m2, r.s2), true,
                       oracle::gaussian_tv(r.m1, r.s1, r.m2, r.s2)});
    }
    std::mt19937_64 rng(20);
    std::uniform_real_distribution<double> mean(-1, 1), sd(0.1, 1.0);
    for (int t = 0; t < 6; ++t)
    {
        const double m1 = mean(rng), s1 = sd(rng), m2 = mean(rng), s2 = sd(rng);
        std::snprintf(buf, sizeof buf, "N(%.3f,%.3f) vs N(%.3f,%.3f)", m1, s1, m2, s2);
        out.push_back({buf, gaussian(m1, s1), gaussian(m2, s2), true, oracle::gaussian_tv(m1, s1, m2, s2)});
    }

    const std::pair<const char*, std::pair<MeasureSpec, MeasureSpec>> mixtures[] = {
        {"bimodal vs N(0,1)",
         {mixture({{0.5, gaussian(-1, 0.3)}, {0.5, gaussian(1, 0.3)}}), gaussian(0, 1)}},
        {"skewed mixture vs N(0.5,0.5)",
         {mixture({{0.3, gaussian(0, 0.2)}, {0.7, gaussian(1, 0.4)}}), gaussian(0.5, 0.5)}},
        {"mixture vs mixture",
         {mixture({{0.5, gaussian(-0.5, 0.2)}, {0.5, gaussian(0.5, 0.2)}}),
          mixture({{0.2, gaussian(-0.5, 0.3)}, {0.8, gaussian(0.6, 0.2)}})}},
    };
    for (const auto& [name, pair] : mixtures)
    {
        const MeasureSpec a = pair.first;
        const MeasureSpec b = pair.second;
        const double tv     = oracle::simpson_l1([&](double x) { return mixture_pdf(a, x); },
                                                 [&](double x) { return mixture_pdf(b, x); }, -15, 15, 300000);
        out.push_back({name, a, b, true, tv});
    }

    const std::pair<const char*, std::pair<std::vector<double>, std::vector<double>>> discrete[] = {
        {"disjoint supports", {{-1.0, 0.0, 1.0, 2.0}, {-0.7, 0.3, 1.3, 2.3}}},
        {"one common point", {{-1.0, 0.0, 1.0, 2.0}, {-2.0, -1.0, 0.1, 1.5}}},
        {"close supports", {{0.0, 0.3, 0.4, 0.9}, {0.3, 0.6, 0.7, 1.2}}},
        {"dirac pair", {{0.0}, {0.1}}},
        {"two vs three atoms", {{-0.5, 0.5}, {-0.5, 0.0, 0.8}}},
    };
    for (const auto& [name, pts] : discrete)
    {
        const auto a = AtomicMeasure::uniform(pts.first);
        const auto b = AtomicMeasure::uniform(pts.second);
        out.push_back({name, atomic(a), atomic(b), false, atomic_tv_oracle(a, b)});
    }
    return out;
}

Outcome criterion_1()
{
    Outcome o;
    const double tol = 1.5e-2;
    int misses       = 0;
    double slowest   = 0.0;
    std::printf("  %-24s %-9s %-9s %-9s %s\n", "row", "n", "expected", "computed", "ms");
    for (const auto& r : gaussian_table)
    {
        char row[96];
        std::snprintf(row, sizeof row, "(%g,%g) (%g,%g)", r.m1, r.s1, r.m2, r.s2);
        for (int n = 1; n <= 4; ++n)
        {
            double rho = std::nan("");
            double ms  = 0.0;
            try
            {
                const auto res = solve_level(seq_of(gaussian(r.m1, r.s1), 2 * n),
                                             seq_of(gaussian(r.m2, r.s2), 2 * n), n);
                rho            = res.rho_n;
                ms             = res.wall_ms;
            }
            catch (const Error& e)
            {
                std::printf("  %s n=%d: %s\n", row, n, e.what());
            }
            const bool ok = std::abs(rho - r.rho[n - 1]) <= tol && ms < 1000.0;
            slowest       = std::max(slowest, ms);
            misses += ok ? 0 : 1;
            std::printf("  %-24s %-9d %-9.4f %-9.5f %.1f%s\n", row, n, r.rho[n - 1], rho, ms,
                        ok ? "" : "  <-- outside tolerance");
        }
    }
    fail_if(o, misses > 0);
    o.summary = std::to_string(36 - misses) + "/36 cells within 1.5e-2, slowest solve " +
                std::to_string(static_cast<int>(std::ceil(slowest))) + " ms";
    return o;
}

Outcome criterion_2()
{
    Outcome o;
    double worst = 0.0;
    for (const auto& r : gaussian_table)
    {
        const auto res = solve_level(seq_of(gaussian(r.m1, r.s1), 2), seq_of(gaussian(r.m2, r.s2), 2), 1);
        const double d = r.m1 - r.m2;
        const double closed = 2 * d * d / ((r.s1 + r.s2) * (r.s1 + r.s2) + d * d);
        const double err    = std::abs(res.rho_n - closed);
        worst               = std::max(worst, err);
        std::printf("  (%g,%g) (%g,%g): rho_1 %.8f closed form %.8f\n", r.m1, r.s1, r.m2, r.s2, res.rho_n,
                    closed);
    }
    fail_if(o, !(worst <= 5e-4));
    char buf[80];
    std::snprintf(buf, sizeof buf, "max |rho_1 - closed form| = %.2e (tol 5e-4)", worst);
    o.summary = buf;
    return o;
}

Outcome criterion_3()
{
    Outcome o;
    struct Check
    {
        const char* name;
        std::vector<double> x, y;
        int n;
        double expected, tol;
    };
    const Check checks[] = {
        {"disjoint supports", {-1.0, 0.0, 1.0, 2.0}, {-0.7, 0.3, 1.3, 2.3}, 4, 2.0, 1e-3},
        {"one common point", {-1.0, 0.0, 1.0, 2.0}, {-2.0, -1.0, 0.1, 1.5}, 4, 1.5, 2e-3},
        {"close supports", {0.0, 0.3, 0.4, 0.9}, {0.3, 0.6, 0.7, 1.2}, 4, 1.5, 1e-3},
        {"disjoint table", {-1.0, 0.0, 1.0, 2.0}, {-0.7, 0.3, 1.3, 2.3}, 5, 2.0, 1e-3},
    };
    double worst = 0.0;
    for (const auto& c : checks)
    {
        double rho = std::nan("");
        try
        {
            rho = solve_level(seq_of(uniform_atoms(c.x), 2 * c.n), seq_of(uniform_atoms(c.y), 2 * c.n), c.n)
                      .rho_n;
        }
        catch (const Error& e)
        {
            std::printf("  %s: %s\n", c.name, e.what());
        }
        const double err = std::abs(rho - c.expected);
        const bool ok    = err <= c.tol;
        worst            = std::max(worst, err);
        fail_if(o, !ok);
        std::printf("  %-18s n=%d rho %.8f expected %.4f (tol %.0e)%s\n", c.name, c.n, rho, c.expected,
                    c.tol, ok ? "" : "  <-- outside tolerance");
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "max deviation %.2e", worst);
    o.summary = buf;
    return o;
}

Outcome criterion_4()
{
    Outcome o;
    const std::pair<double, double> runs[] = {{0.1, 1e-6}, {0.01, 1e-6}, {1e-3, 1e-3}};
    for (const auto& [eps, tol] : runs)
    {
        double rho = std::nan("");
        try
        {
            rho = solve_level(seq_of(uniform_atoms({0.0}), 2), seq_of(uniform_atoms({eps}), 2), 1).rho_n;
        }
        catch (const Error& e)
        {
            std::printf("  eps %g: %s\n", eps, e.what());
        }
        const bool ok = std::abs(rho - 2.0) <= tol;
        fail_if(o, !ok);
        std::printf("  eps %-6g rho_1 %.12f |rho_1 - 2| %.2e (tol %.0e)%s\n", eps, rho, std::abs(rho - 2.0),
                    tol, eps < 0.01 ? "  [stress]" : "");
    }
    o.summary = "dirac pairs at eps 0.1, 0.01 and stress eps 1e-3";
    return o;
}

/// Shared by criteria 5 and 6.
struct MatrixRun
{
    Case c;
    HierarchyRun run;
};

const std::vector<MatrixRun>& matrix_runs()
{
    static const std::vector<MatrixRun> runs = [] {
        std::vector<MatrixRun> out;
        for (const auto& c : case_matrix())
        {
            out.push_back({c, solve_hierarchy(c.mu, c.nu, 1, 4)});
        }
        return out;
    }();
    return runs;
}

Outcome criterion_5()
{
    Outcome o;
    const double slack = 2.0 * RelaxationSettings{}.solver.tol;
    int cases          = 0;
    for (const auto& [c, run] : matrix_runs())
    {
        ++cases;
        bool monotone = true;
        bool below    = true;
        bool optimal  = run.all_optimal();
        std::string rhos;
        for (std::size_t i = 0; i < run.levels.size(); ++i)
        {
            const auto& r = run.levels[i];
            char buf[24];
            std::snprintf(buf, sizeof buf, " %.6f", r.rho_n);
            rhos += buf;
            if (i > 0 && r.rho_n < run.levels[i - 1].rho_n - slack)
            {
                monotone = false;
            }
            if (r.rho_n > c.tv + 1e-4)
            {
                below = false;
            }
        }
        const bool ok = monotone && below && optimal;
        fail_if(o, !ok);
        std::printf("  %-36s tv %.6f rho%s%s%s%s\n", c.name.c_str(), c.tv, rhos.c_str(),
                    monotone ? "" : "  <-- not monotone", below ? "" : "  <-- above tv",
                    optimal ? "" : "  <-- solver failure");
    }
    fail_if(o, cases < 20);
    o.summary = std::to_string(cases) + " cases, levels 1..4";
    return o;
}

Outcome criterion_6()
{
    Outcome o;
    int solves       = 0;
    double worst_gap = 0.0;
    double worst_wd  = -1e300;
    for (const auto& [c, run] : matrix_runs())
    {
        for (const auto& r : run.levels)
        {
            if (!r.optimal())
            {
                continue;
            }
            ++solves;
            const int n = r.level;
            try
            {
                const auto cert = recover_certificate(r);
                const double v  = verify_certificate(cert, seq_of(c.mu, 2 * n), seq_of(c.nu, 2 * n));
                const bool weak = v <= r.rho_n + 1e-6;
                const double gap = r.rho_n - v;
                worst_wd         = std::max(worst_wd, v - r.rho_n);
                if (c.density)
                {
                    worst_gap = std::max(worst_gap, gap);
                }
                const bool ok = weak && (!c.density || gap <= 1e-4);
                fail_if(o, !ok);
                if (!ok)
                {
                    std::printf("  %-36s n=%d rho %.8f certified %.8f  <-- violation\n", c.name.c_str(), n,
                                r.rho_n, v);
                }
            }
            catch (const Error& e)
            {
                fail_if(o, true);
                std::printf("  %-36s n=%d: %s\n", c.name.c_str(), n, e.what());
            }
        }
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d optimal solves, all certified; max (value - rho) %.2e, max density gap %.2e",
                  solves, worst_wd, worst_gap);
    std::printf("  %s\n", buf);
    o.summary = buf;
    return o;
}

Outcome criterion_7()
{
    Outcome o;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> loc(-1, 1), w(0.1, 1.0);
    std::uniform_int_distribution<int> count(1, 5);
    double worst = 0.0;
    int failures = 0;
    for (int t = 0; t < 100; ++t)
    {
        const int r = count(rng);
        std::vector<double> pts;
        while (static_cast<int>(pts.size()) < r)
        {
            const double x = loc(rng);
            if (std::none_of(pts.begin(), pts.end(), [&](double p) { return std::abs(p - x) < 0.05; }))
            {
                pts.push_back(x);
            }
        }
        std::sort(pts.begin(), pts.end());
        AtomicMeasure m;
        for (double x : pts)
        {
            m.atoms.push_back({Eigen::VectorXd::Constant(1, x), w(rng)});
        }
        try
        {
            auto got = extract_atoms(moments(atomic(m), 1, 2 * r), r, 1e-10).atoms;
            std::sort(got.begin(), got.end(),
                      [](const Atom& a, const Atom& b) { return a.point(0) < b.point(0); });
            if (static_cast<int>(got.size()) != r)
            {
                ++failures;
                std::printf("  measure %d: %zu atoms recovered, expected %d\n", t, got.size(), r);
                continue;
            }
            double err = 0.0;
            for (int i = 0; i < r; ++i)
            {
                err = std::max({err, std::abs(got[static_cast<std::size_t>(i)].point(0) - pts[static_cast<std::size_t>(i)]),
                                std::abs(got[static_cast<std::size_t>(i)].weight - m.atoms[static_cast<std::size_t>(i)].weight)});
            }
            worst = std::max(worst, err);
            failures += err <= 1e-6 ? 0 : 1;
        }
        catch (const Error& e)
        {
            ++failures;
            std::printf("  measure %d: %s\n", t, e.what());
        }
    }
    std::printf("  round trip: %d/100 within 1e-6, max location/weight error %.2e\n", 100 - failures, worst);
    fail_if(o, failures > 0);

    double hj_err = std::nan("");
    try
    {
        const auto res = solve_level(seq_of(uniform_atoms({0.0}), 2), seq_of(uniform_atoms({0.1}), 2), 1);
        const auto [pos, neg] = recover_hahn_jordan(res);
        if (pos.atoms.size() == 1 && neg.atoms.size() == 1)
        {
            hj_err = std::max({std::abs(pos.atoms[0].point(0) - 0.0), std::abs(pos.atoms[0].weight - 1.0),
                               std::abs(neg.atoms[0].point(0) - 0.1), std::abs(neg.atoms[0].weight - 1.0)});
        }
        std::printf("  hahn-jordan: %zu positive atom(s), %zu negative atom(s), max error %.2e\n",
                    pos.atoms.size(), neg.atoms.size(), hj_err);
    }
    catch (const Error& e)
    {
        std::printf("  hahn-jordan: %s\n", e.what());
    }
    fail_if(o, !(hj_err <= 1e-6));
    char buf[96];
    std::snprintf(buf, sizeof buf, "round trip max error %.2e, hahn-jordan error %.2e", worst, hj_err);
    o.summary = buf;
    return o;
}

Outcome criterion_8()
{
    Outcome o;
    std::mt19937_64 rng(8);
    double worst  = 0.0;
    int mismatches = 0;
    int nondeterministic = 0;
    for (int t = 0; t < 100; ++t)
    {
        const int vars  = 1 + t % 5;
        const int block = 2 + (t / 5) % 3;
        const int eqs   = vars > 1 ? (t / 15) % std::min(3, vars) : 0;
        const auto rp   = oracle::random_program(rng, vars, block, eqs);
        const SolveResult a = solve(rp.program);
        const SolveResult b = solve(rp.program);
        const double ref    = oracle::barrier_value(rp.program, rp.interior);
        const double err    = std::abs(a.primal_value - ref);
        worst               = std::max(worst, err);
        if (!a.optimal() || !(err <= 1e-4))
        {
            ++mismatches;
            std::printf("  program %d (%d vars, %dx%d, %d eqs): status %s value %.10g oracle %.10g\n", t, vars,
                        block, block, eqs, to_string(a.status).c_str(), a.primal_value, ref);
        }
        const bool same = a.iterations == b.iterations && a.primal_value == b.primal_value &&
                          a.x.size() == b.x.size() && (a.x.array() == b.x.array()).all();
        nondeterministic += same ? 0 : 1;
    }

    const auto mu = seq_of(gaussian(0.8, 0.05), 8);
    const auto nu = seq_of(gaussian(1.0, 0.1), 8);
    const auto r1 = solve_level(mu, nu, 4);
    const auto r2 = solve_level(mu, nu, 4);
    const bool level_same = r1.rho_n == r2.rho_n && r1.iterations == r2.iterations &&
                            (r1.phi.values().array() == r2.phi.values().array()).all();
    nondeterministic += level_same ? 0 : 1;

    std::printf("  100 programs: %d mismatches, max |solver - oracle| %.2e, %d nondeterministic reruns\n",
                mismatches, worst, nondeterministic);
    fail_if(o, mismatches > 0 || nondeterministic > 0);
    char buf[96];
    std::snprintf(buf, sizeof buf, "max deviation %.2e over 100 programs, reruns bit-identical: %s", worst,
                  nondeterministic == 0 ? "yes" : "no");
    o.summary = buf;
    return o;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Acceptance checks"};
    int only = 0;
    app.add_option("--criterion", only, "Run a single criterion (1-8); default runs all")
        ->check(CLI::Range(1, 8));
    CLI11_PARSE(app, argc, argv);

    const std::function<Outcome()> criteria[] = {criterion_1, criterion_2, criterion_3, criterion_4,
                                                 criterion_5, criterion_6, criterion_7, criterion_8};
    bool all_pass = true;
    for (int k = 1; k <= 8; ++k)
    {
        if (only != 0 && k != only)
        {
            continue;
        }
        Outcome out;
        try
        {
            out = criteria[k - 1]();
        }
        catch (const std::exception& e)
        {
            out = {false, std::string("exception: ") + e.what()};
        }
        std::printf("criterion %d: %s  %s\n", k, out.pass ? "PASS" : "FAIL", out.summary.c_str());
        std::fflush(stdout);
        all_pass = all_pass && out.pass;
    }
    return all_pass ? 0 : 1;
}
