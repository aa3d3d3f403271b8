#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "run_config.hpp"
#include "tvbound/certificates.hpp"
#include "tvbound/extraction.hpp"
#include "tvbound/measures.hpp"
#include "tvbound/relaxation.hpp"

namespace
{

using nlohmann::json;
using namespace tvbound;
using namespace tvbound::cli;

constexpr int exit_ok       = 0;
constexpr int exit_verify   = 1;
constexpr int exit_solver   = 2;
constexpr int exit_config   = 3;
constexpr double duality_slack = 1e-6;

struct Options
{
    std::string config;
    std::string levels;
    std::optional<double> tol;
    std::string format;
    std::optional<std::uint64_t> seed;
    bool no_scale   = false;
    bool normalized = false;
    bool no_timing  = false;
};

std::string num(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string status_label(const HierarchyResult& r)
{
    return r.optimal() ? "optimal" : "untrusted:" + to_string(r.status);
}

RunConfig prepare(const Options& o)
{
    RunConfig cfg = load_config(o.config, o.seed);
    if (!o.levels.empty())
    {
        std::tie(cfg.level_min, cfg.level_max) = parse_levels(o.levels);
    }
    if (o.tol)
    {
        cfg.relax.solver.tol = *o.tol;
    }
    if (!o.format.empty())
    {
        cfg.format = parse_format(o.format);
    }
    if (o.no_scale)
    {
        cfg.relax.scaling = false;
    }
    validate(cfg);
    for (const auto& w : cfg.warnings)
    {
        std::cerr << "warning: " << w << '\n';
    }
    return cfg;
}

int dimension(const RunConfig& cfg)
{
    return dimension_of(cfg.mu);
}

int cmd_bound(const RunConfig& cfg, const Options& o)
{
    const HierarchyRun run =
        solve_hierarchy(cfg.mu, cfg.nu, cfg.level_min, cfg.level_max, cfg.relax, cfg.parallel);
    const double k = o.normalized ? 0.5 : 1.0;
    auto wall      = [&](const HierarchyResult& r) { return o.no_timing ? 0.0 : r.wall_ms; };

    switch (cfg.format)
    {
    case Format::Csv:
        std::cout << "n,rho_n,dual_value,gap,status,wall_ms,primal_residual,dual_residual\n";
        for (const auto& r : run.levels)
        {
            std::cout << r.level << ',' << num(k * r.rho_n) << ',' << num(k * r.dual_value) << ','
                      << num(r.gap) << ',' << status_label(r) << ',' << num(wall(r)) << ','
                      << num(r.primal_residual) << ',' << num(r.dual_residual) << '\n';
        }
        break;
    case Format::Json:
    {
        json rows = json::array();
        for (const auto& r : run.levels)
        {
            rows.push_back({{"n", r.level},
                            {"rho_n", k * r.rho_n},
                            {"dual_value", k * r.dual_value},
                            {"gap", r.gap},
                            {"status", status_label(r)},
                            {"wall_ms", wall(r)},
                            {"primal_residual", r.primal_residual},
                            {"dual_residual", r.dual_residual},
                            {"iterations", r.iterations}});
        }
        json doc = {{"schema_version", schema_version},
                    {"command", "bound"},
                    {"normalized", o.normalized},
                    {"solver_tol", cfg.relax.solver.tol},
                    {"monotone", run.monotone},
                    {"levels", rows}};
        std::cout << doc.dump(2) << '\n';
        break;
    }
    case Format::Pretty:
        std::printf("%3s  %12s  %12s  %10s  %10s  %s\n", "n", "rho_n", "dual", "gap", "wall_ms",
                    "status");
        for (const auto& r : run.levels)
        {
            std::printf("%3d  %12.6f  %12.6f  %10.2e  %10.2f  %s\n", r.level, k * r.rho_n,
                        k * r.dual_value, r.gap, wall(r), status_label(r).c_str());
        }
        break;
    }
    return run.all_optimal() ? exit_ok : exit_solver;
}

int cmd_exact(const RunConfig& cfg, const Options& o)
{
    AtomicMeasure a;
    AtomicMeasure b;
    double tv           = 0.0;
    std::string method;
    if (as_atomic(cfg.mu, a) && as_atomic(cfg.nu, b))
    {
        tv     = exact_tv_atomic(a, b);
        method = "atomic";
    }
    else if (has_univariate_density(cfg.mu) && has_univariate_density(cfg.nu))
    {
        tv     = exact_tv_univariate_density(cfg.mu, cfg.nu);
        method = "quadrature";
    }
    else
    {
        throw ConfigError("exact: needs two atomic specs or two univariate densities");
    }
    if (o.normalized)
    {
        tv *= 0.5;
    }
    switch (cfg.format)
    {
    case Format::Csv:
        std::cout << "method,tv\n" << method << ',' << num(tv) << '\n';
        break;
    case Format::Json:
        std::cout << json{{"schema_version", schema_version},
                          {"command", "exact"},
                          {"normalized", o.normalized},
                          {"method", method},
                          {"tv", tv}}
                         .dump(2)
                  << '\n';
        break;
    case Format::Pretty:
        std::printf("TV (%s) = %.10g\n", method.c_str(), tv);
        break;
    }
    return exit_ok;
}

int cmd_moments(const RunConfig& cfg, const Options&)
{
    const int d             = dimension(cfg);
    const int degree        = 2 * cfg.level_max;
    const MomentSequence mu = moments(cfg.mu, d, degree);
    const MomentSequence nu = moments(cfg.nu, d, degree);
    const MonomialBasis basis(d, degree);
    switch (cfg.format)
    {
    case Format::Csv:
        std::cout << "index,mu,nu\n";
        for (std::size_t i = 0; i < basis.size(); ++i)
        {
            std::cout << basis[i].to_string() << ',' << num(mu.at(i)) << ',' << num(nu.at(i))
                      << '\n';
        }
        break;
    case Format::Json:
    {
        json idx = json::array();
        for (std::size_t i = 0; i < basis.size(); ++i)
        {
            idx.push_back(basis[i].to_string());
        }
        auto vec = [](const MomentSequence& s) {
            return std::vector<double>(s.values().data(), s.values().data() + s.values().size());
        };
        std::cout << json{{"schema_version", schema_version},
                          {"command", "moments"},
                          {"dimension", d},
                          {"degree", degree},
                          {"index", idx},
                          {"mu", vec(mu)},
                          {"nu", vec(nu)}}
                         .dump(2)
                  << '\n';
        break;
    }
    case Format::Pretty:
        for (std::size_t i = 0; i < basis.size(); ++i)
        {
            std::printf("%-10s  %16.10g  %16.10g\n", basis[i].to_string().c_str(), mu.at(i),
                        nu.at(i));
        }
        break;
    }
    return exit_ok;
}

json atoms_json(const AtomicMeasure& m)
{
    json out = json::array();
    for (const auto& a : m.atoms)
    {
        out.push_back({{"point", std::vector<double>(a.point.data(), a.point.data() + a.point.size())},
                       {"weight", a.weight}});
    }
    return out;
}

int cmd_extract(const RunConfig& cfg, const Options&)
{
    const int d  = dimension(cfg);
    const int n  = cfg.level_max;
    HierarchyResult r;
    try
    {
        r = solve_level(moments(cfg.mu, d, 2 * n), moments(cfg.nu, d, 2 * n), n, cfg.relax);
    }
    catch (const SolverFailure& f)
    {
        std::cerr << "error: " << f.what() << '\n';
        return exit_solver;
    }
    std::optional<std::pair<AtomicMeasure, AtomicMeasure>> hj;
    std::string reason;
    try
    {
        hj = recover_hahn_jordan(r, cfg.rank_tol);
    }
    catch (const NotFlat& e)
    {
        reason = e.what();
    }
    catch (const IllConditioned& e)
    {
        reason = e.what();
    }
    const FlatnessReport fphi = d == 1 ? flatness(r.phi_frame, n, cfg.rank_tol) : FlatnessReport{};
    const FlatnessReport fpsi = d == 1 ? flatness(r.psi_frame, n, cfg.rank_tol) : FlatnessReport{};

    switch (cfg.format)
    {
    case Format::Csv:
        std::cout << "measure,point,weight\n";
        if (hj)
        {
            for (const auto& [name, m] : {std::pair{"phi", &hj->first}, std::pair{"psi", &hj->second}})
            {
                for (const auto& a : m->atoms)
                {
                    std::cout << name << ',' << num(a.point(0)) << ',' << num(a.weight) << '\n';
                }
            }
        }
        break;
    case Format::Json:
    {
        json doc = {{"schema_version", schema_version},
                    {"command", "extract"},
                    {"n", n},
                    {"rho_n", r.rho_n},
                    {"rank_tol", cfg.rank_tol},
                    {"ranks_phi", fphi.ranks},
                    {"ranks_psi", fpsi.ranks},
                    {"flat", hj.has_value()}};
        if (hj)
        {
            doc["phi"] = atoms_json(hj->first);
            doc["psi"] = atoms_json(hj->second);
        }
        else
        {
            doc["reason"] = reason;
        }
        std::cout << doc.dump(2) << '\n';
        break;
    }
    case Format::Pretty:
        std::printf("level %d, rho_n = %.6f\n", n, r.rho_n);
        if (!hj)
        {
            std::printf("no atomic decomposition: %s\n", reason.c_str());
            break;
        }
        for (const auto& [name, m] : {std::pair{"phi", &hj->first}, std::pair{"psi", &hj->second}})
        {
            for (const auto& a : m->atoms)
            {
                std::printf("%s  x = %12.8f  w = %12.8f\n", name, a.point(0), a.weight);
            }
        }
        break;
    }
    if (!hj)
    {
        std::cerr << "note: " << reason << '\n';
    }
    return exit_ok;
}

struct CertRow
{
    HierarchyResult result;
    std::optional<DualCertificate> cert;
    CertificateCheck check;
    std::string verdict;
};

json matrix_json(const Eigen::MatrixXd& m)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
    {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j)
        {
            row[static_cast<std::size_t>(j)] = m(i, j);
        }
        rows.push_back(row);
    }
    return rows;
}

int cmd_certify(const RunConfig& cfg, const Options& o)
{
    const int d             = dimension(cfg);
    const MomentSequence mu = moments(cfg.mu, d, 2 * cfg.level_max);
    const MomentSequence nu = moments(cfg.nu, d, 2 * cfg.level_max);
    const HierarchyRun run  = solve_hierarchy(mu, nu, cfg.level_min, cfg.level_max, cfg.relax,
                                              cfg.parallel);
    int code = exit_ok;
    std::vector<CertRow> rows;
    for (const auto& r : run.levels)
    {
        CertRow row{r, std::nullopt, {}, ""};
        if (!r.optimal())
        {
            row.verdict = "untrusted:" + to_string(r.status);
            code        = std::max(code, exit_solver);
        }
        else
        {
            try
            {
                row.cert  = recover_certificate(r);
                row.check = check_certificate(*row.cert, mu, nu);
                if (row.check.value <= r.rho_n + duality_slack)
                {
                    row.verdict = "OK";
                }
                else
                {
                    row.verdict = "FAIL:weak_duality";
                    code        = code == exit_ok ? exit_verify : code;
                }
            }
            catch (const CertificateMismatch& e)
            {
                row.verdict = std::string("FAIL:") + e.what();
                code        = code == exit_ok ? exit_verify : code;
            }
        }
        rows.push_back(std::move(row));
    }

    const double k = o.normalized ? 0.5 : 1.0;
    switch (cfg.format)
    {
    case Format::Csv:
        std::cout << "n,rho_n,certified_value,identity_residual,min_eig_sigma0,min_eig_sigma1,"
                     "min_eig_psi0,min_eig_psi1,verdict\n";
        for (const auto& row : rows)
        {
            std::cout << row.result.level << ',' << num(k * row.result.rho_n) << ','
                      << num(k * row.check.value) << ',' << num(row.check.identity_residual);
            for (double e : row.check.min_eigenvalue)
            {
                std::cout << ',' << num(e);
            }
            std::cout << ',' << '"' << row.verdict << '"' << '\n';
        }
        break;
    case Format::Json:
    {
        json levels = json::array();
        for (const auto& row : rows)
        {
            json item = {{"n", row.result.level},
                         {"rho_n", k * row.result.rho_n},
                         {"verdict", row.verdict}};
            if (row.cert)
            {
                const auto& c   = *row.cert;
                const auto& p   = c.p.coefficients();
                item["certified_value"]   = k * row.check.value;
                item["identity_residual"] = row.check.identity_residual;
                item["min_eigenvalues"]   = std::vector<double>(row.check.min_eigenvalue,
                                                                row.check.min_eigenvalue + 4);
                item["frame"] = {{"center", std::vector<double>(c.frame.center.data(),
                                                                c.frame.center.data() +
                                                                    c.frame.center.size())},
                                 {"scale", c.frame.scale}};
                item["p"]           = std::vector<double>(p.data(), p.data() + p.size());
                item["gram_sigma0"] = matrix_json(c.gram_sigma0);
                item["gram_sigma1"] = matrix_json(c.gram_sigma1);
                item["gram_psi0"]   = matrix_json(c.gram_psi0);
                item["gram_psi1"]   = matrix_json(c.gram_psi1);
            }
            levels.push_back(item);
        }
        std::cout << json{{"schema_version", schema_version},
                          {"command", "certify"},
                          {"normalized", o.normalized},
                          {"levels", levels}}
                         .dump(2)
                  << '\n';
        break;
    }
    case Format::Pretty:
        for (const auto& row : rows)
        {
            std::printf("n=%d  rho_n=%.6f  certified=%.6f  residual=%.1e  min_eig=[%.1e %.1e %.1e "
                        "%.1e]  %s\n",
                        row.result.level, k * row.result.rho_n, k * row.check.value,
                        row.check.identity_residual, row.check.min_eigenvalue[0],
                        row.check.min_eigenvalue[1], row.check.min_eigenvalue[2],
                        row.check.min_eigenvalue[3], row.verdict.c_str());
        }
        break;
    }
    return code;
}

void add_common(CLI::App* sub, Options& o)
{
    sub->add_option("--config", o.config, "JSON run configuration")->required();
    sub->add_option("--levels", o.levels, "Level range A..B");
    sub->add_option("--tol", o.tol, "Solver tolerance");
    sub->add_option("--format", o.format, "csv, json or pretty");
    sub->add_option("--seed", o.seed, "Seed for empirical draws");
    sub->add_flag("--no-scale", o.no_scale, "Solve in the original coordinates");
    sub->add_flag("--normalized", o.normalized, "Report distances on the [0,1] scale");
    sub->add_flag("--no-timing", o.no_timing, "Print wall_ms as 0 for reproducible output");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Moment-based lower bounds on total variation distance"};
    app.require_subcommand(1);
    Options o;
    using Command = int (*)(const RunConfig&, const Options&);
    const std::pair<const char*, std::pair<const char*, Command>> commands[] = {
        {"bound", {"Lower bounds rho_n for a range of levels", cmd_bound}},
        {"exact", {"Exact or quadrature total variation", cmd_exact}},
        {"extract", {"Atoms of the optimal pair at the top level", cmd_extract}},
        {"moments", {"Moment sequences up to degree 2B", cmd_moments}},
        {"certify", {"Recover and verify dual certificates", cmd_certify}},
    };
    std::vector<std::pair<CLI::App*, Command>> subs;
    for (const auto& [name, info] : commands)
    {
        CLI::App* sub = app.add_subcommand(name, info.first);
        add_common(sub, o);
        subs.emplace_back(sub, info.second);
    }
    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_config;
    }

    try
    {
        const RunConfig cfg = prepare(o);
        for (const auto& [sub, fn] : subs)
        {
            if (sub->parsed())
            {
                return fn(cfg, o);
            }
        }
    }
    catch (const ConfigError& e)
    {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    }
    catch (const SolverFailure& e)
    {
        std::cerr << "solver failure: " << e.what() << '\n';
        return exit_solver;
    }
    catch (const QuadratureNonConvergent& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return exit_solver;
    }
    catch (const Error& e)
    {
        std::cerr << "invalid input: " << e.what() << '\n';
        return exit_config;
    }
    return exit_config;
}
