// Run configuration for the tvbound command line tool.
//
// A config is a JSON object:
//
//   {
//     "schema_version": 1,
//     "mu": <measure>, "nu": <measure>,
//     "levels": [1, 4],
//     "solver": {"tol": 1e-8, "max_iter": 100},
//     "scaling": true, "parallel": false,
//     "format": "csv", "seed": 1, "rank_tol": 1e-6
//   }
//
// with <measure> one of
//
//   {"kind": "gaussian", "mean": 0, "stddev": 1}
//   {"kind": "exponential", "rate": 1}
//   {"kind": "atomic", "atoms": [[x, w], ...]}        (x may be an array)
//   {"kind": "atomic", "points": [x, ...]}            (uniform weights)
//   {"kind": "mixture", "components": [{"weight": w, "measure": <measure>}, ...]}
//   {"kind": "empirical", "samples": [x, ...]}
//   {"kind": "empirical", "draw": {"from": <measure>, "count": N}}
//
// Empirical draws use one mt19937_64 seeded with "seed", mu first.
#ifndef TVBOUND_TOOLS_RUN_CONFIG_HPP
#define TVBOUND_TOOLS_RUN_CONFIG_HPP

#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvbound/errors.hpp"
#include "tvbound/extraction.hpp"
#include "tvbound/measures.hpp"
#include "tvbound/relaxation.hpp"

namespace tvbound::cli
{

inline constexpr int schema_version = 1;

enum class Format
{
    Csv,
    Json,
    Pretty,
};

struct RunConfig
{
    MeasureSpec mu;
    MeasureSpec nu;
    int level_min = 1;
    int level_max = 4;
    RelaxationSettings relax;
    bool parallel        = false;
    Format format        = Format::Csv;
    std::uint64_t seed   = 1;
    double rank_tol      = default_rank_tol;
    std::vector<std::string> warnings;
};

inline Format parse_format(const std::string& s)
{
    if (s == "csv")
    {
        return Format::Csv;
    }
    if (s == "json")
    {
        return Format::Json;
    }
    if (s == "pretty")
    {
        return Format::Pretty;
    }
    throw ConfigError("unknown format '" + s + "' (expected csv, json or pretty)");
}

/// "A..B" or a single "A".
inline std::pair<int, int> parse_levels(const std::string& s)
{
    int a = 0;
    int b = 0;
    try
    {
        const auto dots = s.find("..");
        if (dots == std::string::npos)
        {
            a = b = std::stoi(s);
        }
        else
        {
            a = std::stoi(s.substr(0, dots));
            b = std::stoi(s.substr(dots + 2));
        }
    }
    catch (const std::logic_error&)
    {
        throw ConfigError("levels must look like A..B, got '" + s + "'");
    }
    if (a < 1 || b < a)
    {
        throw ConfigError("levels must satisfy 1 <= A <= B, got '" + s + "'");
    }
    return {a, b};
}

namespace detail
{

using nlohmann::json;

inline Eigen::VectorXd point_of(const json& j)
{
    if (j.is_number())
    {
        return Eigen::VectorXd::Constant(1, j.get<double>());
    }
    if (j.is_array() && !j.empty())
    {
        Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
        for (std::size_t i = 0; i < j.size(); ++i)
        {
            v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
        }
        return v;
    }
    throw ConfigError("a point must be a number or a nonempty array of numbers");
}

inline MeasureSpec parse_measure(const json& j, std::mt19937_64& rng)
{
    if (!j.is_object() || !j.contains("kind"))
    {
        throw ConfigError("measure must be an object with a \"kind\" field");
    }
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "gaussian")
    {
        return gaussian(j.at("mean").get<double>(), j.at("stddev").get<double>());
    }
    if (kind == "exponential")
    {
        return exponential(j.at("rate").get<double>());
    }
    if (kind == "atomic")
    {
        AtomicMeasure m;
        if (j.contains("points"))
        {
            const auto& pts = j.at("points");
            if (!pts.is_array() || pts.empty())
            {
                throw ConfigError("atomic \"points\" must be a nonempty array");
            }
            const double w = 1.0 / static_cast<double>(pts.size());
            for (const auto& p : pts)
            {
                m.atoms.push_back({point_of(p), w});
            }
        }
        else
        {
            for (const auto& a : j.at("atoms"))
            {
                if (!a.is_array() || a.size() != 2)
                {
                    throw ConfigError("each atom must be [point, weight]");
                }
                m.atoms.push_back({point_of(a[0]), a[1].get<double>()});
            }
        }
        return atomic(std::move(m));
    }
    if (kind == "mixture")
    {
        std::vector<MixtureComponent> comps;
        for (const auto& c : j.at("components"))
        {
            comps.push_back({c.at("weight").get<double>(), parse_measure(c.at("measure"), rng)});
        }
        return mixture(std::move(comps));
    }
    if (kind == "empirical")
    {
        if (j.contains("draw"))
        {
            const auto& d        = j.at("draw");
            const MeasureSpec src = parse_measure(d.at("from"), rng);
            const auto count      = d.at("count").get<std::int64_t>();
            if (count <= 0)
            {
                throw ConfigError("empirical draw count must be positive");
            }
            (void)dimension_of(src);
            return empirical(draw_samples(src, static_cast<std::size_t>(count), rng));
        }
        std::vector<Eigen::VectorXd> samples;
        for (const auto& s : j.at("samples"))
        {
            samples.push_back(point_of(s));
        }
        return empirical(std::move(samples));
    }
    throw ConfigError("unknown measure kind '" + kind + "'");
}

inline std::size_t sample_count(const MeasureSpec& spec)
{
    if (const auto* e = std::get_if<Empirical>(&spec.kind))
    {
        return e->samples.size();
    }
    return 0;
}

} // namespace detail

/// Parses a config document. Structural problems become ConfigError.
/// `seed` overrides the document's seed before any samples are drawn.
inline RunConfig parse_config(const std::string& text, std::optional<std::uint64_t> seed = {})
{
    using nlohmann::json;
    RunConfig cfg;
    try
    {
        const json j = json::parse(text);
        if (!j.is_object())
        {
            throw ConfigError("config must be a JSON object");
        }
        const int version = j.value("schema_version", schema_version);
        if (version != schema_version)
        {
            throw ConfigError("unsupported schema_version " + std::to_string(version));
        }
        cfg.seed = seed ? *seed : j.value("seed", std::uint64_t{1});
        std::mt19937_64 rng(cfg.seed);
        cfg.mu = detail::parse_measure(j.at("mu"), rng);
        cfg.nu = detail::parse_measure(j.at("nu"), rng);
        if (j.contains("levels"))
        {
            const auto& lv = j.at("levels");
            if (lv.is_string())
            {
                std::tie(cfg.level_min, cfg.level_max) = parse_levels(lv.get<std::string>());
            }
            else if (lv.is_array() && lv.size() == 2)
            {
                cfg.level_min = lv[0].get<int>();
                cfg.level_max = lv[1].get<int>();
            }
            else
            {
                throw ConfigError("\"levels\" must be [A, B] or \"A..B\"");
            }
        }
        if (j.contains("solver"))
        {
            const auto& s             = j.at("solver");
            cfg.relax.solver.tol      = s.value("tol", cfg.relax.solver.tol);
            cfg.relax.solver.max_iter = s.value("max_iter", cfg.relax.solver.max_iter);
        }
        cfg.relax.scaling = j.value("scaling", true);
        cfg.parallel      = j.value("parallel", false);
        cfg.format        = parse_format(j.value("format", std::string("csv")));
        cfg.rank_tol      = j.value("rank_tol", default_rank_tol);
    }
    catch (const json::exception& e)
    {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    catch (const ConfigError&)
    {
        throw;
    }
    catch (const Error& e)
    {
        throw ConfigError(e.what());
    }
    return cfg;
}

inline RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed = {})
{
    std::ifstream in(path);
    if (!in)
    {
        throw ConfigError("cannot open config '" + path + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), seed);
}

/// Final consistency checks once command line overrides are applied.
inline void validate(RunConfig& cfg)
{
    if (cfg.level_min < 1 || cfg.level_max < cfg.level_min)
    {
        throw ConfigError("levels must satisfy 1 <= A <= B");
    }
    if (!(cfg.relax.solver.tol > 0.0) || cfg.relax.solver.max_iter < 1)
    {
        throw ConfigError("solver tol must be positive and max_iter at least 1");
    }
    if (!(cfg.rank_tol > 0.0))
    {
        throw ConfigError("rank_tol must be positive");
    }
    int d = 0;
    try
    {
        d = dimension_of(cfg.mu);
        if (dimension_of(cfg.nu) != d)
        {
            throw ConfigError("mu and nu have different dimensions");
        }
    }
    catch (const ConfigError&)
    {
        throw;
    }
    catch (const Error& e)
    {
        throw ConfigError(e.what());
    }
    const std::size_t needed = 100 * monomial_count(d, 2 * cfg.level_max);
    for (const auto* spec : {&cfg.mu, &cfg.nu})
    {
        const std::size_t have = detail::sample_count(*spec);
        if (have > 0 && have < needed)
        {
            cfg.warnings.push_back("empirical measure has " + std::to_string(have) +
                                   " samples; level " + std::to_string(cfg.level_max) +
                                   " wants at least " + std::to_string(needed));
        }
    }
}

} // namespace tvbound::cli

#endif
