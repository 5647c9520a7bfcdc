#pragma once

// Flat `key = value` configuration in market units.
//
//   # comment until end of line
//   sigma_c = 0.1
//   beta0   = 102.8        # EUR/MWh
//   grid.n_c = 80
//
// Every key is optional and falls back to the reference calibration. Unknown
// keys, duplicated keys, malformed numbers and invariant violations are all
// reported together in one ConfigError.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "capremu/grid.hpp"
#include "capremu/model.hpp"
#include "capremu/units.hpp"

namespace capremu {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> problems)
        : std::runtime_error(join(problems)), problems_(std::move(problems)) {}
    const std::vector<std::string> &problems() const noexcept { return problems_; }

private:
    static std::string join(const std::vector<std::string> &v) {
        std::string s;
        for (const auto &p : v) s += (s.empty() ? "" : "\n") + p;
        return s;
    }
    std::vector<std::string> problems_;
};

/// Solver and simulation switches that may also live in the config file.
struct RunSettings {
    std::size_t n_scenarios = 5000;
    std::uint64_t seed = 20240101;
    int substeps = 0;
    bool cfl_override = false;
    bool approx_hamiltonian = false;
    bool bilinear = false;
};

struct Config {
    ModelParams params;
    GridSpec grid;
    RunSettings run;
    /// True when the file fixes R instead of leaving it to the producer-alone
    /// solve.
    bool reservation_given = false;
};

namespace detail {

struct KeySpec {
    const char *name;
    const char *unit;
    std::function<void(Config &, double)> apply;
    std::function<double(const Config &)> read;
};

inline const std::vector<KeySpec> &key_table() {
    using units::from_eur_per_kw;
    using units::from_eur_per_mwh;
    static const std::vector<KeySpec> table = {
        {"x0_c", "GW", [](Config &c, double v) { c.params.x0_c = v; },
         [](const Config &c) { return c.params.x0_c; }},
        {"x0_d", "GW", [](Config &c, double v) { c.params.x0_d = v; },
         [](const Config &c) { return c.params.x0_d; }},
        {"sigma_c", "Year^-1/2", [](Config &c, double v) { c.params.sigma_c = v; },
         [](const Config &c) { return c.params.sigma_c; }},
        {"sigma_d", "Year^-1/2", [](Config &c, double v) { c.params.sigma_d = v; },
         [](const Config &c) { return c.params.sigma_d; }},
        {"mu_d", "Year^-1", [](Config &c, double v) { c.params.mu_d = v; },
         [](const Config &c) { return c.params.mu_d; }},
        {"m_d", "log GW", [](Config &c, double v) { c.params.m_d = v; },
         [](const Config &c) { return c.params.m_d; }},
        {"exp_m_d", "GW", [](Config &c, double v) { c.params.m_d = std::log(v); },
         [](const Config &c) { return std::exp(c.params.m_d); }},
        {"beta0", "EUR/MWh", [](Config &c, double v) { c.params.beta0 = from_eur_per_mwh(v); },
         [](const Config &c) { return units::to_eur_per_mwh(c.params.beta0); }},
        {"beta1", "GW^-1", [](Config &c, double v) { c.params.beta1 = v; },
         [](const Config &c) { return c.params.beta1; }},
        {"kappa1", "EUR/kW", [](Config &c, double v) { c.params.kappa1 = from_eur_per_kw(v); },
         [](const Config &c) { return units::to_eur_per_kw(c.params.kappa1); }},
        {"kappa2", "EUR/(MWh.MW)",
         [](Config &c, double v) {
             c.params.kappa2 = v * units::eur_per_mwh_mw_to_meur_year_per_gw2;
         },
         [](const Config &c) {
             return c.params.kappa2 / units::eur_per_mwh_mw_to_meur_year_per_gw2;
         }},
        {"a", "EUR/(kW.Year)", [](Config &c, double v) { c.params.a = from_eur_per_kw(v); },
         [](const Config &c) { return units::to_eur_per_kw(c.params.a); }},
        {"b", "EUR/MWh", [](Config &c, double v) { c.params.b = from_eur_per_mwh(v); },
         [](const Config &c) { return units::to_eur_per_mwh(c.params.b); }},
        {"theta", "EUR/MWh", [](Config &c, double v) { c.params.theta = from_eur_per_mwh(v); },
         [](const Config &c) { return units::to_eur_per_mwh(c.params.theta); }},
        {"k", "EUR/MWh", [](Config &c, double v) { c.params.k = from_eur_per_mwh(v); },
         [](const Config &c) { return units::to_eur_per_mwh(c.params.k); }},
        {"eta_a", "MEUR^-1", [](Config &c, double v) { c.params.eta_a = v; },
         [](const Config &c) { return c.params.eta_a; }},
        {"eta_p", "MEUR^-1", [](Config &c, double v) { c.params.eta_p = v; },
         [](const Config &c) { return c.params.eta_p; }},
        {"reservation", "MEUR",
         [](Config &c, double v) {
             c.params.reservation = v;
             c.reservation_given = true;
         },
         [](const Config &c) { return c.params.reservation; }},
        {"horizon_T", "Year",
         [](Config &c, double v) {
             c.params.horizon_T = v;
             c.grid.horizon_T = v;
         },
         [](const Config &c) { return c.params.horizon_T; }},
        {"x_inf", "GW", [](Config &c, double v) { c.params.x_inf = v; },
         [](const Config &c) { return c.params.x_inf; }},
        {"alpha_min", "Year^-1", [](Config &c, double v) { c.params.alpha_min = v; },
         [](const Config &c) { return c.params.alpha_min; }},
        {"alpha_max", "Year^-1", [](Config &c, double v) { c.params.alpha_max = v; },
         [](const Config &c) { return c.params.alpha_max; }},
        {"grid.xc_min", "GW", [](Config &c, double v) { c.grid.xc_min = v; },
         [](const Config &c) { return c.grid.xc_min; }},
        {"grid.xc_max", "GW", [](Config &c, double v) { c.grid.xc_max = v; },
         [](const Config &c) { return c.grid.xc_max; }},
        {"grid.xd_min", "GW", [](Config &c, double v) { c.grid.xd_min = v; },
         [](const Config &c) { return c.grid.xd_min; }},
        {"grid.xd_max", "GW", [](Config &c, double v) { c.grid.xd_max = v; },
         [](const Config &c) { return c.grid.xd_max; }},
        {"grid.n_c", "count", [](Config &c, double v) { c.grid.n_c = static_cast<int>(v); },
         [](const Config &c) { return double(c.grid.n_c); }},
        {"grid.n_d", "count", [](Config &c, double v) { c.grid.n_d = static_cast<int>(v); },
         [](const Config &c) { return double(c.grid.n_d); }},
        {"grid.n_T", "count", [](Config &c, double v) { c.grid.n_T = static_cast<int>(v); },
         [](const Config &c) { return double(c.grid.n_T); }},
        {"run.n_scenarios", "count",
         [](Config &c, double v) { c.run.n_scenarios = static_cast<std::size_t>(v); },
         [](const Config &c) { return double(c.run.n_scenarios); }},
        {"run.seed", "count",
         [](Config &c, double v) { c.run.seed = static_cast<std::uint64_t>(v); },
         [](const Config &c) { return double(c.run.seed); }},
        {"run.substeps", "count",
         [](Config &c, double v) { c.run.substeps = static_cast<int>(v); },
         [](const Config &c) { return double(c.run.substeps); }},
        {"run.cfl_override", "flag", [](Config &c, double v) { c.run.cfl_override = v != 0.0; },
         [](const Config &c) { return double(c.run.cfl_override); }},
        {"run.approx_hamiltonian", "flag",
         [](Config &c, double v) { c.run.approx_hamiltonian = v != 0.0; },
         [](const Config &c) { return double(c.run.approx_hamiltonian); }},
        {"run.bilinear", "flag", [](Config &c, double v) { c.run.bilinear = v != 0.0; },
         [](const Config &c) { return double(c.run.bilinear); }},
    };
    return table;
}

inline std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline bool is_count_key(const std::string &key) {
    return key.rfind("grid.n_", 0) == 0 || key.rfind("run.", 0) == 0;
}

}  // namespace detail

/// Parse configuration text. `origin` prefixes line numbers in messages.
inline Config parse_config(const std::string &text, const std::string &origin = "config") {
    Config cfg;
    std::vector<std::string> problems;
    std::map<std::string, int> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    const auto &table = detail::key_table();
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            problems.push_back(where + ": expected 'key = value'");
            continue;
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        const auto it = std::find_if(table.begin(), table.end(),
                                     [&](const auto &k) { return key == k.name; });
        if (it == table.end()) {
            problems.push_back(where + ": unknown key '" + key + "'");
            continue;
        }
        if (seen.count(key)) {
            problems.push_back(where + ": key '" + key + "' already set on line " +
                               std::to_string(seen[key]));
            continue;
        }
        seen[key] = lineno;
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(val, &used);
        } catch (const std::exception &) {
            used = 0;
        }
        if (used == 0 || used != val.size() || !std::isfinite(v)) {
            problems.push_back(where + ": value of '" + key + "' is not a finite number");
            continue;
        }
        if (detail::is_count_key(key) && (v < 0 || v != std::floor(v))) {
            problems.push_back(where + ": value of '" + key + "' must be a non-negative integer");
            continue;
        }
        it->apply(cfg, v);
    }
    if (seen.count("m_d") && seen.count("exp_m_d"))
        problems.push_back(origin + ": set either 'm_d' or 'exp_m_d', not both");
    if (!seen.count("horizon_T")) cfg.grid.horizon_T = cfg.params.horizon_T;
    for (const auto &e : cfg.params.violations()) problems.push_back(origin + ": " + e.what());
    for (const auto &e : cfg.grid.violations()) problems.push_back(origin + ": " + e.what());
    if (cfg.grid.violations().empty() && cfg.params.violations().empty() &&
        !cfg.grid.contains({cfg.params.x0_c, cfg.params.x0_d}))
        problems.push_back(origin + ": initial state (x0_c, x0_d) lies outside the grid");
    if (cfg.run.n_scenarios == 0) problems.push_back(origin + ": run.n_scenarios must be >= 1");
    if (!problems.empty()) throw ConfigError(problems);
    return cfg;
}

inline Config load_config(const std::string &path) {
    std::ifstream f(path);
    if (!f) throw ConfigError({path + ": cannot open configuration file"});
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), path);
}

/// Configuration text with `overrides` applied: lines setting an overridden
/// key are dropped and one `key = value` line per override is appended. The
/// result is what a manifest stores, so a rerun needs no extra flags.
inline std::string override_config_text(const std::string &text,
                                        const std::vector<std::pair<std::string, std::string>> &overrides) {
    std::istringstream in(text);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) {
        std::string body = line.substr(0, line.find('#'));
        const auto eq = body.find('=');
        const std::string key = eq == std::string::npos ? "" : detail::trim(body.substr(0, eq));
        const bool dropped = std::any_of(overrides.begin(), overrides.end(),
                                         [&](const auto &o) { return o.first == key; });
        if (!dropped) out << line << "\n";
    }
    for (const auto &[k, v] : overrides) out << k << " = " << v << "\n";
    return out.str();
}

/// Render a configuration in the file grammar with every key written out, so
/// the text reproduces the exact run. Values use 17 significant digits.
inline std::string render_config(const Config &cfg) {
    std::ostringstream out;
    out.precision(17);
    for (const auto &k : detail::key_table()) {
        const std::string name = k.name;
        if (name == "exp_m_d") continue;  // m_d carries the same information
        if (name == "reservation" && !cfg.reservation_given) continue;
        out << name << " = " << k.read(cfg) << "  # " << k.unit << "\n";
    }
    return out.str();
}

}  // namespace capremu
