#pragma once

// Run manifest written next to every output. It carries the verbatim
// configuration text, so re-running from the manifest alone reproduces the
// outputs byte for byte. Nothing time- or machine-dependent is recorded; the
// worker count is deliberately omitted because results do not depend on it.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "capremu/config.hpp"

namespace capremu {

inline constexpr const char *capremu_version = "1.0.0";

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char *digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 0xF];
    return s;
}

inline std::string file_digest(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) return "";
    std::ostringstream ss;
    ss << f.rdbuf();
    return hex64(fnv1a64(ss.str()));
}

struct Manifest {
    std::string command;
    std::string config_text;
    Config config;
    std::vector<std::string> policies;
    /// Output files (name relative to the manifest) and their digests.
    std::vector<std::pair<std::string, std::string>> outputs;
    nlohmann::json extra = nlohmann::json::object();
};

inline nlohmann::json manifest_json(const Manifest &m) {
    const GridSpec &g = m.config.grid;
    nlohmann::json files = nlohmann::json::object();
    for (const auto &[name, digest] : m.outputs) files[name] = digest;
    nlohmann::json j = {
        {"tool", "capremu"},
        {"version", capremu_version},
        {"command", m.command},
        {"config_hash", hex64(fnv1a64(m.config_text))},
        {"seed", m.config.run.seed},
        {"n_scenarios", m.config.run.n_scenarios},
        {"grid",
         {{"xc_min", g.xc_min},
          {"xc_max", g.xc_max},
          {"xd_min", g.xd_min},
          {"xd_max", g.xd_max},
          {"n_c", g.n_c},
          {"n_d", g.n_d},
          {"n_T", g.n_T},
          {"horizon_T", g.horizon_T}}},
        {"modes",
         {{"approx_hamiltonian", m.config.run.approx_hamiltonian},
          {"bilinear", m.config.run.bilinear},
          {"cfl_override", m.config.run.cfl_override},
          {"substeps", m.config.run.substeps}}},
        {"policies", m.policies},
        {"outputs", files},
        {"config_text", m.config_text},
    };
    if (!m.extra.empty()) j["results"] = m.extra;
    return j;
}

inline void write_manifest(const std::string &path, const Manifest &m) {
    std::ofstream f(path, std::ios::binary);
    f << manifest_json(m).dump(2) << "\n";
}

/// Configuration text stored in a manifest, for re-running.
inline std::string manifest_config_text(const std::string &path) {
    std::ifstream f(path);
    if (!f) throw ConfigError({path + ": cannot open manifest"});
    try {
        return nlohmann::json::parse(f).at("config_text").get<std::string>();
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError({path + ": malformed manifest: " + e.what()});
    }
}

}  // namespace capremu
