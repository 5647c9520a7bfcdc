#pragma once

// CSV schemas. Every header names its unit in brackets; money is in M€,
// energy in TWh and per-energy quantities in €/MWh. Floating values are
// written in the shortest form that reads back to the same double, so a
// ledger survives a write/read cycle bit for bit.

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "capremu/reporting.hpp"
#include "capremu/scenario.hpp"

namespace capremu {

class CsvError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline double parse_double(const std::string &s, const std::string &what) {
    double v = 0.0;
    const char *b = s.data(), *e = s.data() + s.size();
    const auto r = std::from_chars(b, e, v);
    if (r.ec != std::errc{} || r.ptr != e) throw CsvError(what + ": not a number: '" + s + "'");
    return v;
}

inline std::uint64_t parse_u64(const std::string &s, const std::string &what) {
    std::uint64_t v = 0;
    const char *b = s.data(), *e = s.data() + s.size();
    const auto r = std::from_chars(b, e, v);
    if (r.ec != std::errc{} || r.ptr != e) throw CsvError(what + ": not an integer: '" + s + "'");
    return v;
}

inline std::vector<std::string> split_csv_line(const std::string &line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

// ---------------------------------------------------------------------------
// Scenario ledgers

inline const std::vector<std::string> &ledger_columns() {
    static const std::vector<std::string> cols = {
        "policy",
        "path_index",
        "seed",
        "x_T_c[GW]",
        "x_T_d[GW]",
        "capacity_payment[MEUR]",
        "reservation[MEUR]",
        "spot_revenue[MEUR]",
        "cost_construction[MEUR]",
        "cost_maintenance[MEUR]",
        "cost_production[MEUR]",
        "risk_shared[MEUR]",
        "risk_compensation[MEUR]",
        "shortage_hours[Hours/Year]",
        "delivered_energy[TWh]",
        "average_margin[GW]",
        "average_spot[EUR/MWh]",
    };
    return cols;
}

inline std::string join_columns(const std::vector<std::string> &cols) {
    std::string s;
    for (std::size_t i = 0; i < cols.size(); ++i) s += (i ? "," : "") + cols[i];
    return s;
}

/// One row per scenario. The capacity-payment cell is empty for policies
/// without a contract.
inline void write_ledgers(std::ostream &out, const std::vector<ScenarioLedger> &ens) {
    out << join_columns(ledger_columns()) << "\n";
    for (const auto &l : ens) {
        out << policy_name(l.policy) << "," << l.path_index << "," << l.seed << ","
            << format_double(l.x_T.c) << "," << format_double(l.x_T.d) << ","
            << (l.capacity_payment ? format_double(*l.capacity_payment) : "") << ","
            << format_double(l.reservation) << "," << format_double(l.spot_revenue) << ","
            << format_double(l.cost_construction) << "," << format_double(l.cost_maintenance)
            << "," << format_double(l.cost_production) << "," << format_double(l.risk_shared)
            << "," << format_double(l.risk_compensation) << "," << format_double(l.shortage_hours)
            << "," << format_double(l.delivered_energy) << "," << format_double(l.average_margin)
            << "," << format_double(l.average_spot) << "\n";
    }
}

inline std::vector<ScenarioLedger> read_ledgers(std::istream &in, const std::string &origin) {
    std::string line;
    if (!std::getline(in, line) || line != join_columns(ledger_columns()))
        throw CsvError(origin + ": missing or unexpected ledger header");
    std::vector<ScenarioLedger> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto c = split_csv_line(line);
        const std::string where = origin + ":" + std::to_string(lineno);
        if (c.size() != ledger_columns().size())
            throw CsvError(where + ": expected " + std::to_string(ledger_columns().size()) +
                           " cells, found " + std::to_string(c.size()));
        ScenarioLedger l;
        try {
            l.policy = parse_policy(c[0]);
        } catch (const std::invalid_argument &e) {
            throw CsvError(where + ": " + e.what());
        }
        l.path_index = parse_u64(c[1], where);
        l.seed = parse_u64(c[2], where);
        l.x_T = {parse_double(c[3], where), parse_double(c[4], where)};
        if (!c[5].empty()) l.capacity_payment = parse_double(c[5], where);
        l.reservation = parse_double(c[6], where);
        l.spot_revenue = parse_double(c[7], where);
        l.cost_construction = parse_double(c[8], where);
        l.cost_maintenance = parse_double(c[9], where);
        l.cost_production = parse_double(c[10], where);
        l.risk_shared = parse_double(c[11], where);
        l.risk_compensation = parse_double(c[12], where);
        l.shortage_hours = parse_double(c[13], where);
        l.delivered_energy = parse_double(c[14], where);
        l.average_margin = parse_double(c[15], where);
        l.average_spot = parse_double(c[16], where);
        out.push_back(std::move(l));
    }
    return out;
}

inline std::vector<ScenarioLedger> read_ledgers_file(const std::string &path) {
    std::ifstream f(path);
    if (!f) throw CsvError(path + ": cannot open ledger file");
    return read_ledgers(f, path);
}

/// Long-format trajectories: one row per (scenario, time step).
inline void write_paths(std::ostream &out, const std::vector<ScenarioLedger> &ens, double dt) {
    out << "policy,path_index,step,t[Year],x_c[GW],x_d[GW],y[MEUR]\n";
    for (const auto &l : ens) {
        for (std::size_t k = 0; k < l.path_c.size(); ++k) {
            out << policy_name(l.policy) << "," << l.path_index << "," << k << ","
                << format_double(dt * static_cast<double>(k)) << "," << format_double(l.path_c[k])
                << "," << format_double(l.path_d[k]) << ","
                << (k < l.path_y.size() ? format_double(l.path_y[k]) : "") << "\n";
        }
    }
}

// ---------------------------------------------------------------------------
// Reports

namespace detail {

inline std::vector<std::string> column_groups(const std::vector<EnsembleStats> &stats,
                                              const std::vector<std::string> &groups) {
    if (!groups.empty()) {
        if (groups.size() != stats.size())
            throw std::invalid_argument("one column-group name per ensemble expected");
        return groups;
    }
    std::vector<std::string> out;
    for (const auto &s : stats) out.emplace_back(policy_name(s.policy));
    return out;
}

}  // namespace detail

/// Summary table: one row per quantity, a (mean, sd) column pair per
/// ensemble. Column groups are named after the policy unless `groups` names
/// them. Quantities absent for a policy are left empty.
inline void write_summary(std::ostream &out, const std::vector<EnsembleStats> &stats,
                          const std::vector<std::string> &groups = {}) {
    const auto names = detail::column_groups(stats, groups);
    out << "quantity,label,unit";
    for (const auto &n : names) out << "," << n << ".mean," << n << ".sd";
    out << "\n";
    if (stats.empty()) return;
    for (std::size_t r = 0; r < stats.front().rows.size(); ++r) {
        const auto &head = stats.front().rows[r];
        out << head.key << "," << head.label << "," << head.unit;
        for (const auto &s : stats) {
            const auto &row = s.row(head.key);
            if (row.stats)
                out << "," << format_double(row.stats->mean) << "," << format_double(row.stats->sd);
            else
                out << ",,";
        }
        out << "\n";
    }
}

/// Classification table: one row per percentage, one column per ensemble.
inline void write_classification(std::ostream &out, const std::vector<EnsembleStats> &stats,
                                 const std::vector<std::string> &groups = {}) {
    const auto names = detail::column_groups(stats, groups);
    struct Entry {
        const char *key;
        const char *unit;
        std::optional<double> (*get)(const Classification &);
    };
    static const Entry entries[] = {
        {"missing_money", "%", [](const Classification &c) -> std::optional<double> { return c.pct_missing_money; }},
        {"negative_capacity_payment", "%",
         [](const Classification &c) { return c.pct_negative_capacity_payment; }},
        {"missing_money_and_negative_capacity_payment", "%",
         [](const Classification &c) { return c.pct_missing_money_and_ncr; }},
        {"negative_total_compensation", "%",
         [](const Classification &c) { return c.pct_negative_total_compensation; }},
        {"negative_net_revenue", "%",
         [](const Classification &c) -> std::optional<double> { return c.pct_negative_net_revenue; }},
        {"spot_share_of_total_mean_ratio", "%",
         [](const Classification &c) { return c.spot_share_mean_ratio; }},
        {"spot_share_of_total_ratio_of_means", "%",
         [](const Classification &c) { return c.spot_share_ratio_of_means; }},
        {"mean_total_to_spot_ratio", "1",
         [](const Classification &c) { return c.mean_total_to_spot_ratio; }},
    };
    out << "quantity,unit";
    for (const auto &n : names) out << "," << n;
    out << "\n";
    for (const auto &e : entries) {
        out << e.key << "," << e.unit;
        for (const auto &s : stats) {
            const auto v = e.get(s.classes);
            out << "," << (v ? format_double(*v) : "");
        }
        out << "\n";
    }
}

/// Per-scenario contract decomposition in €/MWh, plot-ready, with the named
/// scenarios tagged.
inline void write_decomposition(std::ostream &out, const std::vector<ScenarioLedger> &ens) {
    out << "path_index,tag,shortage_hours[Hours/Year],average_spot[EUR/MWh],"
           "spot_revenue[EUR/MWh],capacity_payment[EUR/MWh],participation_constraint[EUR/MWh],"
           "risk_shared[EUR/MWh],risk_compensation[EUR/MWh],cost_construction[EUR/MWh],"
           "cost_maintenance[EUR/MWh],cost_production[EUR/MWh],total_to_spot_ratio[1]\n";
    if (ens.empty()) return;
    const NamedScenarios named = select_named_scenarios(ens);
    for (std::size_t i = 0; i < ens.size(); ++i) {
        const auto &l = ens[i];
        std::string tag;
        auto add_tag = [&](const char *t) { tag += (tag.empty() ? "" : "+") + std::string(t); };
        if (i == named.severe) add_tag("severe");
        if (i == named.worst_ratio) add_tag("worst_ratio");
        if (named.favorable && i == *named.favorable) add_tag("favorable");
        const double e = l.delivered_energy;
        out << l.path_index << "," << tag << "," << format_double(l.shortage_hours) << ","
            << format_double(l.average_spot) << "," << format_double(per_mwh(l.spot_revenue, e))
            << "," << format_double(per_mwh(l.capacity_payment.value_or(0.0), e)) << ","
            << format_double(per_mwh(l.reservation, e)) << ","
            << format_double(per_mwh(l.risk_shared, e)) << ","
            << format_double(per_mwh(l.risk_compensation, e)) << ","
            << format_double(per_mwh(l.cost_construction, e)) << ","
            << format_double(per_mwh(l.cost_maintenance, e)) << ","
            << format_double(per_mwh(l.cost_production, e)) << ","
            << format_double(total_to_spot_ratio(l)) << "\n";
    }
}

}  // namespace capremu
