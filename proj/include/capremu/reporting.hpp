#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "capremu/scenario.hpp"

namespace capremu {

/// Monetary amount per unit of delivered energy: 1 M€/TWh = 1 €/MWh.
inline double per_mwh(double amount_meur, double energy_twh) {
    if (!(energy_twh > 0.0)) throw DomainError("delivered energy must be > 0");
    return units::meur_per_twh_to_eur_per_mwh(amount_meur / energy_twh);
}

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;
};

/// Population mean and standard deviation.
inline MeanSd mean_sd(const std::vector<double> &v) {
    if (v.empty()) throw std::invalid_argument("empty sample");
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return {m, std::sqrt(s / static_cast<double>(v.size()))};
}

/// One summary row: a quantity, its unit and its cross-scenario statistics.
/// Rows that do not exist for a policy (no contract) carry no value.
struct SummaryRow {
    std::string key;
    std::string label;
    std::string unit;
    std::optional<MeanSd> stats;
};

/// Scenario classification percentages.
struct Classification {
    double pct_missing_money = 0.0;
    std::optional<double> pct_negative_capacity_payment;
    std::optional<double> pct_missing_money_and_ncr;
    std::optional<double> pct_negative_total_compensation;
    double pct_negative_net_revenue = 0.0;
    /// 100 / E[(S+ξ)/S]: spot share of total revenue from the mean ratio.
    std::optional<double> spot_share_mean_ratio;
    /// 100 · E[S] / E[S+ξ]: spot share from the ratio of means.
    std::optional<double> spot_share_ratio_of_means;
    std::optional<double> mean_total_to_spot_ratio;
};

struct EnsembleStats {
    Policy policy = Policy::WithCRM;
    std::size_t n = 0;
    std::vector<SummaryRow> rows;
    Classification classes;

    const SummaryRow &row(const std::string &key) const {
        for (const auto &r : rows)
            if (r.key == key) return r;
        throw std::out_of_range("no summary row '" + key + "'");
    }
    double mean(const std::string &key) const { return row(key).stats.value().mean; }
    double sd(const std::string &key) const { return row(key).stats.value().sd; }
};

/// Per-scenario flags used by the classification tables.
struct ScenarioFlags {
    bool missing_money = false;              // total costs > spot revenue
    bool negative_capacity_payment = false;  // ξ < 0
    bool negative_total_compensation = false;
    bool negative_net_revenue = false;       // compensation − costs < 0
};

inline ScenarioFlags classify(const ScenarioLedger &l) {
    ScenarioFlags f;
    f.missing_money = l.total_costs() > l.spot_revenue;
    f.negative_capacity_payment = l.capacity_payment.has_value() && *l.capacity_payment < 0.0;
    f.negative_total_compensation = l.total_compensation() < 0.0;
    f.negative_net_revenue = l.total_compensation() - l.total_costs() < 0.0;
    return f;
}

/// (S_T + ξ)/S_T for a contract scenario.
inline double total_to_spot_ratio(const ScenarioLedger &l) {
    return l.total_compensation() / l.spot_revenue;
}

inline EnsembleStats summarize(const std::vector<ScenarioLedger> &ens) {
    if (ens.empty()) throw std::invalid_argument("cannot summarise an empty ensemble");
    EnsembleStats st;
    st.policy = ens.front().policy;
    st.n = ens.size();
    const bool contract = ens.front().capacity_payment.has_value();
    for (const auto &l : ens)
        if (l.capacity_payment.has_value() != contract)
            throw std::invalid_argument("ensemble mixes contract and no-contract scenarios");

    auto collect = [&](auto fn) {
        std::vector<double> v;
        v.reserve(ens.size());
        for (const auto &l : ens) v.push_back(fn(l));
        return mean_sd(v);
    };
    auto mwh = [&](auto fn) {
        return collect([&](const ScenarioLedger &l) { return per_mwh(fn(l), l.delivered_energy); });
    };
    auto add = [&](const char *key, const char *label, const char *unit,
                   std::optional<MeanSd> s) { st.rows.push_back({key, label, unit, s}); };
    auto contract_only = [&](auto fn) -> std::optional<MeanSd> {
        if (!contract) return std::nullopt;
        return mwh(fn);
    };

    add("shortage_hours", "Shortage hours per year", "Hours",
        collect([](const auto &l) { return l.shortage_hours; }));
    add("average_spot", "Average spot price", "EUR/MWh",
        collect([](const auto &l) { return l.average_spot; }));
    add("average_margin", "Average margin", "GW",
        collect([](const auto &l) { return l.average_margin; }));
    add("spot_revenue", "Spot revenues", "EUR/MWh", mwh([](const auto &l) { return l.spot_revenue; }));
    add("capacity_payment", "Capacity payment", "EUR/MWh",
        contract_only([](const auto &l) { return *l.capacity_payment; }));
    add("total_compensation", "Spot + capacity payment", "EUR/MWh",
        mwh([](const auto &l) { return l.total_compensation(); }));
    add("participation_constraint", "Participation constraint", "EUR/MWh",
        contract_only([](const auto &l) { return l.reservation; }));
    add("risk_shared", "Risk shared", "EUR/MWh",
        contract_only([](const auto &l) { return l.risk_shared; }));
    add("risk_compensation", "Risk compensation", "EUR/MWh",
        contract_only([](const auto &l) { return l.risk_compensation; }));
    add("total_costs", "Total costs", "EUR/MWh", mwh([](const auto &l) { return l.total_costs(); }));
    add("cost_construction", "Construction and dismantling", "EUR/MWh",
        mwh([](const auto &l) { return l.cost_construction; }));
    add("cost_maintenance", "Maintenance", "EUR/MWh",
        mwh([](const auto &l) { return l.cost_maintenance; }));
    add("cost_production", "Production", "EUR/MWh",
        mwh([](const auto &l) { return l.cost_production; }));

    const double n = static_cast<double>(ens.size());
    std::size_t mm = 0, ncr = 0, both = 0, negtot = 0, negnet = 0;
    double ratio_sum = 0.0, spot_sum = 0.0, total_sum = 0.0;
    for (const auto &l : ens) {
        const ScenarioFlags f = classify(l);
        mm += f.missing_money;
        ncr += f.negative_capacity_payment;
        both += f.missing_money && f.negative_capacity_payment;
        negtot += f.negative_total_compensation;
        negnet += f.negative_net_revenue;
        ratio_sum += total_to_spot_ratio(l);
        spot_sum += l.spot_revenue;
        total_sum += l.total_compensation();
    }
    Classification &c = st.classes;
    c.pct_missing_money = 100.0 * mm / n;
    c.pct_negative_net_revenue = 100.0 * negnet / n;
    if (contract) {
        c.pct_negative_capacity_payment = 100.0 * ncr / n;
        c.pct_missing_money_and_ncr = 100.0 * both / n;
        c.pct_negative_total_compensation = 100.0 * negtot / n;
        c.mean_total_to_spot_ratio = ratio_sum / n;
        c.spot_share_mean_ratio = 100.0 / (ratio_sum / n);
        c.spot_share_ratio_of_means = 100.0 * spot_sum / total_sum;
    }
    return st;
}

/// Indices of the notable scenarios of a contract ensemble.
struct NamedScenarios {
    std::size_t severe = 0;       // most shortage hours
    std::size_t worst_ratio = 0;  // lowest (S+ξ)/S
    std::optional<std::size_t> favorable;  // no shortage, largest capacity-payment share
};

inline NamedScenarios select_named_scenarios(const std::vector<ScenarioLedger> &ens) {
    if (ens.empty()) throw std::invalid_argument("empty ensemble");
    NamedScenarios out;
    double best_share = -std::numeric_limits<double>::infinity();
    double best_spot = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ens.size(); ++i) {
        const auto &l = ens[i];
        if (l.shortage_hours > ens[out.severe].shortage_hours) out.severe = i;
        if (total_to_spot_ratio(l) < total_to_spot_ratio(ens[out.worst_ratio])) out.worst_ratio = i;
        if (l.shortage_hours == 0.0) {
            const double share = l.capacity_payment.value_or(0.0) / l.total_compensation();
            if (share > best_share || (share == best_share && l.average_spot < best_spot)) {
                best_share = share;
                best_spot = l.average_spot;
                out.favorable = i;
            }
        }
    }
    return out;
}

}  // namespace capremu
