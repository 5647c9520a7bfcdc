#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "capremu/control_laws.hpp"
#include "capremu/grid.hpp"
#include "capremu/parallel.hpp"
#include "capremu/pde.hpp"
#include "capremu/rng.hpp"

namespace capremu {

enum class Policy { WithCRM, WithoutCRM, NoAdjustment };

inline const char *policy_name(Policy p) {
    switch (p) {
    case Policy::WithCRM: return "with_crm";
    case Policy::WithoutCRM: return "without_crm";
    case Policy::NoAdjustment: return "no_adjustment";
    }
    return "?";
}

inline Policy parse_policy(const std::string &s) {
    if (s == "with_crm") return Policy::WithCRM;
    if (s == "without_crm") return Policy::WithoutCRM;
    if (s == "no_adjustment") return Policy::NoAdjustment;
    throw std::invalid_argument("unknown policy '" + s + "'");
}

/// Raised when a simulated state leaves the positive quadrant.
class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Running accounts of one simulated scenario. Money in M€, energy in TWh.
struct ScenarioLedger {
    Policy policy = Policy::WithCRM;
    std::uint64_t path_index = 0;
    std::uint64_t seed = 0;

    State x_T;
    /// Contract payment ξ = Y_T; only a contract policy has one.
    std::optional<double> capacity_payment;
    double reservation = 0.0;
    double spot_revenue = 0.0;
    double cost_construction = 0.0;
    double cost_maintenance = 0.0;
    double cost_production = 0.0;
    double risk_shared = 0.0;
    double risk_compensation = 0.0;
    double shortage_hours = 0.0;     // Hours/Year
    double delivered_energy = 0.0;   // TWh
    double average_margin = 0.0;     // GW
    double average_spot = 0.0;       // €/MWh

    /// Optional full trajectories (n_T + 1 entries each).
    std::vector<double> path_c, path_d, path_y;

    double total_costs() const { return cost_construction + cost_maintenance + cost_production; }
    double total_compensation() const { return spot_revenue + capacity_payment.value_or(0.0); }
};

/// Everything a path needs besides its random stream.
struct SimulationSetup {
    ModelParams params;
    GridSpec grid;
    const ControlFields *contract = nullptr;  // z_c, z_d, alpha_hat
    const ControlFields *solo = nullptr;      // alpha_pc
    double reservation = 0.0;
};

struct SimulationOptions {
    bool store_paths = false;
    /// Effort deviation δ added to the recommended effort (with-contract
    /// only). The contract then follows Y += Z·ΔX − H(X, Z)Δt on the
    /// realised state instead of the recommended-effort recursion.
    double effort_shift = 0.0;
    /// Bilinear interpolation of the fields instead of nearest-lower lookup.
    bool bilinear = false;
    int workers = 1;
};

/// Hours per year spent in shortage when `count` of the n_T steps had
/// demand above capacity.
inline double shortage_hours_from_count(long count, double dt, double horizon) {
    return dt * static_cast<double>(count) * units::hours_per_year / horizon;
}

inline double shortage_hours(const std::vector<double> &path_c, const std::vector<double> &path_d,
                             double dt, double horizon) {
    long count = 0;
    for (std::size_t k = 0; k + 1 < path_c.size(); ++k)
        if (path_d[k] > path_c[k]) ++count;
    return shortage_hours_from_count(count, dt, horizon);
}

namespace detail {

inline double field_value(const Matrix &m, const GridSpec &g, State x, bool bilinear) {
    if (!bilinear) {
        const auto [i, j] = g.lower_index(x);
        return m(i, j);
    }
    const double c = std::clamp(x.c, g.xc_min, g.xc_max);
    const double d = std::clamp(x.d, g.xd_min, g.xd_max);
    const double fc = (c - g.xc_min) / g.dx_c(), fd = (d - g.xd_min) / g.dx_d();
    const int i = std::clamp(static_cast<int>(std::floor(fc)), 0, g.n_c - 1);
    const int j = std::clamp(static_cast<int>(std::floor(fd)), 0, g.n_d - 1);
    const double tc = fc - i, td = fd - j;
    return (1 - tc) * (1 - td) * m(i, j) + tc * (1 - td) * m(i + 1, j) +
           (1 - tc) * td * m(i, j + 1) + tc * td * m(i + 1, j + 1);
}

}  // namespace detail

/// Explicit Euler path of (X, Y) under `policy`, with every time integral
/// accumulated at the left endpoint of its step.
inline ScenarioLedger simulate_path(const SimulationSetup &s, Policy policy, NormalStream &rng,
                                    const SimulationOptions &opt = {}) {
    const ModelParams &p = s.params;
    const GridSpec &g = s.grid;
    if (policy == Policy::WithCRM && s.contract == nullptr)
        throw std::invalid_argument("contract policy needs the consumer control fields");
    if (policy == Policy::WithoutCRM && s.solo == nullptr)
        throw std::invalid_argument("no-contract policy needs the producer-alone effort field");

    const int n = g.n_T;
    const double dt = g.dt(), sdt = std::sqrt(dt);
    const bool contract = policy == Policy::WithCRM;

    ScenarioLedger L;
    L.policy = policy;
    L.reservation = s.reservation;
    if (opt.store_paths) {
        L.path_c.reserve(n + 1);
        L.path_d.reserve(n + 1);
        if (contract) L.path_y.reserve(n + 1);
    }

    State x{p.x0_c, p.x0_d};
    double y = s.reservation;
    long shortage_steps = 0;
    double served = 0.0, margin_sum = 0.0, spot_sum = 0.0;

    for (int k = 1; k <= n; ++k) {
        if (opt.store_paths) {
            L.path_c.push_back(x.c);
            L.path_d.push_back(x.d);
            if (contract) L.path_y.push_back(y);
        }
        if (!(x.c > 0.0) || !(x.d > 0.0))
            throw SimulationError("state left the positive quadrant at step " +
                                  std::to_string(k - 1));

        double alpha = 0.0;
        Vec2 z;
        if (contract) {
            const bool bl = opt.bilinear;
            z.c = detail::field_value(s.contract->z_c[k - 1], g, x, bl);
            z.d = detail::field_value(s.contract->z_d[k - 1], g, x, bl);
            alpha = bl ? recommended_effort(p, x.c, z.c)
                       : detail::field_value(s.contract->alpha_hat[k - 1], g, x, false);
        } else if (policy == Policy::WithoutCRM) {
            alpha = detail::field_value(s.solo->alpha_pc[k - 1], g, x, opt.bilinear);
        }
        const double alpha_played = clip_effort(p, alpha + opt.effort_shift);

        const State xt = truncate(x, p.x_inf);
        const double served_now = std::min(xt.c, xt.d);
        const double spot = spot_flow(p, x);
        const double build = build_cost(p, x, alpha_played);
        const double cost = producer_cost(p, x, alpha_played);
        const Vec2 mu = drift_mu(p, x, alpha_played);
        const DiagVol sig = vol_sigma(p, x);

        if (x.d > x.c) ++shortage_steps;
        served += served_now;
        margin_sum += x.c - x.d;
        spot_sum += spot_price(p, xt);
        L.spot_revenue += dt * spot;
        L.cost_construction += dt * build;
        L.cost_maintenance += dt * p.a * xt.c;
        L.cost_production += dt * p.b * served_now;

        const double w_c = rng(), w_d = rng();
        const double dxc = dt * mu.c + sdt * sig.c * w_c;
        const double dxd = dt * mu.d + sdt * sig.d * w_d;

        if (contract) {
            const double sz_c = sig.c * z.c, sz_d = sig.d * z.d;
            const double comp = dt * 0.5 * p.eta_a * (sz_c * sz_c + sz_d * sz_d);
            const double shared = sdt * (sz_c * w_c + sz_d * w_d);
            L.risk_compensation += comp;
            L.risk_shared += shared;
            if (opt.effort_shift == 0.0) {
                y += dt * (cost - spot) + comp + shared;
            } else {
                y += z.c * dxc + z.d * dxd - dt * hamiltonian_H(p, x, z);
            }
        }
        x.c += dxc;
        x.d += dxd;
    }
    if (opt.store_paths) {
        L.path_c.push_back(x.c);
        L.path_d.push_back(x.d);
        if (contract) L.path_y.push_back(y);
    }

    L.x_T = x;
    if (contract) L.capacity_payment = y;
    L.shortage_hours = shortage_hours_from_count(shortage_steps, dt, g.horizon_T);
    L.delivered_energy = dt * served * units::gw_year_to_twh;
    L.average_margin = margin_sum / n;
    L.average_spot = spot_sum / n;
    return L;
}

/// N independent paths; path i draws from substream i of `master_seed`.
inline std::vector<ScenarioLedger> simulate_ensemble(const SimulationSetup &s, Policy policy,
                                                     std::size_t n_paths,
                                                     std::uint64_t master_seed,
                                                     const SimulationOptions &opt = {}) {
    if (n_paths == 0) throw std::invalid_argument("ensemble size must be >= 1");
    std::vector<ScenarioLedger> out(n_paths);
    parallel_for(n_paths, opt.workers, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const std::uint64_t seed = substream_seed(master_seed, i);
            NormalStream rng(seed);
            out[i] = simulate_path(s, policy, rng, opt);
            out[i].path_index = i;
            out[i].seed = seed;
        }
    });
    return out;
}

}  // namespace capremu
