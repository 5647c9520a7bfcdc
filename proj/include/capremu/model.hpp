#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "capremu/units.hpp"

namespace capremu {

/// Raised when a model or grid parameter set violates its invariants.
class ParameterError : public std::invalid_argument {
public:
    ParameterError(std::string key, const std::string &what)
        : std::invalid_argument(key + ": " + what), key_(std::move(key)) {}
    const std::string &key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Raised by model functions evaluated outside their domain.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// (capacity, demand) in GW.
struct State {
    double c = 0.0;
    double d = 0.0;

    friend bool operator==(const State &, const State &) = default;
};

/// A pair of sensitivities or gradients ordered like State.
struct Vec2 {
    double c = 0.0;
    double d = 0.0;

    friend bool operator==(const Vec2 &, const Vec2 &) = default;
    double dot(const Vec2 &o) const { return c * o.c + d * o.d; }
};

/// Symmetric 2x2 matrix, used for Hessians.
struct Sym2 {
    double cc = 0.0;
    double cd = 0.0;
    double dd = 0.0;
};

/// Diagonal volatility matrix diag(sigma_c x_c, sigma_d x_d).
struct DiagVol {
    double c = 0.0;
    double d = 0.0;
    static constexpr double off_diagonal = 0.0;
};

/// Every calibrated constant of the capacity model in GW / Year / M€.
struct ModelParams {
    double x0_c = 90.0;               // GW
    double x0_d = 60.0;               // GW
    double sigma_c = 0.1;             // Year^-1/2
    double sigma_d = 0.86;            // Year^-1/2
    double mu_d = 61.92;              // Year^-1
    double m_d = std::log(60.0);      // log GW
    double beta0 = units::from_eur_per_mwh(102.8);  // M€/(GW·Year)
    double beta1 = 335.3e-4;          // GW^-1
    double kappa1 = 122.13;           // M€/GW
    double kappa2 = 31.8e-4 * units::eur_per_mwh_mw_to_meur_year_per_gw2;  // M€·Year/GW²
    double a = 75.35;                 // M€/(GW·Year)
    double b = units::from_eur_per_mwh(17.6);
    double theta = units::from_eur_per_mwh(20000.0);
    double k = units::from_eur_per_mwh(200000.0);
    double eta_a = 0.852e-4;          // M€^-1
    double eta_p = 0.8094e-5;         // M€^-1
    double reservation = 0.0;         // M€
    double horizon_T = 5.0;           // Year
    double x_inf = 210.0;             // GW
    double alpha_min = -3.0;          // Year^-1
    double alpha_max = 3.0;           // Year^-1

    /// Table calibration of the French system.
    static ModelParams french_calibration() { return ModelParams{}; }

    /// Every violated invariant, one entry per offending key.
    std::vector<ParameterError> violations() const {
        std::vector<ParameterError> out;
        auto positive = [&](const char *key, double v) {
            if (!(v > 0.0) || !std::isfinite(v)) out.emplace_back(key, "must be finite and > 0");
        };
        // Reward and cost levels may be exactly zero: that is the degenerate
        // model used to check the solvers, and nothing divides by them.
        auto non_negative = [&](const char *key, double v) {
            if (!(v >= 0.0) || !std::isfinite(v)) out.emplace_back(key, "must be finite and >= 0");
        };
        positive("sigma_c", sigma_c);
        positive("sigma_d", sigma_d);
        positive("mu_d", mu_d);
        non_negative("beta0", beta0);
        positive("beta1", beta1);
        non_negative("kappa1", kappa1);
        positive("kappa2", kappa2);
        non_negative("a", a);
        non_negative("b", b);
        non_negative("theta", theta);
        non_negative("k", k);
        positive("eta_a", eta_a);
        positive("eta_p", eta_p);
        positive("horizon_T", horizon_T);
        positive("x0_c", x0_c);
        positive("x0_d", x0_d);
        if (!std::isfinite(m_d)) out.emplace_back("m_d", "must be finite");
        if (!(alpha_min < 0.0)) out.emplace_back("alpha_min", "must be < 0");
        if (!(alpha_max > 0.0)) out.emplace_back("alpha_max", "must be > 0");
        if (!(x_inf > std::max(x0_c, x0_d))) out.emplace_back("x_inf", "must exceed max(x0_c, x0_d)");
        if (!(reservation >= 0.0)) out.emplace_back("reservation", "must be >= 0");
        return out;
    }

    void validate() const {
        auto v = violations();
        if (v.empty()) return;
        std::string msg;
        for (const auto &e : v) msg += std::string(e.what()) + "; ";
        throw ParameterError(v.front().key(), msg);
    }
};

// ---------------------------------------------------------------------------
// Instantaneous model functions. All are pure; none allocates.

inline State truncate(State x, double x_inf) {
    return {std::min(x.c, x_inf), std::min(x.d, x_inf)};
}

inline void require_positive_state(State x) {
    if (!(x.c > 0.0) || !(x.d > 0.0))
        throw DomainError("state must be componentwise positive");
}

/// Drift of (capacity, demand) under effort alpha, in GW/Year.
inline Vec2 drift_mu(const ModelParams &p, State x, double alpha) {
    require_positive_state(x);
    const double dem = (p.mu_d * (p.m_d - std::log(x.d)) + 0.5 * p.sigma_d * p.sigma_d) * x.d;
    return {alpha * x.c, dem};
}

/// Uncontrolled part of the drift (zero on capacity).
inline Vec2 drift_mu_tilde(const ModelParams &p, State x) { return drift_mu(p, x, 0.0); }

inline DiagVol vol_sigma(const ModelParams &p, State x) {
    require_positive_state(x);
    return {p.sigma_c * x.c, p.sigma_d * x.d};
}

/// Spot price in €/MWh for a (truncated) state.
inline double spot_price(const ModelParams &p, State x) {
    return units::to_eur_per_mwh(p.beta0) * std::exp(-p.beta1 * (x.c - x.d));
}

/// Spot price in canonical M€/(GW·Year).
inline double spot_price_canonical(const ModelParams &p, State x) {
    return p.beta0 * std::exp(-p.beta1 * (x.c - x.d));
}

/// Energy payment rate s(x) in M€/Year.
inline double spot_flow(const ModelParams &p, State x) {
    const State t = truncate(x, p.x_inf);
    return spot_price_canonical(p, t) * std::min(t.c, t.d);
}

/// Maintenance + production cost, the effort-free part of the producer cost.
inline double producer_base_cost(const ModelParams &p, State x) {
    const State t = truncate(x, p.x_inf);
    return p.a * t.c + p.b * std::min(t.c, t.d);
}

/// Building/dismantling cost rate for effort alpha.
inline double build_cost(const ModelParams &p, State x, double alpha) {
    const double rate = alpha * std::min(x.c, p.x_inf);
    return p.kappa1 * rate + 0.5 * p.kappa2 * rate * rate;
}

/// Producer cost rate c^A(x, alpha) in M€/Year.
inline double producer_cost(const ModelParams &p, State x, double alpha) {
    if (alpha < p.alpha_min || alpha > p.alpha_max)
        throw DomainError("effort outside [alpha_min, alpha_max]");
    return producer_base_cost(p, x) + build_cost(p, x, alpha);
}

/// Consumer utility rate c^P(x) in M€/Year.
inline double consumer_flow(const ModelParams &p, State x) {
    const State t = truncate(x, p.x_inf);
    return p.theta * std::min(t.c, t.d) - p.k * std::max(t.d - t.c, 0.0);
}

/// Equivalent annual cost of an investment paid off over `lifetime` years,
/// scaled by the number of annuities still due.
inline double equivalent_annual_cost(double total_cost, double rate, double lifetime,
                                     double n_annuities) {
    if (!(rate > 0.0)) throw DomainError("discount rate must be > 0");
    if (!(lifetime > 0.0)) throw DomainError("lifetime must be > 0");
    return n_annuities * rate * total_cost / (1.0 - std::pow(1.0 + rate, -lifetime));
}

}  // namespace capremu
