#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "capremu/model.hpp"

namespace capremu {

/// States below this capacity are rejected wherever x̲ᶜ appears in a denominator.
inline constexpr double capacity_floor = 1e-6;

inline void require_capacity(double x_c) {
    if (!(x_c >= capacity_floor)) throw DomainError("capacity below the division floor");
}

inline double clip_effort(const ModelParams &p, double alpha) {
    return std::clamp(alpha, p.alpha_min, p.alpha_max);
}

// ---------------------------------------------------------------------------
// Producer side

/// h(x, z, α) = z·μ(x,α) + s(x) − c^A(x,α) − (η_A/2)|σ(x)z|².
inline double hamiltonian_h(const ModelParams &p, State x, Vec2 z, double alpha) {
    const Vec2 mu = drift_mu(p, x, alpha);
    const DiagVol s = vol_sigma(p, x);
    const double sz_c = s.c * z.c, sz_d = s.d * z.d;
    return z.dot(mu) + spot_flow(p, x) - producer_cost(p, x, alpha) -
           0.5 * p.eta_a * (sz_c * sz_c + sz_d * sz_d);
}

/// α̂(xᶜ, zᶜ): maximiser of h over the admissible efforts.
inline double recommended_effort(const ModelParams &p, double x_c, double z_c) {
    require_capacity(x_c);
    const double xt = std::min(x_c, p.x_inf);
    return clip_effort(p, (z_c * x_c - p.kappa1 * xt) / (xt * xt * p.kappa2));
}

/// H(x, z) = h(x, z, α̂(xᶜ, zᶜ)).
inline double hamiltonian_H(const ModelParams &p, State x, Vec2 z) {
    return hamiltonian_h(p, x, z, recommended_effort(p, x.c, z.c));
}

// ---------------------------------------------------------------------------
// Consumer side

/// Everything in ḡ that depends only on the node, precomputed once per state so
/// the PDE sweep does not re-evaluate exponentials and logarithms.
struct NodeCoefficients {
    double x_c = 0.0;
    double xt_c = 0.0;       // truncated capacity
    double mu_tilde_d = 0.0; // uncontrolled demand drift
    double var_c = 0.0;      // (σᶜxᶜ)²
    double var_d = 0.0;      // (σᴰxᴰ)²
    double running = 0.0;    // c^P − c̃^A
    double spot = 0.0;       // s(x)
    double base_cost = 0.0;  // c̃^A
};

inline NodeCoefficients node_coefficients(const ModelParams &p, State x) {
    require_capacity(x.c);
    const DiagVol s = vol_sigma(p, x);
    NodeCoefficients n;
    n.x_c = x.c;
    n.xt_c = std::min(x.c, p.x_inf);
    n.mu_tilde_d = drift_mu_tilde(p, x).d;
    n.var_c = s.c * s.c;
    n.var_d = s.d * s.d;
    n.base_cost = producer_base_cost(p, x);
    n.running = consumer_flow(p, x) - n.base_cost;
    n.spot = spot_flow(p, x);
    return n;
}

namespace detail {

inline double effort_from(const ModelParams &p, const NodeCoefficients &n, double z_c) {
    return clip_effort(p, (z_c * n.x_c - p.kappa1 * n.xt_c) / (n.xt_c * n.xt_c * p.kappa2));
}

/// The zᶜ-dependent part of ḡ.
inline double g_capacity_part(const ModelParams &p, const NodeCoefficients &n, double p_c,
                              double z_c) {
    const double a = effort_from(p, n, z_c);
    return a * (n.x_c * p_c - p.kappa1 * n.xt_c) -
           0.5 * p.kappa2 * n.xt_c * n.xt_c * a * a -
           0.5 * (p.eta_a + p.eta_p) * z_c * z_c * n.var_c + p.eta_p * z_c * n.var_c * p_c;
}

/// The zᴰ-dependent part of ḡ.
inline double g_demand_part(const ModelParams &p, const NodeCoefficients &n, double p_d,
                            double z_d) {
    return -0.5 * (p.eta_a + p.eta_p) * z_d * z_d * n.var_d + p.eta_p * z_d * n.var_d * p_d;
}

inline double zc_maximiser(const ModelParams &p, const NodeCoefficients &n, double p_c) {
    const double xt2k = n.xt_c * n.xt_c * p.kappa2;
    // Effort is α_min below lo, α_max above hi and affine in between.
    const double lo = (p.alpha_min * xt2k + p.kappa1 * n.xt_c) / n.x_c;
    const double hi = (p.alpha_max * xt2k + p.kappa1 * n.xt_c) / n.x_c;
    const double r2k = (n.x_c * n.x_c) / xt2k;  // (xᶜ/x̲ᶜ)²/κ₂
    const double interior =
        (p.eta_p * n.var_c + r2k) * p_c / ((p.eta_a + p.eta_p) * n.var_c + r2k);
    // Each regime is a concave quadratic in zᶜ; maximise each over its own
    // interval and keep the best.
    std::array<double, 3> cand{};
    cand[1] = std::clamp(interior, lo, hi);
    if (n.var_c > 0.0) {
        const double outer = p.eta_p * p_c / (p.eta_a + p.eta_p);
        cand[0] = std::min(outer, lo);
        cand[2] = std::max(outer, hi);
    } else {
        cand[0] = lo;
        cand[2] = hi;
    }
    double best = cand[1];
    double best_val = g_capacity_part(p, n, p_c, best);
    for (double c : {cand[0], cand[2]}) {
        const double v = g_capacity_part(p, n, p_c, c);
        if (v > best_val) {
            best_val = v;
            best = c;
        }
    }
    return best;
}

}  // namespace detail

/// ẑ(x, p): maximiser of ḡ over z. The capacity component is found exactly
/// over the three effort regimes (α_min-clipped, interior, α_max-clipped).
inline Vec2 optimal_z(const ModelParams &p, const NodeCoefficients &n, Vec2 grad) {
    return {detail::zc_maximiser(p, n, grad.c), p.eta_p / (p.eta_a + p.eta_p) * grad.d};
}

inline Vec2 optimal_z(const ModelParams &p, State x, Vec2 grad) {
    return optimal_z(p, node_coefficients(p, x), grad);
}

/// Interior-branch closed form for ẑᶜ, valid when no effort clipping binds.
inline double optimal_zc_interior(const ModelParams &p, State x, double p_c) {
    const NodeCoefficients n = node_coefficients(p, x);
    const double r2k = (n.x_c / n.xt_c) * (n.x_c / n.xt_c) / p.kappa2;
    return (p.eta_p * n.var_c + r2k) * p_c / ((p.eta_a + p.eta_p) * n.var_c + r2k);
}

/// ḡ(x, p, γ, z) evaluated from precomputed node data.
inline double consumer_g(const ModelParams &p, const NodeCoefficients &n, Vec2 grad, Sym2 hess,
                         Vec2 z) {
    // σσᵀ is diagonal, so the cross-derivative never enters.
    const double diffusion = 0.5 * (n.var_c * (hess.cc - p.eta_p * grad.c * grad.c) +
                                    n.var_d * (hess.dd - p.eta_p * grad.d * grad.d));
    return n.mu_tilde_d * grad.d + n.running + diffusion +
           detail::g_capacity_part(p, n, grad.c, z.c) + detail::g_demand_part(p, n, grad.d, z.d);
}

inline double consumer_g(const ModelParams &p, State x, Vec2 grad, Sym2 hess, Vec2 z) {
    return consumer_g(p, node_coefficients(p, x), grad, hess, z);
}

/// Ḡ(x, p, γ) = sup_z ḡ(x, p, γ, z).
inline double consumer_hamiltonian_G(const ModelParams &p, const NodeCoefficients &n, Vec2 grad,
                                     Sym2 hess) {
    return consumer_g(p, n, grad, hess, optimal_z(p, n, grad));
}

inline double consumer_hamiltonian_G(const ModelParams &p, State x, Vec2 grad, Sym2 hess) {
    return consumer_hamiltonian_G(p, node_coefficients(p, x), grad, hess);
}

/// Coefficients of the approximating PDE: f = c̃^A − c^P and the quadratic
/// gradient weights ρ, in the closed-form approximation.
struct ApproxCoefficients {
    double f = 0.0;
    Vec2 rho;
};

inline ApproxCoefficients approx_coefficients(const ModelParams &p, const NodeCoefficients &n) {
    const double ik = 1.0 / p.kappa2;
    ApproxCoefficients out;
    out.f = -n.running;
    out.rho.c = (ik * ik + ik * p.eta_p * n.var_c - p.eta_a * p.eta_p * n.var_c * n.var_c) /
                ((p.eta_a + p.eta_p) * n.var_c + ik);
    out.rho.d = -p.eta_a * p.eta_p * n.var_d / (p.eta_a + p.eta_p);
    return out;
}

inline ApproxCoefficients approx_coefficients(const ModelParams &p, State x) {
    return approx_coefficients(p, node_coefficients(p, x));
}

/// Right-hand side of the approximating PDE, for
/// cross-validation only: (μ̃ − (κ₁/κ₂, 0))·p + ½σσᵀ:γ + f − κ₁²/(2κ₂) + ½ρ·(p∘p).
inline double approx_hamiltonian(const ModelParams &p, const NodeCoefficients &n, Vec2 grad,
                                 Sym2 hess) {
    const ApproxCoefficients c = approx_coefficients(p, n);
    return -(p.kappa1 / p.kappa2) * grad.c + n.mu_tilde_d * grad.d +
           0.5 * (n.var_c * hess.cc + n.var_d * hess.dd) + c.f -
           p.kappa1 * p.kappa1 / (2.0 * p.kappa2) +
           0.5 * (c.rho.c * grad.c * grad.c + c.rho.d * grad.d * grad.d);
}

inline double approx_hamiltonian(const ModelParams &p, State x, Vec2 grad, Sym2 hess) {
    return approx_hamiltonian(p, node_coefficients(p, x), grad, hess);
}

/// Linear approximation of ẑ for unbounded efforts and no truncation.
inline Vec2 optimal_z_approx(const ModelParams &p, const NodeCoefficients &n, Vec2 grad) {
    const double ik = 1.0 / p.kappa2;
    return {(p.eta_p * n.var_c + ik) / ((p.eta_a + p.eta_p) * n.var_c + ik) * grad.c,
            p.eta_p / (p.eta_a + p.eta_p) * grad.d};
}

// ---------------------------------------------------------------------------
// Producer acting alone (no contract), certainty-equivalent form

/// α_pc(x, −1/η_A, Dû): the producer's own optimal effort.
inline double agent_solo_effort(const ModelParams &p, double x_c, double p_c) {
    require_capacity(x_c);
    const double xt = std::min(x_c, p.x_inf);
    return clip_effort(p, (p_c * x_c - p.kappa1 * xt) / (xt * xt * p.kappa2));
}

/// ĥ(x, −1/η_A, p, γ − η_A ppᵀ, α) = μ(x,α)·p + ½σσᵀ:(γ − η_A ppᵀ) + s − c^A(x,α).
inline double agent_solo_h(const ModelParams &p, const NodeCoefficients &n, Vec2 grad, Sym2 hess,
                           double alpha) {
    const double effort = alpha * n.xt_c;
    return alpha * n.x_c * grad.c + n.mu_tilde_d * grad.d +
           0.5 * (n.var_c * (hess.cc - p.eta_a * grad.c * grad.c) +
                  n.var_d * (hess.dd - p.eta_a * grad.d * grad.d)) +
           n.spot - n.base_cost - (p.kappa1 * effort + 0.5 * p.kappa2 * effort * effort);
}

inline double agent_solo_h(const ModelParams &p, State x, Vec2 grad, Sym2 hess, double alpha) {
    if (alpha < p.alpha_min || alpha > p.alpha_max)
        throw DomainError("effort outside [alpha_min, alpha_max]");
    return agent_solo_h(p, node_coefficients(p, x), grad, hess, alpha);
}

/// sup over α of ĥ in certainty-equivalent form.
inline double agent_solo_hamiltonian(const ModelParams &p, const NodeCoefficients &n, Vec2 grad,
                                     Sym2 hess) {
    return agent_solo_h(p, n, grad, hess, agent_solo_effort(p, n.x_c, grad.c));
}

inline double agent_solo_hamiltonian(const ModelParams &p, State x, Vec2 grad, Sym2 hess) {
    return agent_solo_hamiltonian(p, node_coefficients(p, x), grad, hess);
}

}  // namespace capremu
