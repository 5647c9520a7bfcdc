#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "capremu/control_laws.hpp"
#include "capremu/grid.hpp"
#include "capremu/parallel.hpp"

namespace capremu {

/// Raised when the explicit scheme produces a non-finite value or is run
/// outside its stability region.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Stack of (n_T + 1) value matrices, index k ↔ time kΔt.
struct Surface {
    std::vector<Matrix> values;
};

/// Per-time-step feedback fields sampled on the grid. The consumer solve
/// fills z_c, z_d and alpha_hat; the producer-alone solve fills alpha_pc.
struct ControlFields {
    std::vector<Matrix> z_c, z_d, alpha_hat, alpha_pc;
};

struct SolveResult {
    Surface surface;
    ControlFields fields;
    int substeps = 1;
};

struct CflReport {
    double ratio = 0.0;          // at the simulation time step Δt
    int substeps = 1;            // backward sub-steps per Δt
    double substep_ratio = 0.0;  // ratio / substeps
    bool warn = false;           // substep_ratio > 0.5
    bool unstable = false;       // substep_ratio > 1.0
};

struct SolverOptions {
    /// 0 selects the smallest count that brings the per-sub-step ratio to
    /// cfl_target; any positive value is used as given.
    int substeps = 0;
    double cfl_target = 0.5;
    bool cfl_override = false;
    /// Use the approximating PDE and the linear ẑ instead of the
    /// exact Hamiltonian (cross-validation only).
    bool approx_hamiltonian = false;
    int workers = 1;
};

/// Stability ratio Δt·max over nodes of the diffusion and drift terms, with
/// the capacity drift bounded by the largest admissible effort.
inline double cfl_ratio(const ModelParams &p, const GridSpec &g, double dt) {
    const double amax = std::max(std::abs(p.alpha_min), std::abs(p.alpha_max));
    const double dxc = g.dx_c(), dxd = g.dx_d();
    double worst = 0.0;
    for (int i = 0; i <= g.n_c; ++i) {
        for (int j = 0; j <= g.n_d; ++j) {
            const State x = g.node(i, j);
            const DiagVol s = vol_sigma(p, x);
            const double mu_d = drift_mu_tilde(p, x).d;
            const double r = s.c * s.c / (dxc * dxc) + s.d * s.d / (dxd * dxd) +
                             amax * x.c / dxc + std::abs(mu_d) / dxd;
            worst = std::max(worst, r);
        }
    }
    return dt * worst;
}

inline CflReport cfl_check(const ModelParams &p, const GridSpec &g,
                           const SolverOptions &opt = {}) {
    CflReport r;
    r.ratio = cfl_ratio(p, g, g.dt());
    if (opt.substeps > 0) {
        r.substeps = opt.substeps;
    } else {
        r.substeps = std::max(1, static_cast<int>(std::ceil(r.ratio / opt.cfl_target)));
    }
    r.substep_ratio = r.ratio / r.substeps;
    r.warn = r.substep_ratio > 0.5;
    r.unstable = r.substep_ratio > 1.0;
    return r;
}

namespace detail {


inline std::vector<NodeCoefficients> grid_coefficients(const ModelParams &p, const GridSpec &g) {
    std::vector<NodeCoefficients> out;
    out.reserve(g.rows() * g.cols());
    for (int i = 0; i <= g.n_c; ++i)
        for (int j = 0; j <= g.n_d; ++j) out.push_back(node_coefficients(p, g.node(i, j)));
    return out;
}

/// One explicit step next = cur + h·rhs(cur), aborting on non-finite output.
template <class Rhs>
void explicit_step(const Matrix &cur, Matrix &next, const GridSpec &g,
                   const std::vector<NodeCoefficients> &coef, double h, const Rhs &rhs, int k,
                   int workers) {
    const std::size_t cols = g.cols();
    parallel_for(g.rows(), workers, [&](std::size_t b, std::size_t e) {
        Vec2 grad;
        Sym2 hess;
        for (std::size_t i = b; i < e; ++i) {
            for (std::size_t j = 0; j < cols; ++j) {
                fd_at(cur, g, i, j, grad, hess);
                const double v = cur(i, j) + h * rhs(coef[i * cols + j], grad, hess);
                if (!std::isfinite(v))
                    throw NumericError("non-finite value at (k=" + std::to_string(k) +
                                       ", i=" + std::to_string(i) + ", j=" + std::to_string(j) +
                                       ")");
                next(i, j) = v;
            }
        }
    });
}

template <class Rhs, class Store>
SolveResult backward_induction(const ModelParams &p, const GridSpec &g, const SolverOptions &opt,
                               const Rhs &rhs, const Store &store_fields) {
    p.validate();
    g.validate();
    const CflReport cfl = cfl_check(p, g, opt);
    if (cfl.unstable && !opt.cfl_override)
        throw NumericError("CFL ratio " + std::to_string(cfl.substep_ratio) +
                           " per sub-step exceeds 1; refine the time step or override");
    const auto coef = grid_coefficients(p, g);
    SolveResult res;
    res.substeps = cfl.substeps;
    res.surface.values.assign(g.n_T + 1, Matrix(g));
    const double h = g.dt() / cfl.substeps;
    store_fields(res, coef, g.n_T);
    Matrix cur(g), next(g);
    for (int k = g.n_T; k >= 1; --k) {
        cur = res.surface.values[k];
        for (int s = 0; s < cfl.substeps; ++s) {
            explicit_step(cur, next, g, coef, h, rhs, k, opt.workers);
            std::swap(cur, next);
        }
        res.surface.values[k - 1] = cur;
        store_fields(res, coef, k - 1);
    }
    return res;
}

}  // namespace detail

/// Consumer feedback fields at one time slice, recomputed from the surface.
inline void consumer_fields_at(const ModelParams &p, const GridSpec &g,
                               const std::vector<NodeCoefficients> &coef, const Matrix &u,
                               Matrix &z_c, Matrix &z_d, Matrix &alpha, bool approx = false) {
    z_c = Matrix(g);
    z_d = Matrix(g);
    alpha = Matrix(g);
    Vec2 grad;
    Sym2 hess;
    for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < g.cols(); ++j) {
            fd_at(u, g, i, j, grad, hess);
            const NodeCoefficients &n = coef[i * g.cols() + j];
            const Vec2 z = approx ? optimal_z_approx(p, n, grad) : optimal_z(p, n, grad);
            z_c(i, j) = z.c;
            z_d(i, j) = z.d;
            alpha(i, j) = recommended_effort(p, n.x_c, z.c);
        }
    }
}

inline void consumer_fields_at(const ModelParams &p, const GridSpec &g, const Matrix &u,
                               Matrix &z_c, Matrix &z_d, Matrix &alpha, bool approx = false) {
    consumer_fields_at(p, g, detail::grid_coefficients(p, g), u, z_c, z_d, alpha, approx);
}

inline Matrix agent_solo_field_at(const ModelParams &p, const GridSpec &g, const Matrix &u) {
    Matrix a(g);
    Vec2 grad;
    Sym2 hess;
    for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < g.cols(); ++j) {
            fd_at(u, g, i, j, grad, hess);
            a(i, j) = agent_solo_effort(p, g.xc(static_cast<int>(i)), grad.c);
        }
    }
    return a;
}

/// Consumer certainty-equivalent surface u and the contract fields.
inline SolveResult solve_consumer_pde(const ModelParams &p, const GridSpec &g,
                                      const SolverOptions &opt = {}) {
    const bool approx = opt.approx_hamiltonian;
    auto rhs = [&p, approx](const NodeCoefficients &n, Vec2 grad, Sym2 hess) {
        return approx ? approx_hamiltonian(p, n, grad, hess)
                      : consumer_hamiltonian_G(p, n, grad, hess);
    };
    auto store = [&](SolveResult &res, const std::vector<NodeCoefficients> &coef, int k) {
        auto &f = res.fields;
        if (f.z_c.empty()) {
            f.z_c.resize(g.n_T + 1);
            f.z_d.resize(g.n_T + 1);
            f.alpha_hat.resize(g.n_T + 1);
        }
        consumer_fields_at(p, g, coef, res.surface.values[k], f.z_c[k], f.z_d[k],
                           f.alpha_hat[k], approx);
    };
    return detail::backward_induction(p, g, opt, rhs, store);
}

/// Producer-alone certainty-equivalent surface û^A and its effort field.
inline SolveResult solve_agent_solo_pde(const ModelParams &p, const GridSpec &g,
                                        const SolverOptions &opt = {}) {
    auto rhs = [&p](const NodeCoefficients &n, Vec2 grad, Sym2 hess) {
        return agent_solo_hamiltonian(p, n, grad, hess);
    };
    auto store = [&](SolveResult &res, const std::vector<NodeCoefficients> &, int k) {
        auto &f = res.fields;
        if (f.alpha_pc.empty()) f.alpha_pc.resize(g.n_T + 1);
        f.alpha_pc[k] = agent_solo_field_at(p, g, res.surface.values[k]);
    };
    return detail::backward_induction(p, g, opt, rhs, store);
}

/// Cash participation constraint R = max(û^A(0, x₀), 0), read at the
/// nearest-lower node of x₀.
inline double reservation_value(const Surface &solo, const GridSpec &g, State x0) {
    if (!g.contains(x0)) throw DomainError("initial state lies outside the grid");
    if (solo.values.empty()) throw DomainError("empty surface");
    const auto [i, j] = g.lower_index(x0);
    return std::max(solo.values.front()(i, j), 0.0);
}

/// Value of a surface at time index k for an arbitrary state, using the same
/// clamp-and-floor lookup as the simulator.
inline double surface_at(const Surface &s, const GridSpec &g, int k, State x) {
    const auto [i, j] = g.lower_index(x);
    return s.values.at(k)(i, j);
}

}  // namespace capremu
