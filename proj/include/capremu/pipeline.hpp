#pragma once

// End-to-end runs: solve both PDEs, derive R, simulate the requested
// policies and summarise them. Used by the command-line tool and by the
// sensitivity batch.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "capremu/config.hpp"
#include "capremu/pde.hpp"
#include "capremu/reporting.hpp"
#include "capremu/scenario.hpp"

namespace capremu {

inline SolverOptions solver_options(const RunSettings &run, int workers) {
    SolverOptions o;
    o.substeps = run.substeps;
    o.cfl_override = run.cfl_override;
    o.approx_hamiltonian = run.approx_hamiltonian;
    o.workers = workers;
    return o;
}

struct SolvedModel {
    std::optional<SolveResult> consumer;
    std::optional<SolveResult> solo;
    double reservation = 0.0;  // M€
    CflReport cfl;
};

/// Solve what the listed policies need. The producer-alone problem is always
/// solved unless the configuration fixes R and no policy needs α_pc.
inline SolvedModel solve_model(const Config &cfg, const std::vector<Policy> &policies,
                               int workers = 1) {
    const SolverOptions opt = solver_options(cfg.run, workers);
    SolvedModel m;
    m.cfl = cfl_check(cfg.params, cfg.grid, opt);
    bool need_consumer = false, need_solo = !cfg.reservation_given;
    for (Policy p : policies) {
        need_consumer |= p == Policy::WithCRM;
        need_solo |= p == Policy::WithoutCRM;
    }
    if (need_solo) m.solo = solve_agent_solo_pde(cfg.params, cfg.grid, opt);
    m.reservation = cfg.reservation_given
                        ? cfg.params.reservation
                        : reservation_value(m.solo->surface, cfg.grid,
                                            {cfg.params.x0_c, cfg.params.x0_d});
    if (need_consumer) m.consumer = solve_consumer_pde(cfg.params, cfg.grid, opt);
    return m;
}

inline SimulationSetup simulation_setup(const Config &cfg, const SolvedModel &m) {
    SimulationSetup s;
    s.params = cfg.params;
    s.grid = cfg.grid;
    s.contract = m.consumer ? &m.consumer->fields : nullptr;
    s.solo = m.solo ? &m.solo->fields : nullptr;
    s.reservation = m.reservation;
    return s;
}

struct PolicyRun {
    Policy policy;
    std::vector<ScenarioLedger> ledgers;
    EnsembleStats stats;
};

inline std::vector<PolicyRun> simulate_policies(const Config &cfg, const SolvedModel &m,
                                                const std::vector<Policy> &policies,
                                                int workers = 1, bool store_paths = false) {
    const SimulationSetup setup = simulation_setup(cfg, m);
    SimulationOptions opt;
    opt.workers = workers;
    opt.bilinear = cfg.run.bilinear;
    opt.store_paths = store_paths;
    std::vector<PolicyRun> out;
    for (Policy p : policies) {
        PolicyRun r{p, simulate_ensemble(setup, p, cfg.run.n_scenarios, cfg.run.seed, opt), {}};
        r.stats = summarize(r.ledgers);
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sensitivity

/// Multiplicative changes to named parameters.
struct Perturbation {
    std::string name;
    std::vector<std::pair<std::string, double>> factors;
};

inline const std::map<std::string, double ModelParams::*> &perturbable_parameters() {
    static const std::map<std::string, double ModelParams::*> m = {
        {"sigma_c", &ModelParams::sigma_c}, {"sigma_d", &ModelParams::sigma_d},
        {"mu_d", &ModelParams::mu_d},       {"beta0", &ModelParams::beta0},
        {"beta1", &ModelParams::beta1},     {"kappa1", &ModelParams::kappa1},
        {"kappa2", &ModelParams::kappa2},   {"a", &ModelParams::a},
        {"b", &ModelParams::b},             {"theta", &ModelParams::theta},
        {"k", &ModelParams::k},             {"eta_a", &ModelParams::eta_a},
        {"eta_p", &ModelParams::eta_p},
    };
    return m;
}

/// The four standard cases: sigma_c (×1.5), sigma_d (×0.5), eta_a (×10),
/// eta_p (×10).
inline Perturbation standard_perturbation(const std::string &name) {
    if (name == "sigma_c") return {"sigma_c_x1.5", {{"sigma_c", 1.5}}};
    if (name == "sigma_d") return {"sigma_d_x0.5", {{"sigma_d", 0.5}}};
    if (name == "eta_a") return {"eta_a_x10", {{"eta_a", 10.0}}};
    if (name == "eta_p") return {"eta_p_x10", {{"eta_p", 10.0}}};
    throw std::invalid_argument("unknown sensitivity case '" + name +
                                "' (expected sigma_c, sigma_d, eta_a or eta_p)");
}

inline Config apply_perturbation(Config cfg, const Perturbation &pert) {
    const auto &table = perturbable_parameters();
    for (const auto &[key, factor] : pert.factors) {
        const auto it = table.find(key);
        if (it == table.end()) throw std::invalid_argument("parameter '" + key + "' cannot be perturbed");
        cfg.params.*(it->second) *= factor;
    }
    cfg.params.validate();
    return cfg;
}

struct SensitivityResult {
    std::vector<PolicyRun> reference, perturbed;
    double reservation_reference = 0.0, reservation_perturbed = 0.0;  // M€
};

/// Re-solve and re-simulate under the reference and perturbed parameters
/// with the same seed. R is re-derived for the perturbed model unless the
/// configuration fixes it.
inline SensitivityResult run_sensitivity(const Config &base, const Perturbation &pert,
                                         const std::vector<Policy> &policies, int workers = 1) {
    SensitivityResult out;
    {
        const SolvedModel m = solve_model(base, policies, workers);
        out.reservation_reference = m.reservation;
        out.reference = simulate_policies(base, m, policies, workers);
    }
    const Config cfg = apply_perturbation(base, pert);
    const SolvedModel m = solve_model(cfg, policies, workers);
    out.reservation_perturbed = m.reservation;
    out.perturbed = simulate_policies(cfg, m, policies, workers);
    return out;
}

}  // namespace capremu
