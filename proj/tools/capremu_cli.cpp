// capremu: solve, simulate and report the capacity-remuneration contract model.
//
//   capremu solve       --config FILE [--out DIR]
//   capremu simulate    --config FILE [--out DIR] [--policies LIST] [--n N] [--seed S]
//   capremu report      [--out DIR]
//   capremu sensitivity --config FILE --case sigma_c|sigma_d|eta_a|eta_p
//   capremu calibrate   --input CSV [--sigma-c X]
//
// Each stage reads only the files the previous stage wrote under DIR, so any
// stage can be rerun on its own. Exit codes: 0 success, 2 configuration
// error, 3 numerical failure, 4 missing inputs.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "capremu/calibrate.hpp"
#include "capremu/config.hpp"
#include "capremu/csv.hpp"
#include "capremu/manifest.hpp"
#include "capremu/pipeline.hpp"
#include "capremu/surface_io.hpp"

namespace fs = std::filesystem;
using namespace capremu;

namespace {

constexpr int exit_config = 2;
constexpr int exit_numeric = 3;
constexpr int exit_missing = 4;

constexpr const char *output_root_env = "CAPREMU_OUTPUT_ROOT";

/// Missing or unreadable stage inputs.
class MissingInput : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CommonOptions {
    std::string config_path;
    std::string manifest_path;
    std::string out = "capremu-run";
    int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::vector<std::string> policies;
    long long n_scenarios = -1;
    long long seed = -1;
    int substeps = -1;
    bool cfl_override = false;
    bool approx = false;
    bool bilinear = false;
    bool store_paths = false;
    bool auto_solve = false;
};

fs::path output_dir(const std::string &out) {
    fs::path p(out);
    if (p.is_relative()) {
        if (const char *root = std::getenv(output_root_env); root && *root) p = fs::path(root) / p;
    }
    return p;
}

std::string read_text(const fs::path &p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw MissingInput(p.string() + ": cannot open");
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text(const fs::path &p, const std::string &text) {
    if (!p.parent_path().empty()) fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error(p.string() + ": cannot open for writing");
    f << text;
}

template <class Fn>
void write_with(const fs::path &p, Fn fn) {
    std::ostringstream ss;
    fn(ss);
    write_text(p, ss.str());
}

std::vector<Policy> parse_policies(const std::vector<std::string> &names) {
    std::vector<Policy> out;
    for (const auto &n : names) {
        try {
            out.push_back(parse_policy(n));
        } catch (const std::invalid_argument &e) {
            throw ConfigError({e.what()});
        }
    }
    return out;
}

std::vector<Policy> all_policies() {
    return {Policy::WithCRM, Policy::WithoutCRM, Policy::NoAdjustment};
}

/// Configuration text with command-line overrides folded in, so that the
/// manifest alone reproduces the run.
std::string effective_config_text(const CommonOptions &o) {
    std::string text;
    if (!o.manifest_path.empty()) {
        text = manifest_config_text(o.manifest_path);
    } else if (!o.config_path.empty()) {
        try {
            text = read_text(o.config_path);
        } catch (const MissingInput &) {
            throw ConfigError({o.config_path + ": cannot open configuration file"});
        }
    }
    std::vector<std::pair<std::string, std::string>> ov;
    if (o.n_scenarios >= 0) ov.emplace_back("run.n_scenarios", std::to_string(o.n_scenarios));
    if (o.seed >= 0) ov.emplace_back("run.seed", std::to_string(o.seed));
    if (o.substeps >= 0) ov.emplace_back("run.substeps", std::to_string(o.substeps));
    if (o.cfl_override) ov.emplace_back("run.cfl_override", "1");
    if (o.approx) ov.emplace_back("run.approx_hamiltonian", "1");
    if (o.bilinear) ov.emplace_back("run.bilinear", "1");
    return ov.empty() ? text : override_config_text(text, ov);
}

std::string origin_of(const CommonOptions &o) {
    if (!o.manifest_path.empty()) return o.manifest_path;
    return o.config_path.empty() ? "defaults" : o.config_path;
}

/// Reference delivered energy min(x₀)·T in TWh, used to print R per MWh at
/// solve time. The reports normalise R per path instead.
double reference_energy(const Config &cfg) {
    return std::min(cfg.params.x0_c, cfg.params.x0_d) * cfg.params.horizon_T * units::gw_year_to_twh;
}

/// Key of the solver artifacts: the configuration minus the settings that
/// only affect simulation, so changing N or the seed reuses the solve.
std::string solve_key(const Config &cfg) {
    Config c = cfg;
    c.run.n_scenarios = RunSettings{}.n_scenarios;
    c.run.seed = RunSettings{}.seed;
    c.run.bilinear = RunSettings{}.bilinear;
    return hex64(fnv1a64(render_config(c)));
}

// ---------------------------------------------------------------------------
// solve

nlohmann::json do_solve(const CommonOptions &o, const std::string &text, const Config &cfg,
                        const fs::path &dir) {
    const std::vector<Policy> policies = all_policies();
    const SolvedModel m = solve_model(cfg, policies, o.workers);
    const fs::path sd = dir / "solve";
    fs::create_directories(sd);
    const nlohmann::json meta = {{"solve_key", solve_key(cfg)}};
    write_surfaces_file((sd / "consumer_surfaces.bin").string(), cfg.grid,
                        {{"u", &m.consumer->surface.values},
                         {"z_c", &m.consumer->fields.z_c},
                         {"z_d", &m.consumer->fields.z_d},
                         {"alpha_hat", &m.consumer->fields.alpha_hat}},
                        meta);
    std::vector<NamedStack> solo_fields;
    if (m.solo) {
        solo_fields = {{"u_a", &m.solo->surface.values}, {"alpha_pc", &m.solo->fields.alpha_pc}};
        write_surfaces_file((sd / "producer_alone_surfaces.bin").string(), cfg.grid, solo_fields,
                            meta);
    }
    const State x0{cfg.params.x0_c, cfg.params.x0_d};
    const auto [i0, j0] = cfg.grid.lower_index(x0);
    nlohmann::json res = {
        {"solve_key", solve_key(cfg)},
        {"reservation_meur", m.reservation},
        {"reservation_eur_per_mwh_at_reference_energy", per_mwh(m.reservation, reference_energy(cfg))},
        {"reservation_from_config", cfg.reservation_given},
        {"consumer_value_at_x0_meur", m.consumer->surface.values.front()(i0, j0)},
        {"cfl_ratio", m.cfl.ratio},
        {"substeps", m.cfl.substeps},
        {"substep_cfl_ratio", m.cfl.substep_ratio},
    };
    write_text(sd / "solve.json", res.dump(2) + "\n");
    Manifest man;
    man.command = "solve";
    man.config_text = text;
    man.config = cfg;
    for (const char *f : {"consumer_surfaces.bin", "producer_alone_surfaces.bin", "solve.json"})
        if (fs::exists(sd / f)) man.outputs.emplace_back(f, file_digest((sd / f).string()));
    man.extra = res;
    write_manifest((sd / "manifest.json").string(), man);
    return res;
}

int cmd_solve(const CommonOptions &o) {
    const std::string text = effective_config_text(o);
    const Config cfg = parse_config(text, origin_of(o));
    const fs::path dir = output_dir(o.out);
    const nlohmann::json res = do_solve(o, text, cfg, dir);
    std::cout << "R = " << res["reservation_meur"].get<double>() << " MEUR ("
              << res["reservation_eur_per_mwh_at_reference_energy"].get<double>()
              << " EUR/MWh at the initial-state energy)\n"
              << "CFL ratio = " << res["cfl_ratio"].get<double>() << " at dt, "
              << res["substeps"].get<int>() << " sub-steps (ratio "
              << res["substep_cfl_ratio"].get<double>() << " per sub-step)\n"
              << "wrote " << (dir / "solve").string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct LoadedSolve {
    ControlFields contract, solo;
    double reservation = 0.0;
    bool has_contract = false, has_solo = false;
};

LoadedSolve load_solve(const fs::path &sd, const Config &cfg) {
    const fs::path man = sd / "manifest.json";
    if (!fs::exists(man))
        throw MissingInput(sd.string() + ": no solver artifacts (run `solve` first or pass --auto-solve)");
    const auto j = nlohmann::json::parse(read_text(man));
    if (j.at("results").at("solve_key") != solve_key(cfg))
        throw MissingInput(sd.string() +
                           ": solver artifacts were produced from a different configuration");
    LoadedSolve out;
    out.reservation = j.at("results").at("reservation_meur").get<double>();
    auto check_grid = [&](const LoadedSurfaces &s, const fs::path &p) {
        const GridSpec &a = s.grid, &b = cfg.grid;
        if (a.n_c != b.n_c || a.n_d != b.n_d || a.n_T != b.n_T || a.xc_min != b.xc_min ||
            a.xc_max != b.xc_max || a.xd_min != b.xd_min || a.xd_max != b.xd_max ||
            a.horizon_T != b.horizon_T)
            throw MissingInput(p.string() + ": grid does not match the configuration");
    };
    const fs::path cp = sd / "consumer_surfaces.bin";
    if (fs::exists(cp)) {
        auto s = read_surfaces_file(cp.string());
        check_grid(s, cp);
        out.contract.z_c = s.field("z_c");
        out.contract.z_d = s.field("z_d");
        out.contract.alpha_hat = s.field("alpha_hat");
        out.has_contract = true;
    }
    const fs::path pp = sd / "producer_alone_surfaces.bin";
    if (fs::exists(pp)) {
        auto s = read_surfaces_file(pp.string());
        check_grid(s, pp);
        out.solo.alpha_pc = s.field("alpha_pc");
        out.has_solo = true;
    }
    return out;
}

std::string ledger_name(Policy p) { return std::string("ledger_") + policy_name(p) + ".csv"; }

int cmd_simulate(const CommonOptions &o) {
    CommonOptions opts = o;
    std::vector<std::string> policy_names = o.policies;
    if (!o.manifest_path.empty() && policy_names.empty()) {
        const auto j = nlohmann::json::parse(read_text(o.manifest_path));
        policy_names = j.at("policies").get<std::vector<std::string>>();
    }
    const std::vector<Policy> policies =
        policy_names.empty() ? all_policies() : parse_policies(policy_names);
    const std::string text = effective_config_text(opts);
    const Config cfg = parse_config(text, origin_of(opts));
    const fs::path dir = output_dir(o.out);

    const bool needs_solve = std::any_of(policies.begin(), policies.end(),
                                         [](Policy p) { return p != Policy::NoAdjustment; });
    SimulationSetup setup;
    setup.params = cfg.params;
    setup.grid = cfg.grid;
    LoadedSolve loaded;
    if (needs_solve) {
        if (o.auto_solve && !fs::exists(dir / "solve" / "manifest.json")) do_solve(o, text, cfg, dir);
        loaded = load_solve(dir / "solve", cfg);
        setup.contract = loaded.has_contract ? &loaded.contract : nullptr;
        setup.solo = loaded.has_solo ? &loaded.solo : nullptr;
        setup.reservation = loaded.reservation;
    } else {
        setup.reservation = cfg.reservation_given ? cfg.params.reservation : 0.0;
    }

    SimulationOptions so;
    so.workers = o.workers;
    so.bilinear = cfg.run.bilinear;
    so.store_paths = o.store_paths;
    const fs::path sim = dir / "simulate";
    fs::create_directories(sim);
    for (const auto &e : fs::directory_iterator(sim))
        if (e.path().extension() == ".csv") fs::remove(e.path());

    Manifest man;
    man.command = "simulate";
    man.config_text = text;
    man.config = cfg;
    for (Policy p : policies) {
        const auto ens = simulate_ensemble(setup, p, cfg.run.n_scenarios, cfg.run.seed, so);
        write_with(sim / ledger_name(p), [&](std::ostream &s) { write_ledgers(s, ens); });
        man.outputs.emplace_back(ledger_name(p), file_digest((sim / ledger_name(p)).string()));
        if (o.store_paths) {
            const std::string pn = std::string("paths_") + policy_name(p) + ".csv";
            write_with(sim / pn, [&](std::ostream &s) { write_paths(s, ens, cfg.grid.dt()); });
            man.outputs.emplace_back(pn, file_digest((sim / pn).string()));
        }
        man.policies.emplace_back(policy_name(p));
        std::cout << policy_name(p) << ": " << ens.size() << " scenarios -> "
                  << (sim / ledger_name(p)).string() << "\n";
    }
    man.extra = {{"reservation_meur", setup.reservation}};
    write_manifest((sim / "manifest.json").string(), man);
    return 0;
}

// ---------------------------------------------------------------------------
// report

void write_reports(const fs::path &rd, const std::vector<std::vector<ScenarioLedger>> &ensembles,
                   const std::vector<EnsembleStats> &stats, Manifest &man) {
    fs::create_directories(rd);
    write_with(rd / "summary.csv", [&](std::ostream &s) { write_summary(s, stats); });
    write_with(rd / "classification.csv", [&](std::ostream &s) { write_classification(s, stats); });
    man.outputs.emplace_back("summary.csv", file_digest((rd / "summary.csv").string()));
    man.outputs.emplace_back("classification.csv", file_digest((rd / "classification.csv").string()));
    for (const auto &ens : ensembles) {
        if (ens.front().policy != Policy::WithCRM) continue;
        write_with(rd / "decomposition.csv", [&](std::ostream &s) { write_decomposition(s, ens); });
        man.outputs.emplace_back("decomposition.csv", file_digest((rd / "decomposition.csv").string()));
    }
}

int cmd_report(const CommonOptions &o) {
    const fs::path dir = output_dir(o.out);
    const fs::path sim = dir / "simulate";
    std::vector<std::vector<ScenarioLedger>> ensembles;
    std::vector<EnsembleStats> stats;
    Manifest man;
    man.command = "report";
    for (Policy p : all_policies()) {
        const fs::path f = sim / ledger_name(p);
        if (!fs::exists(f)) continue;
        auto ens = read_ledgers_file(f.string());
        if (ens.empty()) throw MissingInput(f.string() + ": ledger has no scenarios");
        stats.push_back(summarize(ens));
        ensembles.push_back(std::move(ens));
        man.policies.emplace_back(policy_name(p));
    }
    if (ensembles.empty()) throw MissingInput(sim.string() + ": no ledgers found (run `simulate` first)");
    const fs::path sm = sim / "manifest.json";
    if (fs::exists(sm)) {
        man.config_text = manifest_config_text(sm.string());
        man.config = parse_config(man.config_text, sm.string());
    }
    write_reports(dir / "report", ensembles, stats, man);
    write_manifest((dir / "report" / "manifest.json").string(), man);
    for (const auto &s : stats) {
        std::cout << policy_name(s.policy) << ": shortage " << s.mean("shortage_hours")
                  << " h/yr, spot " << s.mean("average_spot") << " EUR/MWh, margin "
                  << s.mean("average_margin") << " GW";
        if (s.classes.pct_negative_capacity_payment)
            std::cout << ", capacity payment " << s.mean("capacity_payment") << " EUR/MWh, NCR "
                      << *s.classes.pct_negative_capacity_payment << "%";
        std::cout << ", missing money " << s.classes.pct_missing_money << "%\n";
    }
    std::cout << "wrote " << (dir / "report").string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// sensitivity

int cmd_sensitivity(const CommonOptions &o, const std::string &case_name,
                    const std::vector<std::string> &factors) {
    Perturbation pert;
    try {
        if (!case_name.empty()) pert = standard_perturbation(case_name);
        for (const auto &f : factors) {
            const auto eq = f.find('=');
            if (eq == std::string::npos) throw std::invalid_argument("--factor expects key=multiplier");
            pert.factors.emplace_back(f.substr(0, eq), std::stod(f.substr(eq + 1)));
            if (case_name.empty()) pert.name += (pert.name.empty() ? "" : "_") + f;
        }
    } catch (const std::exception &e) {
        throw ConfigError({e.what()});
    }
    if (pert.factors.empty()) throw ConfigError({"sensitivity needs --case or --factor"});

    const std::vector<Policy> policies =
        o.policies.empty() ? std::vector<Policy>{Policy::WithCRM} : parse_policies(o.policies);
    const std::string text = effective_config_text(o);
    const Config cfg = parse_config(text, origin_of(o));
    try {
        apply_perturbation(cfg, pert);
    } catch (const std::invalid_argument &e) {
        throw ConfigError({e.what()});
    }
    const SensitivityResult r = run_sensitivity(cfg, pert, policies, o.workers);

    const fs::path sd = output_dir(o.out) / "sensitivity" / pert.name;
    std::vector<EnsembleStats> stats;
    std::vector<std::string> groups;
    for (const auto &[label, runs] :
         {std::pair{"reference", &r.reference}, std::pair{"perturbed", &r.perturbed}}) {
        for (const auto &run : *runs) {
            stats.push_back(run.stats);
            groups.push_back(std::string(label) + "." + policy_name(run.policy));
        }
    }
    write_with(sd / "summary.csv", [&](std::ostream &s) { write_summary(s, stats, groups); });
    write_with(sd / "classification.csv",
               [&](std::ostream &s) { write_classification(s, stats, groups); });
    Manifest man;
    man.command = "sensitivity " + pert.name;
    man.config_text = text;
    man.config = cfg;
    for (Policy p : policies) man.policies.emplace_back(policy_name(p));
    man.outputs.emplace_back("summary.csv", file_digest((sd / "summary.csv").string()));
    man.outputs.emplace_back("classification.csv", file_digest((sd / "classification.csv").string()));
    nlohmann::json factors_json = nlohmann::json::object();
    for (const auto &[k, v] : pert.factors) factors_json[k] = v;
    man.extra = {{"factors", factors_json},
                 {"reservation_reference_meur", r.reservation_reference},
                 {"reservation_perturbed_meur", r.reservation_perturbed}};
    write_manifest((sd / "manifest.json").string(), man);

    for (std::size_t i = 0; i < stats.size(); ++i) {
        const auto &c = stats[i].classes;
        std::cout << groups[i] << ": missing money " << c.pct_missing_money << "%";
        if (c.pct_negative_capacity_payment)
            std::cout << ", NCR " << *c.pct_negative_capacity_payment << "%, spot share "
                      << *c.spot_share_mean_ratio << "%";
        std::cout << ", negative net " << c.pct_negative_net_revenue << "%\n";
    }
    std::cout << "wrote " << sd.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// calibrate

int cmd_calibrate(const std::string &input, const std::string &output, double step,
                  const std::optional<double> &sigma_c) {
    std::ifstream f(input);
    if (!f) throw MissingInput(input + ": cannot open observations");
    const auto obs = read_observations(f, input);
    const auto res = calibrate(obs, step);
    const std::string text = render_calibration(res, sigma_c ? &*sigma_c : nullptr);
    if (output.empty())
        std::cout << text;
    else
        write_text(output, text);
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Capacity remuneration contract: PDE solver, scenario simulator and reports"};
    app.require_subcommand(1);
    CommonOptions o;
    std::string case_name, input, output;
    std::vector<std::string> factors;
    double step = 1.0 / 365.0;
    std::optional<double> sigma_c;

    auto add_common = [&](CLI::App *c, bool config) {
        if (config) {
            c->add_option("-c,--config", o.config_path, "Configuration file (key = value)");
            c->add_option("--from-manifest", o.manifest_path,
                          "Rerun with the configuration stored in a manifest");
            c->add_option("--substeps", o.substeps, "Backward sub-steps per time step (0 = auto)");
            c->add_flag("--cfl-override", o.cfl_override, "Run even when the scheme is unstable");
            c->add_flag("--approx-hamiltonian", o.approx,
                        "Solve the approximating PDE (cross-validation)");
        }
        c->add_option("-o,--out", o.out,
                      std::string("Output directory (relative paths resolve under $") +
                          output_root_env + ")");
        c->add_option("-w,--workers", o.workers, "Worker threads (results do not depend on it)")
            ->check(CLI::PositiveNumber);
    };
    auto add_sim = [&](CLI::App *c) {
        c->add_option("-p,--policies", o.policies, "with_crm, without_crm, no_adjustment")
            ->delimiter(',');
        c->add_option("-n,--n-scenarios", o.n_scenarios, "Number of scenarios")
            ->check(CLI::PositiveNumber);
        c->add_option("-s,--seed", o.seed, "Master seed")->check(CLI::NonNegativeNumber);
        c->add_flag("--bilinear", o.bilinear, "Bilinear interpolation of the control fields");
    };

    auto *solve = app.add_subcommand("solve", "Solve the consumer and producer-alone PDEs");
    add_common(solve, true);
    auto *sim = app.add_subcommand("simulate", "Simulate scenario ledgers");
    add_common(sim, true);
    add_sim(sim);
    sim->add_flag("--paths", o.store_paths, "Also export full trajectories");
    sim->add_flag("--auto-solve", o.auto_solve, "Solve first when no solver artifacts exist");
    auto *rep = app.add_subcommand("report", "Summarise ledgers into report tables");
    add_common(rep, false);
    auto *sens = app.add_subcommand("sensitivity", "Paired reference/perturbed runs");
    add_common(sens, true);
    add_sim(sens);
    sens->add_option("--case", case_name, "sigma_c (x1.5), sigma_d (x0.5), eta_a (x10), eta_p (x10)");
    sens->add_option("--factor", factors, "Custom multiplier key=factor (repeatable)");
    auto *cal = app.add_subcommand("calibrate", "Fit demand and price parameters from daily data");
    cal->add_option("-i,--input", input, "CSV: date,capacity[GW],demand[GW],price[EUR/MWh]")
        ->required();
    cal->add_option("-o,--output", output, "Write the fragment here instead of stdout");
    cal->add_option("--step", step, "Sampling step in years")->check(CLI::PositiveNumber);
    cal->add_option("--sigma-c", sigma_c, "Capacity volatility to pass through");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return exit_config;
    }

    try {
        if (*solve) return cmd_solve(o);
        if (*sim) return cmd_simulate(o);
        if (*rep) return cmd_report(o);
        if (*sens) return cmd_sensitivity(o, case_name, factors);
        if (*cal) return cmd_calibrate(input, output, step, sigma_c);
    } catch (const ConfigError &e) {
        std::cerr << "configuration error:\n" << e.what() << "\n";
        return exit_config;
    } catch (const ParameterError &e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return exit_config;
    } catch (const CalibrationError &e) {
        std::cerr << "calibration error: " << e.what() << "\n";
        return exit_numeric;
    } catch (const NumericError &e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return exit_numeric;
    } catch (const DomainError &e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return exit_numeric;
    } catch (const SimulationError &e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return exit_numeric;
    } catch (const MissingInput &e) {
        std::cerr << "missing input: " << e.what() << "\n";
        return exit_missing;
    } catch (const CsvError &e) {
        std::cerr << "missing input: " << e.what() << "\n";
        return exit_missing;
    } catch (const SurfaceIoError &e) {
        std::cerr << "missing input: " << e.what() << "\n";
        return exit_missing;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
