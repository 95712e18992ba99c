#pragma once

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cityq/csv.hpp"
#include "cityq/cityq_core.hpp"
#include "cityq/presets.hpp"

namespace cityq {

namespace clidetail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot read \"" + path + "\"");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct ScenarioSource {
  std::string config_path;
  std::string preset_name;

  ScenarioConfig load() const {
    if (!preset_name.empty()) return load_preset(preset_name).config;
    if (!config_path.empty()) return parse_config(read_file(config_path));
    throw ConfigError("config: pass --config FILE or --preset NAME");
  }
};

inline void add_source(CLI::App* cmd, ScenarioSource& src) {
  cmd->add_option("--config", src.config_path, "JSON scenario file");
  cmd->add_option("--preset", src.preset_name, "named preset (see preset-list)");
}

inline std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

inline std::string verdict_line(const Trajectory& traj) {
  switch (traj.verdict.kind) {
    case Verdict::Kind::Converged: {
      std::string s = "converged t=" + format_full(traj.verdict.t_limit);
      s += " after " + std::to_string(traj.days.size() - 1) + " days";
      return s;
    }
    case Verdict::Kind::CycleDetected: {
      std::string s = "cycle period=" + std::to_string(traj.verdict.period) + " values=";
      for (std::size_t i = 0; i < traj.verdict.values.size(); ++i) {
        if (i) s += ",";
        s += format_full(traj.verdict.values[i]);
      }
      return s;
    }
    case Verdict::Kind::MaxDaysReached: return "max days reached (no convergence)";
  }
  return "";
}

}  // namespace clidetail

// Subcommands: validate, solve-optimum, solve-equilibrium, simulate, oracle,
// preset-list. Exit codes: 0 success, 1 solver non-convergence, 2 config error.
inline int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"service-choice solver and day-by-day dynamics simulator"};
  app.require_subcommand(1);

  clidetail::ScenarioSource val_src, opt_src, eq_src, sim_src, ora_src;
  std::string opt_out = "partition.csv", eq_out = "partition.csv", sim_out = "trajectory.csv";
  bool opt_plot = false, eq_plot = false, sim_plot = false;
  double opt_tol = -1.0, eq_tol = -1.0;
  int pareto_trials = 0;
  unsigned rng_seed = 12345;
  std::string target_text;
  std::string sim_dynamics, sim_scheme, sim_psi0, sim_seeds_text, sim_rho_schedule;
  double sim_rho = -1.0, sim_t0 = std::numeric_limits<double>::quiet_NaN();
  double sim_conv_tol = -1.0;
  int sim_days = -1, sim_kappa = -1;
  double sim_beta = -1.0;

  CLI::App* validate = app.add_subcommand("validate", "parse and validate a config");
  clidetail::add_source(validate, val_src);

  CLI::App* solve_opt = app.add_subcommand("solve-optimum", "compute the global optimum");
  clidetail::add_source(solve_opt, opt_src);
  solve_opt->add_option("--out", opt_out, "partition CSV path");
  solve_opt->add_option("--tol", opt_tol, "objective tolerance");
  solve_opt->add_flag("--plot-data", opt_plot, "also emit long-format CSV");

  CLI::App* solve_eq = app.add_subcommand("solve-equilibrium", "compute the Nash equilibrium");
  clidetail::add_source(solve_eq, eq_src);
  solve_eq->add_option("--out", eq_out, "partition CSV path");
  solve_eq->add_option("--tol", eq_tol, "root tolerance");
  solve_eq->add_flag("--plot-data", eq_plot, "also emit long-format CSV");
  solve_eq->add_option("--pareto-trials", pareto_trials,
                       "run a randomized Pareto spot check with this many trials");
  solve_eq->add_option("--seed", rng_seed, "seed for randomized diagnostics");

  CLI::App* simulate = app.add_subcommand("simulate", "run day-by-day dynamics");
  clidetail::add_source(simulate, sim_src);
  simulate->add_option("--out", sim_out, "trajectory CSV path");
  simulate->add_option("--dynamics", sim_dynamics, "standard | prudence | memory");
  simulate->add_option("--days", sim_days, "maximum number of days");
  simulate->add_option("--conv-tol", sim_conv_tol, "convergence tolerance");
  simulate->add_option("--t0", sim_t0, "initial threshold (standard dynamics)");
  simulate->add_option("--psi0", sim_psi0, "initial field: \"nearest\" or a value in [0,1]");
  simulate->add_option("--rho", sim_rho, "fixed prudence parameter");
  simulate->add_option("--rho-schedule", sim_rho_schedule, "fixed | increasing");
  simulate->add_option("--kappa", sim_kappa, "memory window length");
  simulate->add_option("--scheme", sim_scheme, "memory scheme: window | global | weighted");
  simulate->add_option("--beta", sim_beta, "geometric decay of the weighted scheme");
  simulate->add_option("--seeds", sim_seeds_text, "comma-separated memory seed thresholds");
  simulate->add_flag("--plot-data", sim_plot, "also emit long-format CSV");

  CLI::App* oracle = app.add_subcommand("oracle", "exact transportation LP cross-check");
  clidetail::add_source(oracle, ora_src);
  oracle->add_option("--target", target_text, "comma-separated site loads")->required();

  CLI::App* list = app.add_subcommand("preset-list", "list named presets");

  std::vector<char*> argv;
  std::vector<std::string> storage = args;
  storage.insert(storage.begin(), "cityq");
  for (auto& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::cout << app.help() << std::endl;
      return 0;
    }
    std::cerr << e.what() << std::endl;
    return 2;
  }

  try {
    if (list->parsed()) {
      for (const std::string& n : preset_names()) std::cout << n << "\n";
      return 0;
    }
    if (validate->parsed()) {
      ScenarioConfig cfg = val_src.load();
      build_scenario(cfg);
      std::cout << "ok" << std::endl;
      return 0;
    }
    if (solve_opt->parsed()) {
      ScenarioConfig cfg = opt_src.load();
      Scenario s = build_scenario(cfg);
      double tol = opt_tol > 0.0 ? opt_tol : cfg.tol;
      OptimumResult res = solve_optimum(s, tol, cfg.max_iter);
      write_partition_csv(s, res.partition, opt_out);
      if (opt_plot) write_partition_plot_csv(s, res.partition, opt_out + ".plot.csv");
      std::cout << "mode=optimum converged=" << (res.converged ? 1 : 0) << "\n";
      std::cout << "loads=";
      for (std::size_t j = 0; j < res.loads.size(); ++j)
        std::cout << (j ? "," : "") << format_full(res.loads[j]);
      std::cout << "\ntotal_cost=" << format_full(res.total_cost)
                << "\ncns_residual=" << format_full(res.cns_residual) << std::endl;
      return res.converged ? 0 : 1;
    }
    if (solve_eq->parsed()) {
      ScenarioConfig cfg = eq_src.load();
      Scenario s = build_scenario(cfg);
      double tol = eq_tol > 0.0 ? eq_tol : cfg.tol;
      bool monotone = true;
      for (const Service& sv : s.services) monotone = monotone && sv.queue.non_decreasing();
      EquilibriumResult res = (s.k() == 2 && monotone)
                                  ? solve_equilibrium_k2(s, tol)
                                  : solve_equilibrium_general(s, tol, cfg.max_iter);
      write_partition_csv(s, res.partition, eq_out);
      if (eq_plot) write_partition_plot_csv(s, res.partition, eq_out + ".plot.csv");
      std::cout << "mode=equilibrium converged=" << (res.converged ? 1 : 0) << "\n";
      std::cout << "loads=";
      for (std::size_t j = 0; j < res.loads.size(); ++j)
        std::cout << (j ? "," : "") << format_full(res.loads[j]);
      std::cout << "\n";
      if (res.t_bar) std::cout << "t_bar=" << format_full(*res.t_bar) << "\n";
      std::cout << "ce_residual=" << format_full(res.ce_residual)
                << "\ndual_feasible=" << (res.dual_feasible ? 1 : 0) << std::endl;
      if (pareto_trials > 0) {
        ParetoCheck check = pareto_spot_check(s, res.partition, pareto_trials, rng_seed);
        std::cout << "pareto_dominating_found=" << (check.dominating_found ? 1 : 0)
                  << " trials=" << check.trials << std::endl;
      }
      return res.converged ? 0 : 1;
    }
    if (simulate->parsed()) {
      ScenarioConfig cfg = sim_src.load();
      Scenario s = build_scenario(cfg);
      std::string dynamics = sim_dynamics.empty() ? cfg.run.dynamics : sim_dynamics;
      int days = sim_days > 0 ? sim_days : cfg.run.days;
      double conv_tol = sim_conv_tol > 0.0 ? sim_conv_tol : cfg.run.conv_tol;
      std::string psi0 = sim_psi0.empty() ? cfg.run.psi0 : sim_psi0;
      double t0 = std::isnan(sim_t0) ? cfg.run.t0 : sim_t0;

      Trajectory traj;
      if (dynamics == "standard") {
        if (psi0 == "nearest") {
          traj = run_standard(s, t0, days, conv_tol);
        } else {
          ChoiceField f;
          f.psi.assign(s.grid.size(), std::stod(psi0));
          traj = run_standard(s, f, days, conv_tol);
        }
      } else if (dynamics == "prudence") {
        RhoSchedule sched;
        std::string kind = sim_rho_schedule.empty() ? cfg.run.rho_schedule : sim_rho_schedule;
        double rho = sim_rho >= 0.0 ? sim_rho : cfg.run.rho;
        sched = (kind == "increasing") ? RhoSchedule::increasing() : RhoSchedule::fixed(rho);
        ChoiceField f;
        if (psi0 == "nearest") {
          std::vector<double> tau = tau_field(s);
          f.psi.resize(tau.size());
          for (std::size_t i = 0; i < tau.size(); ++i) f.psi[i] = tau[i] < 0.0 ? 0.0 : 1.0;
        } else {
          f.psi.assign(s.grid.size(), std::stod(psi0));
        }
        traj = run_prudence(s, f, sched, days, conv_tol);
      } else if (dynamics == "memory") {
        std::string scheme_name = sim_scheme.empty() ? cfg.run.scheme : sim_scheme;
        int kappa = sim_kappa > 0 ? sim_kappa : cfg.run.kappa;
        double beta = sim_beta > 0.0 ? sim_beta : cfg.run.beta;
        MemoryScheme scheme = scheme_name == "global"
                                  ? MemoryScheme::global()
                                  : scheme_name == "weighted"
                                        ? MemoryScheme::weighted_geometric(beta)
                                        : MemoryScheme::window(kappa);
        std::vector<double> seeds = sim_seeds_text.empty() ? cfg.run.seeds
                                                           : clidetail::parse_list(sim_seeds_text);
        std::size_t need = scheme.kind == MemoryScheme::Kind::Window
                               ? static_cast<std::size_t>(scheme.kappa)
                               : 1;
        if (seeds.size() < need) seeds.assign(need, t0);
        traj = run_memory(s, scheme, seeds, days, conv_tol);
      } else {
        throw ConfigError("run.dynamics: expected standard|prudence|memory");
      }
      write_trajectory_csv(traj, sim_out);
      if (sim_plot) write_trajectory_plot_csv(traj, sim_out + ".plot.csv");
      if (!traj.guarantee_note.empty()) std::cerr << "note: " << traj.guarantee_note << "\n";
      std::cout << clidetail::verdict_line(traj) << std::endl;
      return traj.verdict.kind == Verdict::Kind::MaxDaysReached ? 1 : 0;
    }
    if (oracle->parsed()) {
      ScenarioConfig cfg = ora_src.load();
      Scenario s = build_scenario(cfg);
      std::vector<double> target = clidetail::parse_list(target_text);
      MassVector c = MassVector::simplex(std::move(target));
      double lp = lp_oracle(s, c);
      WassersteinResult w = wasserstein(s, c);
      std::cout << "lp_oracle=" << format_full(lp) << "\nwasserstein=" << format_full(w.value)
                << "\ngap=" << format_full(std::abs(lp - w.value)) << std::endl;
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 2;
}

}  // namespace cityq
