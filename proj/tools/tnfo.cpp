// Command-line front end: validate / simulate / optimize / batch / sweep /
// synth. Exit codes: 0 success, 1 validation or input error, 2 solve failure.
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tnfo/errors.hpp"
#include "tnfo/io.hpp"
#include "tnfo/run.hpp"
#include "tnfo/units.hpp"

namespace fs = std::filesystem;
using namespace tnfo;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitSolveFailure = 2;

struct Common {
  SolverOptions sopts;
  ObjectiveWeights weights;
  std::optional<double> outlet_pmin_psi;
  bool verbose = false;
};

ObjectiveWeights parse_weights(const std::string& s) {
  std::vector<double> vals;
  size_t pos = 0;
  while (pos <= s.size()) {
    const size_t c = s.find(',', pos);
    const std::string tok = s.substr(pos, c == std::string::npos ? std::string::npos : c - pos);
    try {
      size_t used = 0;
      vals.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw CLI::ValidationError("--weights", "'" + tok + "' is not a number");
    }
    if (c == std::string::npos) break;
    pos = c + 1;
  }
  if (vals.size() != 5)
    throw CLI::ValidationError(
        "--weights", "expected 5 comma-separated values: slack,p_out,T_out,f,p_in");
  return ObjectiveWeights{vals[0], vals[1], vals[2], vals[3], vals[4]};
}

Network load_network(const std::string& path, const Common& c) {
  Network net = parse_network(path);
  if (c.outlet_pmin_psi) {
    net.bounds.plant_outlet_p_min = units::psi_to_pascal(*c.outlet_pmin_psi);
    const auto violations = find_violations(net);
    if (!violations.empty()) throw ValidationError(violations);
  }
  return net;
}

void print_summary(const RunSummary& s) {
  std::printf("%s: %s in %d iterations (%.2f s)\n", s.name.c_str(), to_string(s.status),
              s.iterations, s.seconds);
  std::printf("  required %.4f MW  supplied %.4f MW  pipe losses %.4f MW  unmet %.2f %%  excess %.2f %%\n",
              units::watt_to_megawatt(s.required), units::watt_to_megawatt(s.supplied),
              units::watt_to_megawatt(s.pipe_losses), s.unmet_pct, s.excess_pct);
  std::printf("  plant: T_out %.2f C  p_out %.2f psi  p_in %.2f psi  f %.4f kg/s  objective %.6f\n",
              units::kelvin_to_celsius(s.plant_T_out), units::pascal_to_psi(s.plant_p_out),
              units::pascal_to_psi(s.plant_p_in), s.plant_f, s.objective);
}

void print_history(const SolveReport& rep) {
  for (const IterationRecord& r : rep.history)
    std::fprintf(stderr, "  it %4d  mu %9.2e  theta %9.2e  phi %12.5e  step %8.2e  dual %9.2e%s\n",
                 r.iter, r.mu, r.theta, r.phi, r.step, r.dual_inf,
                 r.restoration ? "  [restoration]" : "");
}

int cmd_validate(const std::string& path, const Common& c) {
  try {
    const Network net = load_network(path, c);
    std::printf("ok: %d junctions, %zu pipes, %zu plants, %d loads, total demand %.4f MW\n",
                net.num_junctions(), net.pipes.size(), net.plants.size(), net.num_loads(),
                units::watt_to_megawatt(net.total_demand()));
    return kExitOk;
  } catch (const ValidationError& e) {
    for (const Violation& v : e.violations) std::fprintf(stderr, "violation: %s\n", v.message.c_str());
    return kExitInvalid;
  }
}

int cmd_simulate(const std::string& net_path, const std::string& set_path,
                 const std::string& out_dir, const Common& c) {
  const Network net = load_network(net_path, c);
  const SimulationSetpoints sp = parse_setpoints(set_path);
  const SimulationSystem sys = assemble_simulation(net, sp);
  NewtonOptions nopts;
  nopts.tol = 1e-4 * c.sopts.feasibility_tol;
  nopts.max_iterations = c.sopts.max_iterations;
  const SimulationResult res = simulate(sys, initial_guess(sys.problem), nopts);
  std::printf("newton: %s after %d iterations, residual %.3e\n",
              res.report.converged ? "converged" : "stalled", res.report.iterations,
              res.report.residual_norm);
  if (!res.report.converged) {
    if (res.report.singular) std::fprintf(stderr, "simulation Jacobian is singular\n");
    return kExitSolveFailure;
  }
  const NetworkState state = unflatten(sys.problem, res.x);
  SolveReport rep;
  rep.status = SolveStatus::optimal;
  rep.iterations = res.report.iterations;
  rep.objective = state.objective;
  const RunSummary s = summarize("simulate", sys.problem.net, state, rep);
  print_summary(s);
  if (!out_dir.empty()) export_results(state, sys.problem.net, s, out_dir);
  return kExitOk;
}

int cmd_optimize(const std::string& net_path, const std::string& scen_path,
                 const std::string& out_dir, const Common& c) {
  const Network net = load_network(net_path, c);
  Scenario scen;
  if (!scen_path.empty()) scen = parse_scenario(scen_path);
  const NlpProblem prob = assemble_tnfo(net, scen, c.weights);
  const auto [state, report] = solve_nlp(prob, initial_guess(prob), c.sopts);
  if (c.verbose) print_history(report);
  const RunSummary s = summarize(scen.name, prob.net, state, report);
  print_summary(s);
  if (!out_dir.empty()) export_results(state, prob.net, s, out_dir);
  return report.status == SolveStatus::optimal ? kExitOk : kExitSolveFailure;
}

int cmd_batch(const std::string& net_path, const std::string& scen_dir,
              const std::string& out_dir, const Common& c) {
  const Network net = load_network(net_path, c);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(scen_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    std::fprintf(stderr, "no scenario files (*.json) in '%s'\n", scen_dir.c_str());
    return kExitInvalid;
  }
  std::vector<Scenario> scens;
  scens.reserve(files.size());
  for (const std::string& f : files) scens.push_back(parse_scenario(f));

  const std::vector<RunResult> rows = run_batch(net, scens, c.sopts, c.weights);
  std::vector<RunSummary> summaries;
  bool all_ok = true;
  for (const RunResult& r : rows) {
    summaries.push_back(r.summary);
    if (!r.summary.error.empty()) {
      std::printf("%s: error: %s\n", r.summary.name.c_str(), r.summary.error.c_str());
      all_ok = false;
      continue;
    }
    print_summary(r.summary);
    all_ok = all_ok && r.summary.solved;
  }
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_summary_csv(summaries, (fs::path(out_dir) / "summary.csv").string());
  }
  return all_ok ? kExitOk : kExitSolveFailure;
}

int cmd_sweep(const std::string& net_path, double from, double to, int steps,
              const std::string& out_dir, const Common& c) {
  const Network net = load_network(net_path, c);
  const std::vector<SweepPoint> pts = sensitivity_sweep(net, from, to, steps, c.sopts, c.weights);
  bool all_ok = true;
  for (const SweepPoint& p : pts) {
    if (!p.error.empty()) {
      std::printf("x%.4f: error: %s\n", p.multiplier, p.error.c_str());
      all_ok = false;
      continue;
    }
    std::printf("x%.4f: %s  T_out %.2f C  f %.4f kg/s  losses %.4f MW  unmet %.2f %%\n",
                p.multiplier, p.solved ? "optimal" : "failed",
                units::kelvin_to_celsius(p.plant_T_out), p.plant_f,
                units::watt_to_megawatt(p.pipe_losses), p.unmet_pct);
    all_ok = all_ok && p.solved;
  }
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_sweep_csv(pts, (fs::path(out_dir) / "sweep.csv").string());
  }
  return all_ok ? kExitOk : kExitSolveFailure;
}

int cmd_synth(const SynthSpec& spec, const std::string& out, const std::string& scen_dir) {
  const Network net = synth_network(spec);
  write_network(net, out);
  std::printf("wrote %s: %d junctions, %zu pipes, %zu plants, %d loads, demand %.4f MW\n",
              out.c_str(), net.num_junctions(), net.pipes.size(), net.plants.size(),
              net.num_loads(), units::watt_to_megawatt(net.total_demand()));
  if (!scen_dir.empty()) {
    fs::create_directories(scen_dir);
    for (const Scenario& s : demand_stress_scenarios(net)) {
      const std::string path = (fs::path(scen_dir) / (s.name + ".json")).string();
      write_scenario(s, path);
      std::printf("wrote %s\n", path.c_str());
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"steady-state thermal flow optimization for district heating networks"};
  app.require_subcommand(1);

  Common c;
  double tol = 1e-6;
  int max_iter = 500;
  std::string weights_s;
  double outlet_pmin = 0.0;
  app.add_option("--tol", tol, "feasibility and optimality tolerance (scaled residuals)")
      ->check(CLI::PositiveNumber);
  app.add_option("--max-iter", max_iter, "solver iteration cap")->check(CLI::PositiveNumber);
  app.add_option("--weights", weights_s,
                 "objective weights slack,plant_p_out,plant_T_out,plant_f,plant_p_in");
  auto* pmin_opt = app.add_option("--plant-outlet-pmin", outlet_pmin,
                                  "minimum plant outlet junction pressure [psi]");

  auto* val = app.add_subcommand("validate", "check a network file, list violations");
  std::string val_net;
  val->add_option("net", val_net, "network JSON file")->required();

  auto* sim = app.add_subcommand("simulate", "square Newton solve at fixed setpoints");
  std::string sim_net, sim_set, sim_out;
  sim->add_option("net", sim_net, "network JSON file")->required();
  sim->add_option("setpoints", sim_set, "setpoints JSON file")->required();
  sim->add_option("-o,--out", sim_out, "directory for result files");

  auto* opt = app.add_subcommand("optimize", "solve the flow optimization program");
  std::string opt_net, opt_scen, opt_out;
  opt->add_option("net", opt_net, "network JSON file")->required();
  opt->add_option("scenario", opt_scen, "scenario JSON file (default: baseline)");
  opt->add_option("-o,--out", opt_out, "directory for result files");

  auto* bat = app.add_subcommand("batch", "optimize every scenario in a directory");
  std::string bat_net, bat_dir, bat_out;
  bat->add_option("net", bat_net, "network JSON file")->required();
  bat->add_option("scenarios", bat_dir, "directory of scenario JSON files")->required();
  bat->add_option("-o,--out", bat_out, "directory for summary.csv");

  auto* swp = app.add_subcommand("sweep", "uniform demand multiplier sweep");
  std::string swp_net, swp_out;
  double swp_from = 1.0, swp_to = 2.0;
  int swp_steps = 11;
  swp->add_option("net", swp_net, "network JSON file")->required();
  swp->add_option("--from", swp_from, "first demand multiplier")->required();
  swp->add_option("--to", swp_to, "last demand multiplier")->required();
  swp->add_option("--steps", swp_steps, "number of sweep points")
      ->required()
      ->check(CLI::Range(2, 10000));
  swp->add_option("-o,--out", swp_out, "directory for sweep.csv");

  auto* syn = app.add_subcommand("synth", "generate a synthetic two-sided network");
  SynthSpec spec;
  std::string syn_out, syn_scen;
  double syn_demand = units::watt_to_megawatt(spec.total_demand);
  double syn_capacity = units::watt_to_megawatt(spec.plant_capacity);
  syn->add_option("--seed", spec.seed, "generator seed");
  syn->add_option("--out", syn_out, "output network JSON file")->required();
  syn->add_option("--plants", spec.plants, "plant count");
  syn->add_option("--loads", spec.loads, "load count");
  syn->add_option("--outgoing", spec.outgoing_pipes, "outgoing pipe count");
  syn->add_option("--return", spec.return_pipes, "return pipe count");
  syn->add_option("--pumps", spec.pumps, "pumped return pipe count");
  syn->add_option("--demand", syn_demand, "total demand [MW]");
  syn->add_option("--capacity", syn_capacity, "plant capacity [MW]");
  syn->add_option("--scenarios-out", syn_scen, "directory for the five demand-stress scenarios");

  CLI11_PARSE(app, argc, argv);

  c.sopts.feasibility_tol = tol;
  c.sopts.optimality_tol = tol;
  c.sopts.max_iterations = max_iter;
  if (!weights_s.empty()) {
    try {
      c.weights = parse_weights(weights_s);
    } catch (const CLI::ValidationError& e) {
      std::fprintf(stderr, "%s\n", e.what());
      return kExitInvalid;
    }
  }
  if (pmin_opt->count()) c.outlet_pmin_psi = outlet_pmin;
  if (const char* v = std::getenv("TNFO_VERBOSE")) c.verbose = v[0] && v != std::string("0");

  try {
    if (app.got_subcommand(val)) return cmd_validate(val_net, c);
    if (app.got_subcommand(sim)) return cmd_simulate(sim_net, sim_set, sim_out, c);
    if (app.got_subcommand(opt)) return cmd_optimize(opt_net, opt_scen, opt_out, c);
    if (app.got_subcommand(bat)) return cmd_batch(bat_net, bat_dir, bat_out, c);
    if (app.got_subcommand(swp)) return cmd_sweep(swp_net, swp_from, swp_to, swp_steps, swp_out, c);
    if (app.got_subcommand(syn)) {
      spec.total_demand = units::megawatt_to_watt(syn_demand);
      spec.plant_capacity = units::megawatt_to_watt(syn_capacity);
      return cmd_synth(spec, syn_out, syn_scen);
    }
  } catch (const ValidationError& e) {
    for (const Violation& v : e.violations)
      std::fprintf(stderr, "violation: %s\n", v.message.c_str());
    return kExitInvalid;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInvalid;
  }
  return kExitInvalid;
}
