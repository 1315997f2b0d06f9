#include "tnfo/run.hpp"

#include <exception>
#include <future>
#include <map>

#include "tnfo/errors.hpp"

namespace tnfo {

namespace {

// Plant with the smallest id; the canonical one for headline figures.
int lead_plant(const Network& net) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(net.plants.size()); ++i)
    if (net.plants[static_cast<size_t>(i)].id < net.plants[static_cast<size_t>(best)].id) best = i;
  return best;
}

}  // namespace

RunSummary summarize(const std::string& name, const Network& effective_net,
                     const NetworkState& state, const SolveReport& report) {
  const Network& net = effective_net;
  RunSummary s;
  s.name = name;
  s.status = report.status;
  s.solved = report.status == SolveStatus::optimal;
  s.required = net.total_demand();
  s.objective = report.objective;
  s.iterations = report.iterations;
  s.seconds = report.seconds;

  for (int i = 0; i < static_cast<int>(net.plants.size()); ++i) {
    const EdgeState& e = state.edge[static_cast<size_t>(net.edge_of_plant(i))];
    s.supplied += plant_power_unchecked(e.f, e.T_in, e.T_out, net.constants);
  }
  for (int i = 0; i < static_cast<int>(net.pipes.size()); ++i) {
    const int ei = net.edge_of_pipe(i);
    const EdgeState& e = state.edge[static_cast<size_t>(ei)];
    s.pipe_losses += net.edges[static_cast<size_t>(ei)].c_in * e.f * (e.T_in - e.T_out);
  }
  double qe = 0.0, qs = 0.0;
  for (int i = 0; i < net.num_loads(); ++i) {
    const EdgeState& e = state.edge[static_cast<size_t>(net.edge_of_load(i))];
    qe += e.QE;
    qs += e.QS;
  }
  if (s.required > 0.0) {
    s.unmet_pct = 100.0 * qs / s.required;
    s.excess_pct = 100.0 * qe / s.required;
  }

  const EdgeState& p = state.edge[static_cast<size_t>(net.edge_of_plant(lead_plant(net)))];
  s.plant_T_out = p.T_out;
  s.plant_p_out = p.p_out;
  s.plant_p_in = p.p_in;
  s.plant_f = p.f;
  return s;
}

double unmet_fraction(const NetworkState& state, const Network& effective_net) {
  const double required = effective_net.total_demand();
  if (required <= 0.0) throw ZeroDemandError("unmet_fraction: network has zero total demand");
  double qs = 0.0;
  for (int i = 0; i < effective_net.num_loads(); ++i)
    qs += state.edge[static_cast<size_t>(effective_net.edge_of_load(i))].QS;
  return qs / required;
}

std::vector<RunResult> run_batch(const Network& net, const std::vector<Scenario>& scenarios,
                                 const SolverOptions& opts, const ObjectiveWeights& weights) {
  std::vector<std::string> labels;
  labels.reserve(scenarios.size());
  std::map<std::string, int> seen;
  for (const Scenario& sc : scenarios) {
    const int k = ++seen[sc.name];
    labels.push_back(k == 1 ? sc.name : sc.name + "#" + std::to_string(k));
  }

  auto solve_row = [&](size_t i) {
    RunResult row;
    row.summary.name = labels[i];
    try {
      const NlpProblem prob = assemble_tnfo(net, scenarios[i], weights);
      auto [state, report] = solve_nlp(prob, initial_guess(prob), opts);
      row.summary = summarize(labels[i], prob.net, state, report);
      row.report = std::move(report);
      row.state = std::move(state);
    } catch (const std::exception& e) {
      row.summary.error = e.what();
    }
    return row;
  };

  std::vector<std::future<RunResult>> futures;
  futures.reserve(scenarios.size());
  for (size_t i = 0; i < scenarios.size(); ++i)
    futures.push_back(std::async(std::launch::async, solve_row, i));
  std::vector<RunResult> rows;
  rows.reserve(scenarios.size());
  for (auto& f : futures) rows.push_back(f.get());
  return rows;
}

std::vector<SweepPoint> sensitivity_sweep(const Network& net, double from, double to, int steps,
                                          const SolverOptions& opts,
                                          const ObjectiveWeights& weights) {
  if (steps < 1) throw InvalidArgument("sensitivity_sweep: steps must be at least 1");
  std::vector<SweepPoint> out;
  out.reserve(static_cast<size_t>(steps));
  Eigen::VectorXd warm;

  for (int k = 0; k < steps; ++k) {
    const double m =
        steps == 1 ? from : from + (to - from) * static_cast<double>(k) / (steps - 1);
    SweepPoint pt;
    pt.multiplier = m;
    try {
      Scenario sc;
      sc.name = "sweep";
      sc.all_loads_multiplier = m;
      const NlpProblem prob = assemble_tnfo(net, sc, weights);
      auto [state, report] =
          solve_nlp(prob, warm.size() ? warm : initial_guess(prob), opts);
      if (report.status != SolveStatus::optimal && warm.size()) {
        auto cold = solve_nlp(prob, initial_guess(prob), opts);
        if (cold.second.status == SolveStatus::optimal ||
            cold.second.max_scaled_equality < report.max_scaled_equality) {
          state = std::move(cold.first);
          report = std::move(cold.second);
        }
      }
      const RunSummary s = summarize(sc.name, prob.net, state, report);
      pt.solved = s.solved;
      pt.plant_T_out = s.plant_T_out;
      pt.plant_f = s.plant_f;
      pt.pipe_losses = s.pipe_losses;
      pt.supplied = s.supplied;
      pt.unmet_pct = s.unmet_pct;
      pt.objective = s.objective;
      if (s.solved) warm = state.x;
    } catch (const std::exception& e) {
      pt.error = e.what();
    }
    out.push_back(pt);
  }
  return out;
}

}  // namespace tnfo
