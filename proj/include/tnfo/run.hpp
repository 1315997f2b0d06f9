#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tnfo/scenario.hpp"
#include "tnfo/solver.hpp"

// Batch and sweep drivers around solve_nlp: one row per scenario with the
// headline operating figures, failures isolated per row.
namespace tnfo {

struct RunSummary {
  std::string name;
  SolveStatus status = SolveStatus::iteration_limit;
  bool solved = false;          // status == optimal
  std::string error;            // non-empty when the row failed outside the solver
  double required = 0.0;        // W, total effective demand
  double supplied = 0.0;        // W, plant thermal output
  double pipe_losses = 0.0;     // W, sum of c f (T_in - T_out) over pipes
  double unmet_pct = 0.0;       // 100 * sum QS / required
  double excess_pct = 0.0;      // 100 * sum QE / required
  double plant_T_out = 0.0;     // K
  double plant_p_out = 0.0;     // Pa
  double plant_p_in = 0.0;      // Pa
  double plant_f = 0.0;         // kg/s
  double objective = 0.0;
  int iterations = 0;
  double seconds = 0.0;
};

struct RunResult {
  RunSummary summary;
  std::optional<NetworkState> state;  // present when the solve produced an iterate
  SolveReport report;
};

RunSummary summarize(const std::string& name, const Network& effective_net,
                     const NetworkState& state, const SolveReport& report);

// Fraction of total demand left unmet (sum QS / sum Q) on the effective
// network. Throws ZeroDemandError when total demand is zero.
double unmet_fraction(const NetworkState& state, const Network& effective_net);

// Solves every scenario concurrently against the same base network. Duplicate
// scenario names get #2, #3, ... suffixes so rows stay identifiable. A row
// that throws is reported in its summary.error, never aborting the batch.
std::vector<RunResult> run_batch(const Network& net, const std::vector<Scenario>& scenarios,
                                 const SolverOptions& opts = {},
                                 const ObjectiveWeights& weights = {});

struct SweepPoint {
  double multiplier = 1.0;
  bool solved = false;
  std::string error;
  double plant_T_out = 0.0;   // K
  double plant_f = 0.0;       // kg/s
  double pipe_losses = 0.0;   // W
  double supplied = 0.0;      // W
  double unmet_pct = 0.0;
  double objective = 0.0;
};

// Uniform demand multiplier swept from..to inclusive; each point warm-starts
// from the previous solution and falls back to a cold start on failure.
std::vector<SweepPoint> sensitivity_sweep(const Network& net, double from, double to, int steps,
                                          const SolverOptions& opts = {},
                                          const ObjectiveWeights& weights = {});

}  // namespace tnfo
