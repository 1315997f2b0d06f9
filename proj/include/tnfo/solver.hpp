#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tnfo/linalg.hpp"
#include "tnfo/nlp.hpp"

// Bundled optimizers: a primal log-barrier interior-point method with filter
// line search for the flow program, and a damped Newton method for square
// simulation systems. Both are strictly deterministic.
namespace tnfo {

struct SolverOptions {
  double feasibility_tol = 1e-6;   // on scaled equality residuals
  double optimality_tol = 1e-6;    // on scaled dual infeasibility
  int max_iterations = 500;
  double mu_init = 1e-1;
  double mu_shrink = 0.2;
  double mu_min = 1e-11;
  double backtrack = 0.5;
  double regularization_floor = 1e-8;
  // Extra fixed-barrier polish iterations driving equality residuals to
  // machine level so SI-unit conservation checks pass with headroom.
  int refinement_iterations = 30;
  bool collect_history = true;
};

enum class SolveStatus { optimal, infeasible_detected, iteration_limit, linear_solve_failure };

const char* to_string(SolveStatus s);

struct IterationRecord {
  int iter;
  double mu;
  double theta;      // scaled constraint violation (1-norm)
  double phi;        // barrier objective
  double step;       // accepted primal step length
  double dual_inf;   // scaled dual infeasibility (inf-norm)
  bool restoration;  // iterate produced by the feasibility restoration phase
};

struct SolveReport {
  SolveStatus status = SolveStatus::iteration_limit;
  int iterations = 0;
  double objective = 0.0;
  double max_scaled_equality = 0.0;
  double max_si_mass = 0.0;    // kg/s
  double max_si_energy = 0.0;  // W
  double dual_infeasibility = 0.0;
  double seconds = 0.0;
  std::string message;
  std::vector<IterationRecord> history;
};

// Minimizes the program from x0 (projected into the interior if needed).
// Returns the best iterate even on iteration_limit / infeasible_detected.
std::pair<NetworkState, SolveReport> solve_nlp(const NlpProblem& problem, Eigen::VectorXd x0,
                                               const SolverOptions& opts = {});

// ---- Square Newton ----------------------------------------------------------

struct NewtonOptions {
  double tol = 1e-10;          // residual inf-norm
  int max_iterations = 200;
  double backtrack = 0.5;
  double min_step = 1e-12;
};

struct NewtonReport {
  bool converged = false;
  bool singular = false;
  int iterations = 0;
  double residual_norm = 0.0;
  std::vector<double> history;  // residual inf-norm per iteration
};

// eval(x, r, J): fill r(x), and J when the pointer is non-null. J must be
// square. Damped steps: full Newton direction, halved until the residual
// norm decreases.
using NewtonEval =
    std::function<bool(const Eigen::VectorXd&, Eigen::VectorXd&, Eigen::MatrixXd*)>;

NewtonReport solve_newton(const NewtonEval& eval, Eigen::VectorXd& x,
                          const NewtonOptions& opts = {});

// Newton on a simulation system; returns the full-length state vector.
struct SimulationResult {
  NewtonReport report;
  Eigen::VectorXd x;  // full layout-order vector
};
SimulationResult simulate(const SimulationSystem& system, const Eigen::VectorXd& x0_full,
                          const NewtonOptions& opts = {});

// Central-difference Jacobian of F at x; the derivative test oracle.
Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& F,
                            const Eigen::VectorXd& x, double step);

}  // namespace tnfo
