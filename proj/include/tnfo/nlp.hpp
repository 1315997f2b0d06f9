#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tnfo/physics.hpp"
#include "tnfo/scenario.hpp"

// Flattening of a network into the steady-state flow optimization program:
// variable indexing, residual/Jacobian evaluation with analytic derivatives,
// bounds, row scaling, and the square simulation system used to cross-check
// optimizer output.
namespace tnfo {

// Weights of the five objective terms: load slack power (MW), plant outlet
// pressure (psi), plant outlet temperature (deg C), plant flow (kg/s), plant
// inlet pressure (psi). The mixed display units are deliberate: they encode
// the relative importance the raw unit magnitudes imply.
struct ObjectiveWeights {
  double slack = 1.0;
  double plant_p_out = 1.0;
  double plant_T_out = 1.0;
  double plant_f = 1.0;
  double plant_p_in = 1.0;
};

// Flat variable vector layout, blocked by field:
//   [ p (junctions) | T (junctions) | f (edges) | T_in (edges) | T_out (edges)
//     | alpha (pumped pipes) | QE (loads) | QS (loads) ]
// Within each block, entities are ordered by id, so the layout depends only
// on the network's content, not on container order.
struct VariableLayout {
  int n = 0;
  int off_p = 0, off_T = 0, off_f = 0, off_Tin = 0, off_Tout = 0;
  int off_alpha = 0, off_QE = 0, off_QS = 0;

  std::vector<int> junction_slot;     // junction index -> position in block
  std::vector<int> edge_slot;         // edge index -> position in block
  std::vector<int> pump_slot;         // pipe index -> alpha position, -1 if unpumped
  std::vector<int> load_slot;         // load index -> position in QE/QS blocks
  std::vector<int> junction_order;    // position -> junction index
  std::vector<int> edge_order;        // position -> edge index
  std::vector<int> pump_order;        // position -> pipe index
  std::vector<int> load_order;        // position -> load index

  int p(int j) const { return off_p + junction_slot[static_cast<size_t>(j)]; }
  int T(int j) const { return off_T + junction_slot[static_cast<size_t>(j)]; }
  int f(int e) const { return off_f + edge_slot[static_cast<size_t>(e)]; }
  int T_in(int e) const { return off_Tin + edge_slot[static_cast<size_t>(e)]; }
  int T_out(int e) const { return off_Tout + edge_slot[static_cast<size_t>(e)]; }
  int alpha_of_pipe(int pipe) const { return off_alpha + pump_slot[static_cast<size_t>(pipe)]; }
  int QE(int load) const { return off_QE + load_slot[static_cast<size_t>(load)]; }
  int QS(int load) const { return off_QS + load_slot[static_cast<size_t>(load)]; }
};

VariableLayout index_variables(const Network& net);

// Equality residual families. entity is an edge index for edge rows and a
// junction index for junction rows; Mixing rows carry the departing edge.
struct ResidualTag {
  enum class Family { LoadPower, PipeTemperature, SteamPressure, WaterPressure, Mixing, Mass, Energy };
  Family family;
  int entity;
};

// Inequalities, written as c_I(x) >= 0 when feasible.
struct InequalityTag {
  enum class Family { PlantCapacity, LoadInletPhase, LoadOutletPhase, LoadPressureOrder };
  Family family;
  int entity;
};

const char* family_name(ResidualTag::Family f);
const char* family_name(InequalityTag::Family f);

// Scratch for repeated evaluation; buffers are sized on first use and never
// grow afterwards, so one workspace per thread gives allocation-free solves.
struct EvalWorkspace {
  Eigen::VectorXd c_E;   // scaled equality residuals
  Eigen::VectorXd c_I;   // scaled inequality values, >= 0 feasible
  Eigen::MatrixXd J_E;   // d c_E / dx
  Eigen::MatrixXd J_I;   // d c_I / dx
  bool with_jacobian = true;
};

class NlpProblem {
 public:
  Network net;             // scenario already folded in
  VariableLayout layout;
  ObjectiveWeights weights;

  Eigen::VectorXd lower, upper;  // +-inf where one-sided
  Eigen::VectorXd eq_scale, ineq_scale;
  std::vector<ResidualTag> eq_tags;
  std::vector<InequalityTag> ineq_tags;
  std::vector<std::vector<int>> eq_pattern;    // row -> sorted variable indices
  std::vector<std::vector<int>> ineq_pattern;

  double flow_floor = 1e-6;  // kg/s; lower bound keeping the decay term smooth

  int num_vars() const { return layout.n; }
  int num_eq() const { return static_cast<int>(eq_tags.size()); }
  int num_ineq() const { return static_cast<int>(ineq_tags.size()); }

  // Linear objective in display units; the gradient is constant.
  double objective(const Eigen::VectorXd& x) const;
  void objective_gradient(Eigen::VectorXd& g) const;

  // Fills ws.c_E/c_I and, when ws.with_jacobian, the dense Jacobians.
  // Throws NonFiniteValueError naming the first offending row.
  void evaluate(const Eigen::VectorXd& x, EvalWorkspace& ws) const;
  // Same, but reports failure instead of throwing (restoration probes).
  bool try_evaluate(const Eigen::VectorXd& x, EvalWorkspace& ws) const noexcept;

  // H += sum_k y_E[k] * scale_k * grad^2 c_k + sum_j y_I[j] * scale_j * grad^2 c_Ij.
  // Only the lower triangle of H is written.
  void add_constraint_hessian(const Eigen::VectorXd& x, const Eigen::VectorXd& y_E,
                              const Eigen::VectorXd& y_I, Eigen::MatrixXd& H) const;

  // Per-variable magnitude estimates from the bounds, used by the solver's
  // internal rescaling and by scaled state comparisons.
  Eigen::VectorXd variable_scales() const;

  std::string row_label(const ResidualTag& t) const;
  std::string row_label(const InequalityTag& t) const;
};

NlpProblem assemble_tnfo(const Network& net, const Scenario& scen = {},
                         const ObjectiveWeights& weights = {});

// Solved (or candidate) operating point in entity terms.
struct NetworkState {
  Eigen::VectorXd x;                       // layout order
  std::vector<double> junction_p;          // Pa, by junction index
  std::vector<double> junction_T;          // K
  std::vector<EdgeState> edge;             // by edge index; pressures copied from junctions
  double objective = 0.0;
  double max_scaled_equality = 0.0;
  double max_mass_residual = 0.0;          // kg/s, SI
  double max_energy_residual = 0.0;        // W, SI
};

NetworkState unflatten(const NlpProblem& problem, const Eigen::VectorXd& x);

// Starting point: pressures at box midpoints, temperatures split by side
// (steam 398.15 K, water 363.15 K), plant flow total demand / latent heat,
// pipe flows by aggregating downstream demand over a spanning tree, slacks
// zero; everything nudged strictly inside the bounds.
Eigen::VectorXd initial_guess(const NlpProblem& problem);

// ---- Square simulation system ----------------------------------------------

// Fixed operating decisions that close the physics into a square system:
// per plant T_out/p_out/p_in, every pump boost, per load QE/QS/T_out, and
// optionally the plant flows (in which case one named load's T_out must be
// released as the swing variable).
struct SimulationSetpoints {
  struct PlantSetpoint {
    double T_out;  // K
    double p_out;  // Pa
    double p_in;   // Pa
    std::optional<double> f;  // kg/s; fixing it requires a swing load
  };
  std::map<std::string, PlantSetpoint> plants;            // by plant id
  std::map<std::string, double> pump_alpha;               // pipe id -> Pa
  std::map<std::string, std::pair<double, double>> load_slacks;  // load id -> (QE, QS) W
  std::map<std::string, double> load_T_out;               // load id -> K
  std::optional<std::string> swing_load;                  // T_out released when plant f fixed
};

SimulationSetpoints setpoints_from_state(const Network& net, const NetworkState& state);

// The equality rows of the NLP restricted to the non-fixed variables, with
// one redundant junction mass row removed (mass rows sum to zero identically
// on a connected network). Construction fails with NonSquareSystemError when
// the free-variable count does not match the remaining row count.
struct SimulationSystem {
  NlpProblem problem;
  std::vector<int> free_vars;          // flat variable indices, ascending
  std::vector<int> rows;               // equality row indices kept
  Eigen::VectorXd x_fixed;             // full-length template with fixed entries set
  int dropped_mass_row = -1;

  int dim() const { return static_cast<int>(free_vars.size()); }
  Eigen::VectorXd full_x(const Eigen::VectorXd& y) const;     // scatter free into template
  Eigen::VectorXd reduce_x(const Eigen::VectorXd& x) const;   // gather free entries
  // r(y) and optionally J(y) on the kept rows; returns false on non-finite.
  bool residual(const Eigen::VectorXd& y, Eigen::VectorXd& r, Eigen::MatrixXd* J,
                EvalWorkspace& ws) const;
};

SimulationSystem assemble_simulation(const Network& net, const SimulationSetpoints& sp);

}  // namespace tnfo
