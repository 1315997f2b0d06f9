#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "fixtures.hpp"
#include "tnfo/nlp.hpp"
#include "tnfo/solver.hpp"
#include "tnfo/units.hpp"

using namespace tnfo;
using Eigen::VectorXd;

namespace {

// The optimizer is deterministic, so solving the same loop repeatedly in
// different tests is pure waste; solve once and share.
const std::pair<NetworkState, SolveReport>& solved_series_loop() {
  static const auto result = [] {
    NlpProblem p = assemble_tnfo(series_loop());
    return solve_nlp(p, initial_guess(p));
  }();
  return result;
}

}  // namespace

TEST_SUITE("solver") {
  TEST_CASE("drives the four-junction loop to its cheap operating point") {
    NlpProblem p = assemble_tnfo(series_loop());
    const auto& [state, report] = solved_series_loop();

    REQUIRE(report.status == SolveStatus::optimal);
    CHECK(report.max_scaled_equality <= 1e-6);
    CHECK(report.max_si_mass <= 1e-6);      // kg/s
    CHECK(report.max_si_energy <= 1e-6);    // W
    CHECK(report.dual_infeasibility <= 1e-5);

    const Network& net = p.net;
    const EdgeState& plant = state.edge[static_cast<size_t>(net.edge_of_plant(0))];
    const EdgeState& load = state.edge[static_cast<size_t>(net.edge_of_load(0))];

    // Slacks collapse: the demand is served, nothing is dumped.
    CHECK(load.QS <= 10.0);
    CHECK(load.QE <= 10.0);

    // The cheap point: outlet pressure on the regulated floor, inlet pressure
    // near the global floor, the outlet barely into the steam phase, and just
    // enough flow to carry the demand on latent heat.
    CHECK(units::pascal_to_psi(state.junction_p[static_cast<size_t>(net.junction_at("s1"))]) ==
          doctest::Approx(40.0).epsilon(1e-3));
    CHECK(units::pascal_to_psi(state.junction_p[static_cast<size_t>(net.junction_at("w2"))]) <=
          7.0);
    CHECK(plant.T_out >= condensation_temperature);
    CHECK(plant.T_out <= 380.0);
    CHECK(plant.f >= 0.40);
    CHECK(plant.f <= 0.50);

    // Plant output covers demand plus pipe losses, nothing else.
    double losses = 0.0;
    for (int i = 0; i < 2; ++i) {
      const EdgeState& e = state.edge[static_cast<size_t>(net.edge_of_pipe(i))];
      double c = net.edges[static_cast<size_t>(net.edge_of_pipe(i))].c_in;
      losses += c * e.f * (e.T_in - e.T_out);
    }
    double supplied = plant_power_unchecked(plant.f, plant.T_in, plant.T_out, net.constants);
    CHECK(supplied == doctest::Approx(1e6 + losses).epsilon(1e-4));

    // Water returns as water, steam arrives as steam.
    CHECK(load.T_in >= condensation_temperature);
    CHECK(load.T_out <= condensation_temperature);
    CHECK(load.T_out >= net.bounds.T_min - 1e-6);
  }

  TEST_CASE("iteration history: monotone barrier, filter-compatible steps") {
    const auto& [state, report] = solved_series_loop();
    REQUIRE(!report.history.empty());
    CHECK(report.iterations > 0);
    CHECK(report.seconds >= 0.0);

    for (size_t i = 1; i < report.history.size(); ++i) {
      const IterationRecord& a = report.history[i - 1];
      const IterationRecord& b = report.history[i];
      CHECK(b.iter > a.iter);
      CHECK(b.mu <= a.mu);  // barrier only ever shrinks
      CHECK(b.step >= 0.0);
      CHECK(b.step <= 1.0 + 1e-12);
      // Filter acceptance: a step never worsens both measures at once.
      if (b.mu == a.mu && !b.restoration && !a.restoration) {
        bool worse_theta = b.theta > a.theta * (1.0 + 1e-10) + 1e-15;
        bool worse_phi = b.phi > a.phi + 1e-12;
        CHECK(!(worse_theta && worse_phi));
      }
    }

    SolverOptions quiet;
    quiet.collect_history = false;
    NlpProblem p = assemble_tnfo(series_loop());
    auto [st2, rep2] = solve_nlp(p, initial_guess(p), quiet);
    CHECK(rep2.history.empty());
    CHECK(rep2.status == SolveStatus::optimal);
  }

  TEST_CASE("deterministic: same problem, same start, same bits") {
    NlpProblem p = assemble_tnfo(series_loop());
    auto [s1, r1] = solve_nlp(p, initial_guess(p));
    auto [s2, r2] = solve_nlp(p, initial_guess(p));
    CHECK(r1.iterations == r2.iterations);
    CHECK(r1.objective == r2.objective);
    CHECK(s1.x == s2.x);
  }

  TEST_CASE("iteration budget is respected") {
    SolverOptions opts;
    opts.max_iterations = 3;
    NlpProblem p = assemble_tnfo(series_loop());
    auto [state, report] = solve_nlp(p, initial_guess(p), opts);
    CHECK(report.status != SolveStatus::optimal);
    CHECK(report.iterations <= 3);
    // The best iterate so far still comes back usable.
    CHECK(state.x.allFinite());
  }

  TEST_CASE("recovers from a deliberately bad start") {
    NlpProblem p = assemble_tnfo(series_loop());
    VectorXd x0 = initial_guess(p);
    const VariableLayout& L = p.layout;
    for (int e = 0; e < p.net.num_edges(); ++e) x0[L.f(e)] *= 20.0;  // wildly over-pumped
    for (int j = 0; j < p.net.num_junctions(); ++j) x0[L.T(j)] = 420.0;
    auto [state, report] = solve_nlp(p, x0);
    CHECK(report.status == SolveStatus::optimal);
    CHECK(report.max_si_energy <= 1e-6);
  }

  TEST_CASE("two-junction cycle: the load cannot be served") {
    // Steam momentum wants pressure to fall along the pipe; the load wants
    // its inlet at or above its outlet on the same junction pair. At serving
    // flow the two cannot hold together, so the optimum never certifies.
    SolverOptions opts;
    opts.max_iterations = 250;
    NlpProblem p = assemble_tnfo(minimal_cycle());
    auto [state, report] = solve_nlp(p, initial_guess(p), opts);
    CHECK(report.status != SolveStatus::optimal);
  }

  TEST_CASE("impossible bound patch is reported infeasible") {
    // Raising the water floor above the condensation point contradicts the
    // load outlet phase constraint through the junction energy balance.
    Scenario scen;
    scen.bounds.T_min = 393.15;
    NlpProblem p = assemble_tnfo(series_loop(), scen);
    auto [state, report] = solve_nlp(p, initial_guess(p));
    CHECK(report.status == SolveStatus::infeasible_detected);
    CHECK(report.message.find("stall") != std::string::npos);
  }

  TEST_CASE("with inactive inequalities the optimum is a plain physics root") {
    // These weights push every inequality into the interior (bounds do the
    // pinning instead), so the optimizer's point must coincide with the
    // square simulation system closed on its own setpoints. Shedding must
    // stay expensive or the flow term would favor starving the load.
    ObjectiveWeights w;
    w.slack = 1000.0;
    w.plant_T_out = 0.001;
    w.plant_f = 100.0;
    NlpProblem p = assemble_tnfo(series_loop(), {}, w);
    auto [state, report] = solve_nlp(p, initial_guess(p));
    REQUIRE(report.status == SolveStatus::optimal);

    EvalWorkspace ws;
    ws.with_jacobian = false;
    p.evaluate(state.x, ws);
    CHECK(ws.c_I.minCoeff() > 1e-3);  // strictly interior, none active

    SimulationSetpoints sp = setpoints_from_state(p.net, state);
    SimulationSystem sys = assemble_simulation(p.net, sp);
    SimulationResult sim = simulate(sys, initial_guess(p));
    REQUIRE(sim.report.converged);

    VectorXd scales = p.variable_scales();
    double worst = 0.0;
    for (int i = 0; i < p.num_vars(); ++i)
      worst = std::max(worst, std::abs(sim.x[i] - state.x[i]) / scales[i]);
    CHECK(worst <= 1e-5);
  }

  TEST_CASE("simulate from the optimizer's own answer verifies instantly") {
    NlpProblem p = assemble_tnfo(series_loop());
    const auto& [state, report] = solved_series_loop();
    SimulationSetpoints sp = setpoints_from_state(p.net, state);
    SimulationSystem sys = assemble_simulation(p.net, sp);

    NewtonOptions opts;
    opts.tol = 1e-8;
    SimulationResult sim = simulate(sys, state.x, opts);
    CHECK(sim.report.converged);
    CHECK(sim.report.iterations <= 2);  // already at the root

    CHECK_THROWS_AS(simulate(sys, VectorXd::Zero(3), opts), InvalidArgument);
  }

  TEST_CASE("status strings") {
    CHECK(std::string(to_string(SolveStatus::optimal)) == "optimal");
    CHECK(std::string(to_string(SolveStatus::infeasible_detected)) == "infeasible_detected");
    CHECK(std::string(to_string(SolveStatus::iteration_limit)) == "iteration_limit");
    CHECK(std::string(to_string(SolveStatus::linear_solve_failure)) == "linear_solve_failure");
  }
}
