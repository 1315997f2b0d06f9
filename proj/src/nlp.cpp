#include "tnfo/nlp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>

#include "tnfo/units.hpp"

namespace tnfo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<int> sorted_by(int count, const std::function<const std::string&(int)>& id_of) {
  std::vector<int> order(static_cast<size_t>(count));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return id_of(a) < id_of(b); });
  return order;
}

std::vector<int> invert(const std::vector<int>& order) {
  std::vector<int> slot(order.size());
  for (int k = 0; k < static_cast<int>(order.size()); ++k)
    slot[static_cast<size_t>(order[static_cast<size_t>(k)])] = k;
  return slot;
}

// Nominal plant flow for scaling: total demand over latent heat.
double nominal_flow(const Network& net, double flow_floor) {
  return std::max(net.total_demand() / net.constants.c_L, flow_floor);
}

void add_sym(Eigen::MatrixXd& H, int i, int j, double v) {
  if (i >= j)
    H(i, j) += v;
  else
    H(j, i) += v;
}

}  // namespace

const char* family_name(ResidualTag::Family f) {
  switch (f) {
    case ResidualTag::Family::LoadPower: return "load-power";
    case ResidualTag::Family::PipeTemperature: return "pipe-temperature";
    case ResidualTag::Family::SteamPressure: return "steam-pressure";
    case ResidualTag::Family::WaterPressure: return "water-pressure";
    case ResidualTag::Family::Mixing: return "mixing";
    case ResidualTag::Family::Mass: return "mass";
    default: return "energy";
  }
}

const char* family_name(InequalityTag::Family f) {
  switch (f) {
    case InequalityTag::Family::PlantCapacity: return "plant-capacity";
    case InequalityTag::Family::LoadInletPhase: return "load-inlet-phase";
    case InequalityTag::Family::LoadOutletPhase: return "load-outlet-phase";
    default: return "load-pressure-order";
  }
}

VariableLayout index_variables(const Network& net) {
  VariableLayout L;
  const int nj = net.num_junctions();
  const int ne = net.num_edges();
  const int np = static_cast<int>(net.pumped_pipes.size());
  const int nl = net.num_loads();

  L.junction_order = sorted_by(nj, [&](int i) -> const std::string& {
    return net.junctions[static_cast<size_t>(i)].id;
  });
  L.junction_slot = invert(L.junction_order);

  L.edge_order = sorted_by(ne, [&](int e) -> const std::string& { return net.edge_id(e); });
  L.edge_slot = invert(L.edge_order);

  std::vector<int> pumps = net.pumped_pipes;
  std::sort(pumps.begin(), pumps.end(), [&](int a, int b) {
    return net.pipes[static_cast<size_t>(a)].id < net.pipes[static_cast<size_t>(b)].id;
  });
  L.pump_order = pumps;
  L.pump_slot.assign(net.pipes.size(), -1);
  for (int k = 0; k < np; ++k) L.pump_slot[static_cast<size_t>(pumps[static_cast<size_t>(k)])] = k;

  L.load_order = sorted_by(nl, [&](int i) -> const std::string& {
    return net.loads[static_cast<size_t>(i)].id;
  });
  L.load_slot = invert(L.load_order);

  L.off_p = 0;
  L.off_T = nj;
  L.off_f = 2 * nj;
  L.off_Tin = 2 * nj + ne;
  L.off_Tout = 2 * nj + 2 * ne;
  L.off_alpha = 2 * nj + 3 * ne;
  L.off_QE = L.off_alpha + np;
  L.off_QS = L.off_QE + nl;
  L.n = L.off_QS + nl;
  return L;
}

NlpProblem assemble_tnfo(const Network& net, const Scenario& scen,
                         const ObjectiveWeights& weights) {
  NlpProblem P;
  P.net = apply_scenario(net, scen);
  P.layout = index_variables(P.net);
  P.weights = weights;

  const Network& N = P.net;
  const VariableLayout& L = P.layout;
  const OperationalBounds& B = N.bounds;
  const double f0 = nominal_flow(N, P.flow_floor);

  // Bounds. Edge temperatures live in [T_ext, T_max]: no exchanger here cools
  // a stream below ambient, and without the floor the plant outlet term of
  // the objective is unbounded below once flows are small enough to decouple
  // the mixing rows.
  P.lower = Eigen::VectorXd::Constant(L.n, -kInf);
  P.upper = Eigen::VectorXd::Constant(L.n, kInf);
  for (int j = 0; j < N.num_junctions(); ++j) {
    P.lower[L.p(j)] = B.p_min;
    P.upper[L.p(j)] = B.p_max;
    P.lower[L.T(j)] = B.T_min;
    P.upper[L.T(j)] = B.T_max;
  }
  for (const auto& plant : N.plants) {
    int out_j = N.junction_at(plant.to);
    P.lower[L.p(out_j)] = std::max(B.p_min, B.plant_outlet_p_min);
  }
  for (int e = 0; e < N.num_edges(); ++e) {
    P.lower[L.f(e)] = P.flow_floor;
    P.lower[L.T_in(e)] = B.T_ext;
    P.upper[L.T_in(e)] = B.T_max;
    P.lower[L.T_out(e)] = B.T_ext;
    P.upper[L.T_out(e)] = B.T_max;
  }
  for (int pipe : N.pumped_pipes) {
    P.lower[L.alpha_of_pipe(pipe)] = 0.0;
    P.upper[L.alpha_of_pipe(pipe)] = N.pipes[static_cast<size_t>(pipe)].pump_boost_max;
  }
  for (int l = 0; l < N.num_loads(); ++l) {
    P.lower[L.QE(l)] = 0.0;
    P.lower[L.QS(l)] = 0.0;
  }

  // Row scales chosen so a unit scaled residual means "one part of the
  // typical magnitude": pressures against the pressure ceiling, temperatures
  // against the temperature ceiling, powers against nominal plant power.
  const double s_temp = 1.0 / B.T_max;
  const double s_press = 1.0 / B.p_max;
  const double s_press2 = 1.0 / (B.p_max * B.p_max);
  const double s_mass = 1.0 / std::max(1.0, f0);
  const double s_power = 1.0 / (N.constants.c_L * std::max(1.0, f0));
  const double s_energy = 1.0 / (N.constants.c_w * std::max(1.0, f0) * B.T_max);

  std::vector<double> eq_scale, ineq_scale;
  auto eq_row = [&](ResidualTag::Family fam, int entity, double scale,
                    std::vector<int> pattern) {
    P.eq_tags.push_back({fam, entity});
    eq_scale.push_back(scale);
    std::sort(pattern.begin(), pattern.end());
    P.eq_pattern.push_back(std::move(pattern));
  };
  auto ineq_row = [&](InequalityTag::Family fam, int entity, double scale,
                      std::vector<int> pattern) {
    P.ineq_tags.push_back({fam, entity});
    ineq_scale.push_back(scale);
    std::sort(pattern.begin(), pattern.end());
    P.ineq_pattern.push_back(std::move(pattern));
  };

  // Equalities, grouped by family, id-ordered within each group.
  for (int slot = 0; slot < N.num_loads(); ++slot) {
    int l = L.load_order[static_cast<size_t>(slot)];
    int e = N.edge_of_load(l);
    eq_row(ResidualTag::Family::LoadPower, l, s_power,
           {L.f(e), L.T_in(e), L.T_out(e), L.QE(l), L.QS(l)});
  }
  for (int pos = 0; pos < N.num_edges(); ++pos) {
    int e = L.edge_order[static_cast<size_t>(pos)];
    if (N.edges[static_cast<size_t>(e)].kind != EdgeKind::Pipe) continue;
    eq_row(ResidualTag::Family::PipeTemperature, e, s_temp,
           {L.T_in(e), L.T_out(e), L.f(e)});
  }
  for (int pos = 0; pos < N.num_edges(); ++pos) {
    int e = L.edge_order[static_cast<size_t>(pos)];
    const EdgeInfo& info = N.edges[static_cast<size_t>(e)];
    if (info.kind != EdgeKind::Pipe) continue;
    const Pipe& pipe = N.pipes[static_cast<size_t>(info.index_in_kind)];
    if (pipe.system == PipeSystem::Outgoing) {
      eq_row(ResidualTag::Family::SteamPressure, e, s_press2,
             {L.p(info.from), L.p(info.to), L.f(e), L.T_in(e), L.T_out(e)});
    }
  }
  for (int pos = 0; pos < N.num_edges(); ++pos) {
    int e = L.edge_order[static_cast<size_t>(pos)];
    const EdgeInfo& info = N.edges[static_cast<size_t>(e)];
    if (info.kind != EdgeKind::Pipe) continue;
    const Pipe& pipe = N.pipes[static_cast<size_t>(info.index_in_kind)];
    if (pipe.system == PipeSystem::Return) {
      std::vector<int> pat = {L.p(info.from), L.p(info.to), L.f(e)};
      if (L.pump_slot[static_cast<size_t>(info.index_in_kind)] >= 0)
        pat.push_back(L.alpha_of_pipe(info.index_in_kind));
      eq_row(ResidualTag::Family::WaterPressure, e, s_press, std::move(pat));
    }
  }
  for (int jpos = 0; jpos < N.num_junctions(); ++jpos) {
    int j = L.junction_order[static_cast<size_t>(jpos)];
    std::vector<int> departing = N.edges_out[static_cast<size_t>(j)];
    std::sort(departing.begin(), departing.end(), [&](int a, int b) {
      return L.edge_slot[static_cast<size_t>(a)] < L.edge_slot[static_cast<size_t>(b)];
    });
    for (int e : departing)
      eq_row(ResidualTag::Family::Mixing, e, s_temp, {L.T_in(e), L.T(j)});
  }
  for (int jpos = 0; jpos < N.num_junctions(); ++jpos) {
    int j = L.junction_order[static_cast<size_t>(jpos)];
    std::vector<int> pat;
    for (int e : N.edges_in[static_cast<size_t>(j)]) pat.push_back(L.f(e));
    for (int e : N.edges_out[static_cast<size_t>(j)]) pat.push_back(L.f(e));
    eq_row(ResidualTag::Family::Mass, j, s_mass, std::move(pat));
  }
  for (int jpos = 0; jpos < N.num_junctions(); ++jpos) {
    int j = L.junction_order[static_cast<size_t>(jpos)];
    std::vector<int> pat;
    for (int e : N.edges_in[static_cast<size_t>(j)]) {
      pat.push_back(L.f(e));
      pat.push_back(L.T_out(e));
    }
    for (int e : N.edges_out[static_cast<size_t>(j)]) {
      pat.push_back(L.f(e));
      pat.push_back(L.T_in(e));
    }
    eq_row(ResidualTag::Family::Energy, j, s_energy, std::move(pat));
  }

  // Inequalities, c_I >= 0 feasible.
  for (int pos = 0; pos < N.num_edges(); ++pos) {
    int e = L.edge_order[static_cast<size_t>(pos)];
    const EdgeInfo& info = N.edges[static_cast<size_t>(e)];
    if (info.kind != EdgeKind::Plant) continue;
    ineq_row(InequalityTag::Family::PlantCapacity, info.index_in_kind, s_power,
             {L.f(e), L.T_in(e), L.T_out(e)});
  }
  for (int slot = 0; slot < N.num_loads(); ++slot) {
    int l = L.load_order[static_cast<size_t>(slot)];
    int e = N.edge_of_load(l);
    ineq_row(InequalityTag::Family::LoadInletPhase, l, s_temp, {L.T_in(e)});
  }
  for (int slot = 0; slot < N.num_loads(); ++slot) {
    int l = L.load_order[static_cast<size_t>(slot)];
    int e = N.edge_of_load(l);
    ineq_row(InequalityTag::Family::LoadOutletPhase, l, s_temp, {L.T_out(e)});
  }
  for (int slot = 0; slot < N.num_loads(); ++slot) {
    int l = L.load_order[static_cast<size_t>(slot)];
    const EdgeInfo& info = N.edges[static_cast<size_t>(N.edge_of_load(l))];
    ineq_row(InequalityTag::Family::LoadPressureOrder, l, s_press,
             {L.p(info.from), L.p(info.to)});
  }

  P.eq_scale = Eigen::Map<Eigen::VectorXd>(eq_scale.data(), static_cast<long>(eq_scale.size()));
  P.ineq_scale =
      Eigen::Map<Eigen::VectorXd>(ineq_scale.data(), static_cast<long>(ineq_scale.size()));
  return P;
}

double NlpProblem::objective(const Eigen::VectorXd& x) const {
  double v = 0.0;
  for (int l = 0; l < net.num_loads(); ++l)
    v += weights.slack * (x[layout.QE(l)] + x[layout.QS(l)]) / units::watt_per_megawatt;
  for (int i = 0; i < static_cast<int>(net.plants.size()); ++i) {
    int e = net.edge_of_plant(i);
    const EdgeInfo& info = net.edges[static_cast<size_t>(e)];
    v += weights.plant_p_out * units::pascal_to_psi(x[layout.p(info.to)]);
    v += weights.plant_T_out * units::kelvin_to_celsius(x[layout.T_out(e)]);
    v += weights.plant_f * x[layout.f(e)];
    v += weights.plant_p_in * units::pascal_to_psi(x[layout.p(info.from)]);
  }
  return v;
}

void NlpProblem::objective_gradient(Eigen::VectorXd& g) const {
  g = Eigen::VectorXd::Zero(layout.n);
  for (int l = 0; l < net.num_loads(); ++l) {
    g[layout.QE(l)] += weights.slack / units::watt_per_megawatt;
    g[layout.QS(l)] += weights.slack / units::watt_per_megawatt;
  }
  for (int i = 0; i < static_cast<int>(net.plants.size()); ++i) {
    int e = net.edge_of_plant(i);
    const EdgeInfo& info = net.edges[static_cast<size_t>(e)];
    g[layout.p(info.to)] += weights.plant_p_out / units::pascal_per_psi;
    g[layout.T_out(e)] += weights.plant_T_out;
    g[layout.f(e)] += weights.plant_f;
    g[layout.p(info.from)] += weights.plant_p_in / units::pascal_per_psi;
  }
}

namespace {

// Shared by evaluate / try_evaluate: fills the workspace, reports the first
// non-finite row instead of throwing.
bool eval_impl(const NlpProblem& P, const Eigen::VectorXd& x, EvalWorkspace& ws,
               std::string* err) {
  const Network& N = P.net;
  const VariableLayout& L = P.layout;
  const CarrierConstants& C = N.constants;
  const int m = P.num_eq();
  const int mi = P.num_ineq();

  ws.c_E.resize(m);
  ws.c_I.resize(mi);
  if (ws.with_jacobian) {
    ws.J_E.resize(m, L.n);
    ws.J_I.resize(mi, L.n);
    ws.J_E.setZero();
    ws.J_I.setZero();
  }

  auto J = [&](int row, int col) -> double& { return ws.J_E(row, col); };

  for (int row = 0; row < m; ++row) {
    const ResidualTag tag = P.eq_tags[static_cast<size_t>(row)];
    const double s = P.eq_scale[row];
    switch (tag.family) {
      case ResidualTag::Family::LoadPower: {
        const int l = tag.entity;
        const int e = N.edge_of_load(l);
        EdgeState st;
        st.f = x[L.f(e)];
        st.T_in = x[L.T_in(e)];
        st.T_out = x[L.T_out(e)];
        st.QE = x[L.QE(l)];
        st.QS = x[L.QS(l)];
        const double Q = N.loads[static_cast<size_t>(l)].demand;
        if (ws.with_jacobian) {
          LoadPowerDerivs d = load_power_residual_d(st, Q, C);
          ws.c_E[row] = s * d.value;
          J(row, L.f(e)) = s * d.df;
          J(row, L.T_in(e)) = s * d.dT_in;
          J(row, L.T_out(e)) = s * d.dT_out;
          J(row, L.QE(l)) = s * d.dQE;
          J(row, L.QS(l)) = s * d.dQS;
        } else {
          ws.c_E[row] = s * load_power_residual(st, Q, C);
        }
        break;
      }
      case ResidualTag::Family::PipeTemperature: {
        const int e = tag.entity;
        const EdgeInfo& info = N.edges[static_cast<size_t>(e)];
        const Pipe& pipe = N.pipes[static_cast<size_t>(info.index_in_kind)];
        const double c = pipe.system == PipeSystem::Outgoing ? C.c_s : C.c_w;
        if (ws.with_jacobian) {
          PipeTemperatureDerivs d =
              pipe_temperature_residual_d(x[L.T_in(e)], x[L.T_out(e)], x[L.f(e)], pipe.length,
                                          pipe.heat_loss_coeff, c, N.bounds.T_ext);
          ws.c_E[row] = s * d.value;
          J(row, L.T_in(e)) = s * d.dT_in;
          J(row, L.T_out(e)) = s * d.dT_out;
          J(row, L.f(e)) = s * d.df;
        } else {
          ws.c_E[row] = s * pipe_temperature_residual(x[L.T_in(e)], x[L.T_out(e)], x[L.f(e)],
                                                      pipe.length, pipe.heat_loss_coeff, c,
                                                      N.bounds.T_ext);
        }
        break;
      }
      case ResidualTag::Family::SteamPressure: {
        const int e = tag.entity;
        const EdgeInfo& info = N.edges[static_cast<size_t>(e)];
        const Pipe& pipe = N.pipes[static_cast<size_t>(info.index_in_kind)];
        EdgeState st;
        st.f = x[L.f(e)];
        st.T_in = x[L.T_in(e)];
        st.T_out = x[L.T_out(e)];
        st.p_in = x[L.p(info.from)];
        st.p_out = x[L.p(info.to)];
        if (ws.with_jacobian) {
          SteamPressureDerivs d =
              steam_pressure_residual_d(st, pipe, C.R_s, N.bounds.T_ext, C.c_s);
          ws.c_E[row] = s * d.value;
          J(row, L.p(info.from)) = s * d.dp_in;
          J(row, L.p(info.to)) = s * d.dp_out;
          J(row, L.f(e)) = s * d.df;
          J(row, L.T_in(e)) = s * d.dT_in;
          J(row, L.T_out(e)) = s * d.dT_out;
        } else {
          ws.c_E[row] = s * steam_pressure_residual(st, pipe, C.R_s, N.bounds.T_ext, C.c_s);
        }
        break;
      }
      case ResidualTag::Family::WaterPressure: {
        const int e = tag.entity;
        const EdgeInfo& info = N.edges[static_cast<size_t>(e)];
        const int pipe_ix = info.index_in_kind;
        const Pipe& pipe = N.pipes[static_cast<size_t>(pipe_ix)];
        const bool pumped = L.pump_slot[static_cast<size_t>(pipe_ix)] >= 0;
        EdgeState st;
        st.f = x[L.f(e)];
        st.p_in = x[L.p(info.from)];
        st.p_out = x[L.p(info.to)];
        st.alpha = pumped ? x[L.alpha_of_pipe(pipe_ix)] : 0.0;
        if (ws.with_jacobian) {
          WaterPressureDerivs d = water_pressure_residual_d(st, pipe, C.rho_w);
          ws.c_E[row] = s * d.value;
          J(row, L.p(info.from)) = s * d.dp_in;
          J(row, L.p(info.to)) = s * d.dp_out;
          J(row, L.f(e)) = s * d.df;
          if (pumped) J(row, L.alpha_of_pipe(pipe_ix)) = s * d.dalpha;
        } else {
          ws.c_E[row] = s * water_pressure_residual(st, pipe, C.rho_w);
        }
        break;
      }
      case ResidualTag::Family::Mixing: {
        const int e = tag.entity;
        const EdgeInfo& info = N.edges[static_cast<size_t>(e)];
        ws.c_E[row] = s * (x[L.T_in(e)] - x[L.T(info.from)]);
        if (ws.with_jacobian) {
          J(row, L.T_in(e)) = s;
          J(row, L.T(info.from)) = -s;
        }
        break;
      }
      case ResidualTag::Family::Mass: {
        const int j = tag.entity;
        double r = 0.0;
        for (int e : N.edges_in[static_cast<size_t>(j)]) {
          r += x[L.f(e)];
          if (ws.with_jacobian) J(row, L.f(e)) += s;
        }
        for (int e : N.edges_out[static_cast<size_t>(j)]) {
          r -= x[L.f(e)];
          if (ws.with_jacobian) J(row, L.f(e)) -= s;
        }
        ws.c_E[row] = s * r;
        break;
      }
      case ResidualTag::Family::Energy: {
        const int j = tag.entity;
        double r = 0.0;
        for (int e : N.edges_in[static_cast<size_t>(j)]) {
          const EdgeInfo& info = N.edges[static_cast<size_t>(e)];
          const double f = x[L.f(e)], T = x[L.T_out(e)], c = info.c_out;
          r += f * c * T;
          if (ws.with_jacobian) {
            J(row, L.f(e)) += s * c * T;
            J(row, L.T_out(e)) += s * c * f;
          }
        }
        for (int e : N.edges_out[static_cast<size_t>(j)]) {
          const EdgeInfo& info = N.edges[static_cast<size_t>(e)];
          const double f = x[L.f(e)], T = x[L.T_in(e)], c = info.c_in;
          r -= f * c * T;
          if (ws.with_jacobian) {
            J(row, L.f(e)) -= s * c * T;
            J(row, L.T_in(e)) -= s * c * f;
          }
        }
        ws.c_E[row] = s * r;
        break;
      }
    }
  }

  for (int row = 0; row < mi; ++row) {
    const InequalityTag tag = P.ineq_tags[static_cast<size_t>(row)];
    const double s = P.ineq_scale[row];
    switch (tag.family) {
      case InequalityTag::Family::PlantCapacity: {
        const int i = tag.entity;
        const int e = N.edge_of_plant(i);
        const double cap = N.plants[static_cast<size_t>(i)].power_max;
        if (ws.with_jacobian) {
          PlantPowerDerivs d = plant_power_d(x[L.f(e)], x[L.T_in(e)], x[L.T_out(e)], C);
          ws.c_I[row] = s * (cap - d.value);
          ws.J_I(row, L.f(e)) = -s * d.df;
          ws.J_I(row, L.T_in(e)) = -s * d.dT_in;
          ws.J_I(row, L.T_out(e)) = -s * d.dT_out;
        } else {
          ws.c_I[row] =
              s * (cap - plant_power_unchecked(x[L.f(e)], x[L.T_in(e)], x[L.T_out(e)], C));
        }
        break;
      }
      case InequalityTag::Family::LoadInletPhase: {
        const int e = N.edge_of_load(tag.entity);
        ws.c_I[row] = s * (x[L.T_in(e)] - condensation_temperature);
        if (ws.with_jacobian) ws.J_I(row, L.T_in(e)) = s;
        break;
      }
      case InequalityTag::Family::LoadOutletPhase: {
        const int e = N.edge_of_load(tag.entity);
        ws.c_I[row] = s * (condensation_temperature - x[L.T_out(e)]);
        if (ws.with_jacobian) ws.J_I(row, L.T_out(e)) = -s;
        break;
      }
      case InequalityTag::Family::LoadPressureOrder: {
        const EdgeInfo& info = N.edges[static_cast<size_t>(N.edge_of_load(tag.entity))];
        ws.c_I[row] = s * (x[L.p(info.from)] - x[L.p(info.to)]);
        if (ws.with_jacobian) {
          ws.J_I(row, L.p(info.from)) = s;
          ws.J_I(row, L.p(info.to)) = -s;
        }
        break;
      }
    }
  }

  bool ok = ws.c_E.allFinite() && ws.c_I.allFinite();
  if (ok && ws.with_jacobian) ok = ws.J_E.allFinite() && ws.J_I.allFinite();
  if (!ok && err) {
    for (int row = 0; row < m; ++row)
      if (!std::isfinite(ws.c_E[row]) ||
          (ws.with_jacobian && !ws.J_E.row(row).allFinite())) {
        *err = "non-finite value in equality row " + std::to_string(row) + " (" +
               P.row_label(P.eq_tags[static_cast<size_t>(row)]) + ")";
        return false;
      }
    for (int row = 0; row < mi; ++row)
      if (!std::isfinite(ws.c_I[row]) ||
          (ws.with_jacobian && !ws.J_I.row(row).allFinite())) {
        *err = "non-finite value in inequality row " + std::to_string(row) + " (" +
               P.row_label(P.ineq_tags[static_cast<size_t>(row)]) + ")";
        return false;
      }
    *err = "non-finite value";
  }
  return ok;
}

}  // namespace

void NlpProblem::evaluate(const Eigen::VectorXd& x, EvalWorkspace& ws) const {
  std::string err;
  if (!eval_impl(*this, x, ws, &err)) throw NonFiniteValueError(err);
}

bool NlpProblem::try_evaluate(const Eigen::VectorXd& x, EvalWorkspace& ws) const noexcept {
  try {
    return eval_impl(*this, x, ws, nullptr);
  } catch (...) {
    return false;
  }
}

void NlpProblem::add_constraint_hessian(const Eigen::VectorXd& x, const Eigen::VectorXd& y_E,
                                        const Eigen::VectorXd& y_I, Eigen::MatrixXd& H) const {
  const Network& N = net;
  const VariableLayout& L = layout;
  const CarrierConstants& C = N.constants;

  for (int row = 0; row < num_eq(); ++row) {
    const double w = y_E[row] * eq_scale[row];
    if (w == 0.0) continue;
    const ResidualTag tag = eq_tags[static_cast<size_t>(row)];
    switch (tag.family) {
      case ResidualTag::Family::LoadPower: {
        const int l = tag.entity;
        const int e = N.edge_of_load(l);
        add_sym(H, L.f(e), L.T_in(e), w * C.c_s);
        add_sym(H, L.f(e), L.T_out(e), -w * C.c_w);
        break;
      }
      case ResidualTag::Family::PipeTemperature: {
        const int e = tag.entity;
        const EdgeInfo& info = N.edges[static_cast<size_t>(e)];
        const Pipe& pipe = N.pipes[static_cast<size_t>(info.index_in_kind)];
        const double c = pipe.system == PipeSystem::Outgoing ? C.c_s : C.c_w;
        PipeTemperatureDerivs d =
            pipe_temperature_residual_d(x[L.T_in(e)], x[L.T_out(e)], x[L.f(e)], pipe.length,
                                        pipe.heat_loss_coeff, c, N.bounds.T_ext);
        H(L.f(e), L.f(e)) += w * d.d2f_f;
        add_sym(H, L.f(e), L.T_in(e), w * d.d2f_Tin);
        break;
      }
      case ResidualTag::Family::SteamPressure: {
        const int e = tag.entity;
        const EdgeInfo& info = N.edges[static_cast<size_t>(e)];
        const Pipe& pipe = N.pipes[static_cast<size_t>(info.index_in_kind)];
        EdgeState st;
        st.f = x[L.f(e)];
        st.T_in = x[L.T_in(e)];
        st.T_out = x[L.T_out(e)];
        st.p_in = x[L.p(info.from)];
        st.p_out = x[L.p(info.to)];
        SteamPressureDerivs d = steam_pressure_residual_d(st, pipe, C.R_s, N.bounds.T_ext, C.c_s);
        H(L.p(info.from), L.p(info.from)) += w * d.d2pin_pin;
        H(L.p(info.to), L.p(info.to)) += w * d.d2pout_pout;
        H(L.f(e), L.f(e)) += w * d.d2f_f;
        add_sym(H, L.f(e), L.T_in(e), w * d.d2f_Tin);
        add_sym(H, L.f(e), L.T_out(e), w * d.d2f_Tout);
        break;
      }
      case ResidualTag::Family::WaterPressure: {
        const int e = tag.entity;
        const EdgeInfo& info = N.edges[static_cast<size_t>(e)];
        const Pipe& pipe = N.pipes[static_cast<size_t>(info.index_in_kind)];
        EdgeState st;
        st.f = x[L.f(e)];
        WaterPressureDerivs d = water_pressure_residual_d(st, pipe, C.rho_w);
        H(L.f(e), L.f(e)) += w * d.d2f_f;
        break;
      }
      case ResidualTag::Family::Energy: {
        const int j = tag.entity;
        for (int e : N.edges_in[static_cast<size_t>(j)])
          add_sym(H, L.f(e), L.T_out(e), w * N.edges[static_cast<size_t>(e)].c_out);
        for (int e : N.edges_out[static_cast<size_t>(j)])
          add_sym(H, L.f(e), L.T_in(e), -w * N.edges[static_cast<size_t>(e)].c_in);
        break;
      }
      case ResidualTag::Family::Mixing:
      case ResidualTag::Family::Mass:
        break;  // linear
    }
  }

  for (int row = 0; row < num_ineq(); ++row) {
    const double w = y_I[row] * ineq_scale[row];
    if (w == 0.0) continue;
    const InequalityTag tag = ineq_tags[static_cast<size_t>(row)];
    if (tag.family != InequalityTag::Family::PlantCapacity) continue;  // others linear
    const int e = net.edge_of_plant(tag.entity);
    PlantPowerDerivs d = plant_power_d(x[L.f(e)], x[L.T_in(e)], x[L.T_out(e)], C);
    add_sym(H, L.f(e), L.T_in(e), -w * d.d2f_Tin);
    add_sym(H, L.f(e), L.T_out(e), -w * d.d2f_Tout);
  }
}

Eigen::VectorXd NlpProblem::variable_scales() const {
  const VariableLayout& L = layout;
  const OperationalBounds& B = net.bounds;
  const double f0 = nominal_flow(net, flow_floor);
  Eigen::VectorXd s = Eigen::VectorXd::Ones(L.n);
  for (int j = 0; j < net.num_junctions(); ++j) {
    s[L.p(j)] = B.p_max;
    s[L.T(j)] = B.T_max;
  }
  for (int e = 0; e < net.num_edges(); ++e) {
    s[L.f(e)] = std::max(1.0, f0);
    s[L.T_in(e)] = B.T_max;
    s[L.T_out(e)] = B.T_max;
  }
  for (int pipe : net.pumped_pipes)
    s[L.alpha_of_pipe(pipe)] =
        std::max(1.0, net.pipes[static_cast<size_t>(pipe)].pump_boost_max);
  for (int l = 0; l < net.num_loads(); ++l) {
    s[L.QE(l)] = net.constants.c_L * std::max(1.0, f0);
    s[L.QS(l)] = net.constants.c_L * std::max(1.0, f0);
  }
  return s;
}

std::string NlpProblem::row_label(const ResidualTag& t) const {
  std::string entity;
  switch (t.family) {
    case ResidualTag::Family::Mass:
    case ResidualTag::Family::Energy:
      entity = net.junctions[static_cast<size_t>(t.entity)].id;
      break;
    case ResidualTag::Family::LoadPower:
      entity = net.loads[static_cast<size_t>(t.entity)].id;
      break;
    default:
      entity = net.edge_id(t.entity);
  }
  return std::string(family_name(t.family)) + ":" + entity;
}

std::string NlpProblem::row_label(const InequalityTag& t) const {
  std::string entity = t.family == InequalityTag::Family::PlantCapacity
                           ? net.plants[static_cast<size_t>(t.entity)].id
                           : net.loads[static_cast<size_t>(t.entity)].id;
  return std::string(family_name(t.family)) + ":" + entity;
}

NetworkState unflatten(const NlpProblem& problem, const Eigen::VectorXd& x) {
  const Network& N = problem.net;
  const VariableLayout& L = problem.layout;
  NetworkState st;
  st.x = x;
  st.junction_p.resize(static_cast<size_t>(N.num_junctions()));
  st.junction_T.resize(static_cast<size_t>(N.num_junctions()));
  for (int j = 0; j < N.num_junctions(); ++j) {
    st.junction_p[static_cast<size_t>(j)] = x[L.p(j)];
    st.junction_T[static_cast<size_t>(j)] = x[L.T(j)];
  }
  st.edge.resize(static_cast<size_t>(N.num_edges()));
  for (int e = 0; e < N.num_edges(); ++e) {
    const EdgeInfo& info = N.edges[static_cast<size_t>(e)];
    EdgeState& es = st.edge[static_cast<size_t>(e)];
    es.f = x[L.f(e)];
    es.T_in = x[L.T_in(e)];
    es.T_out = x[L.T_out(e)];
    es.p_in = x[L.p(info.from)];
    es.p_out = x[L.p(info.to)];
    if (info.kind == EdgeKind::Pipe && L.pump_slot[static_cast<size_t>(info.index_in_kind)] >= 0)
      es.alpha = x[L.alpha_of_pipe(info.index_in_kind)];
    if (info.kind == EdgeKind::Load) {
      es.QE = x[L.QE(info.index_in_kind)];
      es.QS = x[L.QS(info.index_in_kind)];
    }
  }
  st.objective = problem.objective(x);

  EvalWorkspace ws;
  ws.with_jacobian = false;
  if (problem.try_evaluate(x, ws)) {
    for (int row = 0; row < problem.num_eq(); ++row) {
      const double scaled = std::abs(ws.c_E[row]);
      st.max_scaled_equality = std::max(st.max_scaled_equality, scaled);
      const double si = scaled / problem.eq_scale[row];
      switch (problem.eq_tags[static_cast<size_t>(row)].family) {
        case ResidualTag::Family::Mass:
          st.max_mass_residual = std::max(st.max_mass_residual, si);
          break;
        case ResidualTag::Family::Energy:
          st.max_energy_residual = std::max(st.max_energy_residual, si);
          break;
        default:
          break;
      }
    }
  } else {
    st.max_scaled_equality = std::numeric_limits<double>::infinity();
  }
  return st;
}

Eigen::VectorXd initial_guess(const NlpProblem& problem) {
  const Network& N = problem.net;
  const VariableLayout& L = problem.layout;
  const double eps_f = problem.flow_floor;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(L.n);

  for (int j = 0; j < N.num_junctions(); ++j) {
    x[L.p(j)] = 0.5 * (problem.lower[L.p(j)] + problem.upper[L.p(j)]);
    x[L.T(j)] = N.junction_touches_steam[static_cast<size_t>(j)] ? 398.15 : 363.15;
  }

  // Spanning trees of the two pipe subgraphs, rooted at the first plant's
  // terminals; used to spread each load's nominal draw over the network.
  auto side_tree = [&](PipeSystem system, int root) {
    std::vector<int> parent(static_cast<size_t>(N.num_junctions()), -1);
    std::vector<int> via(static_cast<size_t>(N.num_junctions()), -1);
    if (root < 0) return std::make_pair(parent, via);
    std::vector<bool> seen(static_cast<size_t>(N.num_junctions()), false);
    seen[static_cast<size_t>(root)] = true;
    std::queue<int> q;
    q.push(root);
    while (!q.empty()) {
      int j = q.front();
      q.pop();
      auto visit = [&](int e, int other) {
        const EdgeInfo& info = N.edges[static_cast<size_t>(e)];
        if (info.kind != EdgeKind::Pipe) return;
        if (N.pipes[static_cast<size_t>(info.index_in_kind)].system != system) return;
        if (seen[static_cast<size_t>(other)]) return;
        seen[static_cast<size_t>(other)] = true;
        parent[static_cast<size_t>(other)] = j;
        via[static_cast<size_t>(other)] = e;
        q.push(other);
      };
      for (int e : N.edges_out[static_cast<size_t>(j)])
        visit(e, N.edges[static_cast<size_t>(e)].to);
      for (int e : N.edges_in[static_cast<size_t>(j)])
        visit(e, N.edges[static_cast<size_t>(e)].from);
    }
    return std::make_pair(parent, via);
  };

  int steam_root = -1, water_root = -1;
  if (!N.plants.empty()) {
    steam_root = N.junction_at(N.plants[0].to);
    water_root = N.junction_at(N.plants[0].from);
  }
  auto [steam_parent, steam_via] = side_tree(PipeSystem::Outgoing, steam_root);
  auto [water_parent, water_via] = side_tree(PipeSystem::Return, water_root);

  // Signed accumulation: each load pushes its draw along the tree path back
  // to the plant. On the steam side the carrier runs away from the root, on
  // the water side toward it.
  Eigen::VectorXd flow_acc = Eigen::VectorXd::Zero(N.num_edges());
  auto push_path = [&](const std::vector<int>& parent, const std::vector<int>& via, int start,
                       double f, bool flow_runs_toward_root) {
    for (int j = start; j >= 0 && parent[static_cast<size_t>(j)] >= 0;
         j = parent[static_cast<size_t>(j)]) {
      int e = via[static_cast<size_t>(j)];
      bool walk_forward = N.edges[static_cast<size_t>(e)].from == j;
      double sgn = (walk_forward == flow_runs_toward_root) ? 1.0 : -1.0;
      flow_acc[e] += sgn * f;
    }
  };

  double total_f = 0.0;
  for (int l = 0; l < N.num_loads(); ++l) {
    const int e = N.edge_of_load(l);
    const EdgeInfo& info = N.edges[static_cast<size_t>(e)];
    const double f_l =
        std::max(N.loads[static_cast<size_t>(l)].demand / N.constants.c_L, eps_f);
    total_f += f_l;
    flow_acc[e] = f_l;
    push_path(steam_parent, steam_via, info.from, f_l, false);
    push_path(water_parent, water_via, info.to, f_l, true);
  }
  for (int i = 0; i < static_cast<int>(N.plants.size()); ++i)
    flow_acc[N.edge_of_plant(i)] =
        std::max(total_f, eps_f) / static_cast<double>(N.plants.size());
  for (int e = 0; e < N.num_edges(); ++e) x[L.f(e)] = std::max(flow_acc[e], eps_f);

  // Edge temperatures: inlets inherit the junction guess (mixing-consistent),
  // pipe outlets follow the decay law, plant/load outlets sit at their side's
  // nominal level.
  for (int e = 0; e < N.num_edges(); ++e) {
    const EdgeInfo& info = N.edges[static_cast<size_t>(e)];
    x[L.T_in(e)] = x[L.T(info.from)];
    switch (info.kind) {
      case EdgeKind::Pipe: {
        const Pipe& pipe = N.pipes[static_cast<size_t>(info.index_in_kind)];
        const double c =
            pipe.system == PipeSystem::Outgoing ? N.constants.c_s : N.constants.c_w;
        x[L.T_out(e)] = pipe_outlet_temperature(x[L.T_in(e)], x[L.f(e)], pipe.length,
                                                pipe.heat_loss_coeff, c, N.bounds.T_ext);
        break;
      }
      case EdgeKind::Plant:
        x[L.T_out(e)] = 398.15;
        break;
      case EdgeKind::Load:
        x[L.T_out(e)] = 363.15;
        break;
    }
  }

  for (int pipe : N.pumped_pipes)
    x[L.alpha_of_pipe(pipe)] = 0.5 * N.pipes[static_cast<size_t>(pipe)].pump_boost_max;
  // QE/QS stay zero; the interior nudge below lifts them off the bound.

  const Eigen::VectorXd S = problem.variable_scales();
  for (int i = 0; i < L.n; ++i) {
    const double lo = problem.lower[i], hi = problem.upper[i];
    const bool has_lo = std::isfinite(lo), has_hi = std::isfinite(hi);
    if (has_lo && has_hi) {
      const double margin = std::min(1e-4 * S[i], 0.25 * (hi - lo));
      x[i] = std::clamp(x[i], lo + margin, hi - margin);
    } else if (has_lo) {
      x[i] = std::max(x[i], lo + 1e-4 * S[i]);
    } else if (has_hi) {
      x[i] = std::min(x[i], hi - 1e-4 * S[i]);
    }
  }
  return x;
}

SimulationSetpoints setpoints_from_state(const Network& net, const NetworkState& state) {
  SimulationSetpoints sp;
  for (int i = 0; i < static_cast<int>(net.plants.size()); ++i) {
    const EdgeState& es = state.edge[static_cast<size_t>(net.edge_of_plant(i))];
    sp.plants[net.plants[static_cast<size_t>(i)].id] =
        SimulationSetpoints::PlantSetpoint{es.T_out, es.p_out, es.p_in, std::nullopt};
  }
  for (int pipe : net.pumped_pipes)
    sp.pump_alpha[net.pipes[static_cast<size_t>(pipe)].id] =
        state.edge[static_cast<size_t>(net.edge_of_pipe(pipe))].alpha;
  for (int l = 0; l < net.num_loads(); ++l) {
    const EdgeState& es = state.edge[static_cast<size_t>(net.edge_of_load(l))];
    const std::string& id = net.loads[static_cast<size_t>(l)].id;
    sp.load_slacks[id] = {es.QE, es.QS};
    sp.load_T_out[id] = es.T_out;
  }
  return sp;
}

Eigen::VectorXd SimulationSystem::full_x(const Eigen::VectorXd& y) const {
  Eigen::VectorXd x = x_fixed;
  for (int k = 0; k < dim(); ++k) x[free_vars[static_cast<size_t>(k)]] = y[k];
  return x;
}

Eigen::VectorXd SimulationSystem::reduce_x(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y(dim());
  for (int k = 0; k < dim(); ++k) y[k] = x[free_vars[static_cast<size_t>(k)]];
  return y;
}

bool SimulationSystem::residual(const Eigen::VectorXd& y, Eigen::VectorXd& r, Eigen::MatrixXd* J,
                                EvalWorkspace& ws) const {
  ws.with_jacobian = J != nullptr;
  const Eigen::VectorXd x = full_x(y);
  if (!problem.try_evaluate(x, ws)) return false;
  const int nr = static_cast<int>(rows.size());
  r.resize(nr);
  for (int k = 0; k < nr; ++k) r[k] = ws.c_E[rows[static_cast<size_t>(k)]];
  if (J) {
    J->resize(nr, dim());
    for (int k = 0; k < nr; ++k)
      for (int c = 0; c < dim(); ++c)
        (*J)(k, c) = ws.J_E(rows[static_cast<size_t>(k)], free_vars[static_cast<size_t>(c)]);
  }
  return true;
}

SimulationSystem assemble_simulation(const Network& net, const SimulationSetpoints& sp) {
  SimulationSystem S{assemble_tnfo(net), {}, {}, Eigen::VectorXd(), -1};
  const Network& N = S.problem.net;
  const VariableLayout& L = S.problem.layout;

  std::vector<char> fixed(static_cast<size_t>(L.n), 0);
  S.x_fixed = Eigen::VectorXd::Zero(L.n);
  auto fix = [&](int ix, double v) {
    fixed[static_cast<size_t>(ix)] = 1;
    S.x_fixed[ix] = v;
  };
  std::vector<std::string> problems;

  std::size_t plants_seen = 0;
  for (int i = 0; i < static_cast<int>(N.plants.size()); ++i) {
    const Plant& plant = N.plants[static_cast<size_t>(i)];
    auto it = sp.plants.find(plant.id);
    if (it == sp.plants.end()) {
      problems.push_back("plant '" + plant.id + "' has no setpoints");
      continue;
    }
    ++plants_seen;
    const int e = N.edge_of_plant(i);
    const EdgeInfo& info = N.edges[static_cast<size_t>(e)];
    fix(L.T_out(e), it->second.T_out);
    fix(L.p(info.to), it->second.p_out);
    fix(L.p(info.from), it->second.p_in);
    if (it->second.f) fix(L.f(e), *it->second.f);
  }
  if (plants_seen != sp.plants.size())
    throw UnknownIdError("simulation setpoints name a plant the network lacks");

  std::size_t pumps_seen = 0;
  for (int pipe : N.pumped_pipes) {
    const std::string& id = N.pipes[static_cast<size_t>(pipe)].id;
    auto it = sp.pump_alpha.find(id);
    if (it == sp.pump_alpha.end()) {
      problems.push_back("pump boost for pipe '" + id + "' not fixed");
      continue;
    }
    ++pumps_seen;
    fix(L.alpha_of_pipe(pipe), it->second);
  }
  if (pumps_seen != sp.pump_alpha.size())
    throw UnknownIdError("simulation setpoints name a pumped pipe the network lacks");

  if (sp.swing_load && N.load_index.find(*sp.swing_load) == N.load_index.end())
    throw UnknownLoad("swing load '" + *sp.swing_load + "' not in network");

  std::size_t slacks_seen = 0, touts_seen = 0;
  for (int l = 0; l < N.num_loads(); ++l) {
    const std::string& id = N.loads[static_cast<size_t>(l)].id;
    const int e = N.edge_of_load(l);
    auto its = sp.load_slacks.find(id);
    if (its == sp.load_slacks.end()) {
      problems.push_back("slacks for load '" + id + "' not fixed");
    } else {
      ++slacks_seen;
      fix(L.QE(l), its->second.first);
      fix(L.QS(l), its->second.second);
    }
    const bool swing = sp.swing_load && *sp.swing_load == id;
    auto itt = sp.load_T_out.find(id);
    if (itt != sp.load_T_out.end()) ++touts_seen;
    if (swing) continue;  // outlet temperature released
    if (itt == sp.load_T_out.end())
      problems.push_back("outlet temperature for load '" + id + "' not fixed");
    else
      fix(L.T_out(e), itt->second);
  }
  if (slacks_seen != sp.load_slacks.size() || touts_seen != sp.load_T_out.size())
    throw UnknownIdError("simulation setpoints name a load the network lacks");

  for (int i = 0; i < L.n; ++i)
    if (!fixed[static_cast<size_t>(i)]) S.free_vars.push_back(i);

  // One junction mass row is implied by the others on a connected network;
  // drop the one at the first plant's inlet to make the system square.
  const int redundant_junction = N.plants.empty() ? -1 : N.junction_at(N.plants[0].from);
  for (int row = 0; row < S.problem.num_eq(); ++row) {
    const ResidualTag& t = S.problem.eq_tags[static_cast<size_t>(row)];
    if (t.family == ResidualTag::Family::Mass && t.entity == redundant_junction &&
        S.dropped_mass_row < 0) {
      S.dropped_mass_row = row;
      continue;
    }
    S.rows.push_back(row);
  }

  if (static_cast<int>(S.free_vars.size()) != static_cast<int>(S.rows.size())) {
    std::ostringstream os;
    os << "simulation system is not square: " << S.free_vars.size() << " free variables vs "
       << S.rows.size() << " residual rows";
    for (const auto& p : problems) os << "\n  - " << p;
    if (sp.plants.empty()) os << "\n  - no plant setpoints given";
    throw NonSquareSystemError(os.str());
  }
  return S;
}

}  // namespace tnfo
