#include "tnfo/scenario.hpp"

#include <algorithm>

#include "tnfo/errors.hpp"

namespace tnfo {

std::vector<double> effective_demands(const Network& net, const Scenario& scen) {
  if (scen.all_loads_multiplier < 0.0)
    throw InvalidArgument("scenario '" + scen.name + "': uniform load multiplier is negative");
  for (const auto& [id, m] : scen.load_multipliers) {
    if (net.load_index.find(id) == net.load_index.end())
      throw UnknownLoad("scenario '" + scen.name + "': unknown load '" + id + "'");
    if (m < 0.0)
      throw InvalidArgument("scenario '" + scen.name + "': multiplier for load '" + id +
                            "' is negative");
  }
  for (const auto& [id, q] : scen.load_overrides) {
    if (net.load_index.find(id) == net.load_index.end())
      throw UnknownLoad("scenario '" + scen.name + "': unknown load '" + id + "'");
    if (q < 0.0)
      throw InvalidArgument("scenario '" + scen.name + "': demand override for load '" + id +
                            "' is negative");
  }

  std::vector<double> demand(static_cast<size_t>(net.num_loads()));
  for (int l = 0; l < net.num_loads(); ++l) {
    const Load& load = net.loads[static_cast<size_t>(l)];
    auto itm = scen.load_multipliers.find(load.id);
    const double mult =
        itm != scen.load_multipliers.end() ? itm->second : scen.all_loads_multiplier;
    double q = load.demand * mult;
    auto ito = scen.load_overrides.find(load.id);
    if (ito != scen.load_overrides.end()) q = ito->second;
    demand[static_cast<size_t>(l)] = q;
  }
  return demand;
}

Network apply_scenario(const Network& net, const Scenario& scen) {
  Network out = net;
  const std::vector<double> demand = effective_demands(net, scen);
  for (int l = 0; l < out.num_loads(); ++l)
    out.loads[static_cast<size_t>(l)].demand = demand[static_cast<size_t>(l)];

  if (scen.plant_capacity) {
    double total = 0.0;
    for (const auto& p : out.plants) total += p.power_max;
    for (auto& p : out.plants) p.power_max *= *scen.plant_capacity / total;
  }

  const BoundsPatch& b = scen.bounds;
  if (b.T_max) out.bounds.T_max = *b.T_max;
  if (b.T_min) out.bounds.T_min = *b.T_min;
  if (b.T_ext) out.bounds.T_ext = *b.T_ext;
  if (b.p_max) out.bounds.p_max = *b.p_max;
  if (b.p_min) out.bounds.p_min = *b.p_min;
  if (b.plant_outlet_p_min) out.bounds.plant_outlet_p_min = *b.plant_outlet_p_min;
  if (b.pump_boost_max) out.bounds.pump_boost_max = *b.pump_boost_max;

  std::vector<Violation> v = find_violations(out);
  if (!v.empty()) throw ValidationError(std::move(v));
  return out;
}

std::string largest_load(const Network& net) {
  if (net.loads.empty()) throw InvalidArgument("largest_load: network has no loads");
  const Load* best = &net.loads[0];
  for (const auto& l : net.loads)
    if (l.demand > best->demand || (l.demand == best->demand && l.id < best->id)) best = &l;
  return best->id;
}

std::vector<Scenario> demand_stress_scenarios(const Network& net) {
  const std::string big = largest_load(net);
  std::vector<Scenario> out(5);
  out[0].name = "baseline";

  out[1].name = "local-surge";
  out[1].load_multipliers[big] = 3.0;

  out[2].name = "uniform-growth";
  out[2].all_loads_multiplier = 1.5;

  out[3].name = "combined-growth";
  out[3].all_loads_multiplier = 1.5;
  out[3].load_multipliers[big] = 3.0;

  out[4] = out[3];
  out[4].name = "capacity-shortfall";
  out[4].plant_capacity = 20e6;
  return out;
}

}  // namespace tnfo
