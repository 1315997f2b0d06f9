#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tnfo/network.hpp"

// Contingency descriptions: named, composable edits of demands, plant
// capacity, and operational bounds. Application order per load:
// specific multiplier (else the uniform one), then absolute override.
namespace tnfo {

struct BoundsPatch {
  std::optional<double> T_max, T_min, T_ext;                  // K
  std::optional<double> p_max, p_min, plant_outlet_p_min;     // Pa
  std::optional<double> pump_boost_max;                       // Pa
  bool empty() const {
    return !T_max && !T_min && !T_ext && !p_max && !p_min && !plant_outlet_p_min &&
           !pump_boost_max;
  }
};

struct Scenario {
  std::string name = "baseline";
  double all_loads_multiplier = 1.0;
  std::map<std::string, double> load_multipliers;  // load id -> factor, replaces the uniform one
  std::map<std::string, double> load_overrides;    // load id -> demand in W, applied last
  std::optional<double> plant_capacity;            // W; scales every plant proportionally
  BoundsPatch bounds;
};

// Demand each load ends up with, ordered like net.loads.
// Throws UnknownLoad for ids the network lacks, InvalidArgument for negative factors.
std::vector<double> effective_demands(const Network& net, const Scenario& scen);

// Copy of the network with the scenario folded in; revalidates, so a patch
// that inverts bounds fails loudly here.
Network apply_scenario(const Network& net, const Scenario& scen);

// The five demand-stress cases used throughout: identity, tripling the
// largest load, a uniform +50%, both at once, and the combined demands
// against a 20 MW plant.
std::vector<Scenario> demand_stress_scenarios(const Network& net);

// Id of the load with the highest base demand (smallest id on ties).
std::string largest_load(const Network& net);

}  // namespace tnfo
