#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "tnfo/errors.hpp"
#include "tnfo/units.hpp"

// Network model of a two-sided district heating system: an outgoing (steam)
// pipe system and a co-located return (water) system, bridged by plants
// (water in, steam out) and loads (steam in, water out). Directed edges;
// every quantity is strict SI internally.

namespace tnfo {

// Water condenses / evaporates at this fixed temperature in the plant and
// load power balances.
inline constexpr double condensation_temperature = 373.15;  // [K]

struct CarrierConstants {
  double R_s = 461.5;     // specific gas constant of steam [J/(kg K)]
  double c_s = 1996.0;    // isobaric heat capacity of steam [J/(kg K)]
  double c_w = 4186.0;    // heat capacity of water [J/(kg K)]
  double c_L = 2.23e6;    // latent heat of vaporization [J/kg]
  double rho_s = 0.5;     // nominal steam density [kg/m^3]
  double rho_w = 1000.0;  // water density [kg/m^3]
};

struct OperationalBounds {
  double T_max = units::celsius_to_kelvin(150.0);  // [K]
  double T_min = units::celsius_to_kelvin(80.0);   // [K]
  double T_ext = units::celsius_to_kelvin(25.0);   // ambient ground temperature [K]
  double p_max = units::psi_to_pascal(80.0);       // [Pa]
  double p_min = units::psi_to_pascal(5.0);        // [Pa]
  // Lower bound on the pressure of plant outlet junctions (regulated supply
  // pressure). Applied on top of p_min.
  double plant_outlet_p_min = units::psi_to_pascal(40.0);  // [Pa]
  // Default boost ceiling given to pumped return pipes by the generator.
  double pump_boost_max = units::psi_to_pascal(5.0);  // [Pa]
};

struct Junction {
  std::string id;
};

enum class PipeSystem { Outgoing, Return };

struct Pipe {
  std::string id;
  std::string from, to;  // junction ids
  PipeSystem system = PipeSystem::Outgoing;
  double length = 0.0;           // [m]
  double diameter = 0.0;         // inner diameter [m]
  double friction_factor = 0.0;  // Darcy friction factor [-]
  double heat_loss_coeff = 0.0;  // per-length heat loss coefficient [W/(m K)]
  double pump_boost_max = 0.0;   // max pump pressure boost [Pa]; > 0 only on return pipes
};

struct Plant {
  std::string id;
  std::string from, to;    // return-side inlet junction, outgoing-side outlet junction
  double power_max = 0.0;  // capacity [W]
};

struct Load {
  std::string id;
  std::string from, to;  // outgoing-side inlet junction, return-side outlet junction
  double demand = 0.0;   // requested thermal power [W]
};

enum class EdgeKind { Pipe, Plant, Load };

// Flattened edge view in canonical order (pipes, then plants, then loads).
// c_in / c_out are the heat capacities of the carrier at each endpoint:
// steam for outgoing pipes, plant outlets and load inlets; water otherwise.
struct EdgeInfo {
  EdgeKind kind;
  int index_in_kind;  // position inside pipes / plants / loads
  int from, to;       // junction indices
  double c_in, c_out;
};

class Network {
 public:
  std::vector<Junction> junctions;
  std::vector<Pipe> pipes;
  std::vector<Plant> plants;
  std::vector<Load> loads;
  CarrierConstants constants;
  OperationalBounds bounds;

  // Derived structure, rebuilt by build_network / rebuild_index().
  std::vector<EdgeInfo> edges;                       // pipes, plants, loads
  std::vector<std::vector<int>> edges_in;            // per junction: incoming edge indices
  std::vector<std::vector<int>> edges_out;           // per junction: outgoing edge indices
  std::vector<int> pumped_pipes;                     // pipe indices with pump_boost_max > 0
  std::vector<bool> junction_touches_steam;          // any steam-phase endpoint incident
  std::unordered_map<std::string, int> junction_index;
  std::unordered_map<std::string, int> pipe_index;
  std::unordered_map<std::string, int> plant_index;
  std::unordered_map<std::string, int> load_index;

  int num_junctions() const { return static_cast<int>(junctions.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
  int num_pumped() const { return static_cast<int>(pumped_pipes.size()); }
  int num_loads() const { return static_cast<int>(loads.size()); }

  int edge_of_pipe(int pipe) const { return pipe; }
  int edge_of_plant(int plant) const { return static_cast<int>(pipes.size()) + plant; }
  int edge_of_load(int load) const {
    return static_cast<int>(pipes.size() + plants.size()) + load;
  }

  const std::string& edge_id(int e) const;
  int junction_at(const std::string& id) const;  // throws UnknownIdError
  double total_demand() const;                   // [W]

  // Recompute the derived structure after mutating the component lists.
  // Requires junction/edge endpoint ids to resolve; throws ValidationError on
  // dangling references.
  void rebuild_index();
};

// Collect every validation finding without throwing.
std::vector<Violation> find_violations(const Network& candidate);

// Validate and index a network. Throws ValidationError listing all findings.
Network build_network(std::vector<Junction> junctions, std::vector<Pipe> pipes,
                      std::vector<Plant> plants, std::vector<Load> loads,
                      CarrierConstants constants = {}, OperationalBounds bounds = {});

// pi d^2 / 4; throws InvalidArgument for d <= 0.
double cross_section_area(double diameter);

// Deterministic synthetic network in the shape of a real district system:
// one plant, co-located outgoing/return pipe networks (a mirrored tree plus
// chord pipes when the pipe count exceeds the tree size), loads bridging the
// sides, and pump boosts on the return trunk.
struct SynthSpec {
  int plants = 1;
  int loads = 45;
  int outgoing_pipes = 68;
  int return_pipes = 68;
  int pumps = 11;
  double total_demand = 15.14e6;   // [W]
  double plant_capacity = 30.0e6;  // [W]
  std::uint64_t seed = 1;
};

Network synth_network(const SynthSpec& spec);

}  // namespace tnfo
