#pragma once

#include <map>
#include <string>
#include <vector>

#include "tnfo/nlp.hpp"
#include "tnfo/run.hpp"

// File formats. Networks, scenarios, and setpoints are JSON documents with a
// schema tag and an explicit units block (pressure psi|Pa, temperature C|K,
// power MW|W); unknown fields are rejected. Results are CSV plus a Graphviz
// annotation file. Everything is byte-deterministic: sorted ids, fixed float
// formatting.
namespace tnfo {

inline constexpr const char* network_schema = "tnfo-net/1";
inline constexpr const char* scenario_schema = "tnfo-scn/1";
inline constexpr const char* setpoints_schema = "tnfo-set/1";

Network parse_network_text(const std::string& text, const std::string& origin = "<string>");
Network parse_network(const std::string& path);
std::string serialize_network(const Network& net);
void write_network(const Network& net, const std::string& path);

Scenario parse_scenario_text(const std::string& text, const std::string& origin = "<string>");
Scenario parse_scenario(const std::string& path);
std::string serialize_scenario(const Scenario& scen);
void write_scenario(const Scenario& scen, const std::string& path);

SimulationSetpoints parse_setpoints_text(const std::string& text,
                                         const std::string& origin = "<string>");
SimulationSetpoints parse_setpoints(const std::string& path);
std::string serialize_setpoints(const SimulationSetpoints& sp, const Network& net);
void write_setpoints(const SimulationSetpoints& sp, const Network& net,
                     const std::string& path);

// Writes junctions.csv, edges.csv, summary.csv, setpoints.json and
// network.dot into dir (created if missing). Display units; rows sorted by id.
void export_results(const NetworkState& state, const Network& net, const RunSummary& summary,
                    const std::string& dir);

void write_summary_csv(const std::vector<RunSummary>& rows, const std::string& path);
void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& path);

std::string render_dot(const NetworkState& state, const Network& net);

// Minimal CSV reader for tests and round-trips: header row, no quoting.
std::vector<std::map<std::string, std::string>> read_csv(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace tnfo
