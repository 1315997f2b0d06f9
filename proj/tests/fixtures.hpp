#pragma once

#include <cstdint>

#include "tnfo/network.hpp"
#include "tnfo/units.hpp"

// Shared fixtures.
//
// minimal_cycle: the smallest network that validates, two junctions with the
// plant and the load antiparallel to the pipe pair. Good for counting and
// indexing tests; it cannot serve demand, because the steam pipe's momentum
// drop and the load's pressure ordering pull the same junction pair in
// opposite directions.
//
// series_loop: the smallest network that solves, four junctions with the
// phases separated: plant w2->s1, steam main s1->s2, load s2->w1, pumped
// water main w1->w2.

inline tnfo::Network minimal_cycle(double demand = 1e6, double capacity = 30e6) {
  using namespace tnfo;
  std::vector<Junction> junctions = {{"a"}, {"b"}};
  std::vector<Pipe> pipes = {
      {"out", "a", "b", PipeSystem::Outgoing, 100.0, 0.3, 0.01, 0.1, 0.0},
      {"ret", "a", "b", PipeSystem::Return, 100.0, 0.2, 0.002, 0.05, 0.0},
  };
  std::vector<Plant> plants = {{"plant", "b", "a", capacity}};
  std::vector<Load> loads = {{"city", "b", "a", demand}};
  return build_network(std::move(junctions), std::move(pipes), std::move(plants),
                       std::move(loads));
}

inline tnfo::Network series_loop(double demand = 1e6, double capacity = 30e6) {
  using namespace tnfo;
  std::vector<Junction> junctions = {{"s1"}, {"s2"}, {"w1"}, {"w2"}};
  std::vector<Pipe> pipes = {
      {"main-out", "s1", "s2", PipeSystem::Outgoing, 100.0, 0.3, 0.01, 0.1, 0.0},
      {"main-ret", "w1", "w2", PipeSystem::Return, 100.0, 0.2, 0.002, 0.05,
       units::psi_to_pascal(5.0)},
  };
  std::vector<Plant> plants = {{"plant", "w2", "s1", capacity}};
  std::vector<Load> loads = {{"city", "s2", "w1", demand}};
  return build_network(std::move(junctions), std::move(pipes), std::move(plants),
                       std::move(loads));
}

// Deterministic uniform numbers for randomized checks (splitmix64).
struct TestRng {
  std::uint64_t state;
  explicit TestRng(std::uint64_t seed) : state(seed) {}
  double uniform() {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
};
