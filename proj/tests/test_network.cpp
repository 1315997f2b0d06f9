#include <doctest.h>

#include <algorithm>
#include <numbers>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "tnfo/network.hpp"

using namespace tnfo;

namespace {

bool has_code(const std::vector<Violation>& v, Violation::Code c) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.code == c; });
}

}  // namespace

TEST_SUITE("network") {
  TEST_CASE("indexing of the four-junction loop") {
    Network net = series_loop();

    REQUIRE(net.num_junctions() == 4);
    REQUIRE(net.pipes.size() == 2);
    REQUIRE(net.plants.size() == 1);
    REQUIRE(net.num_loads() == 1);
    REQUIRE(net.num_edges() == 4);

    CHECK(net.junction_at("s1") == 0);
    CHECK(net.junction_at("w2") == 3);
    CHECK_THROWS_AS(net.junction_at("nope"), UnknownIdError);

    // Canonical edge order: pipes, then plants, then loads.
    CHECK(net.edge_of_pipe(0) == 0);
    CHECK(net.edge_of_plant(0) == 2);
    CHECK(net.edge_of_load(0) == 3);
    CHECK(net.edge_id(0) == "main-out");
    CHECK(net.edge_id(2) == "plant");
    CHECK(net.edge_id(3) == "city");

    const EdgeInfo& steam_main = net.edges[0];
    CHECK(steam_main.kind == EdgeKind::Pipe);
    CHECK(steam_main.from == net.junction_at("s1"));
    CHECK(steam_main.to == net.junction_at("s2"));
    CHECK(steam_main.c_in == net.constants.c_s);
    CHECK(steam_main.c_out == net.constants.c_s);

    const EdgeInfo& water_main = net.edges[1];
    CHECK(water_main.c_in == net.constants.c_w);
    CHECK(water_main.c_out == net.constants.c_w);

    // Plant and load bridge the phases: water in / steam out and vice versa.
    const EdgeInfo& plant = net.edges[2];
    CHECK(plant.kind == EdgeKind::Plant);
    CHECK(plant.from == net.junction_at("w2"));
    CHECK(plant.to == net.junction_at("s1"));
    CHECK(plant.c_in == net.constants.c_w);
    CHECK(plant.c_out == net.constants.c_s);

    const EdgeInfo& load = net.edges[3];
    CHECK(load.kind == EdgeKind::Load);
    CHECK(load.c_in == net.constants.c_s);
    CHECK(load.c_out == net.constants.c_w);

    CHECK(net.total_demand() == 1e6);
    REQUIRE(net.pumped_pipes == std::vector<int>{1});

    // Steam reaches exactly the junctions with a steam-phase endpoint.
    CHECK(net.junction_touches_steam[static_cast<size_t>(net.junction_at("s1"))]);
    CHECK(net.junction_touches_steam[static_cast<size_t>(net.junction_at("s2"))]);
    CHECK(!net.junction_touches_steam[static_cast<size_t>(net.junction_at("w1"))]);
    CHECK(!net.junction_touches_steam[static_cast<size_t>(net.junction_at("w2"))]);

    // Incidence lists: every edge appears once on each side.
    int s2 = net.junction_at("s2");
    REQUIRE(net.edges_in[static_cast<size_t>(s2)] == std::vector<int>{0});
    REQUIRE(net.edges_out[static_cast<size_t>(s2)] == std::vector<int>{3});
  }

  TEST_CASE("two-junction cycle still validates") {
    Network net = minimal_cycle();
    CHECK(net.num_edges() == 4);
    CHECK(find_violations(net).empty());
    CHECK(net.pumped_pipes.empty());
    // With plant and load antiparallel to the pipes, both junctions see steam.
    CHECK(net.junction_touches_steam[0]);
    CHECK(net.junction_touches_steam[1]);
  }

  TEST_CASE("violation catalogue") {
    SUBCASE("duplicate ids") {
      Network net = series_loop();
      net.junctions.push_back({"s1"});
      CHECK(has_code(find_violations(net), Violation::Code::DuplicateId));

      Network net2 = series_loop();
      net2.pipes.push_back(net2.pipes[0]);
      CHECK(has_code(find_violations(net2), Violation::Code::DuplicateId));
    }
    SUBCASE("dangling junction reference") {
      Network net = series_loop();
      net.pipes[0].to = "ghost";
      CHECK(has_code(find_violations(net), Violation::Code::DanglingJunctionRef));
    }
    SUBCASE("disconnected graph") {
      Network net = series_loop();
      net.junctions.push_back({"x1"});
      net.junctions.push_back({"x2"});
      net.pipes.push_back({"island", "x1", "x2", PipeSystem::Return, 10.0, 0.1, 0.01, 0.1, 0.0});
      CHECK(has_code(find_violations(net), Violation::Code::DisconnectedGraph));
    }
    SUBCASE("pump on a steam pipe") {
      Network net = series_loop();
      net.pipes[0].pump_boost_max = 100.0;
      CHECK(has_code(find_violations(net), Violation::Code::PumpOnOutgoingPipe));
    }
    SUBCASE("plantless network") {
      Network net = series_loop();
      net.plants.clear();
      CHECK(has_code(find_violations(net), Violation::Code::PlantlessNetwork));
    }
    SUBCASE("empty component lists") {
      Network net;
      auto v = find_violations(net);
      CHECK(has_code(v, Violation::Code::EmptyComponent));
    }
    SUBCASE("junction without throughflow") {
      // Rerouting the load to w2 leaves w1 with an outgoing pipe only.
      Network net = series_loop();
      net.loads[0].to = "w2";
      CHECK(has_code(find_violations(net), Violation::Code::JunctionDegree));
    }
    SUBCASE("nonpositive quantities") {
      Network net = series_loop();
      net.pipes[0].length = -1.0;
      CHECK(has_code(find_violations(net), Violation::Code::NonPositiveQuantity));

      // Zero demand is legal (scenarios may switch a load off); negative is not.
      Network net2 = series_loop();
      net2.loads[0].demand = 0.0;
      CHECK(find_violations(net2).empty());
      net2.loads[0].demand = -1.0;
      CHECK(has_code(find_violations(net2), Violation::Code::NonPositiveQuantity));

      Network net3 = series_loop();
      net3.plants[0].power_max = 0.0;
      CHECK(has_code(find_violations(net3), Violation::Code::NonPositiveQuantity));

      Network net4 = series_loop();
      net4.pipes[1].diameter = 0.0;
      CHECK(has_code(find_violations(net4), Violation::Code::NonPositiveQuantity));
    }
    SUBCASE("inverted bounds") {
      Network net = series_loop();
      net.bounds.T_min = net.bounds.T_max + 1.0;
      CHECK(has_code(find_violations(net), Violation::Code::BoundsOrder));

      Network net2 = series_loop();
      net2.bounds.p_min = net2.bounds.p_max * 2.0;
      CHECK(has_code(find_violations(net2), Violation::Code::BoundsOrder));
    }
  }

  TEST_CASE("build_network reports every finding at once") {
    std::vector<Junction> junctions = {{"a"}, {"a"}};
    std::vector<Pipe> pipes = {
        {"p", "a", "missing", PipeSystem::Outgoing, -5.0, 0.3, 0.01, 0.1, 0.0}};
    std::vector<Plant> plants;
    std::vector<Load> loads = {{"l", "a", "a", 1e6}};
    try {
      build_network(std::move(junctions), std::move(pipes), std::move(plants), std::move(loads));
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(has_code(e.violations, Violation::Code::DuplicateId));
      CHECK(has_code(e.violations, Violation::Code::DanglingJunctionRef));
      CHECK(has_code(e.violations, Violation::Code::PlantlessNetwork));
      CHECK(has_code(e.violations, Violation::Code::NonPositiveQuantity));
      CHECK(std::string(e.what()).find("plant") != std::string::npos);
    }
  }

  TEST_CASE("rebuild_index follows mutations") {
    Network net = series_loop();
    net.pipes.push_back(
        {"spur", "s2", "s2x", PipeSystem::Outgoing, 50.0, 0.2, 0.01, 0.1, 0.0});
    CHECK_THROWS_AS(net.rebuild_index(), ValidationError);

    net.junctions.push_back({"s2x"});
    net.rebuild_index();
    CHECK(net.num_edges() == 5);
    CHECK(net.pipe_index.at("spur") == 2);
    CHECK(net.edge_id(2) == "spur");
    CHECK(net.edges[2].to == net.junction_at("s2x"));
  }

  TEST_CASE("synthetic network: default spec") {
    Network net = synth_network({});
    CHECK(net.num_junctions() == 134);
    CHECK(net.pipes.size() == 136);
    CHECK(net.plants.size() == 1);
    CHECK(net.num_loads() == 45);
    CHECK(net.num_pumped() == 11);
    CHECK(net.num_edges() == 182);
    CHECK(find_violations(net).empty());

    CHECK(net.total_demand() == doctest::Approx(15.14e6).epsilon(1e-9));
    CHECK(net.plants[0].power_max == 30.0e6);

    for (int p : net.pumped_pipes) CHECK(net.pipes[static_cast<size_t>(p)].system == PipeSystem::Return);

    // One load dominates the city at the published share of total demand.
    double largest = 0.0;
    for (const auto& l : net.loads) largest = std::max(largest, l.demand);
    CHECK(largest == doctest::Approx(15.14e6 * 3.145 / 15.14).epsilon(1e-9));
  }

  TEST_CASE("synthetic network: deterministic in the seed") {
    SynthSpec spec;
    Network a = synth_network(spec);
    Network b = synth_network(spec);
    REQUIRE(a.pipes.size() == b.pipes.size());
    for (size_t i = 0; i < a.pipes.size(); ++i) {
      CHECK(a.pipes[i].id == b.pipes[i].id);
      CHECK(a.pipes[i].from == b.pipes[i].from);
      CHECK(a.pipes[i].to == b.pipes[i].to);
      CHECK(a.pipes[i].length == b.pipes[i].length);
      CHECK(a.pipes[i].diameter == b.pipes[i].diameter);
    }
    for (size_t i = 0; i < a.loads.size(); ++i) {
      CHECK(a.loads[i].from == b.loads[i].from);
      CHECK(a.loads[i].demand == b.loads[i].demand);
    }

    spec.seed = 2;
    Network c = synth_network(spec);
    auto shape = [](const Network& n) {
      std::string s;
      for (const auto& p : n.pipes) s += p.from + ">" + p.to + ";";
      for (const auto& l : n.loads) s += l.from + ";";
      return s;
    };
    CHECK(shape(a) != shape(c));
  }

  TEST_CASE("synthetic network: small specs and every seed validate") {
    SynthSpec spec;
    spec.loads = 3;
    spec.outgoing_pipes = spec.return_pipes = 6;
    spec.pumps = 2;
    spec.total_demand = 2.5e6;
    spec.plant_capacity = 8e6;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
      spec.seed = seed;
      Network net = synth_network(spec);
      CAPTURE(seed);
      CHECK(find_violations(net).empty());
      CHECK(net.num_junctions() == 10);
      CHECK(net.pipes.size() == 12);
      CHECK(net.num_loads() == 3);
    }
  }

  TEST_CASE("synthetic network: impossible requests") {
    auto spec_with = [](auto mutate) {
      SynthSpec s;
      mutate(s);
      return s;
    };
    CHECK_THROWS_AS(synth_network(spec_with([](SynthSpec& s) { s.plants = 2; })), InfeasibleSpec);
    CHECK_THROWS_AS(synth_network(spec_with([](SynthSpec& s) { s.return_pipes = 67; })),
                    InfeasibleSpec);
    CHECK_THROWS_AS(
        synth_network(spec_with([](SynthSpec& s) { s.outgoing_pipes = s.return_pipes = 2; })),
        InfeasibleSpec);
    CHECK_THROWS_AS(synth_network(spec_with([](SynthSpec& s) { s.loads = 0; })), InfeasibleSpec);
    CHECK_THROWS_AS(synth_network(spec_with([](SynthSpec& s) { s.loads = 67; })), InfeasibleSpec);
    CHECK_THROWS_AS(synth_network(spec_with([](SynthSpec& s) { s.pumps = 69; })), InfeasibleSpec);
    CHECK_THROWS_AS(synth_network(spec_with([](SynthSpec& s) { s.plant_capacity = 0.0; })),
                    InfeasibleSpec);
  }

  TEST_CASE("cross-section area guards") {
    CHECK(cross_section_area(1.0) == doctest::Approx(std::numbers::pi / 4.0).epsilon(1e-15));
    CHECK_THROWS_AS(cross_section_area(-1.0), NonpositiveDiameter);
  }
}
