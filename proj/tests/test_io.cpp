#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "tnfo/io.hpp"
#include "tnfo/run.hpp"
#include "tnfo/units.hpp"

using namespace tnfo;

namespace {

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag)
      : path(std::filesystem::temp_directory_path() /
             ("tnfo-" + tag + "-" + std::to_string(::getpid()))) {
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

NetworkState guess_state(const NlpProblem& p) { return unflatten(p, initial_guess(p)); }

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("network json: byte-identical round trip") {
    for (const Network& net : {series_loop(), synth_network({})}) {
      const std::string text = serialize_network(net);
      Network parsed = parse_network_text(text);
      CHECK(serialize_network(parsed) == text);
      CHECK(parsed.num_junctions() == net.num_junctions());
      CHECK(parsed.total_demand() == net.total_demand());
      CHECK(parsed.bounds.p_max == net.bounds.p_max);
      CHECK(parsed.constants.c_L == net.constants.c_L);
    }
  }

  TEST_CASE("network json: display units convert to SI on input") {
    // The same four-junction loop, written in psi / C / MW.
    const std::string text = R"({
      "schema": "tnfo-net/1",
      "units": {"pressure": "psi", "temperature": "C", "power": "MW"},
      "junctions": [{"id": "s1"}, {"id": "s2"}, {"id": "w1"}, {"id": "w2"}],
      "pipes": [
        {"id": "main-out", "from": "s1", "to": "s2", "system": "outgoing",
         "length": 100, "diameter": 0.3, "friction_factor": 0.01, "heat_loss_coeff": 0.1},
        {"id": "main-ret", "from": "w1", "to": "w2", "system": "return",
         "length": 100, "diameter": 0.2, "friction_factor": 0.002, "heat_loss_coeff": 0.05,
         "pump_boost_max": 5}
      ],
      "plants": [{"id": "plant", "from": "w2", "to": "s1", "power_max": 30}],
      "loads": [{"id": "city", "from": "s2", "to": "w1", "demand": 1}]
    })";
    Network net = parse_network_text(text, "inline");
    CHECK(net.loads[0].demand == 1e6);
    CHECK(net.plants[0].power_max == 30e6);
    CHECK(net.pipes[1].pump_boost_max == units::psi_to_pascal(5.0));
    // Identical to the programmatic fixture, byte for byte.
    CHECK(serialize_network(net) == serialize_network(series_loop()));
  }

  TEST_CASE("network json: malformed documents are named precisely") {
    auto base = [](const std::string& mid) {
      return R"({"schema": "tnfo-net/1", "units": {"pressure": "Pa", "temperature": "K", "power": "W"}, )" +
             mid + "}";
    };
    const std::string ok_body =
        R"("junctions": [], "pipes": [], "plants": [], "loads": [])";

    CHECK_THROWS_AS(parse_network_text("{"), ParseError);
    CHECK_THROWS_AS(parse_network_text("[]"), SchemaError);
    CHECK_THROWS_AS(parse_network_text("{}"), SchemaError);  // no schema tag
    CHECK_THROWS_AS(parse_network_text(R"({"schema": "tnfo-net/9", "units": {}})"),
                    SchemaVersionMismatch);
    CHECK_THROWS_AS(parse_network_text(R"({"schema": "tnfo-net/1"})"), UnitError);
    CHECK_THROWS_AS(
        parse_network_text(
            R"({"schema": "tnfo-net/1", "units": {"pressure": "bar", "temperature": "K", "power": "W"}})"),
        UnitError);
    CHECK_THROWS_AS(parse_network_text(base(ok_body + R"(, "surprise": 1)")), SchemaError);
    CHECK_THROWS_AS(
        parse_network_text(base(
            R"("junctions": [{"id": "a"}], "pipes": [{"id": "p", "from": "a", "to": "a", "system": "diagonal", "length": 1, "diameter": 1, "friction_factor": 1, "heat_loss_coeff": 1}], "plants": [], "loads": [])")),
        SchemaError);
    CHECK_THROWS_AS(parse_network_text(base(ok_body)), ValidationError);  // empty network
  }

  TEST_CASE("scenario json: round trip and unit conversion") {
    Scenario s;
    s.name = "winter-peak";
    s.all_loads_multiplier = 1.25;
    s.load_multipliers["city"] = 3.0;
    s.load_overrides["mill"] = 2.5e6;
    s.plant_capacity = 20e6;
    s.bounds.T_max = 413.15;
    s.bounds.p_min = units::psi_to_pascal(6.0);

    const std::string text = serialize_scenario(s);
    Scenario t = parse_scenario_text(text);
    CHECK(serialize_scenario(t) == text);
    CHECK(t.name == "winter-peak");
    CHECK(t.load_multipliers.at("city") == 3.0);
    CHECK(t.load_overrides.at("mill") == 2.5e6);
    REQUIRE(t.plant_capacity.has_value());
    CHECK(*t.plant_capacity == 20e6);
    CHECK(t.bounds.T_max == 413.15);

    Scenario u = parse_scenario_text(R"({
      "schema": "tnfo-scn/1",
      "units": {"pressure": "psi", "temperature": "C", "power": "MW"},
      "name": "stress",
      "load_overrides": {"city": 2},
      "plant_capacity": 20,
      "bounds": {"T_max": 140}
    })");
    CHECK(u.load_overrides.at("city") == 2e6);
    CHECK(*u.plant_capacity == 20e6);
    CHECK(*u.bounds.T_max == doctest::Approx(413.15).epsilon(1e-12));
    CHECK(u.all_loads_multiplier == 1.0);

    CHECK_THROWS_AS(parse_scenario_text(R"({
      "schema": "tnfo-scn/1",
      "units": {"pressure": "Pa", "temperature": "K", "power": "W"},
      "surprise": true
    })"),
                    SchemaError);
  }

  TEST_CASE("setpoints json: round trip against the network") {
    NlpProblem p = assemble_tnfo(series_loop());
    NetworkState st = guess_state(p);
    SimulationSetpoints sp = setpoints_from_state(p.net, st);

    const std::string text = serialize_setpoints(sp, p.net);
    SimulationSetpoints sq = parse_setpoints_text(text);
    CHECK(serialize_setpoints(sq, p.net) == text);
    CHECK(sq.plants.at("plant").T_out == sp.plants.at("plant").T_out);
    CHECK(!sq.plants.at("plant").f.has_value());
    CHECK(sq.pump_alpha.at("main-ret") == sp.pump_alpha.at("main-ret"));
    CHECK(sq.load_T_out.at("city") == sp.load_T_out.at("city"));

    // Optional plant flow and swing load survive the trip.
    sp.plants["plant"].f = 0.5;
    sp.swing_load = "city";
    const std::string text2 = serialize_setpoints(sp, p.net);
    SimulationSetpoints sr = parse_setpoints_text(text2);
    CHECK(serialize_setpoints(sr, p.net) == text2);
    REQUIRE(sr.plants.at("plant").f.has_value());
    CHECK(*sr.plants.at("plant").f == 0.5);
    CHECK(sr.swing_load == "city");

    SimulationSetpoints bad = sp;
    bad.pump_alpha["ghost"] = 1.0;
    CHECK_THROWS_AS(serialize_setpoints(bad, p.net), UnknownIdError);

    CHECK_THROWS_AS(parse_setpoints_text(R"({
      "schema": "tnfo-set/1",
      "units": {"pressure": "Pa", "temperature": "K", "power": "W"},
      "load_slacks": {"city": {"QE": 0}}
    })"),
                    SchemaError);  // QS missing
  }

  TEST_CASE("csv reader: header-keyed rows, no quoting") {
    TempDir dir("csv");
    write_file(dir.file("t.csv"), "a,b,c\r\n1,2,3\n\n4,5,6\n");
    auto rows = read_csv(dir.file("t.csv"));
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].at("a") == "1");
    CHECK(rows[0].at("c") == "3");
    CHECK(rows[1].at("b") == "5");

    write_file(dir.file("ragged.csv"), "a,b\n1\n");
    CHECK_THROWS_AS(read_csv(dir.file("ragged.csv")), ParseError);

    CHECK_THROWS_AS(read_file(dir.file("missing.csv")), IoError);
  }

  TEST_CASE("summary csv: pinned header, display units, sanitized text") {
    RunSummary r;
    r.name = "base,line";  // the comma must not shift columns
    r.status = SolveStatus::optimal;
    r.solved = true;
    r.required = 15.14e6;
    r.supplied = 16e6;
    r.pipe_losses = 0.86e6;
    r.unmet_pct = 1.5;
    r.excess_pct = 0.0;
    r.plant_T_out = units::celsius_to_kelvin(124.86);
    r.plant_p_out = units::psi_to_pascal(40.0);
    r.plant_p_in = units::psi_to_pascal(5.0);
    r.plant_f = 6.43;
    r.objective = 123.456;
    r.iterations = 42;

    TempDir dir("summary");
    write_summary_csv({r}, dir.file("summary.csv"));
    const std::string text = read_file(dir.file("summary.csv"));
    CHECK(text.substr(0, text.find('\n')) ==
          "name,status,solved,error,required_MW,supplied_MW,pipe_losses_MW,unmet_pct,excess_pct,"
          "plant_T_out_C,plant_p_out_psi,plant_p_in_psi,plant_f_kgps,objective,iterations");

    auto rows = read_csv(dir.file("summary.csv"));
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].at("name") == "base;line");
    CHECK(rows[0].at("status") == "optimal");
    CHECK(rows[0].at("solved") == "1");
    CHECK(rows[0].at("required_MW") == "15.14");
    CHECK(rows[0].at("plant_T_out_C") == "124.86");
    CHECK(rows[0].at("plant_p_out_psi") == "40");
    CHECK(rows[0].at("plant_p_in_psi") == "5");
    CHECK(rows[0].at("plant_f_kgps") == "6.43");
    CHECK(rows[0].at("unmet_pct") == "1.5");
    CHECK(rows[0].at("iterations") == "42");
  }

  TEST_CASE("sweep csv: pinned header") {
    SweepPoint p;
    p.multiplier = 1.25;
    p.error = "no,luck";
    TempDir dir("sweep");
    write_sweep_csv({p}, dir.file("sweep.csv"));
    const std::string text = read_file(dir.file("sweep.csv"));
    CHECK(text.substr(0, text.find('\n')) ==
          "multiplier,solved,error,plant_T_out_C,plant_f_kgps,pipe_losses_MW,supplied_MW,"
          "unmet_pct,objective");
    auto rows = read_csv(dir.file("sweep.csv"));
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].at("multiplier") == "1.25");
    CHECK(rows[0].at("solved") == "0");
    CHECK(rows[0].at("error") == "no;luck");
    CHECK(rows[0].at("plant_T_out_C") == "-273.15");  // 0 K, display conversion pinned
  }

  TEST_CASE("graphviz rendering") {
    NlpProblem p = assemble_tnfo(series_loop());
    NetworkState st = guess_state(p);
    const std::string dot = render_dot(st, p.net);
    CHECK(dot.find("digraph tnfo {") == 0);
    CHECK(dot.find("rankdir=LR") != std::string::npos);
    CHECK(dot.find("\"s1\" -> \"s2\"") != std::string::npos);
    CHECK(dot.find("penwidth=3.6 color=firebrick") != std::string::npos);   // 0.3 m steam main
    CHECK(dot.find("penwidth=2.4 color=steelblue") != std::string::npos);   // 0.2 m water main
    CHECK(dot.find("color=forestgreen style=dashed") != std::string::npos); // plant
    CHECK(dot.find("color=darkorange style=dashed") != std::string::npos);  // load
    CHECK(render_dot(st, p.net) == dot);
  }

  TEST_CASE("export bundle: complete and byte-deterministic") {
    NlpProblem p = assemble_tnfo(series_loop());
    NetworkState st = guess_state(p);
    RunSummary sum = summarize("smoke", p.net, st, SolveReport{});

    TempDir dir("export");
    export_results(st, p.net, sum, dir.file("a"));
    export_results(st, p.net, sum, dir.file("b"));

    for (const char* name :
         {"junctions.csv", "edges.csv", "summary.csv", "setpoints.json", "network.dot"}) {
      CAPTURE(name);
      const std::string a = read_file((dir.path / "a" / name).string());
      CHECK(a == read_file((dir.path / "b" / name).string()));
      CHECK(!a.empty());
    }

    auto junctions = read_csv((dir.path / "a" / "junctions.csv").string());
    REQUIRE(junctions.size() == 4);
    CHECK(junctions[0].at("id") == "s1");
    CHECK(junctions[3].at("id") == "w2");

    auto edges = read_csv((dir.path / "a" / "edges.csv").string());
    REQUIRE(edges.size() == 4);
    CHECK(edges[0].at("id") == "city");
    CHECK(edges[0].at("kind") == "load");
    CHECK(edges[1].at("id") == "main-out");
    CHECK(edges[1].at("kind") == "pipe");
    CHECK(edges[3].at("id") == "plant");

    SimulationSetpoints sp = parse_setpoints((dir.path / "a" / "setpoints.json").string());
    CHECK(sp.plants.count("plant") == 1);

    auto sums = read_csv((dir.path / "a" / "summary.csv").string());
    REQUIRE(sums.size() == 1);
    CHECK(sums[0].at("name") == "smoke");
    CHECK(sums[0].at("solved") == "0");  // a raw guess is no solution
  }

  TEST_CASE("unmet fraction") {
    NlpProblem p = assemble_tnfo(series_loop());
    Eigen::VectorXd x = initial_guess(p);
    x[p.layout.QS(0)] = 0.25e6;
    NetworkState st = unflatten(p, x);
    CHECK(unmet_fraction(st, p.net) == doctest::Approx(0.25).epsilon(1e-12));

    Scenario off;
    off.all_loads_multiplier = 0.0;
    NlpProblem p0 = assemble_tnfo(series_loop(), off);
    NetworkState st0 = guess_state(p0);
    CHECK_THROWS_AS(unmet_fraction(st0, p0.net), ZeroDemandError);
  }

  TEST_CASE("batch rows: isolated failures, disambiguated names") {
    Network net = series_loop();
    Scenario ok1, ok2, broken;
    ok1.name = "base";
    ok2.name = "base";  // duplicate on purpose
    broken.name = "broken";
    broken.load_multipliers["ghost"] = 2.0;

    auto rows = run_batch(net, {ok1, ok2, broken});
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].summary.name == "base");
    CHECK(rows[1].summary.name == "base#2");
    CHECK(rows[2].summary.name == "broken");

    CHECK(rows[0].summary.solved);
    CHECK(rows[0].summary.error.empty());
    REQUIRE(rows[0].state.has_value());
    CHECK(rows[0].summary.required == 1e6);
    CHECK(rows[0].summary.supplied > 1e6);  // demand plus pipe losses

    CHECK(!rows[2].summary.solved);
    CHECK(rows[2].summary.error.find("ghost") != std::string::npos);
    CHECK(!rows[2].state.has_value());
  }

  TEST_CASE("sensitivity sweep: inclusive endpoints, warm-started points") {
    Network net = series_loop();
    auto pts = sensitivity_sweep(net, 1.0, 1.5, 3);
    REQUIRE(pts.size() == 3);
    CHECK(pts[0].multiplier == 1.0);
    CHECK(pts[1].multiplier == 1.25);
    CHECK(pts[2].multiplier == 1.5);
    for (const auto& pt : pts) {
      CAPTURE(pt.multiplier);
      CHECK(pt.solved);
      CHECK(pt.error.empty());
    }
    CHECK(pts[2].supplied > pts[0].supplied);

    auto single = sensitivity_sweep(net, 1.2, 9.9, 1);
    REQUIRE(single.size() == 1);
    CHECK(single[0].multiplier == 1.2);

    CHECK_THROWS_AS(sensitivity_sweep(net, 1.0, 2.0, 0), InvalidArgument);
  }
}
