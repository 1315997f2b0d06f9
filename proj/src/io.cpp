#include "tnfo/io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string_view>

#include <json.hpp>

#include "tnfo/errors.hpp"
#include "tnfo/units.hpp"

namespace tnfo {

namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Commas and line breaks would shift CSV columns; the reader does no quoting.
std::string csv_safe(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

json parse_doc(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(origin + ": " + e.what());
  }
  if (!doc.is_object()) throw SchemaError(origin + ": top level must be an object");
  return doc;
}

const json* find(const json& o, const char* key) {
  auto it = o.find(key);
  return it == o.end() ? nullptr : &*it;
}

const json& need(const json& o, const char* key, const std::string& where) {
  const json* v = find(o, key);
  if (!v) throw SchemaError(where + ": missing field '" + key + "'");
  return *v;
}

double as_num(const json& v, const std::string& where) {
  if (!v.is_number()) throw SchemaError(where + ": expected a number");
  return v.get<double>();
}

std::string as_str(const json& v, const std::string& where) {
  if (!v.is_string()) throw SchemaError(where + ": expected a string");
  return v.get<std::string>();
}

const json& as_obj(const json& v, const std::string& where) {
  if (!v.is_object()) throw SchemaError(where + ": expected an object");
  return v;
}

const json& as_arr(const json& v, const std::string& where) {
  if (!v.is_array()) throw SchemaError(where + ": expected an array");
  return v;
}

void reject_unknown(const json& o, std::initializer_list<std::string_view> allowed,
                    const std::string& where) {
  for (auto it = o.begin(); it != o.end(); ++it) {
    bool known = false;
    for (std::string_view a : allowed)
      if (it.key() == a) {
        known = true;
        break;
      }
    if (!known) throw SchemaError(where + ": unknown field '" + it.key() + "'");
  }
}

void check_schema(const json& doc, const char* want, const std::string& origin) {
  const std::string got = as_str(need(doc, "schema", origin), origin + ".schema");
  if (got != want)
    throw SchemaVersionMismatch(origin + ": schema '" + got + "', this reader handles '" + want +
                                "'");
}

// Unit declarations; converted to SI on the way in.
struct UnitSet {
  double p_mul = 1.0;    // pressure -> Pa
  bool celsius = false;  // temperature -> K
  double pow_mul = 1.0;  // power -> W
};

UnitSet parse_units(const json& doc, const std::string& origin) {
  const json* u = find(doc, "units");
  if (!u) throw UnitError(origin + ": missing units block");
  if (!u->is_object()) throw UnitError(origin + ": units must be an object");
  reject_unknown(*u, {"pressure", "temperature", "power"}, origin + ": units");
  UnitSet out;

  const json* p = find(*u, "pressure");
  if (!p) throw UnitError(origin + ": units.pressure missing (want \"psi\" or \"Pa\")");
  const std::string ps = as_str(*p, origin + ": units.pressure");
  if (ps == "psi")
    out.p_mul = units::pascal_per_psi;
  else if (ps != "Pa")
    throw UnitError(origin + ": units.pressure: unknown unit '" + ps + "' (want psi or Pa)");

  const json* t = find(*u, "temperature");
  if (!t) throw UnitError(origin + ": units.temperature missing (want \"C\" or \"K\")");
  const std::string ts = as_str(*t, origin + ": units.temperature");
  if (ts == "C")
    out.celsius = true;
  else if (ts != "K")
    throw UnitError(origin + ": units.temperature: unknown unit '" + ts + "' (want C or K)");

  const json* w = find(*u, "power");
  if (!w) throw UnitError(origin + ": units.power missing (want \"MW\" or \"W\")");
  const std::string wsv = as_str(*w, origin + ": units.power");
  if (wsv == "MW")
    out.pow_mul = units::watt_per_megawatt;
  else if (wsv != "W")
    throw UnitError(origin + ": units.power: unknown unit '" + wsv + "' (want MW or W)");

  return out;
}

double to_pa(double v, const UnitSet& u) { return v * u.p_mul; }
double to_k(double v, const UnitSet& u) { return u.celsius ? units::celsius_to_kelvin(v) : v; }
double to_w(double v, const UnitSet& u) { return v * u.pow_mul; }

json si_units() { return json{{"pressure", "Pa"}, {"temperature", "K"}, {"power", "W"}}; }

const char* kind_name(EdgeKind k) {
  switch (k) {
    case EdgeKind::Pipe: return "pipe";
    case EdgeKind::Plant: return "plant";
    case EdgeKind::Load: return "load";
  }
  return "?";
}

template <typename T>
std::vector<const T*> sorted_by_id(const std::vector<T>& v) {
  std::vector<const T*> out;
  out.reserve(v.size());
  for (const T& e : v) out.push_back(&e);
  std::sort(out.begin(), out.end(), [](const T* a, const T* b) { return a->id < b->id; });
  return out;
}

}  // namespace

// ---- network ----------------------------------------------------------------

Network parse_network_text(const std::string& text, const std::string& origin) {
  const json doc = parse_doc(text, origin);
  check_schema(doc, network_schema, origin);
  const UnitSet u = parse_units(doc, origin);
  reject_unknown(doc, {"schema", "units", "constants", "bounds", "junctions", "pipes", "plants",
                       "loads"},
                 origin);

  CarrierConstants cc;
  if (const json* c = find(doc, "constants")) {
    const std::string w = origin + ": constants";
    as_obj(*c, w);
    reject_unknown(*c,
                   {"steam_gas_constant", "steam_heat_capacity", "water_heat_capacity",
                    "latent_heat", "steam_density", "water_density"},
                   w);
    if (const json* v = find(*c, "steam_gas_constant")) cc.R_s = as_num(*v, w + ".steam_gas_constant");
    if (const json* v = find(*c, "steam_heat_capacity")) cc.c_s = as_num(*v, w + ".steam_heat_capacity");
    if (const json* v = find(*c, "water_heat_capacity")) cc.c_w = as_num(*v, w + ".water_heat_capacity");
    if (const json* v = find(*c, "latent_heat")) cc.c_L = as_num(*v, w + ".latent_heat");
    if (const json* v = find(*c, "steam_density")) cc.rho_s = as_num(*v, w + ".steam_density");
    if (const json* v = find(*c, "water_density")) cc.rho_w = as_num(*v, w + ".water_density");
  }

  OperationalBounds ob;
  if (const json* b = find(doc, "bounds")) {
    const std::string w = origin + ": bounds";
    as_obj(*b, w);
    reject_unknown(
        *b, {"p_min", "p_max", "T_min", "T_max", "T_ext", "plant_outlet_p_min", "pump_boost_max"},
        w);
    if (const json* v = find(*b, "p_min")) ob.p_min = to_pa(as_num(*v, w + ".p_min"), u);
    if (const json* v = find(*b, "p_max")) ob.p_max = to_pa(as_num(*v, w + ".p_max"), u);
    if (const json* v = find(*b, "T_min")) ob.T_min = to_k(as_num(*v, w + ".T_min"), u);
    if (const json* v = find(*b, "T_max")) ob.T_max = to_k(as_num(*v, w + ".T_max"), u);
    if (const json* v = find(*b, "T_ext")) ob.T_ext = to_k(as_num(*v, w + ".T_ext"), u);
    if (const json* v = find(*b, "plant_outlet_p_min"))
      ob.plant_outlet_p_min = to_pa(as_num(*v, w + ".plant_outlet_p_min"), u);
    if (const json* v = find(*b, "pump_boost_max"))
      ob.pump_boost_max = to_pa(as_num(*v, w + ".pump_boost_max"), u);
  }

  std::vector<Junction> junctions;
  {
    const json& arr = as_arr(need(doc, "junctions", origin), origin + ".junctions");
    int i = 0;
    for (const json& e : arr) {
      const std::string w = origin + ": junctions[" + std::to_string(i++) + "]";
      as_obj(e, w);
      reject_unknown(e, {"id"}, w);
      junctions.push_back({as_str(need(e, "id", w), w + ".id")});
    }
  }

  std::vector<Pipe> pipes;
  {
    const json& arr = as_arr(need(doc, "pipes", origin), origin + ".pipes");
    int i = 0;
    for (const json& e : arr) {
      const std::string w = origin + ": pipes[" + std::to_string(i++) + "]";
      as_obj(e, w);
      reject_unknown(e,
                     {"id", "from", "to", "system", "length", "diameter", "friction_factor",
                      "heat_loss_coeff", "pump_boost_max"},
                     w);
      Pipe p;
      p.id = as_str(need(e, "id", w), w + ".id");
      p.from = as_str(need(e, "from", w), w + ".from");
      p.to = as_str(need(e, "to", w), w + ".to");
      const std::string sys = as_str(need(e, "system", w), w + ".system");
      if (sys == "outgoing")
        p.system = PipeSystem::Outgoing;
      else if (sys == "return")
        p.system = PipeSystem::Return;
      else
        throw SchemaError(w + ".system: expected 'outgoing' or 'return', got '" + sys + "'");
      p.length = as_num(need(e, "length", w), w + ".length");
      p.diameter = as_num(need(e, "diameter", w), w + ".diameter");
      p.friction_factor = as_num(need(e, "friction_factor", w), w + ".friction_factor");
      p.heat_loss_coeff = as_num(need(e, "heat_loss_coeff", w), w + ".heat_loss_coeff");
      if (const json* v = find(e, "pump_boost_max"))
        p.pump_boost_max = to_pa(as_num(*v, w + ".pump_boost_max"), u);
      pipes.push_back(std::move(p));
    }
  }

  std::vector<Plant> plants;
  {
    const json& arr = as_arr(need(doc, "plants", origin), origin + ".plants");
    int i = 0;
    for (const json& e : arr) {
      const std::string w = origin + ": plants[" + std::to_string(i++) + "]";
      as_obj(e, w);
      reject_unknown(e, {"id", "from", "to", "power_max"}, w);
      plants.push_back({as_str(need(e, "id", w), w + ".id"), as_str(need(e, "from", w), w + ".from"),
                        as_str(need(e, "to", w), w + ".to"),
                        to_w(as_num(need(e, "power_max", w), w + ".power_max"), u)});
    }
  }

  std::vector<Load> loads;
  {
    const json& arr = as_arr(need(doc, "loads", origin), origin + ".loads");
    int i = 0;
    for (const json& e : arr) {
      const std::string w = origin + ": loads[" + std::to_string(i++) + "]";
      as_obj(e, w);
      reject_unknown(e, {"id", "from", "to", "demand"}, w);
      loads.push_back({as_str(need(e, "id", w), w + ".id"), as_str(need(e, "from", w), w + ".from"),
                       as_str(need(e, "to", w), w + ".to"),
                       to_w(as_num(need(e, "demand", w), w + ".demand"), u)});
    }
  }

  return build_network(std::move(junctions), std::move(pipes), std::move(plants),
                       std::move(loads), cc, ob);
}

Network parse_network(const std::string& path) {
  return parse_network_text(read_file(path), path);
}

std::string serialize_network(const Network& net) {
  json doc;
  doc["schema"] = network_schema;
  doc["units"] = si_units();
  doc["constants"] = json{{"steam_gas_constant", net.constants.R_s},
                          {"steam_heat_capacity", net.constants.c_s},
                          {"water_heat_capacity", net.constants.c_w},
                          {"latent_heat", net.constants.c_L},
                          {"steam_density", net.constants.rho_s},
                          {"water_density", net.constants.rho_w}};
  doc["bounds"] = json{{"p_min", net.bounds.p_min},
                       {"p_max", net.bounds.p_max},
                       {"T_min", net.bounds.T_min},
                       {"T_max", net.bounds.T_max},
                       {"T_ext", net.bounds.T_ext},
                       {"plant_outlet_p_min", net.bounds.plant_outlet_p_min},
                       {"pump_boost_max", net.bounds.pump_boost_max}};

  json junctions = json::array();
  for (const Junction* j : sorted_by_id(net.junctions)) junctions.push_back(json{{"id", j->id}});
  doc["junctions"] = std::move(junctions);

  json pipes = json::array();
  for (const Pipe* p : sorted_by_id(net.pipes))
    pipes.push_back(json{{"id", p->id},
                         {"from", p->from},
                         {"to", p->to},
                         {"system", p->system == PipeSystem::Outgoing ? "outgoing" : "return"},
                         {"length", p->length},
                         {"diameter", p->diameter},
                         {"friction_factor", p->friction_factor},
                         {"heat_loss_coeff", p->heat_loss_coeff},
                         {"pump_boost_max", p->pump_boost_max}});
  doc["pipes"] = std::move(pipes);

  json plants = json::array();
  for (const Plant* p : sorted_by_id(net.plants))
    plants.push_back(
        json{{"id", p->id}, {"from", p->from}, {"to", p->to}, {"power_max", p->power_max}});
  doc["plants"] = std::move(plants);

  json loads = json::array();
  for (const Load* l : sorted_by_id(net.loads))
    loads.push_back(
        json{{"id", l->id}, {"from", l->from}, {"to", l->to}, {"demand", l->demand}});
  doc["loads"] = std::move(loads);

  return doc.dump(2) + "\n";
}

void write_network(const Network& net, const std::string& path) {
  write_file(path, serialize_network(net));
}

// ---- scenario ----------------------------------------------------------------

Scenario parse_scenario_text(const std::string& text, const std::string& origin) {
  const json doc = parse_doc(text, origin);
  check_schema(doc, scenario_schema, origin);
  const UnitSet u = parse_units(doc, origin);
  reject_unknown(doc,
                 {"schema", "units", "name", "all_loads_multiplier", "load_multipliers",
                  "load_overrides", "plant_capacity", "bounds"},
                 origin);

  Scenario s;
  if (const json* v = find(doc, "name")) s.name = as_str(*v, origin + ".name");
  if (const json* v = find(doc, "all_loads_multiplier"))
    s.all_loads_multiplier = as_num(*v, origin + ".all_loads_multiplier");
  if (const json* v = find(doc, "load_multipliers")) {
    const std::string w = origin + ": load_multipliers";
    as_obj(*v, w);
    for (auto it = v->begin(); it != v->end(); ++it)
      s.load_multipliers[it.key()] = as_num(it.value(), w + "." + it.key());
  }
  if (const json* v = find(doc, "load_overrides")) {
    const std::string w = origin + ": load_overrides";
    as_obj(*v, w);
    for (auto it = v->begin(); it != v->end(); ++it)
      s.load_overrides[it.key()] = to_w(as_num(it.value(), w + "." + it.key()), u);
  }
  if (const json* v = find(doc, "plant_capacity"))
    s.plant_capacity = to_w(as_num(*v, origin + ".plant_capacity"), u);
  if (const json* b = find(doc, "bounds")) {
    const std::string w = origin + ": bounds";
    as_obj(*b, w);
    reject_unknown(
        *b, {"p_min", "p_max", "T_min", "T_max", "T_ext", "plant_outlet_p_min", "pump_boost_max"},
        w);
    if (const json* v = find(*b, "p_min")) s.bounds.p_min = to_pa(as_num(*v, w + ".p_min"), u);
    if (const json* v = find(*b, "p_max")) s.bounds.p_max = to_pa(as_num(*v, w + ".p_max"), u);
    if (const json* v = find(*b, "T_min")) s.bounds.T_min = to_k(as_num(*v, w + ".T_min"), u);
    if (const json* v = find(*b, "T_max")) s.bounds.T_max = to_k(as_num(*v, w + ".T_max"), u);
    if (const json* v = find(*b, "T_ext")) s.bounds.T_ext = to_k(as_num(*v, w + ".T_ext"), u);
    if (const json* v = find(*b, "plant_outlet_p_min"))
      s.bounds.plant_outlet_p_min = to_pa(as_num(*v, w + ".plant_outlet_p_min"), u);
    if (const json* v = find(*b, "pump_boost_max"))
      s.bounds.pump_boost_max = to_pa(as_num(*v, w + ".pump_boost_max"), u);
  }
  return s;
}

Scenario parse_scenario(const std::string& path) {
  return parse_scenario_text(read_file(path), path);
}

std::string serialize_scenario(const Scenario& s) {
  json doc;
  doc["schema"] = scenario_schema;
  doc["units"] = si_units();
  doc["name"] = s.name;
  doc["all_loads_multiplier"] = s.all_loads_multiplier;
  doc["load_multipliers"] = json(s.load_multipliers);
  doc["load_overrides"] = json(s.load_overrides);
  if (s.plant_capacity) doc["plant_capacity"] = *s.plant_capacity;
  if (!s.bounds.empty()) {
    json b = json::object();
    if (s.bounds.p_min) b["p_min"] = *s.bounds.p_min;
    if (s.bounds.p_max) b["p_max"] = *s.bounds.p_max;
    if (s.bounds.T_min) b["T_min"] = *s.bounds.T_min;
    if (s.bounds.T_max) b["T_max"] = *s.bounds.T_max;
    if (s.bounds.T_ext) b["T_ext"] = *s.bounds.T_ext;
    if (s.bounds.plant_outlet_p_min) b["plant_outlet_p_min"] = *s.bounds.plant_outlet_p_min;
    if (s.bounds.pump_boost_max) b["pump_boost_max"] = *s.bounds.pump_boost_max;
    doc["bounds"] = std::move(b);
  }
  return doc.dump(2) + "\n";
}

void write_scenario(const Scenario& scen, const std::string& path) {
  write_file(path, serialize_scenario(scen));
}

// ---- setpoints ----------------------------------------------------------------

SimulationSetpoints parse_setpoints_text(const std::string& text, const std::string& origin) {
  const json doc = parse_doc(text, origin);
  check_schema(doc, setpoints_schema, origin);
  const UnitSet u = parse_units(doc, origin);
  reject_unknown(doc, {"schema", "units", "plants", "pump_alpha", "load_slacks", "load_T_out",
                       "swing_load"},
                 origin);

  SimulationSetpoints sp;
  if (const json* v = find(doc, "plants")) {
    const std::string w = origin + ": plants";
    as_obj(*v, w);
    for (auto it = v->begin(); it != v->end(); ++it) {
      const std::string pw = w + "." + it.key();
      as_obj(it.value(), pw);
      reject_unknown(it.value(), {"T_out", "p_out", "p_in", "f"}, pw);
      SimulationSetpoints::PlantSetpoint ps{};
      ps.T_out = to_k(as_num(need(it.value(), "T_out", pw), pw + ".T_out"), u);
      ps.p_out = to_pa(as_num(need(it.value(), "p_out", pw), pw + ".p_out"), u);
      ps.p_in = to_pa(as_num(need(it.value(), "p_in", pw), pw + ".p_in"), u);
      if (const json* fv = find(it.value(), "f")) ps.f = as_num(*fv, pw + ".f");
      sp.plants[it.key()] = ps;
    }
  }
  if (const json* v = find(doc, "pump_alpha")) {
    const std::string w = origin + ": pump_alpha";
    as_obj(*v, w);
    for (auto it = v->begin(); it != v->end(); ++it)
      sp.pump_alpha[it.key()] = to_pa(as_num(it.value(), w + "." + it.key()), u);
  }
  if (const json* v = find(doc, "load_slacks")) {
    const std::string w = origin + ": load_slacks";
    as_obj(*v, w);
    for (auto it = v->begin(); it != v->end(); ++it) {
      const std::string lw = w + "." + it.key();
      as_obj(it.value(), lw);
      reject_unknown(it.value(), {"QE", "QS"}, lw);
      sp.load_slacks[it.key()] = {to_w(as_num(need(it.value(), "QE", lw), lw + ".QE"), u),
                                  to_w(as_num(need(it.value(), "QS", lw), lw + ".QS"), u)};
    }
  }
  if (const json* v = find(doc, "load_T_out")) {
    const std::string w = origin + ": load_T_out";
    as_obj(*v, w);
    for (auto it = v->begin(); it != v->end(); ++it)
      sp.load_T_out[it.key()] = to_k(as_num(it.value(), w + "." + it.key()), u);
  }
  if (const json* v = find(doc, "swing_load")) sp.swing_load = as_str(*v, origin + ".swing_load");
  return sp;
}

SimulationSetpoints parse_setpoints(const std::string& path) {
  return parse_setpoints_text(read_file(path), path);
}

std::string serialize_setpoints(const SimulationSetpoints& sp, const Network& net) {
  for (const auto& [id, _] : sp.plants)
    if (!net.plant_index.count(id)) throw UnknownIdError("setpoints: unknown plant '" + id + "'");
  for (const auto& [id, _] : sp.pump_alpha)
    if (!net.pipe_index.count(id)) throw UnknownIdError("setpoints: unknown pipe '" + id + "'");
  for (const auto& [id, _] : sp.load_slacks)
    if (!net.load_index.count(id)) throw UnknownIdError("setpoints: unknown load '" + id + "'");
  for (const auto& [id, _] : sp.load_T_out)
    if (!net.load_index.count(id)) throw UnknownIdError("setpoints: unknown load '" + id + "'");
  if (sp.swing_load && !net.load_index.count(*sp.swing_load))
    throw UnknownIdError("setpoints: unknown swing load '" + *sp.swing_load + "'");

  json doc;
  doc["schema"] = setpoints_schema;
  doc["units"] = si_units();
  json plants = json::object();
  for (const auto& [id, ps] : sp.plants) {
    json p{{"T_out", ps.T_out}, {"p_out", ps.p_out}, {"p_in", ps.p_in}};
    if (ps.f) p["f"] = *ps.f;
    plants[id] = std::move(p);
  }
  doc["plants"] = std::move(plants);
  doc["pump_alpha"] = json(sp.pump_alpha);
  json slacks = json::object();
  for (const auto& [id, qq] : sp.load_slacks)
    slacks[id] = json{{"QE", qq.first}, {"QS", qq.second}};
  doc["load_slacks"] = std::move(slacks);
  doc["load_T_out"] = json(sp.load_T_out);
  if (sp.swing_load) doc["swing_load"] = *sp.swing_load;
  return doc.dump(2) + "\n";
}

void write_setpoints(const SimulationSetpoints& sp, const Network& net, const std::string& path) {
  write_file(path, serialize_setpoints(sp, net));
}

// ---- results ----------------------------------------------------------------

void write_summary_csv(const std::vector<RunSummary>& rows, const std::string& path) {
  std::string out =
      "name,status,solved,error,required_MW,supplied_MW,pipe_losses_MW,unmet_pct,excess_pct,"
      "plant_T_out_C,plant_p_out_psi,plant_p_in_psi,plant_f_kgps,objective,iterations\n";
  for (const RunSummary& r : rows) {
    out += csv_safe(r.name);
    out += ',';
    out += to_string(r.status);
    out += ',';
    out += r.solved ? "1" : "0";
    out += ',';
    out += csv_safe(r.error);
    out += ',';
    out += fmt(units::watt_to_megawatt(r.required));
    out += ',';
    out += fmt(units::watt_to_megawatt(r.supplied));
    out += ',';
    out += fmt(units::watt_to_megawatt(r.pipe_losses));
    out += ',';
    out += fmt(r.unmet_pct);
    out += ',';
    out += fmt(r.excess_pct);
    out += ',';
    out += fmt(units::kelvin_to_celsius(r.plant_T_out));
    out += ',';
    out += fmt(units::pascal_to_psi(r.plant_p_out));
    out += ',';
    out += fmt(units::pascal_to_psi(r.plant_p_in));
    out += ',';
    out += fmt(r.plant_f);
    out += ',';
    out += fmt(r.objective);
    out += ',';
    out += std::to_string(r.iterations);
    out += '\n';
  }
  write_file(path, out);
}

void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& path) {
  std::string out =
      "multiplier,solved,error,plant_T_out_C,plant_f_kgps,pipe_losses_MW,supplied_MW,unmet_pct,"
      "objective\n";
  for (const SweepPoint& p : points) {
    out += fmt(p.multiplier);
    out += ',';
    out += p.solved ? "1" : "0";
    out += ',';
    out += csv_safe(p.error);
    out += ',';
    out += fmt(units::kelvin_to_celsius(p.plant_T_out));
    out += ',';
    out += fmt(p.plant_f);
    out += ',';
    out += fmt(units::watt_to_megawatt(p.pipe_losses));
    out += ',';
    out += fmt(units::watt_to_megawatt(p.supplied));
    out += ',';
    out += fmt(p.unmet_pct);
    out += ',';
    out += fmt(p.objective);
    out += '\n';
  }
  write_file(path, out);
}

std::string render_dot(const NetworkState& state, const Network& net) {
  std::string out = "digraph tnfo {\n  rankdir=LR;\n  node [shape=ellipse fontsize=10];\n";
  for (const Junction* j : sorted_by_id(net.junctions)) {
    const int ji = net.junction_index.at(j->id);
    out += "  \"" + j->id + "\" [label=\"" + j->id + "\\n" +
           fmt(units::pascal_to_psi(state.junction_p[static_cast<size_t>(ji)])) + " psi\\n" +
           fmt(units::kelvin_to_celsius(state.junction_T[static_cast<size_t>(ji)])) + " C\"];\n";
  }

  // One record per edge, ordered by id across kinds. Pipe thickness tracks
  // the inner diameter.
  std::vector<int> order(static_cast<size_t>(net.num_edges()));
  for (int e = 0; e < net.num_edges(); ++e) order[static_cast<size_t>(e)] = e;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return net.edge_id(a) < net.edge_id(b); });

  for (int e : order) {
    const EdgeInfo& info = net.edges[static_cast<size_t>(e)];
    const EdgeState& es = state.edge[static_cast<size_t>(e)];
    const std::string& from = net.junctions[static_cast<size_t>(info.from)].id;
    const std::string& to = net.junctions[static_cast<size_t>(info.to)].id;
    std::string attrs;
    if (info.kind == EdgeKind::Pipe) {
      const Pipe& p = net.pipes[static_cast<size_t>(info.index_in_kind)];
      attrs = "penwidth=" + fmt(12.0 * p.diameter) +
              (p.system == PipeSystem::Outgoing ? " color=firebrick" : " color=steelblue");
    } else if (info.kind == EdgeKind::Plant) {
      attrs = "penwidth=1.5 color=forestgreen style=dashed";
    } else {
      attrs = "penwidth=1.5 color=darkorange style=dashed";
    }
    out += "  \"" + from + "\" -> \"" + to + "\" [label=\"" + net.edge_id(e) + "\\n" +
           fmt(es.f) + " kg/s\\n" + fmt(units::kelvin_to_celsius(es.T_in)) + ">" +
           fmt(units::kelvin_to_celsius(es.T_out)) + " C\" " + attrs + "];\n";
  }
  out += "}\n";
  return out;
}

void export_results(const NetworkState& state, const Network& net, const RunSummary& summary,
                    const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
  const fs::path base(dir);

  std::string jc = "id,p_psi,T_C\n";
  for (const Junction* j : sorted_by_id(net.junctions)) {
    const int ji = net.junction_index.at(j->id);
    jc += j->id + "," + fmt(units::pascal_to_psi(state.junction_p[static_cast<size_t>(ji)])) +
          "," + fmt(units::kelvin_to_celsius(state.junction_T[static_cast<size_t>(ji)])) + "\n";
  }
  write_file((base / "junctions.csv").string(), jc);

  std::vector<int> order(static_cast<size_t>(net.num_edges()));
  for (int e = 0; e < net.num_edges(); ++e) order[static_cast<size_t>(e)] = e;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return net.edge_id(a) < net.edge_id(b); });
  std::string ecsv = "id,kind,f_kgps,T_in_C,T_out_C,p_in_psi,p_out_psi,alpha_psi,QE_MW,QS_MW\n";
  for (int e : order) {
    const EdgeInfo& info = net.edges[static_cast<size_t>(e)];
    const EdgeState& es = state.edge[static_cast<size_t>(e)];
    ecsv += net.edge_id(e);
    ecsv += ',';
    ecsv += kind_name(info.kind);
    ecsv += ',';
    ecsv += fmt(es.f);
    ecsv += ',';
    ecsv += fmt(units::kelvin_to_celsius(es.T_in));
    ecsv += ',';
    ecsv += fmt(units::kelvin_to_celsius(es.T_out));
    ecsv += ',';
    ecsv += fmt(units::pascal_to_psi(es.p_in));
    ecsv += ',';
    ecsv += fmt(units::pascal_to_psi(es.p_out));
    ecsv += ',';
    ecsv += fmt(units::pascal_to_psi(es.alpha));
    ecsv += ',';
    ecsv += fmt(units::watt_to_megawatt(es.QE));
    ecsv += ',';
    ecsv += fmt(units::watt_to_megawatt(es.QS));
    ecsv += '\n';
  }
  write_file((base / "edges.csv").string(), ecsv);

  write_summary_csv({summary}, (base / "summary.csv").string());
  write_setpoints(setpoints_from_state(net, state), net, (base / "setpoints.json").string());
  write_file((base / "network.dot").string(), render_dot(state, net));
}

std::vector<std::map<std::string, std::string>> read_csv(const std::string& path) {
  const std::string text = read_file(path);
  std::vector<std::map<std::string, std::string>> rows;
  std::vector<std::string> header;
  size_t pos = 0;
  int lineno = 0;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::vector<std::string> fields;
    size_t fpos = 0;
    while (true) {
      const size_t c = line.find(',', fpos);
      if (c == std::string::npos) {
        fields.push_back(line.substr(fpos));
        break;
      }
      fields.push_back(line.substr(fpos, c - fpos));
      fpos = c + 1;
    }
    if (header.empty()) {
      header = std::move(fields);
      continue;
    }
    if (fields.size() != header.size())
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    std::map<std::string, std::string> row;
    for (size_t i = 0; i < header.size(); ++i) row[header[i]] = fields[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed on '" + path + "'");
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("write failed on '" + path + "'");
}

}  // namespace tnfo
