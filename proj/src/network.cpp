#include "tnfo/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <set>
#include <sstream>

namespace tnfo {

namespace {

std::string join_messages(const std::vector<Violation>& v) {
  std::ostringstream os;
  os << "network validation failed with " << v.size() << " finding(s):";
  for (const auto& x : v) os << "\n  - " << x.message;
  return os.str();
}

// Deterministic splitmix64 stream; avoids implementation-defined std distributions.
struct Rng {
  std::uint64_t state;
  explicit Rng(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  int below(int n) { return static_cast<int>(next() % static_cast<std::uint64_t>(n)); }
};

std::string padded(const char* prefix, int value, int width) {
  std::string digits = std::to_string(value);
  std::string out(prefix);
  out.append(static_cast<size_t>(std::max(0, width - static_cast<int>(digits.size()))), '0');
  out += digits;
  return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<Violation> v)
    : Error(join_messages(v)), violations(std::move(v)) {}

const std::string& Network::edge_id(int e) const {
  const EdgeInfo& info = edges.at(static_cast<size_t>(e));
  switch (info.kind) {
    case EdgeKind::Pipe:
      return pipes[static_cast<size_t>(info.index_in_kind)].id;
    case EdgeKind::Plant:
      return plants[static_cast<size_t>(info.index_in_kind)].id;
    default:
      return loads[static_cast<size_t>(info.index_in_kind)].id;
  }
}

int Network::junction_at(const std::string& id) const {
  auto it = junction_index.find(id);
  if (it == junction_index.end()) throw UnknownIdError("unknown junction id '" + id + "'");
  return it->second;
}

double Network::total_demand() const {
  double q = 0.0;
  for (const auto& l : loads) q += l.demand;
  return q;
}

void Network::rebuild_index() {
  junction_index.clear();
  pipe_index.clear();
  plant_index.clear();
  load_index.clear();
  edges.clear();
  pumped_pipes.clear();

  for (int j = 0; j < num_junctions(); ++j) junction_index.emplace(junctions[j].id, j);

  std::vector<Violation> dangling;
  auto resolve = [&](const std::string& id, const std::string& owner) {
    auto it = junction_index.find(id);
    if (it != junction_index.end()) return it->second;
    dangling.push_back({Violation::Code::DanglingJunctionRef,
                        owner + " references unknown junction '" + id + "'"});
    return -1;
  };

  edges.reserve(pipes.size() + plants.size() + loads.size());
  for (int i = 0; i < static_cast<int>(pipes.size()); ++i) {
    const Pipe& p = pipes[static_cast<size_t>(i)];
    pipe_index.emplace(p.id, i);
    double c = p.system == PipeSystem::Outgoing ? constants.c_s : constants.c_w;
    edges.push_back({EdgeKind::Pipe, i, resolve(p.from, "pipe '" + p.id + "'"),
                     resolve(p.to, "pipe '" + p.id + "'"), c, c});
    if (p.pump_boost_max > 0.0) pumped_pipes.push_back(i);
  }
  for (int i = 0; i < static_cast<int>(plants.size()); ++i) {
    const Plant& p = plants[static_cast<size_t>(i)];
    plant_index.emplace(p.id, i);
    edges.push_back({EdgeKind::Plant, i, resolve(p.from, "plant '" + p.id + "'"),
                     resolve(p.to, "plant '" + p.id + "'"), constants.c_w, constants.c_s});
  }
  for (int i = 0; i < static_cast<int>(loads.size()); ++i) {
    const Load& l = loads[static_cast<size_t>(i)];
    load_index.emplace(l.id, i);
    edges.push_back({EdgeKind::Load, i, resolve(l.from, "load '" + l.id + "'"),
                     resolve(l.to, "load '" + l.id + "'"), constants.c_s, constants.c_w});
  }
  if (!dangling.empty()) throw ValidationError(std::move(dangling));

  edges_in.assign(static_cast<size_t>(num_junctions()), {});
  edges_out.assign(static_cast<size_t>(num_junctions()), {});
  junction_touches_steam.assign(static_cast<size_t>(num_junctions()), false);
  for (int e = 0; e < num_edges(); ++e) {
    edges_out[static_cast<size_t>(edges[static_cast<size_t>(e)].from)].push_back(e);
    edges_in[static_cast<size_t>(edges[static_cast<size_t>(e)].to)].push_back(e);
    const EdgeInfo& info = edges[static_cast<size_t>(e)];
    if (info.c_in == constants.c_s)
      junction_touches_steam[static_cast<size_t>(info.from)] = true;
    if (info.c_out == constants.c_s)
      junction_touches_steam[static_cast<size_t>(info.to)] = true;
  }
}

std::vector<Violation> find_violations(const Network& net) {
  std::vector<Violation> out;
  auto add = [&](Violation::Code c, std::string msg) { out.push_back({c, std::move(msg)}); };

  if (net.junctions.empty()) add(Violation::Code::EmptyComponent, "no junctions defined");
  if (net.pipes.empty()) add(Violation::Code::EmptyComponent, "no pipes defined");
  if (net.loads.empty()) add(Violation::Code::EmptyComponent, "no loads defined");
  if (net.plants.empty()) add(Violation::Code::PlantlessNetwork, "network has no plant");

  std::set<std::string> junction_ids;
  for (const auto& j : net.junctions)
    if (!junction_ids.insert(j.id).second)
      add(Violation::Code::DuplicateId, "duplicate junction id '" + j.id + "'");

  std::set<std::string> edge_ids;
  auto check_edge_id = [&](const std::string& id, const char* kind) {
    if (!edge_ids.insert(id).second)
      add(Violation::Code::DuplicateId, std::string("duplicate ") + kind + " id '" + id + "'");
  };
  auto check_endpoint = [&](const std::string& id, const std::string& owner) {
    if (junction_ids.count(id) == 0)
      add(Violation::Code::DanglingJunctionRef,
          owner + " references unknown junction '" + id + "'");
  };

  for (const auto& p : net.pipes) {
    check_edge_id(p.id, "pipe");
    check_endpoint(p.from, "pipe '" + p.id + "'");
    check_endpoint(p.to, "pipe '" + p.id + "'");
    if (!(p.length > 0.0))
      add(Violation::Code::NonPositiveQuantity, "pipe '" + p.id + "' length must be positive");
    if (!(p.diameter > 0.0))
      add(Violation::Code::NonPositiveQuantity, "pipe '" + p.id + "' diameter must be positive");
    if (!(p.friction_factor > 0.0))
      add(Violation::Code::NonPositiveQuantity,
          "pipe '" + p.id + "' friction factor must be positive");
    if (!(p.heat_loss_coeff > 0.0))
      add(Violation::Code::NonPositiveQuantity,
          "pipe '" + p.id + "' heat loss coefficient must be positive");
    if (p.pump_boost_max < 0.0)
      add(Violation::Code::NonPositiveQuantity,
          "pipe '" + p.id + "' pump boost bound must be non-negative");
    if (p.pump_boost_max > 0.0 && p.system == PipeSystem::Outgoing)
      add(Violation::Code::PumpOnOutgoingPipe,
          "pipe '" + p.id + "' is an outgoing pipe and cannot carry a pump");
  }
  for (const auto& p : net.plants) {
    check_edge_id(p.id, "plant");
    check_endpoint(p.from, "plant '" + p.id + "'");
    check_endpoint(p.to, "plant '" + p.id + "'");
    if (!(p.power_max > 0.0))
      add(Violation::Code::NonPositiveQuantity, "plant '" + p.id + "' capacity must be positive");
  }
  for (const auto& l : net.loads) {
    check_edge_id(l.id, "load");
    check_endpoint(l.from, "load '" + l.id + "'");
    check_endpoint(l.to, "load '" + l.id + "'");
    if (l.demand < 0.0)
      add(Violation::Code::NonPositiveQuantity, "load '" + l.id + "' demand must be non-negative");
  }

  const OperationalBounds& b = net.bounds;
  if (!(b.T_min <= b.T_max))
    add(Violation::Code::BoundsOrder, "temperature bounds out of order (T_min > T_max)");
  if (!(b.p_min <= b.p_max))
    add(Violation::Code::BoundsOrder, "pressure bounds out of order (p_min > p_max)");
  if (!(b.plant_outlet_p_min >= b.p_min && b.plant_outlet_p_min <= b.p_max))
    add(Violation::Code::BoundsOrder, "plant outlet pressure floor outside [p_min, p_max]");
  if (b.pump_boost_max < 0.0)
    add(Violation::Code::BoundsOrder, "default pump boost bound must be non-negative");

  // Degree and connectivity checks only make sense once ids resolve.
  bool resolvable = true;
  for (const auto& v : out)
    if (v.code == Violation::Code::DanglingJunctionRef ||
        v.code == Violation::Code::DuplicateId)
      resolvable = false;
  if (resolvable && !net.junctions.empty()) {
    std::unordered_map<std::string, int> jix;
    for (int j = 0; j < net.num_junctions(); ++j) jix.emplace(net.junctions[j].id, j);
    size_t n = net.junctions.size();
    std::vector<int> in_deg(n, 0), out_deg(n, 0);
    std::vector<std::vector<int>> adj(n);
    auto connect = [&](const std::string& from, const std::string& to) {
      int a = jix.at(from), b = jix.at(to);
      out_deg[static_cast<size_t>(a)]++;
      in_deg[static_cast<size_t>(b)]++;
      adj[static_cast<size_t>(a)].push_back(b);
      adj[static_cast<size_t>(b)].push_back(a);
    };
    for (const auto& p : net.pipes) connect(p.from, p.to);
    for (const auto& p : net.plants) connect(p.from, p.to);
    for (const auto& l : net.loads) connect(l.from, l.to);

    for (size_t j = 0; j < n; ++j)
      if (in_deg[j] == 0 || out_deg[j] == 0)
        add(Violation::Code::JunctionDegree,
            "junction '" + net.junctions[j].id +
                "' must have at least one incoming and one outgoing edge");

    std::vector<bool> seen(n, false);
    std::queue<int> q;
    q.push(0);
    seen[0] = true;
    size_t reached = 1;
    while (!q.empty()) {
      int j = q.front();
      q.pop();
      for (int k : adj[static_cast<size_t>(j)])
        if (!seen[static_cast<size_t>(k)]) {
          seen[static_cast<size_t>(k)] = true;
          ++reached;
          q.push(k);
        }
    }
    if (reached != n)
      add(Violation::Code::DisconnectedGraph,
          "network is disconnected (" + std::to_string(reached) + " of " + std::to_string(n) +
              " junctions reachable from '" + net.junctions[0].id + "')");
  }
  return out;
}

Network build_network(std::vector<Junction> junctions, std::vector<Pipe> pipes,
                      std::vector<Plant> plants, std::vector<Load> loads,
                      CarrierConstants constants, OperationalBounds bounds) {
  Network net;
  net.junctions = std::move(junctions);
  net.pipes = std::move(pipes);
  net.plants = std::move(plants);
  net.loads = std::move(loads);
  net.constants = constants;
  net.bounds = bounds;
  std::vector<Violation> v = find_violations(net);
  if (!v.empty()) throw ValidationError(std::move(v));
  net.rebuild_index();
  return net;
}

double cross_section_area(double diameter) {
  if (!(diameter > 0.0))
    throw NonpositiveDiameter("cross_section_area: diameter must be positive, got " +
                              std::to_string(diameter));
  return std::numbers::pi * diameter * diameter / 4.0;
}

Network synth_network(const SynthSpec& spec) {
  if (spec.plants != 1)
    throw InfeasibleSpec("synth_network: generator supports exactly one plant");
  if (spec.outgoing_pipes != spec.return_pipes)
    throw InfeasibleSpec("synth_network: outgoing and return pipe counts must match");
  if (spec.outgoing_pipes < 3)
    throw InfeasibleSpec("synth_network: need at least 3 pipes per side");
  if (spec.loads < 1 || spec.loads > spec.outgoing_pipes - 2)
    throw InfeasibleSpec("synth_network: load count must be in [1, outgoing_pipes - 2]");
  if (spec.pumps < 0 || spec.pumps > spec.return_pipes)
    throw InfeasibleSpec("synth_network: pump count must be in [0, return_pipes]");
  if (!(spec.total_demand >= 0.0) || !(spec.plant_capacity > 0.0))
    throw InfeasibleSpec("synth_network: demand must be >= 0 and capacity > 0");

  Rng rng(spec.seed * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull);

  // One "location" per junction pair; location 0 hosts the plant.
  const int n_loc = spec.outgoing_pipes - 1;
  const int tree_edges = n_loc - 1;
  const int n_chords = spec.outgoing_pipes - tree_edges;  // always 2

  // Random tree biased toward chains so the network has realistic depth.
  // Every dead end must eventually host a load, so branching stops once the
  // dead-end count reaches the load count.
  std::vector<int> parent(static_cast<size_t>(n_loc), -1);
  std::vector<int> depth(static_cast<size_t>(n_loc), 0);
  std::vector<bool> has_child(static_cast<size_t>(n_loc), false);
  int leaf_count = 0;
  for (int k = 1; k < n_loc; ++k) {
    int p = k - 1;  // the previous node is always still childless
    if (k > 1 && rng.uniform() >= 0.6) {
      int cand = rng.below(k);
      bool grows_leaf = cand == 0 || has_child[static_cast<size_t>(cand)];
      if (!grows_leaf || leaf_count < spec.loads) p = cand;
    }
    if (p == 0 || has_child[static_cast<size_t>(p)]) ++leaf_count;
    has_child[static_cast<size_t>(p)] = true;
    parent[static_cast<size_t>(k)] = p;
    depth[static_cast<size_t>(k)] = depth[static_cast<size_t>(p)] + 1;
  }

  std::vector<double> length(static_cast<size_t>(n_loc), 0.0);  // of the pipe into location k
  for (int k = 1; k < n_loc; ++k) length[static_cast<size_t>(k)] = rng.uniform(120.0, 320.0);

  // Load placement: every childless location must host a load (its only
  // departing edge), the remainder are sampled from the interior locations.
  std::vector<int> leaves, interior;
  for (int k = 1; k < n_loc; ++k)
    (has_child[static_cast<size_t>(k)] ? interior : leaves).push_back(k);
  if (static_cast<int>(leaves.size()) > spec.loads)
    throw InfeasibleSpec("synth_network: tree grew more dead ends than loads; try another seed");
  for (int i = static_cast<int>(interior.size()) - 1; i > 0; --i)
    std::swap(interior[static_cast<size_t>(i)], interior[static_cast<size_t>(rng.below(i + 1))]);
  std::vector<int> load_loc(leaves);
  load_loc.insert(load_loc.end(), interior.begin(),
                  interior.begin() + (spec.loads - static_cast<int>(leaves.size())));

  // Demand split: one dominant consumer (the paper-scale share), two secondary
  // ones, the rest random. The dominant load goes to the deepest sampled
  // location so demand stress has a long path to travel.
  std::vector<double> weight(static_cast<size_t>(spec.loads));
  for (auto& w : weight) w = rng.uniform(0.4, 1.6);
  int deepest = 0;
  for (int i = 1; i < spec.loads; ++i)
    if (depth[static_cast<size_t>(load_loc[static_cast<size_t>(i)])] >
        depth[static_cast<size_t>(load_loc[static_cast<size_t>(deepest)])])
      deepest = i;
  const double dominant_share = 3.145 / 15.14;
  std::vector<double> share(static_cast<size_t>(spec.loads), 0.0);
  if (spec.loads == 1) {
    share[0] = 1.0;
  } else {
    double secondary = std::min(0.24, 2.0 / spec.loads);
    share[static_cast<size_t>(deepest)] = dominant_share;
    int s1 = (deepest + 1) % spec.loads;
    int s2 = (deepest + 2) % spec.loads;
    share[static_cast<size_t>(s1)] = secondary * 0.55;
    if (s2 != deepest && s2 != s1) share[static_cast<size_t>(s2)] = secondary * 0.45;
    double rest = 1.0 - dominant_share - share[static_cast<size_t>(s1)] -
                  (s2 != deepest && s2 != s1 ? share[static_cast<size_t>(s2)] : 0.0);
    double wsum = 0.0;
    for (int i = 0; i < spec.loads; ++i)
      if (share[static_cast<size_t>(i)] == 0.0) wsum += weight[static_cast<size_t>(i)];
    for (int i = 0; i < spec.loads; ++i)
      if (share[static_cast<size_t>(i)] == 0.0)
        share[static_cast<size_t>(i)] = rest * weight[static_cast<size_t>(i)] / wsum;
  }

  // Flow each tree pipe would carry at nominal conditions, for diameter sizing.
  std::vector<double> loc_draw(static_cast<size_t>(n_loc), 0.0);
  for (int i = 0; i < spec.loads; ++i)
    loc_draw[static_cast<size_t>(load_loc[static_cast<size_t>(i)])] =
        share[static_cast<size_t>(i)];
  std::vector<double> subtree(loc_draw);
  for (int k = n_loc - 1; k >= 1; --k)
    subtree[static_cast<size_t>(parent[static_cast<size_t>(k)])] +=
        subtree[static_cast<size_t>(k)];

  auto out_diameter = [&](double share_of_total) {
    return 0.13 + 0.29 * std::sqrt(std::max(share_of_total, 0.01));
  };
  auto ret_diameter = [&](double share_of_total) {
    return 0.10 + 0.13 * std::sqrt(std::max(share_of_total, 0.01));
  };

  const int width = n_loc >= 100 ? 3 : 2;
  std::vector<Junction> junctions;
  junctions.reserve(static_cast<size_t>(2 * n_loc));
  for (int k = 0; k < n_loc; ++k) junctions.push_back({padded("s", k, width)});
  for (int k = 0; k < n_loc; ++k) junctions.push_back({padded("w", k, width)});

  std::vector<Pipe> pipes;
  pipes.reserve(static_cast<size_t>(2 * spec.outgoing_pipes));
  int op_count = 0, rp_count = 0;
  std::vector<std::pair<int, double>> return_trunk;  // (pipe index, sizing flow)
  auto add_pair = [&](int from_loc, int to_loc, double len, double flow_share) {
    Pipe o;
    o.id = padded("op", op_count++, width);
    o.from = padded("s", from_loc, width);
    o.to = padded("s", to_loc, width);
    o.system = PipeSystem::Outgoing;
    o.length = len;
    o.diameter = out_diameter(flow_share);
    o.friction_factor = 0.01;
    o.heat_loss_coeff = 0.1;
    pipes.push_back(o);
    Pipe r;
    r.id = padded("rp", rp_count++, width);
    r.from = padded("w", to_loc, width);
    r.to = padded("w", from_loc, width);
    r.system = PipeSystem::Return;
    r.length = len;
    r.diameter = ret_diameter(flow_share);
    r.friction_factor = 0.002;
    r.heat_loss_coeff = 0.05;
    return_trunk.emplace_back(static_cast<int>(pipes.size()), flow_share);
    pipes.push_back(r);
  };

  for (int k = 1; k < n_loc; ++k)
    add_pair(parent[static_cast<size_t>(k)], k, length[static_cast<size_t>(k)],
             subtree[static_cast<size_t>(k)]);

  // Chord pipes close two mesh loops per side between unrelated locations of
  // similar depth; directed shallow -> deep.
  std::set<std::pair<int, int>> used;
  int placed = 0, attempts = 0;
  while (placed < n_chords && attempts < 4000) {
    ++attempts;
    int a = 1 + rng.below(n_loc - 1);
    int b = 1 + rng.below(n_loc - 1);
    if (a == b) continue;
    if (depth[static_cast<size_t>(a)] > depth[static_cast<size_t>(b)]) std::swap(a, b);
    if (parent[static_cast<size_t>(b)] == a) continue;
    if (depth[static_cast<size_t>(b)] - depth[static_cast<size_t>(a)] > 2) continue;
    if (depth[static_cast<size_t>(b)] == depth[static_cast<size_t>(a)] &&
        used.count({b, a}))
      continue;  // no antiparallel chord pair; keeps each side a DAG
    if (!used.insert({a, b}).second) continue;
    add_pair(a, b, rng.uniform(120.0, 320.0), 0.01);
    ++placed;
  }
  if (placed < n_chords)
    throw InfeasibleSpec("synth_network: could not place chord pipes; try another seed");

  // Pump boosts sit on the return pipes with the largest sizing flow (the trunk).
  std::stable_sort(return_trunk.begin(), return_trunk.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  OperationalBounds bounds;
  for (int i = 0; i < spec.pumps; ++i)
    pipes[static_cast<size_t>(return_trunk[static_cast<size_t>(i)].first)].pump_boost_max =
        bounds.pump_boost_max;

  std::vector<Plant> plants;
  Plant plant;
  plant.id = "plant";
  plant.from = padded("w", 0, width);
  plant.to = padded("s", 0, width);
  plant.power_max = spec.plant_capacity;
  plants.push_back(plant);

  std::vector<Load> loads;
  loads.reserve(static_cast<size_t>(spec.loads));
  for (int i = 0; i < spec.loads; ++i) {
    Load l;
    l.id = padded("load", i, width);
    l.from = padded("s", load_loc[static_cast<size_t>(i)], width);
    l.to = padded("w", load_loc[static_cast<size_t>(i)], width);
    l.demand = spec.total_demand * share[static_cast<size_t>(i)];
    loads.push_back(l);
  }

  return build_network(std::move(junctions), std::move(pipes), std::move(plants),
                       std::move(loads), CarrierConstants{}, bounds);
}

}  // namespace tnfo
