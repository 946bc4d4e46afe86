#include "lshed/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "lshed/errors.hpp"
#include "lshed/rng.hpp"

namespace lshed::scenario {

using nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string& what) { throw ValidationError("config schema", what); }

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; })) {
      schema_error(where + ": unknown field '" + it.key() + "'");
    }
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(where + ": missing field '" + key + "'");
  return *it;
}

double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) schema_error(where + ": expected a number");
  return v.get<double>();
}

std::int64_t as_integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) schema_error(where + ": expected an integer");
  return v.get<std::int64_t>();
}

std::string as_string(const json& v, const std::string& where) {
  if (!v.is_string()) schema_error(where + ": expected a string");
  return v.get<std::string>();
}

const json& as_array(const json& v, const std::string& where) {
  if (!v.is_array()) schema_error(where + ": expected an array");
  return v;
}

const json& as_object(const json& v, const std::string& where) {
  if (!v.is_object()) schema_error(where + ": expected an object");
  return v;
}

template <class T, class F>
T optional_field(const json& obj, const char* key, T fallback, F convert, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  return convert(*it, where + "." + key);
}

EdgeList parse_edges(const json& v, const std::string& where) {
  EdgeList edges;
  for (const json& e : as_array(v, where)) {
    if (!e.is_array() || e.size() != 2) schema_error(where + ": each edge is a pair [i, j]");
    edges.emplace_back(static_cast<int>(as_integer(e[0], where)), static_cast<int>(as_integer(e[1], where)));
  }
  return edges;
}

json edges_json(const EdgeList& edges) {
  json a = json::array();
  for (const auto& [i, j] : edges) a.push_back({i, j});
  return a;
}

std::string fmt12(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

json ext_json(const ExtValue& v) { return v.is_finite() ? json(v.value()) : json("inf"); }

ScenarioConfig from_json(const json& doc) {
  as_object(doc, "config");
  reject_unknown(doc,
                 {"version", "mode", "seed", "required_shed", "nature_weight", "ramp_width", "regions", "graph", "step",
                  "estimator", "run", "check", "description"},
                 "config");
  ScenarioConfig c;
  c.version = static_cast<int>(as_integer(require(doc, "version", "config"), "version"));
  if (c.version != kConfigVersion) {
    throw ValidationError("config version", "unsupported version " + std::to_string(c.version) + ", expected " +
                                                std::to_string(kConfigVersion));
  }
  const std::string mode = optional_field(doc, "mode", std::string("discrete"), as_string, "config");
  if (mode == "discrete") {
    c.mode = Mode::discrete;
  } else if (mode == "continuous") {
    c.mode = Mode::continuous;
  } else {
    schema_error("mode must be 'discrete' or 'continuous', got '" + mode + "'");
  }
  if (auto it = doc.find("seed"); it != doc.end()) {
    if (!it->is_number_unsigned()) schema_error("seed: expected a nonnegative integer");
    c.seed = it->get<std::uint64_t>();
  }
  c.required = as_number(require(doc, "required_shed", "config"), "required_shed");
  c.nature_weight = optional_field(doc, "nature_weight", 0.5, as_number, "config");
  if (auto it = doc.find("ramp_width"); it != doc.end() && !(it->is_string() && *it == "auto")) {
    c.ramp_width_auto = false;
    c.ramp_width = as_number(*it, "ramp_width");
  }

  for (const json& r : as_array(require(doc, "regions", "config"), "regions")) {
    const std::string where = "regions[" + std::to_string(c.regions.size()) + "]";
    as_object(r, where);
    RegionSpec spec;
    spec.id = static_cast<int>(as_integer(require(r, "id", where), where + ".id"));
    spec.criticality = as_number(require(r, "criticality", where), where + ".criticality");
    if (c.mode == Mode::discrete) {
      reject_unknown(r, {"id", "criticality", "loads", "name"}, where);
      for (const json& l : as_array(require(r, "loads", where), where + ".loads")) {
        const std::string lw = where + ".loads[" + std::to_string(spec.loads.size()) + "]";
        as_object(l, lw);
        reject_unknown(l, {"id", "power", "nature"}, lw);
        spec.loads.push_back({static_cast<int>(as_integer(require(l, "id", lw), lw + ".id")),
                              as_number(require(l, "power", lw), lw + ".power"),
                              as_number(require(l, "nature", lw), lw + ".nature")});
      }
    } else {
      reject_unknown(r, {"id", "criticality", "capacity", "name"}, where);
      spec.capacity = as_number(require(r, "capacity", where), where + ".capacity");
    }
    c.regions.push_back(std::move(spec));
  }

  if (auto it = doc.find("graph"); it != doc.end()) {
    const json& g = as_object(*it, "graph");
    reject_unknown(g, {"kind", "topology", "edges", "cycle", "edge_probability", "window"}, "graph");
    c.graph.kind = optional_field(g, "kind", std::string("static"), as_string, "graph");
    c.graph.topology = optional_field(g, "topology", std::string(), as_string, "graph");
    if (auto e = g.find("edges"); e != g.end()) c.graph.edges = parse_edges(*e, "graph.edges");
    if (auto cy = g.find("cycle"); cy != g.end()) {
      for (const json& step : as_array(*cy, "graph.cycle")) c.graph.cycle.push_back(parse_edges(step, "graph.cycle"));
    }
    c.graph.edge_probability = optional_field(g, "edge_probability", 0.5, as_number, "graph");
    c.graph.window = static_cast<int>(optional_field(g, "window", std::int64_t{1}, as_integer, "graph"));
  } else {
    c.graph.topology = "line";
  }

  if (auto it = doc.find("step"); it != doc.end()) {
    const json& s = as_object(*it, "step");
    reject_unknown(s, {"kind", "scale", "offset", "exponent", "values"}, "step");
    c.step.kind = optional_field(s, "kind", std::string("harmonic"), as_string, "step");
    c.step.scale = optional_field(s, "scale", 1.0, as_number, "step");
    c.step.offset = optional_field(s, "offset", 1.0, as_number, "step");
    c.step.exponent = optional_field(s, "exponent", 1.0, as_number, "step");
    if (auto v = s.find("values"); v != s.end()) {
      for (const json& x : as_array(*v, "step.values")) c.step.values.push_back(as_number(x, "step.values"));
    }
  }

  if (auto it = doc.find("estimator"); it != doc.end()) {
    const json& e = as_object(*it, "estimator");
    reject_unknown(e, {"kind", "rows"}, "estimator");
    c.estimator.kind = optional_field(e, "kind", std::string("exact_split"), as_string, "estimator");
    if (auto rows = e.find("rows"); rows != e.end()) {
      for (const json& row : as_array(*rows, "estimator.rows")) {
        std::vector<double> r;
        for (const json& x : as_array(row, "estimator.rows")) r.push_back(as_number(x, "estimator.rows"));
        c.estimator.rows.push_back(std::move(r));
      }
    }
  }

  if (auto it = doc.find("run"); it != doc.end()) {
    const json& r = as_object(*it, "run");
    reject_unknown(r, {"max_rounds", "min_rounds", "persistence", "dmc", "tolerance", "initial_x"}, "run");
    if (auto x = r.find("initial_x"); x != r.end()) {
      if (x->is_array()) {
        for (const json& v : *x) c.run.initial_x.push_back(as_number(v, "run.initial_x"));
      } else {
        c.run.initial_x.push_back(as_number(*x, "run.initial_x"));
      }
    }
    c.run.max_rounds = optional_field(r, "max_rounds", c.run.max_rounds, as_integer, "run");
    c.run.min_rounds = optional_field(r, "min_rounds", c.run.min_rounds, as_integer, "run");
    c.run.persistence = optional_field(r, "persistence", c.run.persistence, as_integer, "run");
    c.run.dmc = optional_field(r, "dmc", c.run.dmc, as_string, "run");
    c.run.tolerance = optional_field(r, "tolerance", c.run.tolerance, as_number, "run");
  }

  if (auto it = doc.find("check"); it != doc.end()) {
    const json& k = as_object(*it, "check");
    reject_unknown(k, {"grid_lo", "grid_hi", "grid_points", "horizon"}, "check");
    if (auto v = k.find("grid_lo"); v != k.end()) c.check.grid_lo = as_number(*v, "check.grid_lo");
    if (auto v = k.find("grid_hi"); v != k.end()) c.check.grid_hi = as_number(*v, "check.grid_hi");
    c.check.grid_points = static_cast<int>(optional_field(k, "grid_points", std::int64_t{1001}, as_integer, "check"));
    c.check.horizon = optional_field(k, "horizon", c.check.horizon, as_integer, "check");
  }
  return c;
}

void check_unit(double v, const std::string& what) {
  if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("criticality range", what + " = " + fmt12(v) + " outside [0, 1]");
}

std::int64_t lcm64(std::int64_t a, std::int64_t b) { return a / std::gcd(a, b) * b; }

}  // namespace

CriticalityCombiner combiner_of(const ScenarioConfig& config) { return CriticalityCombiner::convex(config.nature_weight); }

std::vector<std::vector<RatedLoad>> rated_regions(const ScenarioConfig& config) {
  if (config.mode != Mode::discrete) throw std::logic_error("rated_regions: not a discrete scenario");
  const CriticalityCombiner comb = combiner_of(config);
  std::vector<std::vector<RatedLoad>> out;
  for (const RegionSpec& r : config.regions) {
    Region region{r.id, r.criticality, {}};
    for (const LoadSpec& l : r.loads) region.loads.push_back({l.id, l.power, l.nature, r.id});
    out.push_back(rate_loads(region, comb));
  }
  return out;
}

std::vector<RatedLoad> pooled_loads(const ScenarioConfig& config) {
  std::vector<RatedLoad> all;
  for (auto& r : rated_regions(config)) all.insert(all.end(), r.begin(), r.end());
  return all;
}

std::vector<oracle::ContinuousRegion> continuous_regions(const ScenarioConfig& config) {
  if (config.mode != Mode::continuous) throw std::logic_error("continuous_regions: not a continuous scenario");
  std::vector<oracle::ContinuousRegion> out;
  for (const RegionSpec& r : config.regions) out.push_back({r.capacity, r.criticality});
  return out;
}

void validate(ScenarioConfig& c) {
  const int n = static_cast<int>(c.regions.size());
  if (n == 0) throw ValidationError("config schema", "at least one region is required");
  if (!(c.nature_weight >= 0.0 && c.nature_weight <= 1.0)) {
    throw ValidationError("criticality range", "nature_weight must lie in [0, 1]");
  }
  if (!std::isfinite(c.required) || c.required < 0.0) {
    throw ValidationError("Assumption 1", "required_shed must be finite and nonnegative");
  }

  std::set<int> region_ids, load_ids;
  double total = 0.0;
  for (const RegionSpec& r : c.regions) {
    if (!region_ids.insert(r.id).second) throw ValidationError("config schema", "duplicate region id " + std::to_string(r.id));
    if (c.mode == Mode::discrete) {
      check_unit(r.criticality, "region " + std::to_string(r.id) + " criticality");
      for (const LoadSpec& l : r.loads) {
        if (!load_ids.insert(l.id).second) throw ValidationError("config schema", "duplicate load id " + std::to_string(l.id));
        if (!(l.power >= 0.0) || !std::isfinite(l.power)) {
          throw ValidationError("load power", "load " + std::to_string(l.id) + " power must be finite and nonnegative");
        }
        check_unit(l.nature, "load " + std::to_string(l.id) + " nature criticality");
        total += l.power;
      }
    } else {
      if (!(r.capacity >= 0.0) || !std::isfinite(r.capacity)) {
        throw ValidationError("load power", "region " + std::to_string(r.id) + " capacity must be finite and nonnegative");
      }
      if (!std::isfinite(r.criticality)) throw ValidationError("criticality range", "region criticality must be finite");
      total += r.capacity;
    }
  }
  if (total < c.required) {
    throw ValidationError("Assumption 1", "total sheddable load " + fmt12(total) + " GW is below the required " +
                                              fmt12(c.required) + " GW");
  }

  if (c.mode == Mode::discrete) {
    const Ccf pooled = Ccf::build(pooled_loads(c));
    const std::vector<double> crit = pooled.criticalities();
    const double gap = crit.size() >= 2 ? min_gap(crit) : 1.0;
    if (c.ramp_width_auto) {
      c.ramp_width = gap;
    } else if (!(c.ramp_width > 0.0) || c.ramp_width > gap + kRampWidthSlack) {
      throw ValidationError("ramp width inequality", "ramp width " + fmt12(c.ramp_width) +
                                                         " must be positive and at most the smallest criticality gap " +
                                                         fmt12(gap));
    }
  } else {
    if (!c.ramp_width_auto && c.ramp_width != 1.0) {
      throw ValidationError("ramp width inequality", "continuous scenarios use a unit ramp");
    }
    c.ramp_width = 1.0;
  }

  // graph
  const GraphSpec& g = c.graph;
  if (g.window < 1) throw ValidationError("Assumption 2", "graph window must be a positive integer");
  auto check_edges = [&](const EdgeList& edges, const std::string& where) {
    for (const auto& [a, b] : edges) {
      if (a < 0 || b < 0 || a >= n || b >= n || a == b) {
        throw ValidationError("config schema", where + ": edge [" + std::to_string(a) + ", " + std::to_string(b) +
                                                   "] must join two distinct region indices in [0, " +
                                                   std::to_string(n) + ")");
      }
    }
  };
  if (g.kind == "static") {
    if (!g.topology.empty() && g.topology != "line" && g.topology != "ring" && g.topology != "complete") {
      schema_error("graph.topology must be line, ring or complete");
    }
    check_edges(g.edges, "graph.edges");
  } else if (g.kind == "periodic") {
    if (g.cycle.empty()) schema_error("graph.cycle must list at least one edge set");
    for (const EdgeList& e : g.cycle) check_edges(e, "graph.cycle");
  } else if (g.kind == "random") {
    if (!(g.edge_probability >= 0.0 && g.edge_probability <= 1.0)) {
      schema_error("graph.edge_probability must lie in [0, 1]");
    }
  } else {
    schema_error("graph.kind must be static, periodic or random");
  }
  const netgraph::GraphSchedule schedule = build_schedule(c);
  if (g.kind != "random") {
    const std::int64_t horizon = lcm64(static_cast<std::int64_t>(std::max<std::size_t>(g.cycle.size(), 1)), g.window);
    const netgraph::ConnectivityReport rep = netgraph::check_window_connectivity(schedule, horizon);
    if (!rep.connected) {
      throw ValidationError("Assumption 2", "communication graph union over window " +
                                                std::to_string(*rep.first_failing_window) + " is disconnected");
    }
  }

  // step
  const StepSpec& s = c.step;
  if (s.kind == "harmonic") {
    if (!(s.scale > 0.0) || !(s.offset > 0.0)) throw ValidationError("Assumption 7", "harmonic step needs scale, offset > 0");
  } else if (s.kind == "polynomial") {
    if (!(s.scale > 0.0)) throw ValidationError("Assumption 7", "polynomial step needs scale > 0");
    if (!(s.exponent > 0.5 && s.exponent <= 1.0)) {
      throw ValidationError("Assumption 7", "polynomial exponent " + fmt12(s.exponent) +
                                                " must lie in (0.5, 1] for sum eta = inf and sum eta^2 < inf");
    }
  } else if (s.kind == "table") {
    if (static_cast<std::int64_t>(s.values.size()) < c.run.max_rounds) {
      throw ValidationError("Assumption 7", "step table has " + std::to_string(s.values.size()) +
                                                " entries for max_rounds " + std::to_string(c.run.max_rounds));
    }
    for (double v : s.values) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("Assumption 7", "step table entries must be >= 0");
    }
  } else {
    schema_error("step.kind must be harmonic, polynomial or table");
  }

  // estimator
  const EstimatorSpec& e = c.estimator;
  if (e.kind == "trace") {
    if (e.rows.empty()) throw ValidationError("Assumption 3", "trace estimator needs rows");
    for (const auto& row : e.rows) {
      if (static_cast<int>(row.size()) != n) {
        throw ValidationError("Assumption 3", "each estimator row needs one value per region");
      }
      for (double v : row) {
        if (!std::isfinite(v)) throw ValidationError("Assumption 3", "estimator values must be finite");
      }
    }
  } else if (e.kind != "exact_split" && e.kind != "noisy_split") {
    schema_error("estimator.kind must be exact_split, noisy_split or trace");
  }

  // run
  if (c.run.max_rounds < 1) schema_error("run.max_rounds must be >= 1");
  if (c.run.min_rounds < 0 || c.run.min_rounds > c.run.max_rounds) {
    schema_error("run.min_rounds must lie in [0, max_rounds]");
  }
  if (c.run.persistence < 1) schema_error("run.persistence must be >= 1");
  if (c.run.dmc != "self_tuning" && c.run.dmc != "plain") schema_error("run.dmc must be self_tuning or plain");
  if (!(c.run.tolerance > 0.0)) schema_error("run.tolerance must be positive");
  if (c.run.initial_x.size() > 1 && c.run.initial_x.size() != c.regions.size()) {
    schema_error("run.initial_x must be a number or one value per region");
  }
  for (double v : c.run.initial_x) {
    if (!std::isfinite(v)) schema_error("run.initial_x must be finite");
  }
  if (c.check.grid_points < 2) schema_error("check.grid_points must be >= 2");
  if (c.check.horizon < 1) schema_error("check.horizon must be >= 1");
}

ScenarioConfig parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& err) {
    // err.byte is 1-based and points just past the offending character.
    const std::size_t pos = err.byte > 0 ? std::min<std::size_t>(err.byte - 1, text.size()) : 0;
    int line = 1, column = 1;
    for (std::size_t i = 0; i < pos; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ParseError(err.what(), line, column);
  }
  ScenarioConfig c = from_json(doc);
  validate(c);
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open scenario file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string to_json(const ScenarioConfig& c, int indent) {
  json doc;
  doc["version"] = c.version;
  doc["mode"] = c.mode == Mode::discrete ? "discrete" : "continuous";
  doc["seed"] = c.seed;
  doc["required_shed"] = c.required;
  doc["nature_weight"] = c.nature_weight;
  if (c.ramp_width_auto) {
    doc["ramp_width"] = "auto";
  } else {
    doc["ramp_width"] = c.ramp_width;
  }
  json regions = json::array();
  for (const RegionSpec& r : c.regions) {
    json jr{{"id", r.id}, {"criticality", r.criticality}};
    if (c.mode == Mode::discrete) {
      json loads = json::array();
      for (const LoadSpec& l : r.loads) loads.push_back({{"id", l.id}, {"power", l.power}, {"nature", l.nature}});
      jr["loads"] = std::move(loads);
    } else {
      jr["capacity"] = r.capacity;
    }
    regions.push_back(std::move(jr));
  }
  doc["regions"] = std::move(regions);

  json g{{"kind", c.graph.kind}, {"window", c.graph.window}};
  if (c.graph.kind == "static") {
    if (!c.graph.topology.empty()) g["topology"] = c.graph.topology;
    if (!c.graph.edges.empty() || c.graph.topology.empty()) g["edges"] = edges_json(c.graph.edges);
  } else if (c.graph.kind == "periodic") {
    json cy = json::array();
    for (const EdgeList& e : c.graph.cycle) cy.push_back(edges_json(e));
    g["cycle"] = std::move(cy);
  } else {
    g["edge_probability"] = c.graph.edge_probability;
  }
  doc["graph"] = std::move(g);

  json s{{"kind", c.step.kind}};
  if (c.step.kind == "harmonic") {
    s["scale"] = c.step.scale;
    s["offset"] = c.step.offset;
  } else if (c.step.kind == "polynomial") {
    s["scale"] = c.step.scale;
    s["exponent"] = c.step.exponent;
  } else {
    s["values"] = c.step.values;
  }
  doc["step"] = std::move(s);

  json e{{"kind", c.estimator.kind}};
  if (c.estimator.kind == "trace") e["rows"] = c.estimator.rows;
  doc["estimator"] = std::move(e);

  doc["run"] = {{"max_rounds", c.run.max_rounds},
                {"min_rounds", c.run.min_rounds},
                {"persistence", c.run.persistence},
                {"dmc", c.run.dmc},
                {"tolerance", c.run.tolerance}};
  if (c.run.initial_x.size() == 1) {
    doc["run"]["initial_x"] = c.run.initial_x.front();
  } else if (!c.run.initial_x.empty()) {
    doc["run"]["initial_x"] = c.run.initial_x;
  }
  json k{{"grid_points", c.check.grid_points}, {"horizon", c.check.horizon}};
  if (c.check.grid_lo) k["grid_lo"] = *c.check.grid_lo;
  if (c.check.grid_hi) k["grid_hi"] = *c.check.grid_hi;
  doc["check"] = std::move(k);
  return doc.dump(indent);
}

void save_scenario(const ScenarioConfig& config, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write scenario file '" + path + "'");
  out << to_json(config) << '\n';
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

ScenarioConfig generate_scenario(const GenerateOptions& o) {
  if (o.regions < 1 || o.loads_per_region < 1) throw std::invalid_argument("generate_scenario: counts must be positive");
  if (!(o.power_lo > 0.0 && o.power_hi >= o.power_lo)) throw std::invalid_argument("generate_scenario: bad power range");
  if (!(o.required_fraction >= 0.0 && o.required_fraction <= 1.0)) {
    throw std::invalid_argument("generate_scenario: required_fraction must lie in [0, 1]");
  }
  const std::int64_t steps = std::llround(1.0 / o.criticality_grid);
  if (steps < 2 || std::abs(steps * o.criticality_grid - 1.0) > 1e-9) {
    throw std::invalid_argument("generate_scenario: criticality grid must divide 1");
  }
  // Combined values (a + b) / 2 for a, b in [0, steps] with a = b mod 2 cover
  // at most steps + 1 grid points.
  if (static_cast<std::int64_t>(o.regions) * o.loads_per_region > steps + 1) {
    throw std::invalid_argument("generate_scenario: more loads than distinct grid criticalities");
  }

  if (!(o.region_criticality_lo >= 0.0 && o.region_criticality_lo <= o.region_criticality_hi &&
        o.region_criticality_hi <= 1.0)) {
    throw std::invalid_argument("generate_scenario: region criticality range must lie in [0, 1]");
  }
  const std::int64_t b_lo = std::llround(std::ceil(o.region_criticality_lo / o.criticality_grid - 1e-9));
  const std::int64_t b_hi = std::llround(std::floor(o.region_criticality_hi / o.criticality_grid + 1e-9));

  rng::Xoshiro256 gen(rng::stream_key(o.seed, "scenario"));
  ScenarioConfig c;
  c.seed = o.seed;
  c.nature_weight = 0.5;
  std::set<std::int64_t> used;
  int next_id = 0;
  double total = 0.0;
  for (int r = 0; r < o.regions; ++r) {
    RegionSpec spec;
    spec.id = r;
    const std::int64_t b = b_lo + static_cast<std::int64_t>(gen.below(static_cast<std::uint64_t>(b_hi - b_lo) + 1));
    spec.criticality = static_cast<double>(b) * o.criticality_grid;
    for (int k = 0; k < o.loads_per_region; ++k) {
      std::int64_t a = 0;
      for (int tries = 0;; ++tries) {
        if (tries > 1000000) throw std::runtime_error("generate_scenario: could not place a distinct criticality");
        a = static_cast<std::int64_t>(gen.below(static_cast<std::uint64_t>(steps) + 1));
        if ((a - b) % 2 != 0) continue;
        if (used.insert((a + b) / 2).second) break;
      }
      LoadSpec l;
      l.id = next_id++;
      l.power = gen.uniform(o.power_lo, o.power_hi);
      l.nature = static_cast<double>(a) * o.criticality_grid;
      total += l.power;
      spec.loads.push_back(l);
    }
    c.regions.push_back(std::move(spec));
  }
  c.required = o.required_fraction * total;

  if (o.graph == "random") {
    c.graph.kind = "random";
    c.graph.edge_probability = o.edge_probability;
  } else {
    c.graph.kind = "static";
    c.graph.topology = o.graph;
  }
  c.graph.window = o.window;
  c.step.kind = "polynomial";
  c.step.exponent = o.step_exponent;
  c.step.scale = o.step_scale;
  c.estimator.kind = o.estimator;
  c.run.max_rounds = o.max_rounds;
  c.run.min_rounds = std::min(o.min_rounds, o.max_rounds);
  validate(c);
  return c;
}

netgraph::GraphSchedule build_schedule(const ScenarioConfig& c) {
  const int n = static_cast<int>(c.regions.size());
  auto edge_set = [&](const EdgeList& edges) {
    std::vector<netgraph::Edge> es;
    for (const auto& [a, b] : edges) es.emplace_back(a, b);
    return netgraph::EdgeSet(n, std::move(es));
  };
  const GraphSpec& g = c.graph;
  if (g.kind == "periodic") {
    std::vector<netgraph::EdgeSet> cycle;
    for (const EdgeList& e : g.cycle) cycle.push_back(edge_set(e));
    return netgraph::GraphSchedule::periodic(std::move(cycle), g.window);
  }
  if (g.kind == "random") return netgraph::GraphSchedule::random(n, g.edge_probability, g.window, c.seed);
  if (g.topology == "line") return netgraph::GraphSchedule::fixed(netgraph::EdgeSet::line(n), g.window);
  if (g.topology == "ring") return netgraph::GraphSchedule::fixed(netgraph::EdgeSet::ring(n), g.window);
  if (g.topology == "complete") return netgraph::GraphSchedule::fixed(netgraph::EdgeSet::complete(n), g.window);
  return netgraph::GraphSchedule::fixed(edge_set(g.edges), g.window);
}

protocol::StepSchedule build_step(const ScenarioConfig& c) {
  if (c.step.kind == "polynomial") return protocol::StepSchedule::polynomial(c.step.exponent, c.step.scale);
  if (c.step.kind == "table") return protocol::StepSchedule::table(c.step.values);
  return protocol::StepSchedule::harmonic(c.step.scale, c.step.offset);
}

protocol::PEstimator build_estimator(const ScenarioConfig& c) {
  const int n = static_cast<int>(c.regions.size());
  if (c.estimator.kind == "noisy_split") return protocol::PEstimator::noisy_split(c.required, n, c.seed);
  if (c.estimator.kind == "trace") return protocol::PEstimator::trace(c.required, c.estimator.rows);
  return protocol::PEstimator::exact_split(c.required, n);
}

protocol::ProtocolSetup build_setup(const ScenarioConfig& c) {
  protocol::ProtocolSetup s;
  if (c.mode == Mode::discrete) {
    auto rated = rated_regions(c);
    for (std::size_t j = 0; j < rated.size(); ++j) {
      s.regions.push_back(protocol::RegionModel::build(c.regions[j].id, std::move(rated[j]), c.ramp_width));
    }
  } else {
    for (const RegionSpec& r : c.regions) {
      s.regions.push_back(protocol::RegionModel::build(r.id, {RatedLoad{r.id, r.capacity, r.criticality}}, 1.0));
    }
  }
  s.schedule = build_schedule(c);
  s.step = build_step(c);
  s.estimator = build_estimator(c);
  s.ramp_width = c.ramp_width;
  s.dmc = c.run.dmc == "plain" ? protocol::DmcMode::plain : protocol::DmcMode::self_tuning;
  if (c.run.initial_x.size() == 1) {
    s.x0.assign(c.regions.size(), c.run.initial_x.front());
  } else {
    s.x0 = c.run.initial_x;
  }
  return s;
}

protocol::RunOptions build_run_options(const ScenarioConfig& c) {
  protocol::RunOptions o;
  o.max_rounds = c.run.max_rounds;
  o.persistence = c.run.persistence;
  o.persistence_includes_dmc = c.graph.kind == "static";
  if (c.mode == Mode::discrete) {
    o.min_rounds = c.run.min_rounds;
    o.finalize = true;
  } else {
    // No discrete threshold to settle on: run the full horizon.
    o.min_rounds = c.run.max_rounds;
    o.finalize = false;
  }
  return o;
}

OracleSummary solve_oracle(const ScenarioConfig& c) {
  OracleSummary s;
  s.required = c.required;
  s.ramp_width = c.ramp_width;
  if (c.mode == Mode::continuous) {
    const auto regions = continuous_regions(c);
    const oracle::ContinuousSolution sol = oracle::continuous_solution(regions, c.required);
    s.z_hat = sol.z_tilde;
    s.z_star = sol.z_tilde;
    s.z_star_recovered = sol.z_tilde;
    s.per_region_shed = sol.per_region_shed;
    s.shed_total = std::accumulate(sol.per_region_shed.begin(), sol.per_region_shed.end(), 0.0);
    s.shed_count = static_cast<std::size_t>(
        std::count_if(sol.per_region_shed.begin(), sol.per_region_shed.end(), [](double v) { return v > 0.0; }));
    return s;
  }
  const std::vector<RatedLoad> loads = pooled_loads(c);
  const Ccf ccf = Ccf::build(loads);
  s.z_star = oracle::exact_z_star(ccf, c.required);
  const SurrogateCcf sur(ccf, c.ramp_width);
  s.z_hat = oracle::exact_z_hat(sur, c.required);
  const oracle::RecoveredThreshold rec = oracle::z_star_from_z_hat(ccf, s.z_hat, c.required);
  s.z_star_recovered = rec.z_star;
  s.exact_match = rec.exact_match;
  s.shed_total = ccf(s.z_star);
  s.shed_count = oracle::loads_at_or_below(loads, s.z_star).size();
  return s;
}

SummaryReport summarize(const ScenarioConfig& c, const protocol::RunTrace& trace) {
  SummaryReport r;
  r.mode = c.mode == Mode::discrete ? "discrete" : "continuous";
  r.oracle = solve_oracle(c);
  r.final_z = trace.final_z;
  r.final_x = trace.final_x;
  r.rounds = trace.rounds;
  r.finalize_rounds = trace.finalize_rounds;
  r.last_change_round = trace.last_change_round;
  for (const RegionSpec& spec : c.regions) r.region_ids.push_back(spec.id);

  if (c.mode == Mode::discrete) {
    const auto rated = rated_regions(c);
    bool all_match = true;
    for (std::size_t j = 0; j < rated.size(); ++j) {
      double shed = 0.0;
      const ExtValue z = j < trace.final_z.size() ? trace.final_z[j] : ExtValue::infinity();
      if (z.is_finite()) {
        for (const RatedLoad& l : rated[j]) {
          if (l.criticality <= z.value()) shed += l.power;
        }
      }
      r.distributed_shed.push_back(shed);
      r.distributed_total += shed;
      all_match = all_match && z == ExtValue::finite(r.oracle.z_star);
    }
    r.converged = trace.converged;
    r.matches_oracle = all_match && trace.converged;
  } else {
    bool all_close = true;
    for (std::size_t j = 0; j < c.regions.size(); ++j) {
      const double x = trace.final_x[j];
      const double shed = c.regions[j].capacity * ramp(x - c.regions[j].criticality, 1.0);
      r.distributed_shed.push_back(shed);
      r.distributed_total += shed;
      all_close = all_close && std::abs(x - r.oracle.z_hat) <= c.run.tolerance &&
                  std::abs(shed - r.oracle.per_region_shed[j]) <= c.run.tolerance;
    }
    r.matches_oracle = all_close;
    r.converged = all_close;
  }
  return r;
}

std::string to_json(const OracleSummary& s, int indent) {
  json j{{"required_shed", s.required},   {"ramp_width", s.ramp_width},
         {"z_star", s.z_star},            {"z_hat", s.z_hat},
         {"z_star_recovered", s.z_star_recovered}, {"exact_match", s.exact_match},
         {"shed_total", s.shed_total},    {"shed_count", s.shed_count}};
  if (!s.per_region_shed.empty()) j["per_region_shed"] = s.per_region_shed;
  return j.dump(indent);
}

std::string to_json(const SummaryReport& s, int indent) {
  json regions = json::array();
  for (std::size_t j = 0; j < s.region_ids.size(); ++j) {
    json r{{"id", s.region_ids[j]}};
    if (j < s.final_z.size()) r["z_final"] = ext_json(s.final_z[j]);
    if (j < s.final_x.size()) r["x_final"] = s.final_x[j];
    if (j < s.distributed_shed.size()) r["shed"] = s.distributed_shed[j];
    regions.push_back(std::move(r));
  }
  json j{{"mode", s.mode},
         {"oracle", json::parse(to_json(s.oracle, -1))},
         {"regions", std::move(regions)},
         {"distributed_shed_total", s.distributed_total},
         {"matches_oracle", s.matches_oracle},
         {"rounds", s.rounds},
         {"finalize_rounds", s.finalize_rounds},
         {"last_change_round", s.last_change_round},
         {"converged", s.converged}};
  if (!s.certificate_digest.empty()) j["certificate"] = s.certificate_digest;
  return j.dump(indent);
}

rootfind::AssumptionCertificate certify_scenario(const ScenarioConfig& c) {
  const protocol::ProtocolSetup setup = build_setup(c);
  const rootfind::TimeVaryingField field = rootfind::load_shedding_field(setup.regions, setup.estimator);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& r : setup.regions) {
    for (double l : r.levels) {
      lo = std::min(lo, l);
      hi = std::max(hi, l);
    }
  }
  if (!std::isfinite(lo)) lo = hi = 0.0;
  rootfind::CertifyOptions opts;
  const double pad = std::max(0.1 * (hi - lo), c.ramp_width);
  opts.grid.lo = c.check.grid_lo.value_or(lo - c.ramp_width - pad);
  opts.grid.hi = c.check.grid_hi.value_or(hi + pad);
  opts.grid.points = c.check.grid_points;
  opts.horizon = c.check.horizon;
  opts.probe_rounds = std::min<std::int64_t>(c.check.horizon, 2000);
  return rootfind::certify(field, setup.schedule, setup.step, opts);
}

std::string to_json(const rootfind::AssumptionCertificate& c, int indent) {
  json checks = json::array();
  for (const auto& k : c.checks) checks.push_back({{"name", k.name}, {"pass", k.pass}, {"detail", k.detail}});
  json j{{"pass", c.all_pass()},
         {"M", c.bound},
         {"lambda", c.lipschitz},
         {"theta", c.theta},
         {"B", c.window},
         {"nu_estimate", c.nu_estimate},
         {"omega_estimate", c.omega_estimate},
         {"grid", {{"lo", c.grid.lo}, {"hi", c.grid.hi}, {"points", c.grid.points}}},
         {"horizon", c.horizon},
         {"checks", std::move(checks)}};
  j["sign_witness"] = c.sign_witness ? json(*c.sign_witness) : json(nullptr);
  return j.dump(indent);
}

std::string digest(const rootfind::AssumptionCertificate& c) {
  const auto passed = std::count_if(c.checks.begin(), c.checks.end(), [](const auto& k) { return k.pass; });
  return std::to_string(passed) + "/" + std::to_string(c.checks.size()) + " checks pass";
}

void write_trace(const protocol::RunTrace& trace, std::ostream& out) {
  out << "t,eta,region,x,zeta,z_min,alpha,p\n";
  for (const protocol::TraceRow& r : trace.rows) {
    out << r.t << ',' << fmt12(r.eta) << ',' << r.region << ',' << fmt12(r.x) << ',' << r.zeta.to_string() << ','
        << r.z_min.to_string() << ',' << fmt12(r.alpha) << ',' << fmt12(r.p) << '\n';
  }
}

void emit_trace(const protocol::RunTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open trace file '" + path + "' for writing");
  write_trace(trace, out);
  out.flush();
  if (!out) throw std::runtime_error("write failed for trace file '" + path + "'");
}

}  // namespace lshed::scenario
