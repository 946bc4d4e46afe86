#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lshed/oracle.hpp"
#include "lshed/protocol.hpp"
#include "lshed/rootfind.hpp"

namespace lshed::scenario {

inline constexpr int kConfigVersion = 1;

enum class Mode { discrete, continuous };

struct LoadSpec {
  int id = 0;
  double power = 0.0;
  double nature = 0.0;  // C_n
  bool operator==(const LoadSpec&) const = default;
};

/// Discrete regions carry loads and their C_r in `criticality`. Continuous
/// regions carry a sheddable `capacity` at criticality `criticality`.
struct RegionSpec {
  int id = 0;
  double criticality = 0.0;
  std::vector<LoadSpec> loads;
  double capacity = 0.0;
  bool operator==(const RegionSpec&) const = default;
};

using EdgeList = std::vector<std::pair<int, int>>;

struct GraphSpec {
  std::string kind = "static";  // static | periodic | random
  std::string topology;         // line | ring | complete, static only; empty means `edges`
  EdgeList edges;
  std::vector<EdgeList> cycle;
  double edge_probability = 0.5;
  int window = 1;
  bool operator==(const GraphSpec&) const = default;
};

struct StepSpec {
  std::string kind = "harmonic";  // harmonic | polynomial | table
  double scale = 1.0;
  double offset = 1.0;
  double exponent = 1.0;
  std::vector<double> values;
  bool operator==(const StepSpec&) const = default;
};

struct EstimatorSpec {
  std::string kind = "exact_split";  // exact_split | noisy_split | trace
  std::vector<std::vector<double>> rows;
  bool operator==(const EstimatorSpec&) const = default;
};

struct RunSpec {
  std::int64_t max_rounds = 200000;
  std::int64_t min_rounds = 0;
  std::int64_t persistence = 50;
  std::string dmc = "self_tuning";  // self_tuning | plain
  double tolerance = 0.01;          // continuous mode agreement with the oracle
  /// x(0): empty for all zeros, one value for every region, or one per region.
  std::vector<double> initial_x;
  bool operator==(const RunSpec&) const = default;
};

struct CheckSpec {
  std::optional<double> grid_lo;
  std::optional<double> grid_hi;
  int grid_points = 1001;
  std::int64_t horizon = 10000;
  bool operator==(const CheckSpec&) const = default;
};

struct ScenarioConfig {
  int version = kConfigVersion;
  Mode mode = Mode::discrete;
  std::uint64_t seed = 0;
  double required = 0.0;  // P, GW
  double nature_weight = 0.5;
  bool ramp_width_auto = true;
  double ramp_width = 1.0;  // resolved value when auto
  std::vector<RegionSpec> regions;
  GraphSpec graph;
  StepSpec step;
  EstimatorSpec estimator;
  RunSpec run;
  CheckSpec check;
  bool operator==(const ScenarioConfig&) const = default;
};

/// Parses and validates. Malformed JSON raises ParseError with line and
/// column; a well-formed document that breaks a rule raises ValidationError
/// naming the rule. An automatic ramp width is resolved to the pooled min gap.
ScenarioConfig parse_scenario(const std::string& text);
ScenarioConfig load_scenario(const std::string& path);

/// Re-runs validation on an in-memory config (resolving an automatic ramp width).
void validate(ScenarioConfig& config);

std::string to_json(const ScenarioConfig& config, int indent = 2);
void save_scenario(const ScenarioConfig& config, const std::string& path);

struct GenerateOptions {
  int regions = 4;
  int loads_per_region = 100;
  std::uint64_t seed = 0;
  double power_lo = 0.01;
  double power_hi = 0.03;
  double required_fraction = 0.4;
  /// Combined criticalities are distinct multiples of this grid step.
  double criticality_grid = 1e-4;
  /// Region criticalities C_r are drawn on the grid from this range.
  double region_criticality_lo = 0.0;
  double region_criticality_hi = 1.0;
  std::string graph = "line";  // line | ring | complete | random
  double edge_probability = 0.8;
  int window = 1;
  std::string estimator = "exact_split";
  /// eta(t) = step_scale / (t+1)^step_exponent
  double step_scale = 2.0;
  double step_exponent = 0.9;
  std::int64_t min_rounds = 600000;
  std::int64_t max_rounds = 660000;
};

/// Deterministic in the options. Loads get C_n and regions C_r on the grid
/// with matching parity, so that the equal-weight combination lands on the
/// grid too; combined values are distinct across the whole network.
ScenarioConfig generate_scenario(const GenerateOptions& options);

CriticalityCombiner combiner_of(const ScenarioConfig& config);

/// Rated loads per region, in config order. Discrete mode only.
std::vector<std::vector<RatedLoad>> rated_regions(const ScenarioConfig& config);
std::vector<RatedLoad> pooled_loads(const ScenarioConfig& config);

/// Continuous mode only.
std::vector<oracle::ContinuousRegion> continuous_regions(const ScenarioConfig& config);

netgraph::GraphSchedule build_schedule(const ScenarioConfig& config);
protocol::StepSchedule build_step(const ScenarioConfig& config);
protocol::PEstimator build_estimator(const ScenarioConfig& config);

/// Discrete mode: regions with the shared ramp width. Continuous mode: one
/// load of power `capacity` per region and ramp width 1.
protocol::ProtocolSetup build_setup(const ScenarioConfig& config);
protocol::RunOptions build_run_options(const ScenarioConfig& config);

struct OracleSummary {
  double required = 0.0;
  double ramp_width = 0.0;
  double z_star = 0.0;
  double z_hat = 0.0;
  double z_star_recovered = 0.0;
  bool exact_match = false;
  double shed_total = 0.0;
  std::size_t shed_count = 0;
  // continuous mode
  std::vector<double> per_region_shed;
};

OracleSummary solve_oracle(const ScenarioConfig& config);

struct SummaryReport {
  std::string mode;
  OracleSummary oracle;
  std::vector<int> region_ids;
  std::vector<ExtValue> final_z;
  std::vector<double> final_x;
  std::vector<double> distributed_shed;  // per region
  double distributed_total = 0.0;
  bool matches_oracle = false;
  std::int64_t rounds = 0;
  std::int64_t finalize_rounds = 0;
  std::int64_t last_change_round = 0;
  bool converged = false;
  std::string certificate_digest;
};

/// Discrete: each region sheds its loads at or below its own final z.
/// Continuous: region j sheds capacity_j * w_1(x_j - C_j).
SummaryReport summarize(const ScenarioConfig& config, const protocol::RunTrace& trace);

std::string to_json(const OracleSummary& s, int indent = 2);
std::string to_json(const SummaryReport& s, int indent = 2);

/// Assumption certificate of the scenario's load-shedding field.
rootfind::AssumptionCertificate certify_scenario(const ScenarioConfig& config);
std::string to_json(const rootfind::AssumptionCertificate& c, int indent = 2);
std::string digest(const rootfind::AssumptionCertificate& c);

/// CSV with header t,eta,region,x,zeta,z_min,alpha,p; values as %.12g,
/// infinity as `inf`.
void write_trace(const protocol::RunTrace& trace, std::ostream& out);
/// Throws std::runtime_error naming the path on I/O failure.
void emit_trace(const protocol::RunTrace& trace, const std::string& path);

}  // namespace lshed::scenario
