#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lshed/criticality.hpp"
#include "lshed/ext_value.hpp"
#include "lshed/netgraph.hpp"

namespace lshed::protocol {

/// A region as the protocol sees it: its rated loads, their CCF and surrogate,
/// and the sorted criticality levels used for the zeta update.
struct RegionModel {
  int id = 0;
  std::vector<RatedLoad> loads;
  SurrogateCcf surrogate;
  std::vector<double> levels;

  /// `ramp_width` is the network-wide c, shared by every region.
  static RegionModel build(int id, std::vector<RatedLoad> loads, double ramp_width);
};

/// eta(t) for rounds t = 0, 1, 2, ...
class StepSchedule {
 public:
  enum class Kind { harmonic, polynomial, table };

  /// scale / (t + offset). The default is 1 / (t + 1).
  static StepSchedule harmonic(double scale = 1.0, double offset = 1.0);
  /// scale / (t + 1)^exponent.
  static StepSchedule polynomial(double exponent, double scale = 1.0);
  /// table[t]; throws std::out_of_range past the end.
  static StepSchedule table(std::vector<double> values);

  double operator()(std::int64_t t) const;

  Kind kind() const { return kind_; }
  double scale() const { return scale_; }
  double offset() const { return offset_; }
  double exponent() const { return exponent_; }
  std::span<const double> values() const { return table_; }

  /// Whether sum eta = inf and sum eta^2 < inf, when decidable from the rule.
  /// Tables are finite, so the answer for them is nullopt.
  std::optional<bool> robbins_monro() const;

  std::string describe() const;

 private:
  Kind kind_ = Kind::harmonic;
  double scale_ = 1.0;
  double offset_ = 1.0;
  double exponent_ = 1.0;
  std::vector<double> table_;
};

/// Per-region estimates p_j(t) of the required shed P.
class PEstimator {
 public:
  enum class Kind { exact_split, noisy_split, trace };

  /// P / n for every region.
  static PEstimator exact_split(double total, int regions);
  /// P / n + e_j(t) / t with e_j(t) uniform on [-1, 1]; P / n at t = 0.
  static PEstimator noisy_split(double total, int regions, std::uint64_t seed);
  /// rows[t] (the last row once t runs past the table). Each row has n entries.
  static PEstimator trace(double total, std::vector<std::vector<double>> rows);

  Kind kind() const { return kind_; }
  double total() const { return total_; }
  int regions() const { return n_; }
  std::uint64_t seed() const { return seed_; }
  std::span<const std::vector<double>> rows() const { return rows_; }

  double at(std::int64_t t, int j) const;
  void fill(std::int64_t t, std::span<double> out) const;

 private:
  Kind kind_ = Kind::exact_split;
  double total_ = 0.0;
  int n_ = 0;
  std::uint64_t seed_ = 0;
  std::uint64_t key_ = 0;
  std::vector<std::vector<double>> rows_;
};

std::vector<double> p_values(const PEstimator& estimator, std::int64_t t);

/// max over t in [t_begin, t_end] of |sum_j p_j(t) - P| / eta(t), with
/// eta(t) = 1/(t+1). This is the theta of the estimator's convergence rate.
double estimator_theta(const PEstimator& estimator, std::int64_t t_begin, std::int64_t t_end);

/// Fixed-order dot product of a mixing row with x. Shared by every consensus
/// update so that equivalent recursions agree bit for bit.
double mix_row(std::span<const double> row, std::span<const double> x);

/// x_j <- sum_k W_jk x_k - eta (f_hat_j(x_j) - p_j). Throws
/// std::invalid_argument on dimension mismatch.
std::vector<double> x_update_round(std::span<const double> x, const netgraph::MixingMatrix& w, double eta,
                                   std::span<const double> p, std::span<const SurrogateCcf> surrogates);

/// Smallest local criticality >= x_new, or +inf.
ExtValue zeta_update(const RegionModel& region, double x_new);

enum class DmcMode {
  self_tuning,  // alpha = 1/2 after an increase, c/2 otherwise
  plain,        // alpha = 0: exact min-consensus over the current graph
};

struct DmcState {
  std::vector<ExtValue> z;
  std::vector<double> alpha;
};

/// z_j <- min(min over k in N_j and j of z_k + alpha_j, zeta_j), then alpha_j
/// is updated from whether z_j increased.
DmcState dmc_round(const DmcState& state, std::span<const std::vector<int>> neighbors,
                   std::span<const ExtValue> zeta_next, double c, DmcMode mode = DmcMode::self_tuning);

struct ProtocolSetup {
  std::vector<RegionModel> regions;
  netgraph::GraphSchedule schedule;
  StepSchedule step;
  PEstimator estimator;
  double ramp_width = 1.0;  // the c of the DMC step
  DmcMode dmc = DmcMode::self_tuning;
  std::vector<double> x0;   // empty means all zero
};

struct RunOptions {
  std::int64_t max_rounds = 200000;
  /// No stop before this many rounds, however long zeta has been still.
  std::int64_t min_rounds = 0;
  /// Stop once zeta and z_min are unchanged this many consecutive rounds.
  std::int64_t persistence = 50;
  /// Whether z_min must also be still. Under a time-varying graph the DMC
  /// offsets follow the topology and never settle, so only zeta is watched.
  bool persistence_includes_dmc = true;
  /// After stopping, run an exact min-consensus over the frozen zeta so every
  /// region ends with min_j zeta_j. Disable to report the raw DMC state.
  bool finalize = true;
  bool record_trace = true;
};

/// State at time t, produced by round t-1 (which used step eta and estimate p).
struct TraceRow {
  std::int64_t t = 0;
  double eta = 0.0;
  int region = 0;
  double x = 0.0;
  ExtValue zeta;
  ExtValue z_min;
  double alpha = 0.0;
  double p = 0.0;
};

struct RunTrace {
  std::vector<TraceRow> rows;
  std::vector<ExtValue> final_z;     // per region answer
  std::vector<ExtValue> final_zeta;
  std::vector<double> final_x;
  std::int64_t rounds = 0;           // protocol rounds, excluding finalization
  std::int64_t finalize_rounds = 0;
  std::int64_t last_change_round = 0;  // last round in which zeta or z_min moved
  bool converged = false;
};

/// Rounds run by the finalizing min-consensus: n windows, enough for the
/// minimum to cross every window-connected graph from any phase.
std::int64_t finalize_round_count(const ProtocolSetup& setup);

/// Initial state: x = x0 (or 0), zeta = +inf, z_min = +inf, alpha = c/2.
/// Round t: build W(t) from E(t), x-update, zeta-update, DMC update.
RunTrace run_protocol(const ProtocolSetup& setup, const RunOptions& options);

/// Ids of the region's loads with criticality <= z_star, in load order.
std::vector<int> shed_decision(const RegionModel& region, double z_star);

}  // namespace lshed::protocol
