#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace lshed::netgraph {

/// Undirected edge, stored with a < b.
struct Edge {
  int a = 0;
  int b = 0;

  Edge() = default;
  Edge(int i, int j);  // normalizes order; throws on i == j

  auto operator<=>(const Edge&) const = default;
};

/// Undirected simple graph on nodes 0..n-1. Edges are deduplicated and sorted.
class EdgeSet {
 public:
  EdgeSet() = default;
  EdgeSet(int n, std::vector<Edge> edges);

  /// Replaces the contents, reusing storage.
  void assign(int n, std::span<const Edge> edges);

  int node_count() const { return n_; }
  std::span<const Edge> edges() const { return edges_; }
  bool contains(int i, int j) const;
  std::vector<int> degrees() const;
  bool connected() const;

  static EdgeSet line(int n);
  static EdgeSet complete(int n);
  static EdgeSet ring(int n);

 private:
  int n_ = 0;
  std::vector<Edge> edges_;
};

/// Dense row-major n x n matrix. Entry (i, j) weights x_j in the update of x_i.
class MixingMatrix {
 public:
  MixingMatrix() = default;
  explicit MixingMatrix(int n) : n_(n), w_(static_cast<std::size_t>(n) * n, 0.0) {}

  static MixingMatrix identity(int n);

  /// Resizes to n x n and zeroes every entry, reusing storage.
  void reset(int n);

  int size() const { return n_; }
  double operator()(int i, int j) const { return w_[static_cast<std::size_t>(i) * n_ + j]; }
  double& operator()(int i, int j) { return w_[static_cast<std::size_t>(i) * n_ + j]; }
  std::span<const double> row(int i) const { return {w_.data() + static_cast<std::size_t>(i) * n_, static_cast<std::size_t>(n_)}; }

  std::vector<double> apply(std::span<const double> x) const;
  std::vector<double> row_sums() const;
  std::vector<double> column_sums() const;
  MixingMatrix product(const MixingMatrix& rhs) const;  // this * rhs

 private:
  int n_ = 0;
  std::vector<double> w_;
};

/// w_ij = 1/(1 + max(d_i, d_j)) on edges, w_ii = 1 - sum of the row's other entries.
MixingMatrix metropolis_weights(const EdgeSet& edges);

/// Directed arc j -> i of the threshold graph; from == to for self-loops.
struct Arc {
  int from = 0;
  int to = 0;
  auto operator<=>(const Arc&) const = default;
};

/// Arcs (j, i) with w_ij > gamma, self-loops included. Requires 0 < gamma < 1.
std::vector<Arc> threshold_graph(const MixingMatrix& w, double gamma);

/// Below the smallest nonzero Metropolis-Hastings entry 1/n.
inline double default_gamma(int n) { return 1.0 / (2.0 * n); }

struct MixingReport {
  double max_row_error = 0.0;
  double max_column_error = 0.0;
  double min_diagonal = 0.0;
  bool nonnegative = true;
  bool respects_edges = true;  // zero off the edge set
  bool ok(double tol = 1e-12) const;
};

MixingReport check_mixing_matrix(const MixingMatrix& w, const EdgeSet& edges);

/// Communication graph E(t) for t = 0, 1, 2, ...
class GraphSchedule {
 public:
  enum class Kind { static_graph, periodic, random };

  /// The same graph every step.
  static GraphSchedule fixed(EdgeSet edges, int window = 1);

  /// cycle[t mod cycle.size()].
  static GraphSchedule periodic(std::vector<EdgeSet> cycle, int window);

  /// Each possible edge present independently with probability
  /// `edge_probability`, drawn from counter_hash(stream, t, pair). At the last
  /// step of every window, if the window's union is disconnected, the edges of
  /// a random spanning tree are added, so every window is connected.
  static GraphSchedule random(int n, double edge_probability, int window, std::uint64_t seed);

  Kind kind() const { return kind_; }
  int node_count() const { return n_; }
  int window() const { return window_; }
  double edge_probability() const { return p_; }
  std::uint64_t seed() const { return seed_; }
  std::span<const EdgeSet> cycle() const { return cycle_; }

  EdgeSet at(std::int64_t t) const;

  /// The B edge sets of window w (steps wB .. wB + B - 1), reusing `out`.
  void window_into(std::int64_t w, std::vector<EdgeSet>& out) const;

 private:
  void raw_random_into(std::int64_t t, std::vector<Edge>& out) const;

  Kind kind_ = Kind::static_graph;
  int n_ = 0;
  int window_ = 1;
  std::vector<EdgeSet> cycle_;
  double p_ = 0.0;
  std::uint64_t seed_ = 0;
  std::uint64_t key_ = 0;
};

struct ConnectivityReport {
  bool connected = true;
  std::int64_t windows_checked = 0;
  std::optional<std::int64_t> first_failing_window;
  std::string to_string() const;
};

/// Window w covers steps [w*B, (w+1)*B - 1]. Throws std::invalid_argument
/// unless horizon is a positive multiple of B.
ConnectivityReport check_window_connectivity(const GraphSchedule& schedule, std::int64_t horizon);

/// Everything a round needs from the communication graph at step t.
struct RoundGraph {
  EdgeSet edges;
  MixingMatrix weights;
  std::vector<std::vector<int>> neighbors;  // ascending, self excluded

  static RoundGraph from(EdgeSet edges);
  /// Same result as from(), reusing this object's storage.
  void rebuild(const EdgeSet& edges);
};

/// Memoizes RoundGraph per step. Static and periodic schedules are built once.
/// Random schedules on at most 8 nodes are keyed by edge bitmask; larger ones
/// are rebuilt every window.
class RoundGraphCache {
 public:
  explicit RoundGraphCache(const GraphSchedule& schedule);

  const RoundGraph& at(std::int64_t t);

 private:
  const GraphSchedule* schedule_;
  std::vector<RoundGraph> fixed_;
  std::vector<EdgeSet> window_edges_;
  std::vector<RoundGraph> window_;
  std::vector<const RoundGraph*> window_ptrs_;
  std::unordered_map<std::uint64_t, RoundGraph> by_mask_;
  std::int64_t current_window_ = -1;
};

}  // namespace lshed::netgraph
