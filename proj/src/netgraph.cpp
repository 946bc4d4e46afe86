#include "lshed/netgraph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "lshed/rng.hpp"

namespace lshed::netgraph {

namespace {

class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  int find(int v) {
    while (parent_[v] != v) v = parent_[v] = parent_[parent_[v]];
    return v;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[a] = b;
    ++merges_;
    return true;
  }
  int merges() const { return merges_; }

 private:
  std::vector<int> parent_;
  int merges_ = 0;
};

std::uint64_t pair_index(int n, int a, int b) {
  return static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(n) + static_cast<std::uint64_t>(b);
}

}  // namespace

Edge::Edge(int i, int j) : a(std::min(i, j)), b(std::max(i, j)) {
  if (i == j) throw std::invalid_argument("self-loop edges are implicit; got (" + std::to_string(i) + "," + std::to_string(j) + ")");
}

EdgeSet::EdgeSet(int n, std::vector<Edge> edges) : n_(n), edges_(std::move(edges)) {
  if (n < 0) throw std::invalid_argument("negative node count");
  for (const Edge& e : edges_) {
    if (e.a < 0 || e.b >= n) {
      throw std::invalid_argument("edge (" + std::to_string(e.a) + "," + std::to_string(e.b) + ") outside [0, " +
                                  std::to_string(n) + ")");
    }
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
}

void EdgeSet::assign(int n, std::span<const Edge> edges) {
  n_ = n;
  edges_.assign(edges.begin(), edges.end());
  for (const Edge& e : edges_) {
    if (e.a < 0 || e.b >= n) throw std::invalid_argument("edge outside the node range");
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
}

bool EdgeSet::contains(int i, int j) const {
  if (i == j) return false;
  return std::binary_search(edges_.begin(), edges_.end(), Edge(i, j));
}

std::vector<int> EdgeSet::degrees() const {
  std::vector<int> d(n_, 0);
  for (const Edge& e : edges_) {
    ++d[e.a];
    ++d[e.b];
  }
  return d;
}

bool EdgeSet::connected() const {
  if (n_ <= 1) return true;
  UnionFind uf(n_);
  for (const Edge& e : edges_) uf.unite(e.a, e.b);
  return uf.merges() == n_ - 1;
}

EdgeSet EdgeSet::line(int n) {
  std::vector<Edge> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return EdgeSet(n, std::move(e));
}

EdgeSet EdgeSet::complete(int n) {
  std::vector<Edge> e;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) e.emplace_back(i, j);
  return EdgeSet(n, std::move(e));
}

EdgeSet EdgeSet::ring(int n) {
  std::vector<Edge> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  if (n > 2) e.emplace_back(0, n - 1);
  return EdgeSet(n, std::move(e));
}

void MixingMatrix::reset(int n) {
  n_ = n;
  w_.assign(static_cast<std::size_t>(n) * n, 0.0);
}

MixingMatrix MixingMatrix::identity(int n) {
  MixingMatrix m(n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::vector<double> MixingMatrix::apply(std::span<const double> x) const {
  std::vector<double> y(n_, 0.0);
  for (int i = 0; i < n_; ++i) {
    double acc = 0.0;
    for (int j = 0; j < n_; ++j) acc += (*this)(i, j) * x[j];
    y[i] = acc;
  }
  return y;
}

std::vector<double> MixingMatrix::row_sums() const {
  std::vector<double> s(n_, 0.0);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) s[i] += (*this)(i, j);
  return s;
}

std::vector<double> MixingMatrix::column_sums() const {
  std::vector<double> s(n_, 0.0);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) s[j] += (*this)(i, j);
  return s;
}

MixingMatrix MixingMatrix::product(const MixingMatrix& rhs) const {
  if (rhs.n_ != n_) throw std::invalid_argument("matrix size mismatch");
  MixingMatrix out(n_);
  for (int i = 0; i < n_; ++i)
    for (int k = 0; k < n_; ++k) {
      const double a = (*this)(i, k);
      if (a == 0.0) continue;
      for (int j = 0; j < n_; ++j) out(i, j) += a * rhs(k, j);
    }
  return out;
}

namespace {

void fill_metropolis(const EdgeSet& edges, std::span<const int> deg, MixingMatrix& w) {
  const int n = edges.node_count();
  w.reset(n);
  for (const Edge& e : edges.edges()) {
    const double v = 1.0 / (1.0 + std::max(deg[e.a], deg[e.b]));
    w(e.a, e.b) = v;
    w(e.b, e.a) = v;
  }
  for (int i = 0; i < n; ++i) {
    double off = 0.0;
    for (int j = 0; j < n; ++j)
      if (j != i) off += w(i, j);
    w(i, i) = 1.0 - off;
  }
}

}  // namespace

MixingMatrix metropolis_weights(const EdgeSet& edges) {
  MixingMatrix w;
  const std::vector<int> deg = edges.degrees();
  fill_metropolis(edges, deg, w);
  return w;
}

std::vector<Arc> threshold_graph(const MixingMatrix& w, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
  std::vector<Arc> arcs;
  for (int i = 0; i < w.size(); ++i)
    for (int j = 0; j < w.size(); ++j)
      if (w(i, j) > gamma) arcs.push_back({j, i});
  std::sort(arcs.begin(), arcs.end());
  return arcs;
}

bool MixingReport::ok(double tol) const {
  return nonnegative && respects_edges && min_diagonal > 0.0 && max_row_error <= tol && max_column_error <= tol;
}

MixingReport check_mixing_matrix(const MixingMatrix& w, const EdgeSet& edges) {
  MixingReport r;
  const int n = w.size();
  r.min_diagonal = n > 0 ? w(0, 0) : 1.0;
  for (double s : w.row_sums()) r.max_row_error = std::max(r.max_row_error, std::abs(s - 1.0));
  for (double s : w.column_sums()) r.max_column_error = std::max(r.max_column_error, std::abs(s - 1.0));
  for (int i = 0; i < n; ++i) {
    r.min_diagonal = std::min(r.min_diagonal, w(i, i));
    for (int j = 0; j < n; ++j) {
      if (w(i, j) < 0.0) r.nonnegative = false;
      if (i != j && w(i, j) != 0.0 && !edges.contains(i, j)) r.respects_edges = false;
    }
  }
  return r;
}

GraphSchedule GraphSchedule::fixed(EdgeSet edges, int window) {
  if (window < 1) throw std::invalid_argument("window must be positive");
  GraphSchedule s;
  s.kind_ = Kind::static_graph;
  s.n_ = edges.node_count();
  s.window_ = window;
  s.cycle_.push_back(std::move(edges));
  return s;
}

GraphSchedule GraphSchedule::periodic(std::vector<EdgeSet> cycle, int window) {
  if (window < 1) throw std::invalid_argument("window must be positive");
  if (cycle.empty()) throw std::invalid_argument("periodic schedule needs at least one edge set");
  GraphSchedule s;
  s.kind_ = Kind::periodic;
  s.n_ = cycle.front().node_count();
  for (const EdgeSet& e : cycle) {
    if (e.node_count() != s.n_) throw std::invalid_argument("periodic schedule: node counts differ");
  }
  s.window_ = window;
  s.cycle_ = std::move(cycle);
  return s;
}

GraphSchedule GraphSchedule::random(int n, double edge_probability, int window, std::uint64_t seed) {
  if (window < 1) throw std::invalid_argument("window must be positive");
  if (n < 1) throw std::invalid_argument("random schedule needs at least one node");
  if (!(edge_probability >= 0.0 && edge_probability <= 1.0)) {
    throw std::invalid_argument("edge probability must lie in [0, 1]");
  }
  GraphSchedule s;
  s.kind_ = Kind::random;
  s.n_ = n;
  s.window_ = window;
  s.p_ = edge_probability;
  s.seed_ = seed;
  s.key_ = rng::stream_key(seed, "edges");
  return s;
}

void GraphSchedule::raw_random_into(std::int64_t t, std::vector<Edge>& out) const {
  out.clear();
  for (int a = 0; a < n_; ++a)
    for (int b = a + 1; b < n_; ++b) {
      const double u = rng::to_unit(rng::counter_hash(key_, static_cast<std::uint64_t>(t), pair_index(n_, a, b)));
      if (u < p_) out.emplace_back(a, b);
    }
}

void GraphSchedule::window_into(std::int64_t w, std::vector<EdgeSet>& out) const {
  if (w < 0) throw std::invalid_argument("negative window index");
  out.resize(static_cast<std::size_t>(window_));
  const std::int64_t start = w * window_;
  if (kind_ != Kind::random) {
    for (int k = 0; k < window_; ++k) {
      const std::int64_t t = start + k;
      out[k] = kind_ == Kind::static_graph ? cycle_.front()
                                           : cycle_[static_cast<std::size_t>(t % static_cast<std::int64_t>(cycle_.size()))];
    }
    return;
  }
  thread_local std::vector<Edge> buf;
  UnionFind uf(n_);
  for (int k = 0; k < window_; ++k) {
    raw_random_into(start + k, buf);
    for (const Edge& e : buf) uf.unite(e.a, e.b);
    if (k + 1 == window_ && n_ > 1 && uf.merges() != n_ - 1) {
      // Union disconnected: add a random spanning tree at the window's last step.
      rng::Xoshiro256 gen(rng::counter_hash(rng::stream_key(seed_, "tree"), static_cast<std::uint64_t>(w)));
      std::vector<int> perm(n_);
      std::iota(perm.begin(), perm.end(), 0);
      for (int i = n_ - 1; i > 0; --i) std::swap(perm[i], perm[gen.below(static_cast<std::uint64_t>(i) + 1)]);
      for (int i = 1; i < n_; ++i) buf.emplace_back(perm[i], perm[gen.below(static_cast<std::uint64_t>(i))]);
    }
    out[k].assign(n_, buf);
  }
}

EdgeSet GraphSchedule::at(std::int64_t t) const {
  if (t < 0) throw std::invalid_argument("negative time step");
  switch (kind_) {
    case Kind::static_graph:
      return cycle_.front();
    case Kind::periodic:
      return cycle_[static_cast<std::size_t>(t % static_cast<std::int64_t>(cycle_.size()))];
    case Kind::random:
      break;
  }
  std::vector<EdgeSet> w;
  window_into(t / window_, w);
  return w[static_cast<std::size_t>(t % window_)];
}

std::string ConnectivityReport::to_string() const {
  if (connected) return "pass: " + std::to_string(windows_checked) + " windows connected";
  return "fail: window " + std::to_string(*first_failing_window) + " disconnected";
}

ConnectivityReport check_window_connectivity(const GraphSchedule& schedule, std::int64_t horizon) {
  const int b = schedule.window();
  if (horizon <= 0 || horizon % b != 0) {
    throw std::invalid_argument("horizon " + std::to_string(horizon) + " is not a positive multiple of window " +
                                std::to_string(b));
  }
  ConnectivityReport report;
  const int n = schedule.node_count();
  for (std::int64_t w = 0; w < horizon / b; ++w) {
    UnionFind uf(std::max(n, 1));
    for (std::int64_t t = w * b; t < (w + 1) * b; ++t) {
      const EdgeSet es = schedule.at(t);
      for (const Edge& e : es.edges()) uf.unite(e.a, e.b);
    }
    ++report.windows_checked;
    if (n > 1 && uf.merges() != n - 1) {
      report.connected = false;
      report.first_failing_window = w;
      break;
    }
  }
  return report;
}

RoundGraph RoundGraph::from(EdgeSet edges) {
  RoundGraph g;
  g.rebuild(edges);
  return g;
}

void RoundGraph::rebuild(const EdgeSet& e) {
  const int n = e.node_count();
  edges = e;
  neighbors.resize(static_cast<std::size_t>(n));
  for (auto& nb : neighbors) nb.clear();
  for (const Edge& ed : e.edges()) {
    neighbors[ed.a].push_back(ed.b);
    neighbors[ed.b].push_back(ed.a);
  }
  // Sorted edges give ascending neighbor lists for the lower endpoint but not
  // for the upper one.
  for (auto& nb : neighbors) std::sort(nb.begin(), nb.end());
  thread_local std::vector<int> deg;
  deg.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) deg[i] = static_cast<int>(neighbors[i].size());
  fill_metropolis(e, deg, weights);
}

RoundGraphCache::RoundGraphCache(const GraphSchedule& schedule) : schedule_(&schedule) {
  if (schedule.kind() != GraphSchedule::Kind::random) {
    for (const EdgeSet& e : schedule.cycle()) fixed_.push_back(RoundGraph::from(e));
  }
}

const RoundGraph& RoundGraphCache::at(std::int64_t t) {
  if (!fixed_.empty()) return fixed_[static_cast<std::size_t>(t % static_cast<std::int64_t>(fixed_.size()))];
  const int b = schedule_->window();
  const std::int64_t w = t / b;
  if (w != current_window_) {
    schedule_->window_into(w, window_edges_);
    const int n = schedule_->node_count();
    window_ptrs_.resize(window_edges_.size());
    if (n * n <= 64) {
      constexpr std::size_t kMaxCached = 4096;
      if (by_mask_.size() + window_edges_.size() > kMaxCached) by_mask_.clear();
      for (std::size_t k = 0; k < window_edges_.size(); ++k) {
        std::uint64_t mask = 0;
        for (const Edge& e : window_edges_[k].edges()) mask |= std::uint64_t{1} << pair_index(n, e.a, e.b);
        auto [it, fresh] = by_mask_.try_emplace(mask);
        if (fresh) it->second.rebuild(window_edges_[k]);
        window_ptrs_[k] = &it->second;
      }
    } else {
      window_.resize(window_edges_.size());
      for (std::size_t k = 0; k < window_edges_.size(); ++k) {
        window_[k].rebuild(window_edges_[k]);
        window_ptrs_[k] = &window_[k];
      }
    }
    current_window_ = w;
  }
  return *window_ptrs_[static_cast<std::size_t>(t % b)];
}

}  // namespace lshed::netgraph
