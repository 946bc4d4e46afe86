#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "lshed/netgraph.hpp"
#include "../support/reference.hpp"

using namespace lshed::netgraph;

namespace {

std::vector<std::pair<int, int>> pairs(const EdgeSet& e) {
  std::vector<std::pair<int, int>> out;
  for (const Edge& x : e.edges()) out.emplace_back(x.a, x.b);
  return out;
}

double spread(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo;
}

void check_equal(const MixingMatrix& w, const std::vector<std::vector<double>>& want, double tol) {
  const int n = w.size();
  REQUIRE(static_cast<int>(want.size()) == n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) CHECK(std::abs(w(i, j) - want[i][j]) <= tol);
}

}  // namespace

TEST_SUITE("netgraph") {

TEST_CASE("metropolis_weights examples") {
  const MixingMatrix line = metropolis_weights(EdgeSet::line(4));
  const double t = 1.0 / 3.0;
  check_equal(line, {{2 * t, t, 0, 0}, {t, t, t, 0}, {0, t, t, t}, {0, 0, t, 2 * t}}, 1e-15);

  const MixingMatrix none = metropolis_weights(EdgeSet(3, {}));
  check_equal(none, {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, 0.0);

  const MixingMatrix k3 = metropolis_weights(EdgeSet::complete(3));
  check_equal(k3, {{t, t, t}, {t, t, t}, {t, t, t}}, 1e-15);

  const MixingMatrix one = metropolis_weights(EdgeSet(1, {}));
  CHECK(one.size() == 1);
  CHECK(one(0, 0) == 1.0);
}

TEST_CASE("edge sets are normalized") {
  const EdgeSet e(4, {{2, 1}, {1, 2}, {0, 3}});
  CHECK(e.edges().size() == 2);
  CHECK(e.contains(1, 2));
  CHECK(e.contains(2, 1));
  CHECK(e.contains(3, 0));
  CHECK_FALSE(e.contains(0, 1));
  CHECK_THROWS(Edge(1, 1));
  CHECK_THROWS(EdgeSet(3, {{0, 3}}));
  CHECK(EdgeSet::line(4).degrees() == std::vector<int>{1, 2, 2, 1});
  CHECK(EdgeSet::ring(5).edges().size() == 5);
  CHECK(EdgeSet::complete(5).edges().size() == 10);
}

TEST_CASE("threshold_graph examples") {
  const MixingMatrix line = metropolis_weights(EdgeSet::line(4));
  auto arcs = threshold_graph(line, 1.0 / 8);
  std::vector<Arc> want;
  for (int i = 0; i < 4; ++i) want.push_back({i, i});
  for (int i = 0; i < 3; ++i) {
    want.push_back({i, i + 1});
    want.push_back({i + 1, i});
  }
  std::sort(arcs.begin(), arcs.end());
  std::sort(want.begin(), want.end());
  CHECK(arcs == want);

  const auto self = threshold_graph(MixingMatrix::identity(3), 0.5);
  CHECK(self.size() == 3);
  for (const Arc& a : self) CHECK(a.from == a.to);

  CHECK(threshold_graph(line, 0.999).empty());
  CHECK_THROWS(threshold_graph(line, 0.0));
  CHECK_THROWS(threshold_graph(line, 1.0));
}

TEST_CASE("check_window_connectivity examples") {
  CHECK(check_window_connectivity(GraphSchedule::fixed(EdgeSet::line(4), 3), 30).connected);

  const GraphSchedule alt = GraphSchedule::periodic({EdgeSet(3, {{0, 1}}), EdgeSet(3, {{1, 2}})}, 2);
  const auto ok = check_window_connectivity(alt, 20);
  CHECK(ok.connected);
  CHECK(ok.windows_checked == 10);

  const GraphSchedule isolated = GraphSchedule::periodic({EdgeSet(3, {{0, 1}})}, 1);
  const auto bad = check_window_connectivity(isolated, 5);
  CHECK_FALSE(bad.connected);
  REQUIRE(bad.first_failing_window.has_value());
  CHECK(*bad.first_failing_window == 0);
  CHECK(bad.to_string().find("window 0") != std::string::npos);

  // Each step alone is disconnected, only the window union is not.
  const GraphSchedule misaligned = GraphSchedule::periodic({EdgeSet(3, {{0, 1}}), EdgeSet(3, {{1, 2}})}, 1);
  CHECK_FALSE(check_window_connectivity(misaligned, 4).connected);

  CHECK_THROWS_AS(check_window_connectivity(alt, 3), std::invalid_argument);
  CHECK_THROWS_AS(check_window_connectivity(alt, 0), std::invalid_argument);
}

TEST_CASE("property: metropolis matrices are doubly stochastic, respect edges, match the reference") {
  ref::Gen g(8);
  for (int inst = 0; inst < 300; ++inst) {
    const int n = g.integer(1, 12);
    const auto raw = g.random_edges(n, g.uniform(0, 1));
    std::vector<Edge> edges;
    for (auto [a, b] : raw) edges.emplace_back(a, b);
    const EdgeSet es(n, edges);
    const MixingMatrix w = metropolis_weights(es);
    const auto rep = check_mixing_matrix(w, es);
    CHECK(rep.ok());
    CHECK(rep.max_row_error <= 1e-12);
    CHECK(rep.max_column_error <= 1e-12);
    CHECK(rep.min_diagonal > 0);
    check_equal(w, ref::metropolis(n, raw), 1e-15);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (w(i, j) != 0.0) CHECK(w(i, j) >= 1.0 / n - 1e-15);
    // With gamma = 1/(2n) the threshold graph is the communication graph.
    std::size_t off = 0;
    for (const Arc& a : threshold_graph(w, default_gamma(n))) {
      if (a.from == a.to) continue;
      CHECK(es.contains(a.from, a.to));
      ++off;
    }
    CHECK(off == 2 * es.edges().size());
    CHECK(es.connected() == ref::connected(n, raw));
  }
}

TEST_CASE("check_mixing_matrix flags violations") {
  const EdgeSet line = EdgeSet::line(3);
  MixingMatrix w = metropolis_weights(line);
  w(0, 2) = 0.1;
  CHECK_FALSE(check_mixing_matrix(w, line).respects_edges);
  CHECK_FALSE(check_mixing_matrix(w, line).ok());
  MixingMatrix v = metropolis_weights(line);
  v(0, 0) -= 0.25;
  v(0, 1) += 0.5;
  v(1, 1) -= 0.25;
  CHECK(check_mixing_matrix(v, line).max_column_error > 0.1);
}

TEST_CASE("property: window products stay doubly stochastic and contract disagreement") {
  ref::Gen g(17);
  for (int inst = 0; inst < 60; ++inst) {
    const int n = g.integer(2, 9);
    const int b = g.integer(1, 4);
    const GraphSchedule s = GraphSchedule::random(n, g.uniform(0.05, 0.9), b, static_cast<std::uint64_t>(inst));
    std::vector<double> v(static_cast<std::size_t>(n));
    for (double& x : v) x = g.uniform(-5, 5);
    const double start = spread(v);
    double prev = start;
    for (int w = 0; w < 10; ++w) {
      MixingMatrix prod = MixingMatrix::identity(n);
      for (int k = 0; k < b; ++k) {
        const MixingMatrix m = metropolis_weights(s.at(static_cast<std::int64_t>(w) * b + k));
        prod = m.product(prod);
        v = m.apply(v);
      }
      for (double r : prod.row_sums()) CHECK(std::abs(r - 1) <= 1e-10);
      for (double c : prod.column_sums()) CHECK(std::abs(c - 1) <= 1e-10);
      CHECK(spread(v) <= prev * (1 + 1e-12) + 1e-15);
      prev = spread(v);
    }
    CHECK(prev < start);
  }
}

TEST_CASE("property: random schedules are window-connected, undirected and deterministic") {
  ref::Gen g(23);
  for (int inst = 0; inst < 40; ++inst) {
    const int n = g.integer(1, 10);
    const int b = g.integer(1, 4);
    const double p = g.uniform(0, 0.5);
    const auto seed = static_cast<std::uint64_t>(g.integer(0, 1 << 30));
    const GraphSchedule s = GraphSchedule::random(n, p, b, seed);
    const GraphSchedule again = GraphSchedule::random(n, p, b, seed);
    CHECK(check_window_connectivity(s, 50L * b).connected);
    for (std::int64_t t = 0; t < 50L * b; ++t) {
      const EdgeSet e = s.at(t);
      for (const Edge& x : e.edges()) {
        CHECK(x.a < x.b);
        CHECK(e.contains(x.b, x.a));
      }
      CHECK(pairs(e) == pairs(again.at(t)));
    }
    // Evaluation order does not matter.
    CHECK(pairs(s.at(37)) == pairs(GraphSchedule::random(n, p, b, seed).at(37)));
  }
  // p = 0 still yields connected windows through the added trees.
  const GraphSchedule sparse = GraphSchedule::random(6, 0.0, 2, 5);
  CHECK(check_window_connectivity(sparse, 200).connected);
  CHECK(sparse.at(0).edges().empty());
  CHECK(sparse.at(1).edges().size() == 5);
}

TEST_CASE("different seeds give different random schedules") {
  const GraphSchedule a = GraphSchedule::random(8, 0.4, 1, 1);
  const GraphSchedule b = GraphSchedule::random(8, 0.4, 1, 2);
  int differ = 0;
  for (std::int64_t t = 0; t < 20; ++t) differ += pairs(a.at(t)) != pairs(b.at(t));
  CHECK(differ > 10);
}

TEST_CASE("periodic and static schedules") {
  const GraphSchedule s = GraphSchedule::fixed(EdgeSet::line(3), 2);
  CHECK(s.kind() == GraphSchedule::Kind::static_graph);
  CHECK(pairs(s.at(12345)) == pairs(EdgeSet::line(3)));
  const GraphSchedule p = GraphSchedule::periodic({EdgeSet(3, {{0, 1}}), EdgeSet(3, {{1, 2}}), EdgeSet(3, {})}, 3);
  CHECK(pairs(p.at(4)) == pairs(EdgeSet(3, {{1, 2}})));
  CHECK(p.at(5).edges().empty());
}

TEST_CASE("property: cached round graphs equal fresh builds") {
  ref::Gen g(31);
  for (int inst = 0; inst < 30; ++inst) {
    const int n = g.integer(1, 12);  // both sides of the bitmask cutoff
    const int b = g.integer(1, 3);
    const GraphSchedule s = GraphSchedule::random(n, g.uniform(0, 1), b, static_cast<std::uint64_t>(inst) + 100);
    RoundGraphCache cache(s);
    RoundGraph scratch;
    for (std::int64_t t = 0; t < 300; ++t) {
      const RoundGraph& got = cache.at(t);
      const RoundGraph fresh = RoundGraph::from(s.at(t));
      scratch.rebuild(s.at(t));
      CHECK(pairs(got.edges) == pairs(fresh.edges));
      CHECK(got.neighbors == fresh.neighbors);
      CHECK(scratch.neighbors == fresh.neighbors);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          CHECK(got.weights(i, j) == fresh.weights(i, j));
          CHECK(scratch.weights(i, j) == fresh.weights(i, j));
        }
      for (std::size_t i = 0; i < got.neighbors.size(); ++i)
        CHECK(std::is_sorted(got.neighbors[i].begin(), got.neighbors[i].end()));
    }
  }
}

}  // TEST_SUITE
