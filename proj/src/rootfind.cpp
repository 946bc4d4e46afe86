#include "lshed/rootfind.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "lshed/kernels.hpp"

namespace lshed::rootfind {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double disagreement_of(std::span<const double> x, double mean) {
  double d = 0.0;
  for (double v : x) d = std::max(d, std::abs(v - mean));
  return d;
}

double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

// H at one point.
double average_limit_at(const TimeVaryingField& field, double z, std::int64_t t_large) {
  double s = 0.0;
  for (int j = 0; j < field.n; ++j) s += field.limit ? field.limit(j, z) : field(j, z, t_large);
  return s / field.n;
}

}  // namespace

void TimeVaryingField::evaluate(int j, std::span<const double> zs, std::int64_t t, std::span<double> out) const {
  if (batch) {
    batch(j, zs, t, out);
    return;
  }
  for (std::size_t i = 0; i < zs.size(); ++i) out[i] = eval(j, zs[i], t);
}

TimeVaryingField load_shedding_field(std::span<const protocol::RegionModel> regions,
                                     const protocol::PEstimator& estimator) {
  if (static_cast<std::size_t>(estimator.regions()) != regions.size()) {
    throw std::invalid_argument("load_shedding_field: estimator sized for a different region count");
  }
  struct Shared {
    std::vector<protocol::RegionModel> regions;
    std::vector<LoadColumns> columns;
    protocol::PEstimator estimator;
  };
  auto shared = std::make_shared<Shared>();
  shared->regions.assign(regions.begin(), regions.end());
  for (const auto& r : regions) shared->columns.push_back(LoadColumns::from(r.loads));
  shared->estimator = estimator;

  TimeVaryingField f;
  f.n = static_cast<int>(regions.size());
  f.name = "load-shedding";
  f.eval = [shared](int j, double z, std::int64_t t) {
    return shared->regions[j].surrogate(z) - shared->estimator.at(t + 1, j);
  };
  f.batch = [shared](int j, std::span<const double> zs, std::int64_t t, std::span<double> out) {
    const LoadColumns& cols = shared->columns[j];
    kernels::ramp_sum_batch(cols.criticality, cols.power, zs, shared->regions[j].surrogate.ramp_width(), out);
    const double p = shared->estimator.at(t + 1, j);
    for (double& v : out) v -= p;
  };
  if (estimator.kind() != protocol::PEstimator::Kind::trace) {
    // Same kernel as the grid path, so a time-invariant field deviates by exactly 0.
    f.limit = [shared](int j, double z) {
      const LoadColumns& cols = shared->columns[j];
      return kernels::ramp_sum(cols.criticality, cols.power, z, shared->regions[j].surrogate.ramp_width()) -
             shared->estimator.total() / shared->estimator.regions();
    };
  }
  double lip = 0.0;
  for (const auto& r : regions) {
    lip = std::max(lip, r.surrogate.lipschitz_bound());
  }
  f.claimed_lipschitz = lip;
  return f;
}

std::vector<double> aux_update_round(std::span<const double> x, const netgraph::MixingMatrix& w, double eta,
                                     const TimeVaryingField& field, std::int64_t t) {
  if (static_cast<std::size_t>(w.size()) != x.size() || static_cast<std::size_t>(field.n) != x.size()) {
    throw std::invalid_argument("aux_update_round: dimension mismatch");
  }
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double y = field(static_cast<int>(j), x[j], t);
    out[j] = protocol::mix_row(w.row(static_cast<int>(j)), x) - eta * y;
  }
  return out;
}

std::vector<double> Grid::values() const {
  if (points < 1 || !(hi >= lo)) throw std::invalid_argument("grid needs points >= 1 and hi >= lo");
  std::vector<double> v(points);
  for (int i = 0; i < points; ++i) v[i] = points == 1 ? lo : lo + (hi - lo) * i / (points - 1);
  return v;
}

std::vector<std::int64_t> sample_times(std::int64_t first, std::int64_t horizon) {
  std::vector<std::int64_t> ts;
  for (std::int64_t t = first; t <= std::min<std::int64_t>(horizon, 1024); ++t) ts.push_back(t);
  for (std::int64_t base = 1024; base < horizon; base *= 2) {
    const std::int64_t stride = std::max<std::int64_t>(base / 128, 1);
    for (std::int64_t t = base + stride; t <= std::min(2 * base, horizon); t += stride) {
      if (t >= first) ts.push_back(t);
    }
  }
  if (ts.empty() || ts.back() != horizon) {
    if (horizon >= first) ts.push_back(horizon);
  }
  return ts;
}

std::vector<double> average_limit(const TimeVaryingField& field, std::span<const double> zs, std::int64_t horizon) {
  std::vector<double> h(zs.size(), 0.0);
  std::vector<double> buf(zs.size());
  const std::int64_t t_large = 10 * horizon;
  for (int j = 0; j < field.n; ++j) {
    if (field.limit) {
      for (std::size_t i = 0; i < zs.size(); ++i) buf[i] = field.limit(j, zs[i]);
    } else {
      field.evaluate(j, zs, t_large, buf);
    }
    for (std::size_t i = 0; i < zs.size(); ++i) h[i] += buf[i];
  }
  for (double& v : h) v /= field.n;
  return h;
}

Assumption4Report verify_assumption4(const TimeVaryingField& field, const Grid& grid, std::int64_t horizon) {
  const std::vector<double> zs = grid.values();
  if (zs.empty()) throw std::invalid_argument("verify_assumption4: empty grid");
  Assumption4Report r;
  std::vector<double> buf(zs.size());
  const double dz = grid.spacing();
  std::string worst_bound_at;
  for (std::int64_t t : sample_times(0, horizon)) {
    for (int j = 0; j < field.n; ++j) {
      field.evaluate(j, zs, t, buf);
      for (std::size_t i = 0; i < zs.size(); ++i) {
        if (!(std::abs(buf[i]) <= r.bound)) {
          r.bound = std::isfinite(buf[i]) ? std::abs(buf[i]) : std::numeric_limits<double>::infinity();
          worst_bound_at = "j=" + std::to_string(j) + " z=" + fmt(zs[i]) + " t=" + std::to_string(t);
        }
        if (i > 0 && i + 1 < zs.size() && dz > 0.0) {
          r.lipschitz = std::max(r.lipschitz, std::abs(buf[i + 1] - buf[i - 1]) / (2.0 * dz));
        }
      }
    }
  }
  r.lipschitz *= kLipschitzSafety;

  r.bounded.name = "A4.1 bounded";
  r.bounded.pass = std::isfinite(r.bound) && (!field.claimed_bound || r.bound <= *field.claimed_bound);
  r.bounded.detail = "M=" + fmt(r.bound) + (worst_bound_at.empty() ? "" : " at " + worst_bound_at);

  r.lipschitz_check.name = "A4.2 Lipschitz";
  r.lipschitz_check.pass =
      std::isfinite(r.lipschitz) && (!field.claimed_lipschitz || r.lipschitz <= *field.claimed_lipschitz * kLipschitzSafety);
  r.lipschitz_check.detail = "lambda=" + fmt(r.lipschitz);

  // Sign condition: candidates are the grid's zeros and sign changes of H,
  // then its endpoints.
  const std::vector<double> h = average_limit(field, zs, horizon);
  std::vector<double> candidates;
  for (std::size_t i = 0; i < zs.size(); ++i) {
    if (h[i] == 0.0) candidates.push_back(zs[i]);
    if (i + 1 < zs.size() && ((h[i] < 0.0 && h[i + 1] > 0.0) || (h[i] > 0.0 && h[i + 1] < 0.0))) {
      candidates.push_back(zs[i] + (zs[i + 1] - zs[i]) * (-h[i]) / (h[i + 1] - h[i]));
    }
  }
  candidates.push_back(zs.front());
  candidates.push_back(zs.back());

  r.sign.name = "A4.3 sign condition";
  double worst = 0.0;
  double worst_z = zs.front();
  for (double c : candidates) {
    double lowest = 0.0;
    double lowest_z = c;
    for (std::size_t i = 0; i < zs.size(); ++i) {
      const double v = (zs[i] - c) * h[i];
      if (v < lowest) {
        lowest = v;
        lowest_z = zs[i];
      }
    }
    if (lowest >= -kSignTolerance) {
      r.witness = c;
      break;
    }
    if (c == candidates.front() || lowest > worst) {
      worst = lowest;
      worst_z = lowest_z;
    }
  }
  r.sign.pass = r.witness.has_value();
  r.sign.detail = r.witness ? "witness z*=" + fmt(*r.witness)
                            : "no witness; (z - z*)H(z) reaches " + fmt(worst) + " at z=" + fmt(worst_z);
  return r;
}

Assumption5Report verify_assumption5(const TimeVaryingField& field, const Grid& grid, std::int64_t horizon,
                                     const protocol::StepSchedule& step) {
  const std::vector<double> zs = grid.values();
  const std::vector<double> h = average_limit(field, zs, horizon);
  std::vector<double> avg(zs.size()), buf(zs.size());

  Assumption5Report r;
  std::vector<double> block_max;  // block k covers [2^k, 2^(k+1))
  for (std::int64_t t : sample_times(1, horizon)) {
    std::fill(avg.begin(), avg.end(), 0.0);
    for (int j = 0; j < field.n; ++j) {
      field.evaluate(j, zs, t, buf);
      for (std::size_t i = 0; i < zs.size(); ++i) avg[i] += buf[i];
    }
    double dev = 0.0;
    for (std::size_t i = 0; i < zs.size(); ++i) dev = std::max(dev, std::abs(h[i] - avg[i] / field.n));
    const double eta = step(t);
    const double ratio = eta > 0.0 ? dev / eta : (dev > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    r.theta = std::max(r.theta, ratio);
    const std::size_t k = static_cast<std::size_t>(std::floor(std::log2(static_cast<double>(t))));
    if (block_max.size() <= k) block_max.resize(k + 1, 0.0);
    block_max[k] = std::max(block_max[k], ratio);
  }

  r.check.name = "A5 average deviation";
  if (!std::isfinite(r.theta)) {
    r.check.pass = false;
    r.check.detail = "theta unbounded";
    return r;
  }
  if (r.theta == 0.0) {
    r.check.pass = true;
    r.check.detail = "theta=0";
    return r;
  }
  // Least-squares slope of log(block max) against log(block start), later half.
  const std::size_t from = block_max.size() / 2;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t k = from; k < block_max.size(); ++k) {
    const double lx = static_cast<double>(k) * std::log(2.0);
    const double ly = std::log(std::max(block_max[k], 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m >= 2) r.growth_slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  r.check.pass = m >= 3 && r.growth_slope <= kMaxGrowthSlope;
  r.check.detail = "theta=" + fmt(r.theta) + " growth slope=" + fmt(r.growth_slope) +
                   (m < 3 ? " (horizon too short to judge growth)" : "");
  return r;
}

AssumptionCheck verify_assumption6(const netgraph::GraphSchedule& schedule, std::int64_t horizon, double gamma) {
  AssumptionCheck c;
  c.name = "A6 mixing matrices";
  const int b = schedule.window();
  const std::int64_t h = std::max<std::int64_t>((horizon + b - 1) / b, 1) * b;
  const int n = schedule.node_count();
  netgraph::RoundGraphCache graphs(schedule);
  for (std::int64_t t = 0; t < h; ++t) {
    const netgraph::RoundGraph& g = graphs.at(t);
    const netgraph::MixingReport m = netgraph::check_mixing_matrix(g.weights, g.edges);
    if (!m.ok()) {
      c.detail = "W(" + std::to_string(t) + ") not doubly stochastic with self-loops (row err " + fmt(m.max_row_error) +
                 ", col err " + fmt(m.max_column_error) + ", min diag " + fmt(m.min_diagonal) + ")";
      return c;
    }
    std::size_t expected = static_cast<std::size_t>(n) + 2 * g.edges.edges().size();
    if (netgraph::threshold_graph(g.weights, gamma).size() != expected) {
      c.detail = "gamma=" + fmt(gamma) + " threshold graph of W(" + std::to_string(t) + ") differs from E(t)";
      return c;
    }
  }
  const netgraph::ConnectivityReport conn = netgraph::check_window_connectivity(schedule, h);
  if (!conn.connected) {
    c.detail = "window connectivity " + conn.to_string();
    return c;
  }
  c.pass = true;
  c.detail = std::to_string(h) + " steps, B=" + std::to_string(b) + ", gamma=" + fmt(gamma);
  return c;
}

AssumptionCheck verify_assumption7(const protocol::StepSchedule& step, std::int64_t horizon) {
  AssumptionCheck c;
  c.name = "A7 step sizes";
  for (std::int64_t t = 0; t < horizon; ++t) {
    if (step.kind() == protocol::StepSchedule::Kind::table && static_cast<std::size_t>(t) >= step.values().size()) break;
    const double e = step(t);
    if (!(e >= 0.0)) {
      c.detail = "eta(" + std::to_string(t) + ") negative";
      return c;
    }
  }
  const std::optional<bool> rm = step.robbins_monro();
  if (!rm) {
    c.detail = step.describe() + ": a finite table cannot show sum eta = inf";
    return c;
  }
  c.pass = *rm;
  c.detail = step.describe() + (c.pass ? "" : ": sum eta^2 diverges or sum eta converges");
  return c;
}

RootResult run_to_root(const TimeVaryingField& field, const netgraph::GraphSchedule& schedule,
                       const protocol::StepSchedule& step, std::span<const double> x0, const RootOptions& options) {
  const std::size_t n = static_cast<std::size_t>(field.n);
  if (x0.size() != n || static_cast<std::size_t>(schedule.node_count()) != n) {
    throw std::invalid_argument("run_to_root: dimension mismatch");
  }
  netgraph::RoundGraphCache graphs(schedule);
  RootResult res;
  std::vector<double> x(x0.begin(), x0.end()), next(n);
  RootDiagnostics& d = res.diagnostics;
  if (options.record_trajectory) d.trajectory.push_back(x);
  d.mean_bound = std::abs(mean_of(x));

  const std::int64_t t_large = 10 * options.max_rounds;
  std::int64_t t = 0;
  while (t < options.max_rounds) {
    const netgraph::RoundGraph& g = graphs.at(t);
    const double eta = step(t);
    double ybar = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double y = field(static_cast<int>(j), x[j], t);
      ybar += y;
      next[j] = protocol::mix_row(g.weights.row(static_cast<int>(j)), x) - eta * y;
    }
    ybar /= static_cast<double>(n);
    d.omega += eta * std::abs(average_limit_at(field, mean_of(x), t_large) - ybar);
    x.swap(next);
    ++t;

    const double xbar = mean_of(x);
    const double dis = disagreement_of(x, xbar);
    const double eta_t = step.kind() == protocol::StepSchedule::Kind::table &&
                                 static_cast<std::size_t>(t) >= step.values().size()
                             ? eta
                             : step(t);
    const double ratio = eta_t > 0.0 ? dis / eta_t : 0.0;
    d.disagreement.push_back(dis);
    d.consensus_ratio.push_back(ratio);
    d.mean.push_back(xbar);
    if (ratio > d.nu) {
      d.nu = ratio;
      d.nu_attained = t;
    }
    d.mean_bound = std::max(d.mean_bound, std::abs(xbar));
    if (options.record_trajectory) d.trajectory.push_back(x);

    if (t >= options.min_rounds && dis <= options.tolerance &&
        std::abs(average_limit_at(field, xbar, t_large)) <= options.tolerance) {
      res.converged = true;
      break;
    }
  }
  res.rounds = t;
  res.root = mean_of(x);
  res.x = x;
  return res;
}

bool AssumptionCertificate::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const AssumptionCheck& c) { return c.pass; });
}

AssumptionCertificate certify(const TimeVaryingField& field, const netgraph::GraphSchedule& schedule,
                              const protocol::StepSchedule& step, const CertifyOptions& options) {
  AssumptionCertificate cert;
  cert.grid = options.grid;
  cert.horizon = options.horizon;
  cert.window = schedule.window();

  const Assumption4Report a4 = verify_assumption4(field, options.grid, options.horizon);
  cert.bound = a4.bound;
  cert.lipschitz = a4.lipschitz;
  cert.sign_witness = a4.witness;
  cert.checks.push_back(a4.bounded);
  cert.checks.push_back(a4.lipschitz_check);
  cert.checks.push_back(a4.sign);

  // A coarser grid keeps the per-step sweep cheap; the deviation is smooth in z.
  Grid coarse = options.grid;
  coarse.points = std::min(coarse.points, 101);
  const Assumption5Report a5 = verify_assumption5(field, coarse, options.horizon, step);
  cert.theta = a5.theta;
  cert.checks.push_back(a5.check);

  const double gamma = options.gamma.value_or(netgraph::default_gamma(schedule.node_count()));
  cert.checks.push_back(verify_assumption6(schedule, std::min<std::int64_t>(options.horizon, 1000), gamma));
  cert.checks.push_back(verify_assumption7(step, options.horizon));

  const std::vector<double> x0(static_cast<std::size_t>(field.n), 0.0);
  RootOptions probe;
  probe.max_rounds = options.probe_rounds;
  probe.min_rounds = options.probe_rounds;
  const RootResult run = run_to_root(field, schedule, step, x0, probe);
  cert.nu_estimate = run.diagnostics.nu;
  cert.omega_estimate = run.diagnostics.omega;
  return cert;
}

}  // namespace lshed::rootfind
