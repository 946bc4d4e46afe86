#include "lshed/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "lshed/errors.hpp"
#include "lshed/rng.hpp"

namespace lshed::protocol {

RegionModel RegionModel::build(int id, std::vector<RatedLoad> loads, double ramp_width) {
  RegionModel r;
  r.id = id;
  r.loads = std::move(loads);
  Ccf ccf = Ccf::build(r.loads);
  r.levels = ccf.criticalities();
  r.surrogate = SurrogateCcf(std::move(ccf), ramp_width);
  return r;
}

StepSchedule StepSchedule::harmonic(double scale, double offset) {
  if (!(scale > 0.0) || !(offset > 0.0)) throw DomainError("harmonic step needs scale > 0 and offset > 0");
  StepSchedule s;
  s.kind_ = Kind::harmonic;
  s.scale_ = scale;
  s.offset_ = offset;
  return s;
}

StepSchedule StepSchedule::polynomial(double exponent, double scale) {
  if (!(scale > 0.0) || !(exponent > 0.0)) throw DomainError("polynomial step needs scale > 0 and exponent > 0");
  StepSchedule s;
  s.kind_ = Kind::polynomial;
  s.scale_ = scale;
  s.exponent_ = exponent;
  return s;
}

StepSchedule StepSchedule::table(std::vector<double> values) {
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("step table entries must be finite and nonnegative");
  }
  StepSchedule s;
  s.kind_ = Kind::table;
  s.table_ = std::move(values);
  return s;
}

double StepSchedule::operator()(std::int64_t t) const {
  switch (kind_) {
    case Kind::harmonic:
      return scale_ / (static_cast<double>(t) + offset_);
    case Kind::polynomial:
      return scale_ / std::pow(static_cast<double>(t) + 1.0, exponent_);
    case Kind::table:
      if (t < 0 || static_cast<std::size_t>(t) >= table_.size()) {
        throw std::out_of_range("step table has no entry for round " + std::to_string(t));
      }
      return table_[static_cast<std::size_t>(t)];
  }
  return 0.0;
}

std::optional<bool> StepSchedule::robbins_monro() const {
  switch (kind_) {
    case Kind::harmonic:
      return true;
    case Kind::polynomial:
      return exponent_ > 0.5 && exponent_ <= 1.0;
    case Kind::table:
      return std::nullopt;
  }
  return std::nullopt;
}

std::string StepSchedule::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::harmonic:
      os << scale_ << "/(t+" << offset_ << ")";
      break;
    case Kind::polynomial:
      os << scale_ << "/(t+1)^" << exponent_;
      break;
    case Kind::table:
      os << "table[" << table_.size() << "]";
      break;
  }
  return os.str();
}

PEstimator PEstimator::exact_split(double total, int regions) {
  if (regions < 1) throw DomainError("estimator needs at least one region");
  PEstimator e;
  e.kind_ = Kind::exact_split;
  e.total_ = total;
  e.n_ = regions;
  return e;
}

PEstimator PEstimator::noisy_split(double total, int regions, std::uint64_t seed) {
  PEstimator e = exact_split(total, regions);
  e.kind_ = Kind::noisy_split;
  e.seed_ = seed;
  e.key_ = rng::stream_key(seed, "noise");
  return e;
}

PEstimator PEstimator::trace(double total, std::vector<std::vector<double>> rows) {
  if (rows.empty()) throw DomainError("trace estimator needs at least one row");
  const std::size_t n = rows.front().size();
  if (n == 0) throw DomainError("trace estimator rows must be non-empty");
  for (const auto& r : rows) {
    if (r.size() != n) throw DomainError("trace estimator rows differ in length");
    for (double v : r) {
      if (!std::isfinite(v)) throw DomainError("trace estimator values must be finite");
    }
  }
  PEstimator e;
  e.kind_ = Kind::trace;
  e.total_ = total;
  e.n_ = static_cast<int>(n);
  e.rows_ = std::move(rows);
  return e;
}

double PEstimator::at(std::int64_t t, int j) const {
  if (kind_ == Kind::trace) {
    const std::size_t row = std::min<std::size_t>(static_cast<std::size_t>(std::max<std::int64_t>(t, 0)), rows_.size() - 1);
    return rows_[row][static_cast<std::size_t>(j)];
  }
  double v = total_ / n_;
  if (kind_ == Kind::noisy_split && t > 0) {
    const double e =
        2.0 * rng::to_unit(rng::counter_hash(key_, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(j))) - 1.0;
    v += e / static_cast<double>(t);
  }
  return v;
}

void PEstimator::fill(std::int64_t t, std::span<double> out) const {
  if (out.size() != static_cast<std::size_t>(n_)) throw std::invalid_argument("p output has the wrong length");
  for (int j = 0; j < n_; ++j) out[j] = at(t, j);
}

std::vector<double> p_values(const PEstimator& estimator, std::int64_t t) {
  std::vector<double> p(estimator.regions());
  estimator.fill(t, p);
  return p;
}

double estimator_theta(const PEstimator& estimator, std::int64_t t_begin, std::int64_t t_end) {
  std::vector<double> p(estimator.regions());
  double theta = 0.0;
  for (std::int64_t t = t_begin; t <= t_end; ++t) {
    estimator.fill(t, p);
    double sum = 0.0;
    for (double v : p) sum += v;
    const double eta = 1.0 / (static_cast<double>(t) + 1.0);
    theta = std::max(theta, std::abs(sum - estimator.total()) / eta);
  }
  return theta;
}

double mix_row(std::span<const double> row, std::span<const double> x) {
  double acc = 0.0;
  for (std::size_t k = 0; k < row.size(); ++k) acc += row[k] * x[k];
  return acc;
}

namespace {

void x_update_into(std::span<const double> x, const netgraph::MixingMatrix& w, double eta, std::span<const double> p,
                   std::span<const RegionModel> regions, std::span<std::size_t> hints, std::span<double> out) {
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double g = regions[j].surrogate.eval_hinted(x[j], hints[j]);
    out[j] = mix_row(w.row(static_cast<int>(j)), x) - eta * (g - p[j]);
  }
}

void dmc_step_into(const DmcState& state, std::span<const std::vector<int>> neighbors, std::span<const ExtValue> zeta_next,
                   double c, DmcMode mode, DmcState& out) {
  const std::size_t n = state.z.size();
  for (std::size_t j = 0; j < n; ++j) {
    // Rounding is monotone, so adding alpha after the min is exact.
    ExtValue best = state.z[j];
    for (int k : neighbors[j]) best = min(best, state.z[k]);
    best = min(best.plus(state.alpha[j]), zeta_next[j]);
    const bool increased = best > state.z[j];
    out.z[j] = best;
    out.alpha[j] = mode == DmcMode::plain ? 0.0 : (increased ? 0.5 : c / 2.0);
  }
}

}  // namespace

std::vector<double> x_update_round(std::span<const double> x, const netgraph::MixingMatrix& w, double eta,
                                   std::span<const double> p, std::span<const SurrogateCcf> surrogates) {
  const std::size_t n = x.size();
  if (static_cast<std::size_t>(w.size()) != n || p.size() != n || surrogates.size() != n) {
    throw std::invalid_argument("x_update_round: dimension mismatch");
  }
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double g = surrogates[j](x[j]);
    out[j] = mix_row(w.row(static_cast<int>(j)), x) - eta * (g - p[j]);
  }
  return out;
}

ExtValue zeta_update(const RegionModel& region, double x_new) { return local_zeta(region.levels, x_new); }

DmcState dmc_round(const DmcState& state, std::span<const std::vector<int>> neighbors,
                   std::span<const ExtValue> zeta_next, double c, DmcMode mode) {
  const std::size_t n = state.z.size();
  if (state.alpha.size() != n || neighbors.size() != n || zeta_next.size() != n) {
    throw std::invalid_argument("dmc_round: dimension mismatch");
  }
  if (!(c > 0.0)) throw DomainError("dmc_round: c must be positive");
  DmcState out{std::vector<ExtValue>(n), std::vector<double>(n)};
  dmc_step_into(state, neighbors, zeta_next, c, mode, out);
  return out;
}

std::int64_t finalize_round_count(const ProtocolSetup& setup) {
  return static_cast<std::int64_t>(setup.regions.size()) * setup.schedule.window();
}

RunTrace run_protocol(const ProtocolSetup& setup, const RunOptions& options) {
  const std::size_t n = setup.regions.size();
  if (n == 0) throw std::invalid_argument("run_protocol: no regions");
  if (static_cast<std::size_t>(setup.schedule.node_count()) != n) {
    throw std::invalid_argument("run_protocol: graph has " + std::to_string(setup.schedule.node_count()) +
                                " nodes for " + std::to_string(n) + " regions");
  }
  if (static_cast<std::size_t>(setup.estimator.regions()) != n) {
    throw std::invalid_argument("run_protocol: estimator sized for a different region count");
  }
  if (!setup.x0.empty() && setup.x0.size() != n) throw std::invalid_argument("run_protocol: x0 has the wrong length");
  if (!(setup.ramp_width > 0.0)) throw DomainError("run_protocol: ramp width must be positive");
  if (options.max_rounds < 0 || options.persistence < 1) throw std::invalid_argument("run_protocol: bad round limits");

  const double c = setup.ramp_width;
  netgraph::RoundGraphCache graphs(setup.schedule);

  std::vector<double> x = setup.x0.empty() ? std::vector<double>(n, 0.0) : setup.x0;
  std::vector<double> x_next(n), p(n);
  std::vector<ExtValue> zeta(n, ExtValue::infinity()), zeta_next(n);
  std::vector<std::size_t> eval_hint(n, 0), zeta_hint(n, 0);
  DmcState dmc{std::vector<ExtValue>(n, ExtValue::infinity()), std::vector<double>(n, c / 2.0)};
  DmcState dmc_next = dmc;

  RunTrace trace;
  if (options.record_trace) trace.rows.reserve(static_cast<std::size_t>(std::min<std::int64_t>(options.max_rounds, 1 << 20)) * n);

  auto record = [&](std::int64_t t, double eta) {
    if (!options.record_trace) return;
    for (std::size_t j = 0; j < n; ++j) {
      trace.rows.push_back({t, eta, setup.regions[j].id, x[j], zeta[j], dmc.z[j], dmc.alpha[j], p[j]});
    }
  };

  std::int64_t still = 0;
  std::int64_t t = 0;
  for (; t < options.max_rounds; ++t) {
    const netgraph::RoundGraph& g = graphs.at(t);
    const double eta = setup.step(t);
    // The estimator's clock starts at 1.
    if (t == 0 || setup.estimator.kind() != PEstimator::Kind::exact_split) setup.estimator.fill(t + 1, p);
    x_update_into(x, g.weights, eta, p, setup.regions, eval_hint, x_next);
    for (std::size_t j = 0; j < n; ++j) {
      zeta_next[j] = local_zeta_hinted(setup.regions[j].levels, x_next[j], zeta_hint[j]);
    }
    dmc_step_into(dmc, g.neighbors, zeta_next, c, setup.dmc, dmc_next);

    const bool unchanged = zeta_next == zeta && (!options.persistence_includes_dmc || dmc_next.z == dmc.z);
    x.swap(x_next);
    zeta.swap(zeta_next);
    std::swap(dmc, dmc_next);
    record(t + 1, eta);

    if (unchanged) {
      ++still;
    } else {
      still = 0;
      trace.last_change_round = t;
    }
    if (still >= options.persistence && t + 1 >= options.min_rounds) {
      trace.converged = true;
      ++t;
      break;
    }
  }
  trace.rounds = t;

  if (options.finalize) {
    // Exact min-consensus over the frozen zeta, restarted from zeta itself.
    dmc = DmcState{zeta, std::vector<double>(n, 0.0)};
    DmcState flood_next = dmc;
    const std::int64_t extra = finalize_round_count(setup);
    for (std::int64_t k = 0; k < extra; ++k, ++t) {
      const netgraph::RoundGraph& g = graphs.at(t);
      if (setup.estimator.kind() != PEstimator::Kind::exact_split) setup.estimator.fill(t + 1, p);
      dmc_step_into(dmc, g.neighbors, zeta, c, DmcMode::plain, flood_next);
      std::swap(dmc, flood_next);
      record(t + 1, 0.0);
    }
    trace.finalize_rounds = extra;
  }

  trace.final_z = dmc.z;
  trace.final_zeta = zeta;
  trace.final_x = x;
  return trace;
}

std::vector<int> shed_decision(const RegionModel& region, double z_star) {
  if (!std::isfinite(z_star)) throw DomainError("shed_decision: threshold must be finite");
  std::vector<int> ids;
  for (const RatedLoad& l : region.loads) {
    if (l.criticality <= z_star) ids.push_back(l.id);
  }
  return ids;
}

}  // namespace lshed::protocol
