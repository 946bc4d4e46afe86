#include "lshed/criticality.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lshed/errors.hpp"

namespace lshed {

namespace {

void require_unit_interval(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw DomainError(std::string(what) + " must lie in [0,1], got " + std::to_string(v));
  }
}

}  // namespace

CriticalityCombiner CriticalityCombiner::convex(double nature_weight) {
  require_unit_interval(nature_weight, "combiner weight");
  return CriticalityCombiner(
      [nature_weight](double cn, double cr) { return nature_weight * cn + (1.0 - nature_weight) * cr; },
      "convex(" + std::to_string(nature_weight) + ")");
}

CriticalityCombiner CriticalityCombiner::custom(Rule rule, std::string name) {
  if (!rule) throw std::invalid_argument("CriticalityCombiner::custom: empty rule");
  return CriticalityCombiner(std::move(rule), std::move(name));
}

double CriticalityCombiner::operator()(double nature, double region) const {
  const double c = rule_(nature, region);
  require_unit_interval(c, "combined criticality");
  return c;
}

double combine_criticality(const CriticalityCombiner& combiner, double nature, double region) {
  require_unit_interval(nature, "nature criticality");
  require_unit_interval(region, "region criticality");
  return combiner(nature, region);
}

std::vector<RatedLoad> rate_loads(const Region& region, const CriticalityCombiner& combiner) {
  std::vector<RatedLoad> out;
  out.reserve(region.loads.size());
  for (const Load& l : region.loads) {
    out.push_back({l.id, l.power, combine_criticality(combiner, l.nature_criticality, region.region_criticality)});
  }
  return out;
}

Ccf Ccf::build(std::span<const RatedLoad> loads) {
  std::vector<RatedLoad> sorted(loads.begin(), loads.end());
  for (const RatedLoad& l : sorted) {
    if (!(l.power >= 0.0) || !std::isfinite(l.power)) {
      throw DomainError("load " + std::to_string(l.id) + " has invalid power " + std::to_string(l.power));
    }
    if (!std::isfinite(l.criticality)) {
      throw DomainError("load " + std::to_string(l.id) + " has non-finite criticality");
    }
  }
  std::stable_sort(sorted.begin(), sorted.end(), [](const RatedLoad& a, const RatedLoad& b) {
    return a.criticality < b.criticality || (a.criticality == b.criticality && a.id < b.id);
  });

  Ccf ccf;
  double cumulative = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double c = sorted[i].criticality;
    double step = 0.0;
    for (; i < sorted.size() && sorted[i].criticality == c; ++i) step += sorted[i].power;
    if (step > 0.0) {
      cumulative += step;
      ccf.breakpoints_.push_back({c, cumulative, step});
    }
  }
  ccf.total_ = cumulative;
  return ccf;
}

double Ccf::operator()(double z) const {
  // first breakpoint strictly above z; everything before it is included
  auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), z,
                             [](double v, const Breakpoint& b) { return v < b.criticality; });
  return it == breakpoints_.begin() ? 0.0 : std::prev(it)->cumulative;
}

std::vector<double> Ccf::criticalities() const {
  std::vector<double> out;
  out.reserve(breakpoints_.size());
  for (const Breakpoint& b : breakpoints_) out.push_back(b.criticality);
  return out;
}

Ccf build_ccf(std::span<const RatedLoad> loads) { return Ccf::build(loads); }

double eval_ccf(const Ccf& ccf, double z) { return ccf(z); }

double min_gap(std::span<const double> criticalities) {
  std::vector<double> v(criticalities.begin(), criticalities.end());
  std::sort(v.begin(), v.end());
  double best = 0.0;
  bool found = false;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double d = v[i] - v[i - 1];
    if (d > 0.0 && (!found || d < best)) {
      best = d;
      found = true;
    }
  }
  if (!found) throw DomainError("min_gap: fewer than two distinct criticality values; supply an explicit ramp width");
  return best;
}

double ramp(double d, double width) {
  if (d >= 0.0) return 1.0;
  if (d < -width) return 0.0;
  return d / width + 1.0;
}

SurrogateCcf::SurrogateCcf(Ccf base, double ramp_width) : base_(std::move(base)), ramp_width_(ramp_width) {
  if (!(ramp_width > 0.0) || !std::isfinite(ramp_width)) {
    throw DomainError("ramp width must be positive, got " + std::to_string(ramp_width));
  }
  const auto bps = base_.breakpoints();
  for (std::size_t i = 1; i < bps.size(); ++i) {
    const double gap = bps[i].criticality - bps[i - 1].criticality;
    if (ramp_width > gap + kRampWidthSlack) {
      throw ValidationError("ramp width inequality", "ramp width " + std::to_string(ramp_width) +
                                                         " exceeds the criticality gap " + std::to_string(gap));
    }
  }
}

SurrogateCcf SurrogateCcf::with_default_ramp(Ccf base) {
  const std::vector<double> crit = base.criticalities();
  const double c = crit.size() >= 2 ? min_gap(crit) : 1.0;
  return SurrogateCcf(std::move(base), c);
}

double SurrogateCcf::operator()(double z) const {
  const auto bps = base_.breakpoints();
  // Breakpoints at or below z contribute their full step. The ramps of the
  // following breakpoints start ramp_width earlier; with a validated width at
  // most one of them is active, but the loop handles any overlap.
  auto it = std::upper_bound(bps.begin(), bps.end(), z,
                             [](double v, const Breakpoint& b) { return v < b.criticality; });
  double value = it == bps.begin() ? 0.0 : std::prev(it)->cumulative;
  for (; it != bps.end() && z - it->criticality >= -ramp_width_; ++it) {
    value += it->step * ramp(z - it->criticality, ramp_width_);
  }
  return value;
}

double SurrogateCcf::eval_hinted(double z, std::size_t& hint) const {
  const auto bps = base_.breakpoints();
  std::size_t i = std::min(hint, bps.size());
  while (i > 0 && z < bps[i - 1].criticality) --i;
  while (i < bps.size() && !(z < bps[i].criticality)) ++i;
  hint = i;
  double value = i == 0 ? 0.0 : bps[i - 1].cumulative;
  for (; i < bps.size() && z - bps[i].criticality >= -ramp_width_; ++i) {
    value += bps[i].step * ramp(z - bps[i].criticality, ramp_width_);
  }
  return value;
}

double eval_surrogate(const SurrogateCcf& s, double z) { return s(z); }

ExtValue local_zeta(std::span<const double> sorted_criticalities, double x) {
  auto it = std::lower_bound(sorted_criticalities.begin(), sorted_criticalities.end(), x);
  return it == sorted_criticalities.end() ? ExtValue::infinity() : ExtValue::finite(*it);
}

ExtValue local_zeta_hinted(std::span<const double> sorted_criticalities, double x, std::size_t& hint) {
  const auto& c = sorted_criticalities;
  std::size_t i = std::min(hint, c.size());
  while (i > 0 && c[i - 1] >= x) --i;
  while (i < c.size() && c[i] < x) ++i;
  hint = i;
  return i == c.size() ? ExtValue::infinity() : ExtValue::finite(c[i]);
}

LoadColumns LoadColumns::from(std::span<const RatedLoad> loads) {
  LoadColumns cols;
  cols.criticality.reserve(loads.size());
  cols.power.reserve(loads.size());
  for (const RatedLoad& l : loads) {
    cols.criticality.push_back(l.criticality);
    cols.power.push_back(l.power);
  }
  return cols;
}

}  // namespace lshed
