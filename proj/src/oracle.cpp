#include "lshed/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>

#include "lshed/errors.hpp"

namespace lshed::oracle {

namespace {

void require_feasible(double total, double required) {
  if (!(required >= 0.0)) throw DomainError("required shed must be nonnegative, got " + std::to_string(required));
  if (total < required) {
    throw InfeasibleError("Assumption 1 violated: total load " + std::to_string(total) + " < required shed " +
                          std::to_string(required));
  }
}

std::vector<RatedLoad> sorted_by_priority(std::span<const RatedLoad> loads) {
  std::vector<RatedLoad> v(loads.begin(), loads.end());
  std::stable_sort(v.begin(), v.end(), [](const RatedLoad& a, const RatedLoad& b) {
    return a.criticality < b.criticality || (a.criticality == b.criticality && a.id < b.id);
  });
  return v;
}

// Continuous piecewise-linear function given by its values at sorted knots,
// constant outside them. Returns the smallest z with value(z) >= target.
double invert_piecewise_linear(std::span<const double> knots, std::span<const double> values, double target) {
  for (std::size_t i = 0; i < knots.size(); ++i) {
    if (values[i] >= target) {
      if (i == 0 || values[i] == target) {
        // left end of the plateau that starts at knots[i]
        std::size_t k = i;
        while (k > 0 && values[k - 1] == target) --k;
        return knots[k];
      }
      const double frac = (target - values[i - 1]) / (values[i] - values[i - 1]);
      return knots[i - 1] + frac * (knots[i] - knots[i - 1]);
    }
  }
  throw InfeasibleError("target above the function's range");
}

}  // namespace

SheddingSolution greedy_shed_set(std::span<const RatedLoad> loads, double required) {
  const std::vector<RatedLoad> sorted = sorted_by_priority(loads);
  double total = 0.0;
  for (const RatedLoad& l : sorted) total += l.power;
  require_feasible(total, required);

  SheddingSolution sol;
  double acc = 0.0;
  for (const RatedLoad& l : sorted) {
    sol.shed_ids.push_back(l.id);
    acc += l.power;
    sol.z_star = l.criticality;
    if (acc >= required) break;
  }
  sol.total_shed = acc;
  return sol;
}

std::vector<int> loads_at_or_below(std::span<const RatedLoad> loads, double threshold) {
  std::vector<int> ids;
  for (const RatedLoad& l : loads) {
    if (l.criticality <= threshold) ids.push_back(l.id);
  }
  return ids;
}

SheddingSolution ccf_shed_set(std::span<const RatedLoad> loads, double required, double ramp_width) {
  Ccf ccf = Ccf::build(loads);
  require_feasible(ccf.total_load(), required);
  SheddingSolution sol;
  sol.z_star = exact_z_star(ccf, required);
  sol.shed_ids = loads_at_or_below(loads, sol.z_star);
  sol.total_shed = ccf(sol.z_star);
  sol.z_hat = exact_z_hat(SurrogateCcf(std::move(ccf), ramp_width), required);
  return sol;
}

SubsetOptimum brute_force_min_set(std::span<const RatedLoad> loads, double required, SubsetFamily family) {
  if (loads.size() > kBruteForceMaxLoads) {
    throw std::length_error("brute_force_min_set: " + std::to_string(loads.size()) + " loads exceeds the limit of " +
                            std::to_string(kBruteForceMaxLoads));
  }
  double total = 0.0;
  for (const RatedLoad& l : loads) total += l.power;
  require_feasible(total, required);

  const std::uint32_t count = 1u << loads.size();
  std::uint32_t best_mask = count - 1;
  double best = total;
  for (std::uint32_t mask = 0; mask < count; ++mask) {
    double sum = 0.0;
    double max_in = -std::numeric_limits<double>::infinity();
    double min_out = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < loads.size(); ++i) {
      if (mask & (1u << i)) {
        sum += loads[i].power;
        max_in = std::max(max_in, loads[i].criticality);
      } else {
        min_out = std::min(min_out, loads[i].criticality);
      }
    }
    if (family == SubsetFamily::priority_based && max_in > min_out) continue;
    if (sum >= required && sum < best) {
      best = sum;
      best_mask = mask;
    }
  }
  SubsetOptimum opt;
  for (std::size_t i = 0; i < loads.size(); ++i) {
    if (best_mask & (1u << i)) opt.ids.push_back(loads[i].id);
  }
  opt.total = best;
  return opt;
}

double exact_z_star(const Ccf& ccf, double required) {
  require_feasible(ccf.total_load(), required);
  const auto bps = ccf.breakpoints();
  if (bps.empty()) throw InfeasibleError("exact_z_star: empty load set has no threshold");
  auto it = std::lower_bound(bps.begin(), bps.end(), required,
                             [](const Breakpoint& b, double v) { return b.cumulative < v; });
  return it->criticality;
}

double exact_z_hat(const SurrogateCcf& s, double required) {
  const Ccf& base = s.base();
  require_feasible(base.total_load(), required);
  if (base.empty()) throw InfeasibleError("exact_z_hat: empty load set has no root");

  std::vector<double> knots;
  for (const Breakpoint& b : base.breakpoints()) {
    knots.push_back(b.criticality - s.ramp_width());
    knots.push_back(b.criticality);
  }
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  std::vector<double> values(knots.size());
  std::transform(knots.begin(), knots.end(), values.begin(), [&](double k) { return s(k); });
  return invert_piecewise_linear(knots, values, required);
}

RecoveredThreshold z_star_from_z_hat(const Ccf& ccf, double z_hat, double required) {
  const auto bps = ccf.breakpoints();
  // largest breakpoint <= z_hat
  auto above = std::upper_bound(bps.begin(), bps.end(), z_hat,
                                [](double v, const Breakpoint& b) { return v < b.criticality; });
  if (above != bps.begin()) {
    const Breakpoint& lower = *std::prev(above);
    if (lower.cumulative >= required - kExactMatchTolerance) {
      return {lower.criticality, true};
    }
  }
  if (above == bps.end()) throw InfeasibleError("z_star_from_z_hat: no criticality above z_hat");
  return {above->criticality, false};
}

double continuous_ccf_eval(std::span<const ContinuousRegion> regions, double z) {
  double value = 0.0;
  for (const ContinuousRegion& r : regions) value += r.capacity * ramp(z - r.criticality, 1.0);
  return value;
}

ContinuousSolution continuous_solution(std::span<const ContinuousRegion> regions, double required) {
  double total = 0.0;
  for (const ContinuousRegion& r : regions) {
    if (!(r.capacity >= 0.0)) throw DomainError("region capacity must be nonnegative");
    total += r.capacity;
  }
  require_feasible(total, required);
  if (regions.empty()) throw InfeasibleError("continuous_solution: no regions");

  std::vector<double> knots;
  for (const ContinuousRegion& r : regions) {
    knots.push_back(r.criticality - 1.0);
    knots.push_back(r.criticality);
  }
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  std::vector<double> values(knots.size());
  std::transform(knots.begin(), knots.end(), values.begin(),
                 [&](double k) { return continuous_ccf_eval(regions, k); });

  ContinuousSolution sol;
  sol.z_tilde = invert_piecewise_linear(knots, values, required);
  for (const ContinuousRegion& r : regions) {
    sol.per_region_shed.push_back(r.capacity * ramp(sol.z_tilde - r.criticality, 1.0));
  }
  return sol;
}

}  // namespace lshed::oracle
