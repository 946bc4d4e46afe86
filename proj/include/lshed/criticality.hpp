#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lshed/ext_value.hpp"

namespace lshed {

/// One sheddable load. Power in GW.
struct Load {
  int id = 0;
  double power = 0.0;
  double nature_criticality = 0.0;  // C_n, in [0, 1]
  int region_id = 0;
};

/// A region and the loads it owns. Regions partition the global load set.
struct Region {
  int id = 0;
  double region_criticality = 0.0;  // C_r, in [0, 1]
  std::vector<Load> loads;
};

/// A load after its combined criticality C = F(C_n, C_r) has been resolved.
struct RatedLoad {
  int id = 0;
  double power = 0.0;
  double criticality = 0.0;
};

/// The rule F(C_n, C_r) -> C. Outputs are checked to stay in [0, 1].
class CriticalityCombiner {
 public:
  using Rule = std::function<double(double, double)>;

  /// C = w * C_n + (1 - w) * C_r, w in [0, 1]. The default is w = 0.5.
  static CriticalityCombiner convex(double nature_weight = 0.5);

  /// Arbitrary rule. Must be deterministic; outputs outside [0, 1] raise
  /// DomainError at evaluation time.
  static CriticalityCombiner custom(Rule rule, std::string name);

  double operator()(double nature, double region) const;

  const std::string& name() const { return name_; }

 private:
  CriticalityCombiner(Rule rule, std::string name) : rule_(std::move(rule)), name_(std::move(name)) {}

  Rule rule_;
  std::string name_;
};

/// Applies the combiner after checking both inputs lie in [0, 1].
double combine_criticality(const CriticalityCombiner& combiner, double nature, double region);

/// Resolves every load of `region` to (id, power, C).
std::vector<RatedLoad> rate_loads(const Region& region, const CriticalityCombiner& combiner);

struct Breakpoint {
  double criticality = 0.0;
  double cumulative = 0.0;  // f(criticality)
  double step = 0.0;        // total power at exactly this criticality
};

/// Cumulative criticality function f(z) = sum of power over loads with C <= z.
/// A right-continuous, non-decreasing step function stored as its breakpoints.
class Ccf {
 public:
  /// The zero function.
  Ccf() = default;

  /// Equal criticalities merge into one breakpoint. Zero-power loads add no
  /// step and therefore no breakpoint. Negative power throws DomainError.
  static Ccf build(std::span<const RatedLoad> loads);

  double operator()(double z) const;

  std::span<const Breakpoint> breakpoints() const { return breakpoints_; }
  double total_load() const { return total_; }
  bool empty() const { return breakpoints_.empty(); }

  /// Distinct breakpoint criticalities, ascending.
  std::vector<double> criticalities() const;

 private:
  std::vector<Breakpoint> breakpoints_;
  double total_ = 0.0;
};

Ccf build_ccf(std::span<const RatedLoad> loads);
double eval_ccf(const Ccf& ccf, double z);

/// Smallest positive difference between any two values. Throws DomainError
/// when fewer than two distinct values are present.
double min_gap(std::span<const double> criticalities);

/// The ramp w_width(d): 1 for d >= 0, d/width + 1 on [-width, 0), 0 below.
double ramp(double d, double width);

/// Absolute slack allowed when checking ramp_width <= min_gap, so that a
/// nominal width such as 0.05 is accepted for gaps computed as 0.15 - 0.1.
inline constexpr double kRampWidthSlack = 1e-12;

/// Lipschitz surrogate of a CCF: every step replaced by a linear ramp of
/// width c ending at the breakpoint. Agrees with the CCF at every breakpoint
/// when c does not exceed the smallest breakpoint gap.
class SurrogateCcf {
 public:
  SurrogateCcf() = default;

  /// Throws DomainError if width <= 0, or ValidationError if width exceeds
  /// the smallest gap between breakpoints.
  SurrogateCcf(Ccf base, double ramp_width);

  /// Uses ramp_width = min_gap of the breakpoints (1.0 when there are fewer
  /// than two breakpoints).
  static SurrogateCcf with_default_ramp(Ccf base);

  double operator()(double z) const;

  /// Same value as operator(), bit for bit. `hint` is the index of the first
  /// breakpoint above the previous query; the search walks from there, which
  /// is cheap when successive queries move little.
  double eval_hinted(double z, std::size_t& hint) const;

  const Ccf& base() const { return base_; }
  double ramp_width() const { return ramp_width_; }
  double total_load() const { return base_.total_load(); }

  /// total_load / ramp_width.
  double lipschitz_bound() const { return base_.total_load() / ramp_width_; }

 private:
  Ccf base_;
  double ramp_width_ = 1.0;
};

double eval_surrogate(const SurrogateCcf& s, double z);

/// Smallest value in `sorted_criticalities` that is >= x, or +inf if none.
ExtValue local_zeta(std::span<const double> sorted_criticalities, double x);

/// local_zeta with a walking search from `hint`, the previous result's index.
ExtValue local_zeta_hinted(std::span<const double> sorted_criticalities, double x, std::size_t& hint);

/// Structure-of-arrays copy of a load list, the layout the kernels consume.
struct LoadColumns {
  std::vector<double> criticality;
  std::vector<double> power;

  static LoadColumns from(std::span<const RatedLoad> loads);
};

}  // namespace lshed
