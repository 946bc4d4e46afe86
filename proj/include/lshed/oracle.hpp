#pragma once

#include <optional>
#include <span>
#include <vector>

#include "lshed/criticality.hpp"

// Centralized ground truth for the distributed protocol. Nothing here is
// distributed; every function sees the whole load set.

namespace lshed::oracle {

struct SheddingSolution {
  std::vector<int> shed_ids;
  double total_shed = 0.0;
  double z_star = 0.0;
  std::optional<double> z_hat;  // only when a surrogate was involved
};

/// Shortest prefix of the loads sorted by (criticality, id) whose power
/// reaches `required`. z_star is the criticality of the last load taken.
/// Throws InfeasibleError if the total load is below `required`.
SheddingSolution greedy_shed_set(std::span<const RatedLoad> loads, double required);

/// Shed set {C <= z*} obtained through the CCF, with z* and z_hat (the
/// latter from the surrogate with the given ramp width).
SheddingSolution ccf_shed_set(std::span<const RatedLoad> loads, double required, double ramp_width);

/// Ids of loads with criticality <= threshold, in input order.
std::vector<int> loads_at_or_below(std::span<const RatedLoad> loads, double threshold);

inline constexpr std::size_t kBruteForceMaxLoads = 20;

struct SubsetOptimum {
  std::vector<int> ids;
  double total = 0.0;
};

enum class SubsetFamily {
  priority_based,  // every shed load's C <= every kept load's C
  any,             // criticality ignored
};

/// Exhaustive minimum of sum(power) over subsets of the family with
/// sum >= required. At most kBruteForceMaxLoads loads.
SubsetOptimum brute_force_min_set(std::span<const RatedLoad> loads, double required,
                                  SubsetFamily family = SubsetFamily::priority_based);

/// Smallest breakpoint z with f(z) >= required.
double exact_z_star(const Ccf& ccf, double required);

/// Smallest z with f_hat(z) = required, by inversion over the surrogate's
/// linear pieces. On a plateau the left end is returned; required = 0 gives
/// the start of the first ramp. Requires 0 <= required <= total.
double exact_z_hat(const SurrogateCcf& s, double required);

struct RecoveredThreshold {
  double z_star = 0.0;
  /// True when f(z*) equals `required` (within kExactMatchTolerance), the
  /// second case of the recovery rule.
  bool exact_match = false;
};

inline constexpr double kExactMatchTolerance = 1e-9;

/// Recovers z* from a root z_hat of the surrogate: the largest criticality
/// <= z_hat when its f-value already meets the requirement, otherwise the
/// smallest criticality > z_hat.
RecoveredThreshold z_star_from_z_hat(const Ccf& ccf, double z_hat, double required);

/// A region of the continuous variant: up to `capacity` GW can be shed, all
/// at criticality `criticality`.
struct ContinuousRegion {
  double capacity = 0.0;
  double criticality = 0.0;
};

struct ContinuousSolution {
  std::vector<double> per_region_shed;
  double z_tilde = 0.0;
};

/// phi(z) = sum_j L_j * w_1(z - C_j).
double continuous_ccf_eval(std::span<const ContinuousRegion> regions, double z);

/// Solves phi(z_tilde) = required and sheds l_j = L_j * w_1(z_tilde - C_j),
/// which for integer criticalities is the floor/ceil split.
ContinuousSolution continuous_solution(std::span<const ContinuousRegion> regions, double required);

}  // namespace lshed::oracle
