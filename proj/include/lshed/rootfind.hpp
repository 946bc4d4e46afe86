#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lshed/netgraph.hpp"
#include "lshed/protocol.hpp"

// Distributed root finding for time-varying fields: every node j holds
// h_j(z, t), and the nodes look for a root of the average limit
// H(z) = (1/n) sum_j lim h_j(z, t).

namespace lshed::rootfind {

struct TimeVaryingField {
  using Eval = std::function<double(int j, double z, std::int64_t t)>;
  using BatchEval = std::function<void(int j, std::span<const double> zs, std::int64_t t, std::span<double> out)>;
  using Limit = std::function<double(int j, double z)>;

  int n = 0;
  Eval eval;
  BatchEval batch;  // optional fast path for grid sweeps
  Limit limit;      // optional analytic limit h_j(z)
  std::optional<double> claimed_bound;
  std::optional<double> claimed_lipschitz;
  std::string name;

  double operator()(int j, double z, std::int64_t t) const { return eval(j, z, t); }
  void evaluate(int j, std::span<const double> zs, std::int64_t t, std::span<double> out) const;
};

/// h_j(z, t) = f_hat_j(z) - p_j(t + 1), the field the load-shedding protocol
/// follows (its estimator clock starts at 1). Grid sweeps go through the SIMD
/// ramp kernels; single evaluations use the surrogate itself so that
/// trajectories match the protocol bit for bit.
TimeVaryingField load_shedding_field(std::span<const protocol::RegionModel> regions,
                                     const protocol::PEstimator& estimator);

/// x_j <- sum_k W_jk x_k - eta h_j(x_j, t).
std::vector<double> aux_update_round(std::span<const double> x, const netgraph::MixingMatrix& w, double eta,
                                     const TimeVaryingField& field, std::int64_t t);

struct Grid {
  double lo = -1.0;
  double hi = 1.0;
  int points = 1001;

  std::vector<double> values() const;
  double spacing() const { return points > 1 ? (hi - lo) / (points - 1) : 0.0; }
};

/// Step times at which time-varying quantities are sampled: every t up to
/// 1024, then 128 per doubling, up to `horizon` inclusive.
std::vector<std::int64_t> sample_times(std::int64_t first, std::int64_t horizon);

/// H on the grid: the declared limit if there is one, otherwise the average
/// of h_j(z, 10 * horizon).
std::vector<double> average_limit(const TimeVaryingField& field, std::span<const double> zs, std::int64_t horizon);

struct AssumptionCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Assumption4Report {
  double bound = 0.0;      // M
  double lipschitz = 0.0;  // lambda, max quotient times 1.1
  std::optional<double> witness;
  AssumptionCheck bounded, lipschitz_check, sign;
};

inline constexpr double kSignTolerance = 1e-9;
inline constexpr double kLipschitzSafety = 1.1;

Assumption4Report verify_assumption4(const TimeVaryingField& field, const Grid& grid, std::int64_t horizon);

struct Assumption5Report {
  double theta = 0.0;
  double growth_slope = 0.0;  // log-log slope of dyadic block maxima
  AssumptionCheck check;
};

/// Largest |H(z) - (1/n) sum_j h_j(z, t)| / eta(t) over the grid and sampled
/// t in [1, horizon]. Passes when the ratio's dyadic block maxima stop
/// growing: fitted log-log slope over the later half at most kMaxGrowthSlope.
Assumption5Report verify_assumption5(const TimeVaryingField& field, const Grid& grid, std::int64_t horizon,
                                     const protocol::StepSchedule& step);

inline constexpr double kMaxGrowthSlope = 0.1;

/// Doubly stochastic W(t) with self-loops whose gamma-threshold graph is the
/// communication graph, over [0, horizon), plus window connectivity.
AssumptionCheck verify_assumption6(const netgraph::GraphSchedule& schedule, std::int64_t horizon, double gamma);

/// Nonnegative steps with sum eta = inf and sum eta^2 < inf.
AssumptionCheck verify_assumption7(const protocol::StepSchedule& step, std::int64_t horizon);

struct RootOptions {
  double tolerance = 1e-6;
  std::int64_t max_rounds = 100000;
  std::int64_t min_rounds = 0;
  bool record_trajectory = false;
};

struct RootDiagnostics {
  std::vector<double> disagreement;   // max_i |x_i(t) - xbar(t)|, t = 1..rounds
  std::vector<double> consensus_ratio;  // disagreement / eta(t)
  std::vector<double> mean;           // xbar(t)
  double nu = 0.0;                    // max consensus ratio
  std::int64_t nu_attained = 0;       // first t at which the max was reached
  double omega = 0.0;                 // sum_t eta(t) |H(xbar(t)) - ybar(t)|
  double mean_bound = 0.0;            // max |xbar(t)|
  std::vector<std::vector<double>> trajectory;  // x(t), t = 0..rounds, if recorded
};

struct RootResult {
  double root = 0.0;  // xbar at termination
  std::vector<double> x;
  std::int64_t rounds = 0;
  bool converged = false;
  RootDiagnostics diagnostics;
};

/// Iterates aux_update_round from x0 until |H(xbar)| <= tol and every
/// |x_i - xbar| <= tol (after min_rounds), or max_rounds.
RootResult run_to_root(const TimeVaryingField& field, const netgraph::GraphSchedule& schedule,
                       const protocol::StepSchedule& step, std::span<const double> x0, const RootOptions& options);

struct CertifyOptions {
  Grid grid;
  std::int64_t horizon = 10000;
  std::optional<double> gamma;  // default 1/(2n)
  std::int64_t probe_rounds = 2000;  // run used for the nu and omega estimates
};

struct AssumptionCertificate {
  double bound = 0.0;
  double lipschitz = 0.0;
  double theta = 0.0;
  int window = 1;
  double nu_estimate = 0.0;
  double omega_estimate = 0.0;
  std::optional<double> sign_witness;
  Grid grid;
  std::int64_t horizon = 0;
  std::vector<AssumptionCheck> checks;

  bool all_pass() const;
};

AssumptionCertificate certify(const TimeVaryingField& field, const netgraph::GraphSchedule& schedule,
                              const protocol::StepSchedule& step, const CertifyOptions& options);

}  // namespace lshed::rootfind
