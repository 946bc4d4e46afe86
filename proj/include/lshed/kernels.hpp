#pragma once

#include <span>

// Load-sum kernels. Each evaluates a cumulative criticality function directly
// from its definition, as a sum over loads:
//
//   step_sum(z) = sum_i power[i] * u(z - crit[i])         u: right-continuous step
//   ramp_sum(z) = sum_i power[i] * w_width(z - crit[i])   w: ramp of the surrogate
//
// These are the O(m) definitional routes, independent of the O(log m)
// breakpoint tables in criticality.hpp, and the hot loop of grid sweeps.
//
// Summation order is fixed: four interleaved lanes (element i goes to lane
// i % 4), combined as (l0 + l1) + (l2 + l3). The scalar reference and every
// SIMD variant follow that order, so all variants are bit-identical.

namespace lshed::kernels {

enum class Isa { scalar, avx2 };

const char* isa_name(Isa isa);

/// Best variant supported by this CPU and build.
Isa detected_isa();

/// Variant currently used by the dispatching entry points. Defaults to
/// detected_isa(); the LSHED_ISA environment variable ("scalar" or "avx2")
/// overrides it at first use.
Isa active_isa();

/// Throws std::invalid_argument if the variant is not supported here.
void set_active_isa(Isa isa);

double step_sum(std::span<const double> crit, std::span<const double> power, double z);
double ramp_sum(std::span<const double> crit, std::span<const double> power, double z, double width);

void step_sum_batch(std::span<const double> crit, std::span<const double> power,
                    std::span<const double> zs, std::span<double> out);
void ramp_sum_batch(std::span<const double> crit, std::span<const double> power,
                    std::span<const double> zs, double width, std::span<double> out);

namespace scalar {
double step_sum(std::span<const double> crit, std::span<const double> power, double z);
double ramp_sum(std::span<const double> crit, std::span<const double> power, double z, double width);
void step_sum_batch(std::span<const double> crit, std::span<const double> power,
                    std::span<const double> zs, std::span<double> out);
void ramp_sum_batch(std::span<const double> crit, std::span<const double> power,
                    std::span<const double> zs, double width, std::span<double> out);
}  // namespace scalar

namespace avx2 {
double step_sum(std::span<const double> crit, std::span<const double> power, double z);
double ramp_sum(std::span<const double> crit, std::span<const double> power, double z, double width);
void step_sum_batch(std::span<const double> crit, std::span<const double> power,
                    std::span<const double> zs, std::span<double> out);
void ramp_sum_batch(std::span<const double> crit, std::span<const double> power,
                    std::span<const double> zs, double width, std::span<double> out);
}  // namespace avx2

}  // namespace lshed::kernels
