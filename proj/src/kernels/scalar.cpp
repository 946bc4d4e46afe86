#include <algorithm>
#include <stdexcept>

#include "lshed/kernels.hpp"

namespace lshed::kernels::scalar {

namespace {

void check_sizes(std::span<const double> crit, std::span<const double> power) {
  if (crit.size() != power.size()) throw std::invalid_argument("kernels: crit/power size mismatch");
}

inline double ramp(double d, double width) {
  // max/min ordering mirrors _mm256_max_pd / _mm256_min_pd
  double t = d / width + 1.0;
  t = t > 0.0 ? t : 0.0;
  return t < 1.0 ? t : 1.0;
}

}  // namespace

double step_sum(std::span<const double> crit, std::span<const double> power, double z) {
  check_sizes(crit, power);
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < crit.size(); ++i) {
    lane[i % 4] += (z - crit[i] >= 0.0) ? power[i] : 0.0;
  }
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double ramp_sum(std::span<const double> crit, std::span<const double> power, double z, double width) {
  check_sizes(crit, power);
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < crit.size(); ++i) {
    lane[i % 4] += power[i] * ramp(z - crit[i], width);
  }
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

void step_sum_batch(std::span<const double> crit, std::span<const double> power,
                    std::span<const double> zs, std::span<double> out) {
  if (zs.size() != out.size()) throw std::invalid_argument("kernels: zs/out size mismatch");
  for (std::size_t k = 0; k < zs.size(); ++k) out[k] = step_sum(crit, power, zs[k]);
}

void ramp_sum_batch(std::span<const double> crit, std::span<const double> power,
                    std::span<const double> zs, double width, std::span<double> out) {
  if (zs.size() != out.size()) throw std::invalid_argument("kernels: zs/out size mismatch");
  for (std::size_t k = 0; k < zs.size(); ++k) out[k] = ramp_sum(crit, power, zs[k], width);
}

}  // namespace lshed::kernels::scalar
