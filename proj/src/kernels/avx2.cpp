#include <immintrin.h>

#include <stdexcept>

#include "lshed/kernels.hpp"

namespace lshed::kernels::avx2 {

namespace {

void check_sizes(std::span<const double> crit, std::span<const double> power) {
  if (crit.size() != power.size()) throw std::invalid_argument("kernels: crit/power size mismatch");
}

inline double reduce(__m256d acc) {
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

// Tail elements land in the same lanes as in the scalar reference; the
// masked-off lanes add +0.0, which leaves every partial sum unchanged.
inline __m256i tail_mask(std::size_t rem) {
  return _mm256_set_epi64x(rem > 3 ? -1 : 0, rem > 2 ? -1 : 0, rem > 1 ? -1 : 0, rem > 0 ? -1 : 0);
}

inline __m256d step_block(__m256d acc, __m256d zv, __m256d c, __m256d p) {
  const __m256d d = _mm256_sub_pd(zv, c);
  const __m256d ge = _mm256_cmp_pd(d, _mm256_setzero_pd(), _CMP_GE_OQ);
  return _mm256_add_pd(acc, _mm256_and_pd(ge, p));
}

inline __m256d ramp_block(__m256d acc, __m256d zv, __m256d c, __m256d p, __m256d wv) {
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d t = _mm256_add_pd(_mm256_div_pd(_mm256_sub_pd(zv, c), wv), one);
  t = _mm256_max_pd(t, _mm256_setzero_pd());
  t = _mm256_min_pd(t, one);
  return _mm256_add_pd(acc, _mm256_mul_pd(p, t));
}

}  // namespace

double step_sum(std::span<const double> crit, std::span<const double> power, double z) {
  check_sizes(crit, power);
  const std::size_t n = crit.size();
  const __m256d zv = _mm256_set1_pd(z);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = step_block(acc, zv, _mm256_loadu_pd(crit.data() + i), _mm256_loadu_pd(power.data() + i));
  }
  if (i < n) {
    const __m256i m = tail_mask(n - i);
    acc = step_block(acc, zv, _mm256_maskload_pd(crit.data() + i, m), _mm256_maskload_pd(power.data() + i, m));
  }
  return reduce(acc);
}

double ramp_sum(std::span<const double> crit, std::span<const double> power, double z, double width) {
  check_sizes(crit, power);
  const std::size_t n = crit.size();
  const __m256d zv = _mm256_set1_pd(z);
  const __m256d wv = _mm256_set1_pd(width);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = ramp_block(acc, zv, _mm256_loadu_pd(crit.data() + i), _mm256_loadu_pd(power.data() + i), wv);
  }
  if (i < n) {
    // Masked-off power lanes load as 0.0, so 0 * t contributes +0.0.
    const __m256i m = tail_mask(n - i);
    acc = ramp_block(acc, zv, _mm256_maskload_pd(crit.data() + i, m), _mm256_maskload_pd(power.data() + i, m), wv);
  }
  return reduce(acc);
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

}  // namespace lshed::kernels::avx2
