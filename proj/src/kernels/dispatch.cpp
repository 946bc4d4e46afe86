#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string_view>

#include "lshed/kernels.hpp"

namespace lshed::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(LSHED_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Isa initial_isa() {
  const Isa best = detected_isa();
  if (const char* env = std::getenv("LSHED_ISA")) {
    const std::string_view v(env);
    if (v == "scalar") return Isa::scalar;
    if (v == "avx2" && best == Isa::avx2) return Isa::avx2;
  }
  return best;
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "unknown";
}

Isa detected_isa() { return cpu_has_avx2() ? Isa::avx2 : Isa::scalar; }

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (isa == Isa::avx2 && !cpu_has_avx2()) throw std::invalid_argument("kernels: avx2 not supported on this host");
  active().store(isa, std::memory_order_relaxed);
}

#if defined(LSHED_HAVE_AVX2)
#define LSHED_DISPATCH(fn, ...)                                         \
  return active_isa() == Isa::avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__)
#else
#define LSHED_DISPATCH(fn, ...) return scalar::fn(__VA_ARGS__)
#endif

double step_sum(std::span<const double> crit, std::span<const double> power, double z) {
  LSHED_DISPATCH(step_sum, crit, power, z);
}

double ramp_sum(std::span<const double> crit, std::span<const double> power, double z, double width) {
  LSHED_DISPATCH(ramp_sum, crit, power, z, width);
}

void step_sum_batch(std::span<const double> crit, std::span<const double> power,
                    std::span<const double> zs, std::span<double> out) {
  LSHED_DISPATCH(step_sum_batch, crit, power, zs, out);
}

void ramp_sum_batch(std::span<const double> crit, std::span<const double> power,
                    std::span<const double> zs, double width, std::span<double> out) {
  LSHED_DISPATCH(ramp_sum_batch, crit, power, zs, width, out);
}

#undef LSHED_DISPATCH

#if !defined(LSHED_HAVE_AVX2)
namespace avx2 {
// Non-x86 builds: keep the symbols so callers link; they are never selected.
double step_sum(std::span<const double> c, std::span<const double> p, double z) { return scalar::step_sum(c, p, z); }
double ramp_sum(std::span<const double> c, std::span<const double> p, double z, double w) {
  return scalar::ramp_sum(c, p, z, w);
}
void step_sum_batch(std::span<const double> c, std::span<const double> p, std::span<const double> zs,
                    std::span<double> out) {
  scalar::step_sum_batch(c, p, zs, out);
}
void ramp_sum_batch(std::span<const double> c, std::span<const double> p, std::span<const double> zs, double w,
                    std::span<double> out) {
  scalar::ramp_sum_batch(c, p, zs, w, out);
}
}  // namespace avx2
#endif

}  // namespace lshed::kernels
