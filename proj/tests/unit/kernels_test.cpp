#include <doctest.h>

#include <cstring>
#include <vector>

#include "lshed/kernels.hpp"
#include "../support/reference.hpp"

using namespace lshed;

namespace {

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

struct Columns {
  std::vector<double> crit, power;
};

Columns random_columns(ref::Gen& g, int m) {
  Columns c;
  for (int i = 0; i < m; ++i) {
    // Some exact hits on a coarse grid so z == crit[i] occurs.
    c.crit.push_back(g.integer(0, 3) == 0 ? g.integer(0, 20) / 20.0 : g.uniform(0, 1));
    c.power.push_back(g.uniform(0, 3));
  }
  return c;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("scalar kernels match the definitional sums") {
  ref::Gen g(3);
  for (int m : {0, 1, 3, 4, 5, 17, 64, 101}) {
    const Columns c = random_columns(g, m);
    std::vector<RatedLoad> loads;
    for (int i = 0; i < m; ++i) loads.push_back({i, c.power[i], c.crit[i]});
    for (int k = 0; k < 200; ++k) {
      const double z = k % 10 == 0 && m > 0 ? c.crit[static_cast<std::size_t>(k) % m] : g.uniform(-0.1, 1.1);
      CHECK(kernels::scalar::step_sum(c.crit, c.power, z) == doctest::Approx(ref::ccf(loads, z)).epsilon(1e-12));
      CHECK(kernels::scalar::ramp_sum(c.crit, c.power, z, 0.03) ==
            doctest::Approx(ref::surrogate(loads, z, 0.03)).epsilon(1e-12));
    }
  }
}

TEST_CASE("avx2 kernels are bit-identical to scalar") {
  if (kernels::detected_isa() != kernels::Isa::avx2) {
    MESSAGE("avx2 not available on this machine; equivalence not exercised");
    return;
  }
  ref::Gen g(4);
  for (int m : {0, 1, 2, 3, 4, 5, 7, 8, 9, 31, 100, 257}) {
    const Columns c = random_columns(g, m);
    std::vector<double> zs;
    for (int k = 0; k < 97; ++k) zs.push_back(k % 7 == 0 && m > 0 ? c.crit[static_cast<std::size_t>(k) % m] : g.uniform(-0.2, 1.2));
    for (double z : zs) {
      CHECK(same_bits(kernels::scalar::step_sum(c.crit, c.power, z), kernels::avx2::step_sum(c.crit, c.power, z)));
      CHECK(same_bits(kernels::scalar::ramp_sum(c.crit, c.power, z, 0.01), kernels::avx2::ramp_sum(c.crit, c.power, z, 0.01)));
    }
    std::vector<double> a(zs.size()), b(zs.size());
    kernels::scalar::step_sum_batch(c.crit, c.power, zs, a);
    kernels::avx2::step_sum_batch(c.crit, c.power, zs, b);
    for (std::size_t i = 0; i < zs.size(); ++i) CHECK(same_bits(a[i], b[i]));
    kernels::scalar::ramp_sum_batch(c.crit, c.power, zs, 0.02, a);
    kernels::avx2::ramp_sum_batch(c.crit, c.power, zs, 0.02, b);
    for (std::size_t i = 0; i < zs.size(); ++i) CHECK(same_bits(a[i], b[i]));
  }
}

TEST_CASE("dispatch follows the active variant") {
  const auto saved = kernels::active_isa();
  kernels::set_active_isa(kernels::Isa::scalar);
  CHECK(kernels::active_isa() == kernels::Isa::scalar);
  const std::vector<double> crit{0.1, 0.2}, power{1, 2};
  CHECK(kernels::step_sum(crit, power, 0.15) == 1.0);
  kernels::set_active_isa(saved);
  CHECK(std::string(kernels::isa_name(kernels::Isa::avx2)) == "avx2");
}

}  // TEST_SUITE
