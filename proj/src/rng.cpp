#include "lshed/rng.hpp"

#include <cstdio>
#include <stdexcept>

#include "lshed/ext_value.hpp"

namespace lshed {

double ExtValue::value() const {
  if (infinite_) throw std::logic_error("ExtValue::value() on +inf");
  return value_;
}

std::string ExtValue::to_string() const {
  if (infinite_) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", value_);
  return buf;
}

namespace rng {

namespace {
constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace

Xoshiro256::Xoshiro256(std::uint64_t seed) {
  std::uint64_t state = seed;
  for (auto& s : s_) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    s = z ^ (z >> 31);
  }
}

std::uint64_t Xoshiro256::next() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

std::uint64_t Xoshiro256::below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("Xoshiro256::below: bound must be positive");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t r;
  do {
    r = next();
  } while (r >= limit);
  return r % bound;
}

}  // namespace rng
}  // namespace lshed
