#pragma once

#include <compare>
#include <string>

namespace lshed {

/// A real number or +infinity. The infinite state is a flag, so arithmetic
/// on it never mixes a large finite stand-in into sums.
class ExtValue {
 public:
  constexpr ExtValue() = default;

  static constexpr ExtValue finite(double v) { return ExtValue(v, false); }
  static constexpr ExtValue infinity() { return ExtValue(0.0, true); }

  constexpr bool is_finite() const { return !infinite_; }
  constexpr bool is_infinite() const { return infinite_; }

  /// Finite payload. Calling this on +inf is a logic error.
  double value() const;

  /// this + delta; +inf absorbs any finite delta.
  constexpr ExtValue plus(double delta) const {
    return infinite_ ? *this : ExtValue(value_ + delta, false);
  }

  friend constexpr bool operator==(const ExtValue& a, const ExtValue& b) {
    if (a.infinite_ || b.infinite_) return a.infinite_ == b.infinite_;
    return a.value_ == b.value_;
  }

  friend constexpr std::partial_ordering operator<=>(const ExtValue& a, const ExtValue& b) {
    if (a.infinite_ && b.infinite_) return std::partial_ordering::equivalent;
    if (a.infinite_) return std::partial_ordering::greater;
    if (b.infinite_) return std::partial_ordering::less;
    return a.value_ <=> b.value_;
  }

  friend constexpr ExtValue min(const ExtValue& a, const ExtValue& b) {
    if (b.infinite_) return a;
    if (a.infinite_) return b;
    return b.value_ < a.value_ ? b : a;
  }

  /// "inf" or the value with 12 significant digits.
  std::string to_string() const;

 private:
  constexpr ExtValue(double v, bool inf) : value_(v), infinite_(inf) {}

  double value_ = 0.0;
  bool infinite_ = false;
};

}  // namespace lshed
