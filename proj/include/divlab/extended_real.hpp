#pragma once

#include <string>

namespace divlab {

// A non-negative quantity that may be +infinity. Serialized as "inf",
// never as a floating-point infinity.
struct ExtendedReal {
  double value = 0.0;
  bool infinite = false;

  static ExtendedReal finite(double v) { return {v, false}; }
  static ExtendedReal inf() { return {0.0, true}; }

  bool operator<=(const ExtendedReal& o) const {
    if (o.infinite) return true;
    if (infinite) return false;
    return value <= o.value;
  }
  bool operator<(const ExtendedReal& o) const { return !(o <= *this); }
  bool exceeds(double bound) const { return infinite || value > bound; }
  bool at_least(double bound) const { return infinite || value >= bound; }

  std::string to_string() const;
};

// a / b for a, b >= 0 with a/0 = inf for a > 0 and 0/0 = 0.
ExtendedReal safe_ratio(double a, double b);

}  // namespace divlab
