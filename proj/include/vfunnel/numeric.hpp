#pragma once

#include <cmath>

namespace vfunnel {

/// Rounds `v` to the nearest multiple of 10^-digits, returning the double
/// closest to that decimal. Values too large to scale exactly pass through.
inline double snap_decimal(double v, int digits) {
  const double scale = std::pow(10.0, digits);
  const double scaled = v * scale;
  if (!std::isfinite(scaled) || std::abs(scaled) >= 0x1p52) {
    return v;
  }
  return std::round(scaled) / scale;
}

} // namespace vfunnel
