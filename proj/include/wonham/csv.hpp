#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

namespace wonham {

/// Shortest round-trip decimal text for CSV cells ("inf", "-inf", "nan" for
/// non-finite values).
inline std::string csv_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

}  // namespace wonham
