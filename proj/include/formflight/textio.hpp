#pragma once

#include <cstdio>
#include <string>

namespace formflight {

// Shortest round-trip decimal form of a double. All text artifacts go through
// this so reruns are byte-identical.
inline std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace formflight
