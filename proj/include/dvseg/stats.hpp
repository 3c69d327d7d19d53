#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dvseg/common.hpp"

namespace dvseg {

/// Linear-interpolation percentile (numpy convention): rank q/100*(n-1),
/// interpolated between the two nearest order statistics. q in [0,100].
template <typename Scalar>
double percentile_of(std::vector<Scalar> values, double q) {
  if (values.empty()) {
    throw ValidationError("percentile of an empty list");
  }
  if (q < 0.0 || q > 100.0) {
    throw ValidationError("percentile rank must lie in [0,100]");
  }
  std::sort(values.begin(), values.end());
  const double rank = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return static_cast<double>(values[lo]) +
         frac * (static_cast<double>(values[hi]) - values[lo]);
}

}  // namespace dvseg
