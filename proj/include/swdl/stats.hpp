#pragma once

// Wilcoxon signed-rank test with average ranks for ties and the tie
// correction T = sum(t^3 - t)/48 in the normal-approximation variance.

#include <vector>

#include "swdl/volume.hpp"

namespace swdl {

struct WilcoxonResult {
  double w = 0;               // rank sum of positive differences
  double z = 0;               // normal approximation
  double p = 0;               // two-tailed
  int n_effective = 0;        // pairs remaining after zero removal
  double tie_correction = 0;  // T
};

WilcoxonResult wilcoxon(const std::vector<double>& x, const std::vector<double>& y);

// Standard normal CDF (via erfc).
double normal_cdf(double z);

}  // namespace swdl
