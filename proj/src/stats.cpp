#include "swdl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace swdl {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

WilcoxonResult wilcoxon(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("wilcoxon: unequal sample lengths");

  std::vector<double> diff;
  for (size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    if (d != 0.0) diff.push_back(d);
  }
  const size_t n = diff.size();
  if (n == 0) throw std::invalid_argument("wilcoxon: degenerate sample (all differences zero)");

  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](size_t a, size_t b) { return std::abs(diff[a]) < std::abs(diff[b]); });

  // Average ranks within tie groups; accumulate the tie correction.
  std::vector<double> rank(n);
  double tie_corr = 0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && std::abs(diff[idx[j + 1]]) == std::abs(diff[idx[i]])) ++j;
    const double avg = (double(i + 1) + double(j + 1)) / 2.0;
    for (size_t k = i; k <= j; ++k) rank[idx[k]] = avg;
    const double t = double(j - i + 1);
    if (t > 1) tie_corr += (t * t * t - t) / 48.0;
    i = j + 1;
  }

  double w_pos = 0;
  for (size_t k = 0; k < n; ++k)
    if (diff[k] > 0) w_pos += rank[k];

  const double dn = double(n);
  const double mean = dn * (dn + 1) / 4.0;
  const double var = dn * (dn + 1) * (2 * dn + 1) / 24.0 - tie_corr;
  if (var <= 0) throw std::invalid_argument("wilcoxon: zero variance after tie correction");

  WilcoxonResult r;
  r.w = w_pos;
  r.n_effective = int(n);
  r.tie_correction = tie_corr;
  r.z = (w_pos - mean) / std::sqrt(var);
  r.p = 2.0 * (1.0 - normal_cdf(std::abs(r.z)));
  if (r.p > 1.0) r.p = 1.0;
  return r;
}

}  // namespace swdl
