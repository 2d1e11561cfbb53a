#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "swdl/rng.hpp"
#include "swdl/stats.hpp"

using namespace swdl;

namespace {

// Independent reference: ranks computed by counting strictly-smaller values
// plus half the ties, never by sorting indices.
WilcoxonResult wilcoxon_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> d;
  for (size_t i = 0; i < x.size(); ++i)
    if (x[i] != y[i]) d.push_back(x[i] - y[i]);
  const size_t n = d.size();

  double w_pos = 0, tie = 0;
  std::vector<double> abs_d(n);
  for (size_t i = 0; i < n; ++i) abs_d[i] = std::abs(d[i]);
  for (size_t i = 0; i < n; ++i) {
    size_t smaller = 0, equal = 0;
    for (size_t j = 0; j < n; ++j) {
      smaller += abs_d[j] < abs_d[i];
      equal += abs_d[j] == abs_d[i];
    }
    const double rank = double(smaller) + (double(equal) + 1.0) / 2.0;
    if (d[i] > 0) w_pos += rank;
  }
  // Tie groups via unique values.
  std::vector<double> uniq = abs_d;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  for (double v : uniq) {
    const double t = double(std::count(abs_d.begin(), abs_d.end(), v));
    if (t > 1) tie += (t * t * t - t) / 48.0;
  }
  const double dn = double(n);
  WilcoxonResult r;
  r.w = w_pos;
  r.n_effective = int(n);
  r.tie_correction = tie;
  r.z = (w_pos - dn * (dn + 1) / 4.0) / std::sqrt(dn * (dn + 1) * (2 * dn + 1) / 24.0 - tie);
  r.p = 2.0 * (1.0 - normal_cdf(std::abs(r.z)));
  return r;
}

struct FrozenCase {
  std::vector<double> x, y;
  double w, z, p, tie;
  int n;
};

// Generated offline with scipy.stats.wilcoxon (zero_method='wilcox',
// correction=False, mode='approx'); Z recovered from the positive-rank sum.
const std::vector<FrozenCase> kScipyCases = {
    {{1.3, 1.2, -0.8, 5.1, 0.3, 1.8, -6.0, 0.3, -0.0, 1.3, -2.4},
     {1.8, 0.2, -0.3, 5.6, -0.2, 2.8, -7.0, -0.2, -1.0, -0.2, -1.9},
     45.0, 1.0881025282686674, 0.27654984772490576, 4.875, 11},
    {{1.5, 1.4, 2.7, 1.5, 1.7, -1.5},
     {2.0, 2.4, 1.7, 2.0, 1.2, -2.0},
     11.0, 0.10783277320343841, 0.91412834520142, 1.25, 6},
    {{-2.5, -2.1, -2.1, 1.3, -0.6, -1.0, -2.1, 0.5, 0.9, 2.3, -0.9, 0.4, 0.8},
     {-4.0, -3.1, -1.6, 1.8, -0.1, -2.5, -2.6, 1.0, -0.6, 1.3, -2.4, -1.1, -0.7},
     79.0, 2.3814931852799957, 0.017242609796220387, 6.875, 13},
    {{-2.7, 0.6, 2.7, 1.7, 3.2, -3.4, -1.0, 1.4, 0.1, -1.9, 0.2},
     {-2.2, -0.4, 2.2, 2.2, 2.2, -3.9, -0.5, 0.9, 0.6, -1.4, -0.8},
     40.0, 0.6347264748233893, 0.5256068236385525, 4.875, 11},
    {{-2.0, 0.9, 0.9, -1.2, -0.1, 1.1, 3.7, 3.7, 1.2},
     {-1.5, 0.4, -0.1, -0.7, 0.4, 0.6, 2.7, 3.7, 1.2},
     20.5, 1.1209395952539898, 0.2623135752307828, 1.375, 7},
    {{0.8, -0.4, 1.1, 3.8, -2.6, 1.6, -1.2, 1.2},
     {0.3, 0.1, 1.1, 4.3, -4.1, 1.1, -1.7, 1.7},
     17.5, 0.6324555320336759, 0.5270892568655381, 4.375, 7},
    {{-1.4, -0.9, -2.7, -1.9, -3.7, -0.6, 1.0},
     {-0.4, -0.4, -3.2, -1.9, -4.7, -1.1, 2.0},
     10.0, -0.10540925533894598, 0.9160510722818964, 0.25, 6},
    {{-0.9, 0.3, 4.1, -0.9, 0.6, -1.1},
     {0.1, 0.8, 4.6, -0.4, -0.4, -2.6},
     10.5, 0.0, 1.0, 0.625, 6},
};

}  // namespace

TEST_CASE("worked tie example: W = 11.5, T = 0.125") {
  // Differences [2, -1, 3, -2, 4].
  const std::vector<double> x{3, 1, 7, 2, 9};
  const std::vector<double> y{1, 2, 4, 4, 5};
  const auto r = wilcoxon(x, y);
  CHECK(r.w == 11.5);
  CHECK(r.tie_correction == 0.125);
  CHECK(r.n_effective == 5);
  CHECK(r.z == doctest::Approx(1.0836567383657543).epsilon(1e-12));
  CHECK(r.p == doctest::Approx(0.2785170238295782).epsilon(1e-12));
}

TEST_CASE("all differences zero is a degenerate sample") {
  const std::vector<double> x{1, 2, 3};
  CHECK_THROWS_AS(wilcoxon(x, x), std::invalid_argument);
  CHECK_THROWS_AS(wilcoxon({1, 2}, {1, 2, 3}), std::invalid_argument);
}

TEST_CASE("x = y + c gives the maximal rank sum") {
  std::vector<double> x, y;
  for (int i = 0; i < 10; ++i) {
    y.push_back(i * 1.7);
    x.push_back(i * 1.7 + 0.5 + 0.01 * i);  // distinct positive differences
  }
  const auto r = wilcoxon(x, y);
  CHECK(r.w == 55.0);
  CHECK(r.tie_correction == 0.0);
}

TEST_CASE("matches the frozen scipy reference table") {
  for (const auto& c : kScipyCases) {
    const auto r = wilcoxon(c.x, c.y);
    CHECK(r.w == doctest::Approx(c.w).epsilon(1e-12));
    CHECK(r.z == doctest::Approx(c.z).epsilon(1e-9));
    CHECK(r.p == doctest::Approx(c.p).epsilon(1e-9));
    CHECK(r.tie_correction == doctest::Approx(c.tie).epsilon(1e-12));
    CHECK(r.n_effective == c.n);
  }
}

TEST_CASE("matches the counting-rank oracle on random samples") {
  Rng rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = rng.uniform_int(5, 30);
    std::vector<double> x, y;
    for (int i = 0; i < n; ++i) {
      const double base = std::round(rng.uniform(-4, 4) * 2) / 2.0;  // forces ties
      const double shift = std::round(rng.uniform(-2, 3) * 2) / 2.0;  // and zeros
      x.push_back(base + shift);
      y.push_back(base);
    }
    bool degenerate = true;
    for (int i = 0; i < n; ++i) degenerate = degenerate && x[size_t(i)] == y[size_t(i)];
    if (degenerate) continue;
    const auto a = wilcoxon(x, y);
    const auto b = wilcoxon_oracle(x, y);
    CHECK(a.w == doctest::Approx(b.w).epsilon(1e-12));
    CHECK(std::abs(a.z - b.z) <= 1e-9);
    CHECK(std::abs(a.p - b.p) <= 1e-9);
    CHECK(a.tie_correction == doctest::Approx(b.tie_correction).epsilon(1e-12));
  }
}

TEST_CASE("invariances: pair permutation and sign flip") {
  Rng rng(7);
  std::vector<double> x, y;
  for (int i = 0; i < 12; ++i) {
    x.push_back(rng.uniform(-3, 3));
    y.push_back(rng.uniform(-3, 3));
  }
  const auto base = wilcoxon(x, y);

  std::vector<size_t> perm(x.size());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(perm);
  std::vector<double> xp, yp;
  for (size_t i : perm) {
    xp.push_back(x[i]);
    yp.push_back(y[i]);
  }
  const auto permuted = wilcoxon(xp, yp);
  CHECK(permuted.w == doctest::Approx(base.w).epsilon(1e-12));
  CHECK(permuted.z == doctest::Approx(base.z).epsilon(1e-12));
  CHECK(permuted.p == doctest::Approx(base.p).epsilon(1e-12));

  // Negating all differences maps W to n(n+1)/2 - W and flips Z's sign.
  const auto flipped = wilcoxon(y, x);
  const double n = base.n_effective;
  CHECK(flipped.w == doctest::Approx(n * (n + 1) / 2 - base.w).epsilon(1e-12));
  CHECK(flipped.z == doctest::Approx(-base.z).epsilon(1e-12));
  CHECK(flipped.p == doctest::Approx(base.p).epsilon(1e-12));
}
