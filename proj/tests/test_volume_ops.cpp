#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <set>

#include "swdl/rng.hpp"
#include "swdl/volume_ops.hpp"

using namespace swdl;

namespace {

Mask random_mask(Shape3 s, Rng& rng, double p = 0.4) {
  Mask m(s);
  for (auto& v : m.data) v = rng.uniform() < p ? 1 : 0;
  return m;
}

bool in_bounds(const Shape3& s, int z, int y, int x) {
  return z >= 0 && z < s.z && y >= 0 && y < s.y && x >= 0 && x < s.x;
}

// Brute-force Minkowski dilation/erosion over the 6-connected ball.
Mask morph_oracle(const Mask& m, MorphOp op, int radius) {
  if (op == MorphOp::Close)
    return morph_oracle(morph_oracle(m, MorphOp::Dilate, radius), MorphOp::Erode, radius);
  Mask out(m.shape);
  for (int z = 0; z < m.shape.z; ++z)
    for (int y = 0; y < m.shape.y; ++y)
      for (int x = 0; x < m.shape.x; ++x) {
        bool any = false, all = true;
        for (int dz = -radius; dz <= radius; ++dz)
          for (int dy = -radius; dy <= radius; ++dy)
            for (int dx = -radius; dx <= radius; ++dx) {
              if (std::abs(dz) + std::abs(dy) + std::abs(dx) > radius) continue;
              const bool v = in_bounds(m.shape, z + dz, y + dy, x + dx)
                                 ? m.at(z + dz, y + dy, x + dx) != 0
                                 : false;
              any = any || v;
              all = all && v;
            }
        out.at(z, y, x) = (op == MorphOp::Dilate) ? any : all;
      }
  return out;
}

// BFS flood-fill partition oracle; returns canonical component-id per voxel
// keyed by the smallest flat index in the component.
std::vector<std::int64_t> flood_oracle(const Mask& m) {
  std::vector<std::int64_t> comp(size_t(m.shape.voxels()), -1);
  for (std::int64_t seed = 0; seed < m.shape.voxels(); ++seed) {
    if (!m.data[size_t(seed)] || comp[size_t(seed)] >= 0) continue;
    std::queue<std::int64_t> q;
    q.push(seed);
    comp[size_t(seed)] = seed;
    while (!q.empty()) {
      const std::int64_t idx = q.front();
      q.pop();
      const int z = int(idx / (std::int64_t(m.shape.y) * m.shape.x));
      const int y = int((idx / m.shape.x) % m.shape.y);
      const int x = int(idx % m.shape.x);
      constexpr int nb[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0},
                                {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
      for (const auto& d : nb) {
        if (!in_bounds(m.shape, z + d[0], y + d[1], x + d[2])) continue;
        const std::int64_t j = flat_index(m.shape, z + d[0], y + d[1], x + d[2]);
        if (m.data[size_t(j)] && comp[size_t(j)] < 0) {
          comp[size_t(j)] = seed;
          q.push(j);
        }
      }
    }
  }
  return comp;
}

}  // namespace

TEST_CASE("threshold_mask basic windows") {
  Volume v(Shape3{2, 2, 2}, Spacing3{}, 30.f);
  CHECK(threshold_mask(v, 20, 40).count() == 8);
  Volume w(Shape3{2, 2, 2}, Spacing3{}, 100.f);
  CHECK(threshold_mask(w, 20, 40).count() == 0);
  CHECK_THROWS_AS(threshold_mask(v, 50, 40), std::invalid_argument);
}

TEST_CASE("threshold_mask equals per-voxel predicate") {
  Rng rng(1);
  Volume v(Shape3{5, 6, 7}, Spacing3{});
  for (auto& x : v.data) x = float(rng.uniform(-50, 150));
  const auto m = threshold_mask(v, 20, 40);
  for (size_t i = 0; i < v.data.size(); ++i)
    CHECK((m.data[i] != 0) == (v.data[i] >= 20 && v.data[i] <= 40));
}

TEST_CASE("otsu separates a bimodal volume") {
  Volume v(Shape3{2, 2, 2}, Spacing3{});
  for (size_t i = 0; i < 8; ++i) v.data[i] = i < 4 ? 0.f : 100.f;
  const float t = otsu_threshold(v);
  CHECK(t > 0.f);
  CHECK(t < 100.f);

  Volume c(Shape3{2, 2, 2}, Spacing3{}, 5.f);
  CHECK_THROWS_AS(otsu_threshold(c), std::invalid_argument);
}

TEST_CASE("otsu matches exhaustive bin search oracle") {
  Rng rng(99);
  Volume v(Shape3{8, 8, 8}, Spacing3{});
  for (auto& x : v.data)
    x = float(rng.uniform() < 0.5 ? rng.normal(20, 4) : rng.normal(80, 6));

  // Independent exhaustive search over the same 256-bin histogram definition.
  const auto [mn_it, mx_it] = std::minmax_element(v.data.begin(), v.data.end());
  const double mn = *mn_it, mx = *mx_it, width = (mx - mn) / 256.0;
  std::array<std::int64_t, 256> hist{};
  for (float x : v.data)
    hist[size_t(std::clamp(int((double(x) - mn) / width), 0, 255))]++;
  double best = -1;
  int best_k = 0;
  for (int k = 0; k < 255; ++k) {
    double w0 = 0, s0 = 0, w1 = 0, s1 = 0;
    for (int b = 0; b <= k; ++b) w0 += double(hist[size_t(b)]), s0 += double(b) * double(hist[size_t(b)]);
    for (int b = k + 1; b < 256; ++b) w1 += double(hist[size_t(b)]), s1 += double(b) * double(hist[size_t(b)]);
    if (w0 == 0 || w1 == 0) continue;
    const double d = s0 / w0 - s1 / w1;
    const double var = w0 * w1 * d * d;
    if (var > best) best = var, best_k = k;
  }
  CHECK(otsu_threshold(v) == float(mn + (best_k + 1) * width));
}

TEST_CASE("morph structuring element and boundary handling") {
  Mask m(Shape3{5, 5, 5});
  m.at(2, 2, 2) = 1;
  const auto d = morph(m, MorphOp::Dilate, 1);
  CHECK(d.count() == 7);  // 3x3x3 cross

  Mask full(Shape3{4, 4, 4}, 1);
  const auto e = morph(full, MorphOp::Erode, 1);
  for (int z = 0; z < 4; ++z)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) {
        const bool interior = z > 0 && z < 3 && y > 0 && y < 3 && x > 0 && x < 3;
        CHECK((e.at(z, y, x) != 0) == interior);
      }
}

TEST_CASE("morph matches brute-force set morphology") {
  Rng rng(17);
  for (int trial = 0; trial < 6; ++trial) {
    const auto m = random_mask(Shape3{8, 8, 8}, rng);
    for (auto op : {MorphOp::Dilate, MorphOp::Erode, MorphOp::Close}) {
      const auto a = morph(m, op, 1);
      const auto b = morph_oracle(m, op, 1);
      CHECK(a.data == b.data);
    }
  }
}

TEST_CASE("morphology duality and close idempotence") {
  Rng rng(29);
  for (int trial = 0; trial < 6; ++trial) {
    const auto m = random_mask(Shape3{7, 6, 8}, rng, 0.3);
    const auto er = morph(m, MorphOp::Erode, 1);
    const auto di = morph(m, MorphOp::Dilate, 1);
    for (size_t i = 0; i < m.data.size(); ++i) {
      if (er.data[i]) CHECK(m.data[i]);
      if (m.data[i]) CHECK(di.data[i]);
    }
    const auto c1 = morph(m, MorphOp::Close, 1);
    const auto c2 = morph(c1, MorphOp::Close, 1);
    CHECK(c1.data == c2.data);
  }
}

TEST_CASE("connected_components basics") {
  Mask m(Shape3{3, 3, 3});
  m.at(0, 0, 0) = 1;
  m.at(2, 2, 2) = 1;
  const auto cc = connected_components(m);
  CHECK(cc.sizes == std::vector<std::int64_t>{1, 1});

  Mask empty(Shape3{3, 3, 3});
  CHECK_THROWS_AS(largest_component(empty), std::runtime_error);
}

TEST_CASE("connected_components partition equals flood-fill oracle") {
  Rng rng(31);
  for (int trial = 0; trial < 6; ++trial) {
    const auto m = random_mask(Shape3{8, 8, 8}, rng, 0.35);
    const auto cc = connected_components(m);
    const auto ref = flood_oracle(m);
    // Same partition: labels agree pairwise within a sample of voxel pairs.
    for (std::int64_t i = 0; i < m.shape.voxels(); ++i) {
      CHECK((cc.labels.data[size_t(i)] != 0) == (ref[size_t(i)] >= 0));
    }
    std::set<std::pair<std::int64_t, std::int32_t>> pairs;
    for (std::int64_t i = 0; i < m.shape.voxels(); ++i)
      if (m.data[size_t(i)]) pairs.insert({ref[size_t(i)], cc.labels.data[size_t(i)]});
    // Bijection between oracle components and labels.
    std::set<std::int64_t> lhs;
    std::set<std::int32_t> rhs;
    for (const auto& p : pairs) lhs.insert(p.first), rhs.insert(p.second);
    CHECK(pairs.size() == lhs.size());
    CHECK(pairs.size() == rhs.size());
    CHECK(rhs.size() == cc.sizes.size());
  }
}

TEST_CASE("largest_component picks max size with smallest-label ties") {
  Mask m(Shape3{1, 1, 7});
  m.at(0, 0, 0) = 1;  // component 1: size 2
  m.at(0, 0, 1) = 1;
  m.at(0, 0, 3) = 1;  // component 2: size 2 (tie -> label 1 wins)
  m.at(0, 0, 4) = 1;
  m.at(0, 0, 6) = 1;  // component 3: size 1
  const auto big = largest_component(m);
  CHECK(big.count() == 2);
  CHECK(big.at(0, 0, 0) == 1);
  CHECK(big.at(0, 0, 1) == 1);
}
