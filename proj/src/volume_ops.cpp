#include "swdl/volume_ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace swdl {

Mask threshold_mask(const Volume& v, float lo, float hi) {
  if (lo > hi) throw std::invalid_argument("threshold_mask: lo > hi");
  Mask m(v.shape);
  for (size_t i = 0; i < v.data.size(); ++i)
    m.data[i] = (v.data[i] >= lo && v.data[i] <= hi) ? 1 : 0;
  return m;
}

float otsu_threshold(const Volume& v) {
  const auto [mn_it, mx_it] = std::minmax_element(v.data.begin(), v.data.end());
  const double mn = *mn_it, mx = *mx_it;
  if (mn == mx) throw std::invalid_argument("otsu_threshold: constant volume");

  constexpr int kBins = 256;
  std::array<std::int64_t, kBins> hist{};
  const double width = (mx - mn) / kBins;
  for (float x : v.data) {
    int b = int((double(x) - mn) / width);
    b = std::clamp(b, 0, kBins - 1);
    hist[size_t(b)]++;
  }

  const double total = double(v.data.size());
  double sum_all = 0;
  for (int b = 0; b < kBins; ++b) sum_all += double(b) * double(hist[size_t(b)]);

  // Exhaustive split search: class 0 holds bins <= k.
  double best_var = -1;
  int best_k = 0;
  double w0 = 0, sum0 = 0;
  for (int k = 0; k < kBins - 1; ++k) {
    w0 += double(hist[size_t(k)]);
    sum0 += double(k) * double(hist[size_t(k)]);
    const double w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
    const double var = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (var > best_var) {
      best_var = var;
      best_k = k;
    }
  }
  return float(mn + (best_k + 1) * width);
}

namespace {

std::vector<std::array<int, 3>> ball_offsets(int radius) {
  std::vector<std::array<int, 3>> offs;
  for (int dz = -radius; dz <= radius; ++dz)
    for (int dy = -radius; dy <= radius; ++dy)
      for (int dx = -radius; dx <= radius; ++dx)
        if (std::abs(dz) + std::abs(dy) + std::abs(dx) <= radius) offs.push_back({dz, dy, dx});
  return offs;
}

Mask dilate(const Mask& m, const std::vector<std::array<int, 3>>& offs) {
  Mask out(m.shape);
  const Shape3 s = m.shape;
  for (int z = 0; z < s.z; ++z)
    for (int y = 0; y < s.y; ++y)
      for (int x = 0; x < s.x; ++x) {
        if (!m.at(z, y, x)) continue;
        for (const auto& o : offs) {
          const int zz = z + o[0], yy = y + o[1], xx = x + o[2];
          if (zz >= 0 && zz < s.z && yy >= 0 && yy < s.y && xx >= 0 && xx < s.x)
            out.at(zz, yy, xx) = 1;
        }
      }
  return out;
}

Mask erode(const Mask& m, const std::vector<std::array<int, 3>>& offs) {
  Mask out(m.shape);
  const Shape3 s = m.shape;
  for (int z = 0; z < s.z; ++z)
    for (int y = 0; y < s.y; ++y)
      for (int x = 0; x < s.x; ++x) {
        bool keep = true;
        for (const auto& o : offs) {
          const int zz = z + o[0], yy = y + o[1], xx = x + o[2];
          if (zz < 0 || zz >= s.z || yy < 0 || yy >= s.y || xx < 0 || xx >= s.x ||
              !m.at(zz, yy, xx)) {
            keep = false;
            break;
          }
        }
        out.at(z, y, x) = keep ? 1 : 0;
      }
  return out;
}

}  // namespace

Mask morph(const Mask& m, MorphOp op, int radius) {
  if (radius < 1) throw std::invalid_argument("morph: radius must be >= 1");
  const auto offs = ball_offsets(radius);
  switch (op) {
    case MorphOp::Dilate:
      return dilate(m, offs);
    case MorphOp::Erode:
      return erode(m, offs);
    case MorphOp::Close:
      return erode(dilate(m, offs), offs);
  }
  throw std::invalid_argument("morph: unknown op");
}

ComponentLabels connected_components(const Mask& m) {
  const Shape3 s = m.shape;
  ComponentLabels out;
  out.labels = Grid3<std::int32_t>(s, 0);

  std::vector<std::int64_t> stack;
  std::int32_t next = 0;
  for (std::int64_t seed = 0; seed < s.voxels(); ++seed) {
    if (!m.data[size_t(seed)] || out.labels.data[size_t(seed)]) continue;
    ++next;
    std::int64_t size = 0;
    stack.push_back(seed);
    out.labels.data[size_t(seed)] = next;
    while (!stack.empty()) {
      const std::int64_t idx = stack.back();
      stack.pop_back();
      ++size;
      const int z = int(idx / (std::int64_t(s.y) * s.x));
      const int y = int((idx / s.x) % s.y);
      const int x = int(idx % s.x);
      constexpr int nb[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0},
                                {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
      for (const auto& d : nb) {
        const int zz = z + d[0], yy = y + d[1], xx = x + d[2];
        if (zz < 0 || zz >= s.z || yy < 0 || yy >= s.y || xx < 0 || xx >= s.x) continue;
        const std::int64_t j = flat_index(s, zz, yy, xx);
        if (m.data[size_t(j)] && !out.labels.data[size_t(j)]) {
          out.labels.data[size_t(j)] = next;
          stack.push_back(j);
        }
      }
    }
    out.sizes.push_back(size);
  }
  return out;
}

Mask largest_component(const Mask& m) {
  const auto cc = connected_components(m);
  if (cc.sizes.empty()) throw std::runtime_error("largest_component: empty mask");
  std::int32_t best = 1;
  for (std::int32_t i = 2; i <= std::int32_t(cc.sizes.size()); ++i)
    if (cc.sizes[size_t(i - 1)] > cc.sizes[size_t(best - 1)]) best = i;
  Mask out(m.shape);
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = (cc.labels.data[i] == best) ? 1 : 0;
  return out;
}

}  // namespace swdl
