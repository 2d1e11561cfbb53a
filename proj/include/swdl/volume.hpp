#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace swdl {

// Grid shape, z slowest / x fastest in memory.
struct Shape3 {
  int z = 0;
  int y = 0;
  int x = 0;

  std::int64_t voxels() const { return std::int64_t(z) * y * x; }
  bool operator==(const Shape3&) const = default;
  std::string str() const {
    return "(" + std::to_string(z) + "," + std::to_string(y) + "," + std::to_string(x) + ")";
  }
};

inline std::int64_t flat_index(const Shape3& s, int z, int y, int x) {
  return (std::int64_t(z) * s.y + y) * s.x + x;
}

// Physical voxel spacing in millimeters, same axis order as Shape3.
struct Spacing3 {
  double z = 1.0;
  double y = 1.0;
  double x = 1.0;
  bool operator==(const Spacing3&) const = default;
};

template <typename T>
struct Grid3 {
  Shape3 shape;
  std::vector<T> data;

  Grid3() = default;
  explicit Grid3(Shape3 s, T fill = T(0)) : shape(s), data(size_t(s.voxels()), fill) {}

  T& at(int z, int y, int x) { return data[size_t(flat_index(shape, z, y, x))]; }
  const T& at(int z, int y, int x) const { return data[size_t(flat_index(shape, z, y, x))]; }
};

struct Volume {
  Shape3 shape;
  Spacing3 spacing;
  std::vector<float> data;

  Volume() = default;
  Volume(Shape3 s, Spacing3 sp, float fill = 0.f)
      : shape(s), spacing(sp), data(size_t(s.voxels()), fill) {}

  float& at(int z, int y, int x) { return data[size_t(flat_index(shape, z, y, x))]; }
  const float& at(int z, int y, int x) const { return data[size_t(flat_index(shape, z, y, x))]; }

  void validate() const {
    if (shape.z < 1 || shape.y < 1 || shape.x < 1)
      throw std::invalid_argument("Volume: non-positive shape " + shape.str());
    if (std::int64_t(data.size()) != shape.voxels())
      throw std::invalid_argument("Volume: data length does not match shape");
    if (!(spacing.z > 0 && spacing.y > 0 && spacing.x > 0))
      throw std::invalid_argument("Volume: spacing must be positive");
    for (float v : data)
      if (!std::isfinite(v)) throw std::invalid_argument("Volume: non-finite value");
  }
};

struct Mask {
  Shape3 shape;
  std::vector<std::uint8_t> data;  // one byte per voxel, 0 or 1

  Mask() = default;
  explicit Mask(Shape3 s, std::uint8_t fill = 0) : shape(s), data(size_t(s.voxels()), fill) {}

  std::uint8_t& at(int z, int y, int x) { return data[size_t(flat_index(shape, z, y, x))]; }
  const std::uint8_t& at(int z, int y, int x) const {
    return data[size_t(flat_index(shape, z, y, x))];
  }
  std::int64_t count() const {
    std::int64_t n = 0;
    for (auto v : data) n += (v != 0);
    return n;
  }
};

// Odd, symmetric, normalized 1D kernel applied separably along each axis.
struct GaussianKernel {
  std::vector<double> taps;

  // [1,2,1]/4: the default smoothing kernel, short enough for 2-voxel feature maps.
  static GaussianKernel binomial3() { return GaussianKernel{{0.25, 0.5, 0.25}}; }

  static GaussianKernel normalized(std::vector<double> raw) {
    double sum = 0;
    for (double t : raw) sum += t;
    if (sum <= 0) throw std::invalid_argument("GaussianKernel: taps must have positive sum");
    for (double& t : raw) t /= sum;
    return GaussianKernel{std::move(raw)};
  }

  int radius() const { return int(taps.size() / 2); }

  void validate() const {
    if (taps.empty() || taps.size() % 2 == 0)
      throw std::invalid_argument("GaussianKernel: taps must have odd length");
    double sum = 0;
    for (double t : taps) {
      if (t < 0) throw std::invalid_argument("GaussianKernel: negative tap");
      sum += t;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("GaussianKernel: taps must sum to 1");
    for (size_t i = 0; i < taps.size(); ++i)
      if (taps[i] != taps[taps.size() - 1 - i])
        throw std::invalid_argument("GaussianKernel: taps must be symmetric");
  }
};

}  // namespace swdl
