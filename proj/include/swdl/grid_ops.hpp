#pragma once

// Deterministic 3D grid kernels shared by preprocessing and the pyramid:
// separable Gaussian smoothing (replicate padding), trilinear resampling with
// half-pixel-center mapping, and physical-coordinate volume resampling.
// Every operator here is linear; the *_adjoint variants implement the exact
// transpose, required by the differentiable pyramid wrapper.

#include <algorithm>
#include <cmath>

#include "swdl/volume.hpp"

namespace swdl {

namespace detail {

// One separable pass along a single axis with edge-clamp padding.
// axis: 0=z, 1=y, 2=x.
template <typename T>
void smooth_axis(const T* in, const Shape3& s, int axis, const std::vector<double>& taps,
                 T* out) {
  const int n[3] = {s.z, s.y, s.x};
  const std::int64_t stride[3] = {std::int64_t(s.y) * s.x, s.x, 1};
  const int len = n[axis];
  const std::int64_t st = stride[axis];
  const int r = int(taps.size() / 2);

  const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
  for (int i1 = 0; i1 < n[a1]; ++i1) {
    for (int i2 = 0; i2 < n[a2]; ++i2) {
      const std::int64_t base = i1 * stride[a1] + i2 * stride[a2];
      for (int i = 0; i < len; ++i) {
        double acc = 0;
        for (int j = -r; j <= r; ++j) {
          const int src = std::clamp(i + j, 0, len - 1);
          acc += taps[size_t(j + r)] * double(in[base + src * st]);
        }
        out[base + i * st] = T(acc);
      }
    }
  }
}

// Transpose of smooth_axis: scatters each output's tap weights back into the
// clamped source positions.
template <typename T>
void smooth_axis_adjoint(const T* grad_out, const Shape3& s, int axis,
                         const std::vector<double>& taps, T* grad_in) {
  const int n[3] = {s.z, s.y, s.x};
  const std::int64_t stride[3] = {std::int64_t(s.y) * s.x, s.x, 1};
  const int len = n[axis];
  const std::int64_t st = stride[axis];
  const int r = int(taps.size() / 2);

  std::fill(grad_in, grad_in + s.voxels(), T(0));
  const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
  for (int i1 = 0; i1 < n[a1]; ++i1) {
    for (int i2 = 0; i2 < n[a2]; ++i2) {
      const std::int64_t base = i1 * stride[a1] + i2 * stride[a2];
      for (int i = 0; i < len; ++i) {
        const double g = double(grad_out[base + i * st]);
        for (int j = -r; j <= r; ++j) {
          const int src = std::clamp(i + j, 0, len - 1);
          grad_in[base + src * st] += T(taps[size_t(j + r)] * g);
        }
      }
    }
  }
}

// Per-axis interpolation table for the half-pixel-center mapping
// src = (i_out + 0.5) * (n_in / n_out) - 0.5, clamped to [0, n_in - 1].
struct LerpAxis {
  std::vector<int> i0, i1;
  std::vector<double> w1;  // weight of i1; weight of i0 is 1 - w1
};

inline LerpAxis make_lerp_axis(int n_in, int n_out) {
  LerpAxis ax;
  ax.i0.resize(size_t(n_out));
  ax.i1.resize(size_t(n_out));
  ax.w1.resize(size_t(n_out));
  const double scale = double(n_in) / double(n_out);
  for (int i = 0; i < n_out; ++i) {
    double src = (i + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, double(n_in - 1));
    const int lo = std::min(int(std::floor(src)), n_in - 1);
    const int hi = std::min(lo + 1, n_in - 1);
    ax.i0[size_t(i)] = lo;
    ax.i1[size_t(i)] = hi;
    ax.w1[size_t(i)] = src - double(lo);
  }
  return ax;
}

}  // namespace detail

// Separable convolution with replicate padding; output shape equals input shape.
template <typename T>
void gaussian_smooth_into(const T* in, const Shape3& s, const GaussianKernel& k, T* out,
                          std::vector<T>& scratch) {
  k.validate();
  scratch.resize(size_t(s.voxels()));
  detail::smooth_axis(in, s, 0, k.taps, out);
  detail::smooth_axis(out, s, 1, k.taps, scratch.data());
  detail::smooth_axis(scratch.data(), s, 2, k.taps, out);
}

template <typename T>
Grid3<T> gaussian_smooth(const Grid3<T>& v, const GaussianKernel& k) {
  Grid3<T> out(v.shape);
  std::vector<T> scratch;
  gaussian_smooth_into(v.data.data(), v.shape, k, out.data.data(), scratch);
  return out;
}

// Exact transpose of gaussian_smooth (passes applied in reverse order).
template <typename T>
void gaussian_smooth_adjoint_into(const T* grad_out, const Shape3& s, const GaussianKernel& k,
                                  T* grad_in, std::vector<T>& scratch) {
  scratch.resize(size_t(s.voxels()));
  detail::smooth_axis_adjoint(grad_out, s, 2, k.taps, grad_in);
  detail::smooth_axis_adjoint(grad_in, s, 1, k.taps, scratch.data());
  detail::smooth_axis_adjoint(scratch.data(), s, 0, k.taps, grad_in);
}

template <typename T>
Grid3<T> gaussian_smooth_adjoint(const Grid3<T>& grad_out, const GaussianKernel& k) {
  Grid3<T> out(grad_out.shape);
  std::vector<T> scratch;
  gaussian_smooth_adjoint_into(grad_out.data.data(), grad_out.shape, k, out.data.data(), scratch);
  return out;
}

namespace detail {

struct LerpTables {
  LerpAxis z, y, x;
};

inline LerpTables make_lerp_tables(const Shape3& si, const Shape3& so) {
  return LerpTables{make_lerp_axis(si.z, so.z), make_lerp_axis(si.y, so.y),
                    make_lerp_axis(si.x, so.x)};
}

}  // namespace detail

// Trilinear resampling to an arbitrary shape, 8-neighbor weighted average.
// The tables overload lets callers hoist the per-axis setup out of channel
// loops.
template <typename T>
void trilinear_resize_into(const T* in, const Shape3& si, const Shape3& so, T* out,
                           const detail::LerpTables& t) {
  const auto& az = t.z;
  const auto& ay = t.y;
  const auto& ax = t.x;
  const std::int64_t syx = std::int64_t(si.y) * si.x;
  std::int64_t o = 0;
  for (int z = 0; z < so.z; ++z) {
    const std::int64_t z0 = az.i0[size_t(z)] * syx, z1 = az.i1[size_t(z)] * syx;
    const double wz = az.w1[size_t(z)];
    for (int y = 0; y < so.y; ++y) {
      const std::int64_t y0 = std::int64_t(ay.i0[size_t(y)]) * si.x;
      const std::int64_t y1 = std::int64_t(ay.i1[size_t(y)]) * si.x;
      const double wy = ay.w1[size_t(y)];
      for (int x = 0; x < so.x; ++x, ++o) {
        const int x0 = ax.i0[size_t(x)], x1 = ax.i1[size_t(x)];
        const double wx = ax.w1[size_t(x)];
        const double c00 = double(in[z0 + y0 + x0]) * (1 - wx) + double(in[z0 + y0 + x1]) * wx;
        const double c01 = double(in[z0 + y1 + x0]) * (1 - wx) + double(in[z0 + y1 + x1]) * wx;
        const double c10 = double(in[z1 + y0 + x0]) * (1 - wx) + double(in[z1 + y0 + x1]) * wx;
        const double c11 = double(in[z1 + y1 + x0]) * (1 - wx) + double(in[z1 + y1 + x1]) * wx;
        const double c0 = c00 * (1 - wy) + c01 * wy;
        const double c1 = c10 * (1 - wy) + c11 * wy;
        out[o] = T(c0 * (1 - wz) + c1 * wz);
      }
    }
  }
}

template <typename T>
void trilinear_resize_into(const T* in, const Shape3& si, const Shape3& so, T* out) {
  trilinear_resize_into(in, si, so, out, detail::make_lerp_tables(si, so));
}

// Transpose of trilinear_resize_into: scatters the 8 interpolation weights.
// Accumulates into grad_in (caller zeroes it).
template <typename T>
void trilinear_resize_adjoint_into(const T* grad_out, const Shape3& so, const Shape3& si,
                                   T* grad_in, const detail::LerpTables& t) {
  const auto& az = t.z;
  const auto& ay = t.y;
  const auto& ax = t.x;
  const std::int64_t syx = std::int64_t(si.y) * si.x;
  std::int64_t o = 0;
  for (int z = 0; z < so.z; ++z) {
    const std::int64_t z0 = az.i0[size_t(z)] * syx, z1 = az.i1[size_t(z)] * syx;
    const double wz = az.w1[size_t(z)];
    for (int y = 0; y < so.y; ++y) {
      const std::int64_t y0 = std::int64_t(ay.i0[size_t(y)]) * si.x;
      const std::int64_t y1 = std::int64_t(ay.i1[size_t(y)]) * si.x;
      const double wy = ay.w1[size_t(y)];
      for (int x = 0; x < so.x; ++x, ++o) {
        const int x0 = ax.i0[size_t(x)], x1 = ax.i1[size_t(x)];
        const double wx = ax.w1[size_t(x)];
        const double g = double(grad_out[o]);
        grad_in[z0 + y0 + x0] += T(g * (1 - wz) * (1 - wy) * (1 - wx));
        grad_in[z0 + y0 + x1] += T(g * (1 - wz) * (1 - wy) * wx);
        grad_in[z0 + y1 + x0] += T(g * (1 - wz) * wy * (1 - wx));
        grad_in[z0 + y1 + x1] += T(g * (1 - wz) * wy * wx);
        grad_in[z1 + y0 + x0] += T(g * wz * (1 - wy) * (1 - wx));
        grad_in[z1 + y0 + x1] += T(g * wz * (1 - wy) * wx);
        grad_in[z1 + y1 + x0] += T(g * wz * wy * (1 - wx));
        grad_in[z1 + y1 + x1] += T(g * wz * wy * wx);
      }
    }
  }
}

template <typename T>
void trilinear_resize_adjoint_into(const T* grad_out, const Shape3& so, const Shape3& si,
                                   T* grad_in) {
  trilinear_resize_adjoint_into(grad_out, so, si, grad_in, detail::make_lerp_tables(si, so));
}

inline Shape3 downsample_shape(const Shape3& s) {
  return Shape3{(s.z + 1) / 2, (s.y + 1) / 2, (s.x + 1) / 2};
}

template <typename T>
Grid3<T> trilinear_resize(const Grid3<T>& v, Shape3 target) {
  if (target.z < 1 || target.y < 1 || target.x < 1)
    throw std::invalid_argument("trilinear_resize: non-positive target shape");
  Grid3<T> out(target);
  trilinear_resize_into(v.data.data(), v.shape, target, out.data.data());
  return out;
}

template <typename T>
Grid3<T> trilinear_downsample(const Grid3<T>& v) {
  return trilinear_resize(v, downsample_shape(v.shape));
}

template <typename T>
Grid3<T> trilinear_upsample(const Grid3<T>& v, Shape3 target) {
  if (target.z < v.shape.z || target.y < v.shape.y || target.x < v.shape.x)
    throw std::invalid_argument("trilinear_upsample: target " + target.str() +
                                " smaller than source " + v.shape.str());
  return trilinear_resize(v, target);
}

// Resample a Volume onto a new physical spacing. Output shape per axis is
// round(n_in * s_in / s_new), at least 1; interpolation happens at the voxel
// centers expressed in millimeters.
inline Volume resample_to_spacing(const Volume& v, Spacing3 new_spacing) {
  v.validate();
  if (!(new_spacing.z > 0 && new_spacing.y > 0 && new_spacing.x > 0))
    throw std::invalid_argument("resample_to_spacing: spacing must be positive");

  auto out_dim = [](int n, double s_in, double s_new) {
    const int n_out = int(std::llround(double(n) * s_in / s_new));
    return std::max(n_out, 1);
  };
  const Shape3 so{out_dim(v.shape.z, v.spacing.z, new_spacing.z),
                  out_dim(v.shape.y, v.spacing.y, new_spacing.y),
                  out_dim(v.shape.x, v.spacing.x, new_spacing.x)};

  Volume out(so, new_spacing);
  // Physical center of output voxel i is (i + 0.5) * s_new; the matching
  // continuous source index is center / s_in - 0.5, clamped.
  auto axis_map = [](int n_in, double s_in, int n_out, double s_new) {
    detail::LerpAxis ax;
    ax.i0.resize(size_t(n_out));
    ax.i1.resize(size_t(n_out));
    ax.w1.resize(size_t(n_out));
    for (int i = 0; i < n_out; ++i) {
      double src = ((i + 0.5) * s_new) / s_in - 0.5;
      src = std::clamp(src, 0.0, double(n_in - 1));
      const int lo = std::min(int(std::floor(src)), n_in - 1);
      ax.i0[size_t(i)] = lo;
      ax.i1[size_t(i)] = std::min(lo + 1, n_in - 1);
      ax.w1[size_t(i)] = src - double(lo);
    }
    return ax;
  };
  const auto az = axis_map(v.shape.z, v.spacing.z, so.z, new_spacing.z);
  const auto ay = axis_map(v.shape.y, v.spacing.y, so.y, new_spacing.y);
  const auto ax = axis_map(v.shape.x, v.spacing.x, so.x, new_spacing.x);

  std::int64_t o = 0;
  for (int z = 0; z < so.z; ++z)
    for (int y = 0; y < so.y; ++y)
      for (int x = 0; x < so.x; ++x, ++o) {
        const double wz = az.w1[size_t(z)], wy = ay.w1[size_t(y)], wx = ax.w1[size_t(x)];
        double acc = 0;
        for (int dz = 0; dz < 2; ++dz)
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const int iz = dz ? az.i1[size_t(z)] : az.i0[size_t(z)];
              const int iy = dy ? ay.i1[size_t(y)] : ay.i0[size_t(y)];
              const int ix = dx ? ax.i1[size_t(x)] : ax.i0[size_t(x)];
              const double w = (dz ? wz : 1 - wz) * (dy ? wy : 1 - wy) * (dx ? wx : 1 - wx);
              acc += w * double(v.at(iz, iy, ix));
            }
        out.data[size_t(o)] = float(acc);
      }
  return out;
}

}  // namespace swdl
