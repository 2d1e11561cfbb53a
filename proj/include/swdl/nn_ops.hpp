#pragma once

// Differentiable operator set: 3D convolution / transposed convolution
// (im2col + GEMM), pointwise ops, channel softmax, cropping, and the pyramid
// and trilinear upsampling wrapped as nodes whose backward is the exact
// adjoint of the forward map.

#include <Eigen/Core>

#include "swdl/pyramid.hpp"
#include "swdl/tensor.hpp"

namespace swdl::nn {

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

inline int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

inline Shape3 conv_out_shape(const Shape3& in, int k, int stride, int pad) {
  return Shape3{conv_out_dim(in.z, k, stride, pad), conv_out_dim(in.y, k, stride, pad),
                conv_out_dim(in.x, k, stride, pad)};
}

// Reusable per-thread scratch for column buffers (contents undefined).
template <typename T>
T* scratch_buffer(std::size_t n) {
  thread_local std::vector<T> buf;
  if (buf.size() < n) buf.resize(n);
  return buf.data();
}

// Valid ow range for iw = ow*stride + off in [0, in_x).
inline std::pair<int, int> valid_run(int off, int stride, int in_x, int out_x) {
  const int lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
  const int hi = off >= in_x ? 0 : (in_x - off + stride - 1) / stride;
  return {std::min(lo, out_x), std::min(hi, out_x)};
}

// One sample: channel-major source [C][D][H][W] -> row-major columns [K][P]
// with K = C*k^3 and P = out voxels. Zero padding; stride-1 interior rows
// reduce to memcpy.
template <typename T>
void im2col(const T* src, int ch, const Shape3& in, int k, int stride, int pad,
            const Shape3& out, T* col) {
  const std::int64_t p_total = out.voxels();
  const std::int64_t in_hw = std::int64_t(in.y) * in.x;
  const std::int64_t out_hw = std::int64_t(out.y) * out.x;
  std::int64_t r = 0;
  for (int c = 0; c < ch; ++c) {
    const T* plane = src + std::int64_t(c) * in.voxels();
    for (int kd = 0; kd < k; ++kd)
      for (int kh = 0; kh < k; ++kh)
        for (int kw = 0; kw < k; ++kw, ++r) {
          T* dst = col + r * p_total;
          const int off = kw - pad;
          const auto [lo, hi] = valid_run(off, stride, in.x, out.x);
          for (int od = 0; od < out.z; ++od) {
            const int id = od * stride - pad + kd;
            T* drow = dst + od * out_hw;
            if (id < 0 || id >= in.z) {
              std::fill(drow, drow + out_hw, T(0));
              continue;
            }
            for (int oh = 0; oh < out.y; ++oh) {
              const int ih = oh * stride - pad + kh;
              T* seg = drow + std::int64_t(oh) * out.x;
              if (ih < 0 || ih >= in.y) {
                std::fill(seg, seg + out.x, T(0));
                continue;
              }
              const T* srow = plane + std::int64_t(id) * in_hw + std::int64_t(ih) * in.x + off;
              for (int ow = 0; ow < lo; ++ow) seg[ow] = T(0);
              if (stride == 1) {
                std::copy(srow + lo, srow + hi, seg + lo);
              } else {
                for (int ow = lo; ow < hi; ++ow) seg[ow] = srow[std::int64_t(ow) * stride];
              }
              for (int ow = hi; ow < out.x; ++ow) seg[ow] = T(0);
            }
          }
        }
  }
}

// Transpose of im2col: accumulates columns back into the source layout.
template <typename T>
void col2im_accum(const T* col, int ch, const Shape3& in, int k, int stride, int pad,
                  const Shape3& out, T* dst) {
  const std::int64_t p_total = out.voxels();
  const std::int64_t in_hw = std::int64_t(in.y) * in.x;
  const std::int64_t out_hw = std::int64_t(out.y) * out.x;
  std::int64_t r = 0;
  for (int c = 0; c < ch; ++c) {
    T* plane = dst + std::int64_t(c) * in.voxels();
    for (int kd = 0; kd < k; ++kd)
      for (int kh = 0; kh < k; ++kh)
        for (int kw = 0; kw < k; ++kw, ++r) {
          const T* scol = col + r * p_total;
          const int off = kw - pad;
          const auto [lo, hi] = valid_run(off, stride, in.x, out.x);
          for (int od = 0; od < out.z; ++od) {
            const int id = od * stride - pad + kd;
            if (id < 0 || id >= in.z) continue;
            const T* srow_base = scol + od * out_hw;
            for (int oh = 0; oh < out.y; ++oh) {
              const int ih = oh * stride - pad + kh;
              if (ih < 0 || ih >= in.y) continue;
              const T* seg = srow_base + std::int64_t(oh) * out.x;
              T* drow = plane + std::int64_t(id) * in_hw + std::int64_t(ih) * in.x + off;
              if (stride == 1) {
                for (int ow = lo; ow < hi; ++ow) drow[ow] += seg[ow];
              } else {
                for (int ow = lo; ow < hi; ++ow) drow[std::int64_t(ow) * stride] += seg[ow];
              }
            }
          }
        }
  }
}

template <typename T>
void check_finite_debug(const Tensor<T>& t, const char* op) {
#ifndef NDEBUG
  for (const T v : t.data())
    if (!std::isfinite(double(v))) throw std::runtime_error(std::string(op) + ": non-finite value");
#else
  (void)t;
  (void)op;
#endif
}

}  // namespace detail

// Cross-correlation with weight (Cout, Cin, k, k, k) and bias (1, Cout, 1, 1, 1).
template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride = 1,
                 int pad = 0) {
  const Shape5 xs = x.shape(), ws = w.shape();
  if (ws.d != ws.h || ws.h != ws.w)
    throw std::invalid_argument("conv3d: kernel must be cubic, got " + ws.str());
  if (xs.c != ws.c)
    throw std::invalid_argument("conv3d: channel mismatch " + xs.str() + " vs " + ws.str());
  if (b.shape().numel() != ws.n) throw std::invalid_argument("conv3d: bias size mismatch");
  const int k = int(ws.d);
  const Shape3 in = xs.spatial();
  const Shape3 out = detail::conv_out_shape(in, k, stride, pad);
  if (out.z < 1 || out.y < 1 || out.x < 1)
    throw std::invalid_argument("conv3d: empty output for input " + xs.str());

  const std::int64_t cin = xs.c, cout = ws.n, n = xs.n;
  const std::int64_t K = cin * k * k * k, P = out.voxels();
  // 1x1x1 stride-1 convolutions skip im2col: the input slice is the column
  // matrix already.
  const bool pointwise = k == 1 && stride == 1 && pad == 0;
  Tensor<T> y = Tensor<T>::make_op(Shape5{n, cout, out.z, out.y, out.x}, "conv3d", {x, w, b});

  {
    detail::CMapMat<T> W(w.data().data(), cout, K);
    for (std::int64_t i = 0; i < n; ++i) {
      const T* cols;
      if (pointwise) {
        cols = x.data().data() + i * cin * P;
      } else {
        T* col = detail::scratch_buffer<T>(size_t(K * P));
        detail::im2col(x.data().data() + i * cin * in.voxels(), int(cin), in, k, stride, pad,
                       out, col);
        cols = col;
      }
      detail::CMapMat<T> C(cols, K, P);
      detail::MapMat<T> Y(y.data().data() + i * cout * P, cout, P);
      Y.noalias() = W * C;
      for (std::int64_t co = 0; co < cout; ++co) Y.row(co).array() += b.data()[size_t(co)];
    }
  }

  auto xn = x.node(), wn = w.node(), bn = b.node(), yn = y.node();
  y.node()->backward_fn = [xn, wn, bn, yn, k, stride, pad, in, out, cin, cout, n, K, P,
                           pointwise]() {
    const bool need_x = xn->requires_grad, need_w = wn->requires_grad,
               need_b = bn->requires_grad;
    if (need_x) xn->ensure_grad();
    if (need_w) wn->ensure_grad();
    if (need_b) bn->ensure_grad();
    detail::CMapMat<T> W(wn->value.data(), cout, K);

    if (need_x) {
      for (std::int64_t i = 0; i < n; ++i) {
        detail::CMapMat<T> dY(yn->grad.data() + i * cout * P, cout, P);
        if (pointwise) {
          detail::MapMat<T> dX(xn->grad.data() + i * cin * P, cin, P);
          dX.noalias() += W.transpose() * dY;
        } else {
          T* colg = detail::scratch_buffer<T>(size_t(K * P));
          detail::MapMat<T> CG(colg, K, P);
          CG.noalias() = W.transpose() * dY;
          detail::col2im_accum(colg, int(cin), in, k, stride, pad, out,
                               xn->grad.data() + i * cin * in.voxels());
        }
      }
    }
    if (need_w || need_b) {
      detail::MapMat<T> dW(wn->grad.data(), cout, K);
      for (std::int64_t i = 0; i < n; ++i) {  // sequential: deterministic accumulation
        detail::CMapMat<T> dY(yn->grad.data() + i * cout * P, cout, P);
        if (need_w) {
          const T* cols;
          if (pointwise) {
            cols = xn->value.data() + i * cin * P;
          } else {
            T* col = detail::scratch_buffer<T>(size_t(K * P));
            detail::im2col(xn->value.data() + i * cin * in.voxels(), int(cin), in, k, stride,
                           pad, out, col);
            cols = col;
          }
          detail::CMapMat<T> C(cols, K, P);
          dW.noalias() += dY * C.transpose();
        }
        if (need_b)
          for (std::int64_t co = 0; co < cout; ++co) bn->grad[size_t(co)] += dY.row(co).sum();
      }
    }
  };
  detail::check_finite_debug(y, "conv3d");
  return y;
}

// Adjoint of a (k, stride, pad=0) conv3d; weight (Cin_x, Cout, k, k, k) shared
// with the paired conv. Output spatial dims are (n-1)*stride + k.
template <typename T>
Tensor<T> conv_transpose3d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                           int stride = 2) {
  const Shape5 xs = x.shape(), ws = w.shape();
  if (ws.d != ws.h || ws.h != ws.w)
    throw std::invalid_argument("conv_transpose3d: kernel must be cubic");
  if (xs.c != ws.n)
    throw std::invalid_argument("conv_transpose3d: channel mismatch " + xs.str() + " vs " +
                                ws.str());
  const int k = int(ws.d);
  const std::int64_t cx = xs.c, cy = ws.c, n = xs.n;
  if (b.shape().numel() != cy) throw std::invalid_argument("conv_transpose3d: bias size mismatch");
  const Shape3 small = xs.spatial();
  const Shape3 big{(small.z - 1) * stride + k, (small.y - 1) * stride + k,
                   (small.x - 1) * stride + k};
  const std::int64_t K = cy * k * k * k, P = small.voxels();

  Tensor<T> y =
      Tensor<T>::make_op(Shape5{n, cy, big.z, big.y, big.x}, "conv_transpose3d", {x, w, b});

  {
    detail::CMapMat<T> W(w.data().data(), cx, K);
    for (std::int64_t i = 0; i < n; ++i) {
      T* col = detail::scratch_buffer<T>(size_t(K * P));
      detail::CMapMat<T> X(x.data().data() + i * cx * P, cx, P);
      detail::MapMat<T> C(col, K, P);
      C.noalias() = W.transpose() * X;
      T* out_i = y.data().data() + i * cy * big.voxels();
      detail::col2im_accum(col, int(cy), big, k, stride, 0, small, out_i);
      for (std::int64_t c = 0; c < cy; ++c) {
        T* plane = out_i + c * big.voxels();
        const T bias = b.data()[size_t(c)];
        for (std::int64_t v = 0; v < big.voxels(); ++v) plane[v] += bias;
      }
    }
  }

  auto xn = x.node(), wn = w.node(), bn = b.node(), yn = y.node();
  y.node()->backward_fn = [xn, wn, bn, yn, k, stride, small, big, cx, cy, n, K, P]() {
    const bool need_x = xn->requires_grad, need_w = wn->requires_grad,
               need_b = bn->requires_grad;
    if (need_x) xn->ensure_grad();
    if (need_w) wn->ensure_grad();
    if (need_b) bn->ensure_grad();
    detail::CMapMat<T> W(wn->value.data(), cx, K);

    if (need_x) {
      for (std::int64_t i = 0; i < n; ++i) {
        T* col = detail::scratch_buffer<T>(size_t(K * P));
        detail::im2col(yn->grad.data() + i * cy * big.voxels(), int(cy), big, k, stride, 0, small,
                       col);
        detail::CMapMat<T> C(col, K, P);
        detail::MapMat<T> dX(xn->grad.data() + i * cx * P, cx, P);
        dX.noalias() += W * C;
      }
    }
    if (need_w || need_b) {
      detail::MapMat<T> dW(wn->grad.data(), cx, K);
      for (std::int64_t i = 0; i < n; ++i) {
        const T* dy_i = yn->grad.data() + i * cy * big.voxels();
        if (need_w) {
          T* col = detail::scratch_buffer<T>(size_t(K * P));
          detail::im2col(dy_i, int(cy), big, k, stride, 0, small, col);
          detail::CMapMat<T> C(col, K, P);
          detail::CMapMat<T> X(xn->value.data() + i * cx * P, cx, P);
          dW.noalias() += X * C.transpose();
        }
        if (need_b)
          for (std::int64_t c = 0; c < cy; ++c) {
            const T* plane = dy_i + c * big.voxels();
            T acc = T(0);
            for (std::int64_t v = 0; v < big.voxels(); ++v) acc += plane[v];
            bn->grad[size_t(c)] += acc;
          }
      }
    }
  };
  detail::check_finite_debug(y, "conv_transpose3d");
  return y;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y = Tensor<T>::make_op(x.shape(), "relu", {x});
  const auto& xv = x.data();
  auto& yv = y.data();
  for (size_t i = 0; i < xv.size(); ++i) yv[i] = xv[i] > T(0) ? xv[i] : T(0);
  auto xn = x.node(), yn = y.node();
  y.node()->backward_fn = [xn, yn]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (size_t i = 0; i < xn->value.size(); ++i)
      if (xn->value[i] > T(0)) xn->grad[i] += yn->grad[i];
  };
  return y;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (!(a.shape() == b.shape()))
    throw std::invalid_argument("add: shape mismatch " + a.shape().str() + " vs " +
                                b.shape().str());
  Tensor<T> y = Tensor<T>::make_op(a.shape(), "add", {a, b});
  for (size_t i = 0; i < y.data().size(); ++i) y.data()[i] = a.data()[i] + b.data()[i];
  auto an = a.node(), bn = b.node(), yn = y.node();
  y.node()->backward_fn = [an, bn, yn]() {
    for (auto* p : {an.get(), bn.get()}) {
      if (!p->requires_grad) continue;
      p->ensure_grad();
      for (size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += yn->grad[i];
    }
  };
  return y;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  if (!(a.shape() == b.shape())) throw std::invalid_argument("sub: shape mismatch");
  Tensor<T> y = Tensor<T>::make_op(a.shape(), "sub", {a, b});
  for (size_t i = 0; i < y.data().size(); ++i) y.data()[i] = a.data()[i] - b.data()[i];
  auto an = a.node(), bn = b.node(), yn = y.node();
  y.node()->backward_fn = [an, bn, yn]() {
    if (an->requires_grad) {
      an->ensure_grad();
      for (size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += yn->grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (size_t i = 0; i < bn->grad.size(); ++i) bn->grad[i] -= yn->grad[i];
    }
  };
  return y;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, double a) {
  Tensor<T> y = Tensor<T>::make_op(x.shape(), "scale", {x});
  for (size_t i = 0; i < y.data().size(); ++i) y.data()[i] = T(a) * x.data()[i];
  auto xn = x.node(), yn = y.node();
  y.node()->backward_fn = [xn, yn, a]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += T(a) * yn->grad[i];
  };
  return y;
}

// Softmax over the channel axis per (sample, voxel).
template <typename T>
Tensor<T> softmax_channel(const Tensor<T>& x) {
  const Shape5 s = x.shape();
  Tensor<T> y = Tensor<T>::make_op(s, "softmax_channel", {x});
  const std::int64_t vox = s.voxels();
  for (std::int64_t i = 0; i < s.n; ++i) {
    const T* xin = x.data().data() + i * s.c * vox;
    T* yout = y.data().data() + i * s.c * vox;
    for (std::int64_t v = 0; v < vox; ++v) {
      T mx = xin[v];
      for (std::int64_t c = 1; c < s.c; ++c) mx = std::max(mx, xin[c * vox + v]);
      T denom = T(0);
      for (std::int64_t c = 0; c < s.c; ++c) {
        const T e = std::exp(xin[c * vox + v] - mx);
        yout[c * vox + v] = e;
        denom += e;
      }
      for (std::int64_t c = 0; c < s.c; ++c) yout[c * vox + v] /= denom;
    }
  }
  auto xn = x.node(), yn = y.node();
  y.node()->backward_fn = [xn, yn, s]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    const std::int64_t vox = s.voxels();
    for (std::int64_t i = 0; i < s.n; ++i) {
      const T* p = yn->value.data() + i * s.c * vox;
      const T* dy = yn->grad.data() + i * s.c * vox;
      T* dx = xn->grad.data() + i * s.c * vox;
      for (std::int64_t v = 0; v < vox; ++v) {
        T inner = T(0);
        for (std::int64_t c = 0; c < s.c; ++c) inner += dy[c * vox + v] * p[c * vox + v];
        for (std::int64_t c = 0; c < s.c; ++c)
          dx[c * vox + v] += p[c * vox + v] * (dy[c * vox + v] - inner);
      }
    }
  };
  return y;
}

// Keeps the leading target.{z,y,x} voxels of each spatial axis; backward
// zero-pads back. Used to align stride-2 transposed convolutions with odd
// skip shapes.
template <typename T>
Tensor<T> crop3d(const Tensor<T>& x, Shape3 target) {
  const Shape5 s = x.shape();
  if (target.z > s.d || target.y > s.h || target.x > s.w)
    throw std::invalid_argument("crop3d: target larger than input");
  if (target.z == int(s.d) && target.y == int(s.h) && target.x == int(s.w)) return x;
  const Shape5 os{s.n, s.c, target.z, target.y, target.x};
  Tensor<T> y = Tensor<T>::make_op(os, "crop3d", {x});
  const std::int64_t nc = s.n * s.c;
  for (std::int64_t i = 0; i < nc; ++i)
    for (int z = 0; z < target.z; ++z)
      for (int yy = 0; yy < target.y; ++yy) {
        const T* src = x.data().data() + ((i * s.d + z) * s.h + yy) * s.w;
        T* dst = y.data().data() + ((i * os.d + z) * os.h + yy) * os.w;
        std::copy(src, src + target.x, dst);
      }
  auto xn = x.node(), yn = y.node();
  y.node()->backward_fn = [xn, yn, s, os, target]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    const std::int64_t nc = s.n * s.c;
    for (std::int64_t i = 0; i < nc; ++i)
      for (int z = 0; z < target.z; ++z)
        for (int yy = 0; yy < target.y; ++yy) {
          const T* src = yn->grad.data() + ((i * os.d + z) * os.h + yy) * os.w;
          T* dst = xn->grad.data() + ((i * s.d + z) * s.h + yy) * s.w;
          for (int xx = 0; xx < target.x; ++xx) dst[xx] += src[xx];
        }
  };
  return y;
}

// New leaf holding a copy of the values; gradients stop here.
template <typename T>
Tensor<T> detach(const Tensor<T>& x) {
  op_counter().bump("detach");
  return Tensor<T>::from_data(x.shape(), x.data(), false);
}

// Channel-wise trilinear resize to a target spatial shape.
template <typename T>
Tensor<T> trilinear_upsample_op(const Tensor<T>& x, Shape3 target) {
  const Shape5 s = x.shape();
  const Shape3 in = s.spatial();
  if (target.z < in.z || target.y < in.y || target.x < in.x)
    throw std::invalid_argument("trilinear_upsample: target smaller than source");
  const Shape5 os{s.n, s.c, target.z, target.y, target.x};
  Tensor<T> y = Tensor<T>::make_op(os, "trilinear_upsample", {x});
  const std::int64_t nc = s.n * s.c;
  const auto tables = swdl::detail::make_lerp_tables(in, target);
  for (std::int64_t i = 0; i < nc; ++i)
    trilinear_resize_into(x.data().data() + i * in.voxels(), in, target,
                          y.data().data() + i * target.voxels(), tables);
  auto xn = x.node(), yn = y.node();
  y.node()->backward_fn = [xn, yn, in, target, nc, tables]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (std::int64_t i = 0; i < nc; ++i)
      trilinear_resize_adjoint_into(yn->grad.data() + i * target.voxels(), target, in,
                                    xn->grad.data() + i * in.voxels(), tables);
  };
  return y;
}

// Channel-wise deep Laplacian pyramid upsampling; backward is the exact
// adjoint of the linear pipeline.
template <typename T>
Tensor<T> delpu_upsample_op(const Tensor<T>& x, Shape3 target, const DelpuConfig& cfg) {
  const Shape5 s = x.shape();
  const Shape3 in = s.spatial();
  const Shape5 os{s.n, s.c, target.z, target.y, target.x};
  Tensor<T> y = Tensor<T>::make_op(os, "delpu_upsample", {x});
  const std::int64_t nc = s.n * s.c;
  for (std::int64_t i = 0; i < nc; ++i) {
    Grid3<T> channel(in);
    std::copy_n(x.data().data() + i * in.voxels(), in.voxels(), channel.data.data());
    const Grid3<T> up = delpu_upsample_grid(channel, target, cfg);
    std::copy_n(up.data.data(), target.voxels(), y.data().data() + i * target.voxels());
  }
  auto xn = x.node(), yn = y.node();
  y.node()->backward_fn = [xn, yn, in, target, nc, cfg]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (std::int64_t i = 0; i < nc; ++i) {
      Grid3<T> gout(target);
      std::copy_n(yn->grad.data() + i * target.voxels(), target.voxels(), gout.data.data());
      const Grid3<T> gin = delpu_upsample_adjoint_grid(gout, in, cfg);
      T* dst = xn->grad.data() + i * in.voxels();
      for (std::int64_t v = 0; v < in.voxels(); ++v) dst[v] += gin.data[size_t(v)];
    }
  };
  return y;
}

// Weighted sum of scalar tensors: sum_i w_i * t_i.
template <typename T>
Tensor<T> affine_combine(const std::vector<Tensor<T>>& terms, const std::vector<double>& weights) {
  if (terms.empty() || terms.size() != weights.size())
    throw std::invalid_argument("affine_combine: length mismatch");
  for (const auto& t : terms)
    if (t.shape().numel() != 1) throw std::invalid_argument("affine_combine: scalar terms only");
  Tensor<T> y = Tensor<T>::make_op(Shape5{}, "affine_combine", terms);
  T acc = T(0);
  for (size_t i = 0; i < terms.size(); ++i) acc += T(weights[i]) * terms[i].data()[0];
  y.data()[0] = acc;
  std::vector<std::shared_ptr<Node<T>>> nodes;
  for (const auto& t : terms) nodes.push_back(t.node());
  auto yn = y.node();
  y.node()->backward_fn = [nodes, weights, yn]() {
    for (size_t i = 0; i < nodes.size(); ++i) {
      if (!nodes[i]->requires_grad) continue;
      nodes[i]->ensure_grad();
      nodes[i]->grad[0] += T(weights[i]) * yn->grad[0];
    }
  };
  return y;
}

}  // namespace swdl::nn
