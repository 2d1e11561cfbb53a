#pragma once

// Training objectives: soft Dice, cross-entropy, deep-supervision sum, MSE
// consistency between decoder outputs, and the combined supervised +
// unsupervised total.

#include "swdl/nn_ops.hpp"
#include "swdl/tensor.hpp"

namespace swdl::nn {

// Binary voxel labels for a batch, one byte per voxel, shape (N,1,D,H,W).
struct LabelBatch {
  Shape5 shape;
  std::vector<std::uint8_t> data;

  LabelBatch() = default;
  explicit LabelBatch(Shape5 s) : shape(s), data(size_t(s.numel()), 0) {
    if (s.c != 1) throw std::invalid_argument("LabelBatch: single channel expected");
  }
};

// Per-stratum deep-supervision weights, highest resolution first.
struct DsWeights {
  std::vector<double> omega{0.8, 0.6, 0.4, 0.2, 0.1};

  static DsWeights for_strata(int s) {
    DsWeights w;
    if (s < 1 || s > int(w.omega.size()))
      throw std::invalid_argument("DsWeights: no default for " + std::to_string(s) + " strata");
    w.omega.resize(size_t(s));
    return w;
  }
};

struct LossReport {
  double loss_dc = 0, loss_delpu = 0, loss_ds = 0, loss_sup = 0, loss_unsup = 0, total = 0;
};

// Soft Dice: mean over the batch of 1 - (2*sum(p*g)+eps)/(sum(p)+sum(g)+eps),
// evaluated on one probability channel.
template <typename T>
Tensor<T> dice_loss(const Tensor<T>& probs, const LabelBatch& labels, int fg_channel = 1,
                    double eps = 1e-5) {
  const Shape5 s = probs.shape();
  if (s.n != labels.shape.n || s.voxels() != labels.shape.voxels())
    throw std::invalid_argument("dice_loss: shape mismatch " + s.str() + " vs " +
                                labels.shape.str());
  if (fg_channel < 0 || fg_channel >= int(s.c))
    throw std::invalid_argument("dice_loss: bad channel");

  Tensor<T> y = Tensor<T>::make_op(Shape5{}, "dice_loss", {probs});
  const std::int64_t vox = s.voxels();
  std::vector<double> inter(size_t(s.n)), psum(size_t(s.n)), gsum(size_t(s.n));
  double acc = 0;
  for (std::int64_t i = 0; i < s.n; ++i) {
    const T* p = probs.data().data() + (i * s.c + fg_channel) * vox;
    const std::uint8_t* g = labels.data.data() + i * vox;
    double pi = 0, gi = 0, ii = 0;
    for (std::int64_t v = 0; v < vox; ++v) {
      pi += double(p[v]);
      gi += double(g[v]);
      ii += double(p[v]) * double(g[v]);
    }
    inter[size_t(i)] = ii;
    psum[size_t(i)] = pi;
    gsum[size_t(i)] = gi;
    acc += 1.0 - (2 * ii + eps) / (pi + gi + eps);
  }
  y.data()[0] = T(acc / double(s.n));

  auto pn = probs.node(), yn = y.node();
  // Labels are copied into the closure: backward may run after the caller's
  // LabelBatch is gone.
  auto lbl = std::make_shared<std::vector<std::uint8_t>>(labels.data);
  y.node()->backward_fn = [pn, yn, lbl, s, vox, fg_channel, eps, inter, psum, gsum]() {
    if (!pn->requires_grad) return;
    pn->ensure_grad();
    const double gy = double(yn->grad[0]) / double(s.n);
    for (std::int64_t i = 0; i < s.n; ++i) {
      const double A = 2 * inter[size_t(i)] + eps;
      const double B = psum[size_t(i)] + gsum[size_t(i)] + eps;
      const std::uint8_t* g = lbl->data() + i * vox;
      T* dp = pn->grad.data() + (i * s.c + fg_channel) * vox;
      // d/dp_v [1 - A/B] = (A - 2*g_v*B) / B^2
      for (std::int64_t v = 0; v < vox; ++v)
        dp[v] += T(gy * (A - 2.0 * double(g[v]) * B) / (B * B));
    }
  };
  return y;
}

// Mean over all voxels of -log softmax at the true class (stable log-sum-exp;
// the log argument never underflows).
template <typename T>
Tensor<T> ce_loss(const Tensor<T>& logits, const LabelBatch& labels) {
  const Shape5 s = logits.shape();
  if (s.n != labels.shape.n || s.voxels() != labels.shape.voxels())
    throw std::invalid_argument("ce_loss: shape mismatch");

  Tensor<T> y = Tensor<T>::make_op(Shape5{}, "ce_loss", {logits});
  const std::int64_t vox = s.voxels();
  const double denom = double(s.n * vox);
  double acc = 0;
  for (std::int64_t i = 0; i < s.n; ++i) {
    const T* z = logits.data().data() + i * s.c * vox;
    const std::uint8_t* g = labels.data.data() + i * vox;
    for (std::int64_t v = 0; v < vox; ++v) {
      double mx = double(z[v]);
      for (std::int64_t c = 1; c < s.c; ++c) mx = std::max(mx, double(z[c * vox + v]));
      double lse = 0;
      for (std::int64_t c = 0; c < s.c; ++c) lse += std::exp(double(z[c * vox + v]) - mx);
      lse = std::log(lse) + mx;
      acc += lse - double(z[std::int64_t(g[v]) * vox + v]);
    }
  }
  y.data()[0] = T(acc / denom);

  auto zn = logits.node(), yn = y.node();
  auto lbl = std::make_shared<std::vector<std::uint8_t>>(labels.data);
  y.node()->backward_fn = [zn, yn, lbl, s, vox, denom]() {
    if (!zn->requires_grad) return;
    zn->ensure_grad();
    const double gy = double(yn->grad[0]) / denom;
    for (std::int64_t i = 0; i < s.n; ++i) {
      const T* z = zn->value.data() + i * s.c * vox;
      T* dz = zn->grad.data() + i * s.c * vox;
      const std::uint8_t* g = lbl->data() + i * vox;
      for (std::int64_t v = 0; v < vox; ++v) {
        double mx = double(z[v]);
        for (std::int64_t c = 1; c < s.c; ++c) mx = std::max(mx, double(z[c * vox + v]));
        double lse = 0;
        for (std::int64_t c = 0; c < s.c; ++c) lse += std::exp(double(z[c * vox + v]) - mx);
        for (std::int64_t c = 0; c < s.c; ++c) {
          const double softmax = std::exp(double(z[c * vox + v]) - mx) / lse;
          dz[c * vox + v] += T(gy * (softmax - (std::int64_t(g[v]) == c ? 1.0 : 0.0)));
        }
      }
    }
  };
  return y;
}

// sum_s omega_s * dice_loss(head_s, labels).
template <typename T>
Tensor<T> ds_loss(const std::vector<Tensor<T>>& heads, const LabelBatch& labels,
                  const DsWeights& w) {
  if (heads.size() != w.omega.size())
    throw std::invalid_argument("ds_loss: heads/weights length mismatch");
  std::vector<Tensor<T>> terms;
  for (const auto& head : heads) terms.push_back(dice_loss(head, labels));
  return affine_combine(terms, w.omega);
}

// Mean squared difference over every element of the two probability maps.
template <typename T>
Tensor<T> mse_consistency(const Tensor<T>& a, const Tensor<T>& b) {
  if (!(a.shape() == b.shape())) throw std::invalid_argument("mse_consistency: shape mismatch");
  Tensor<T> y = Tensor<T>::make_op(Shape5{}, "mse_consistency", {a, b});
  const double denom = double(a.shape().numel());
  double acc = 0;
  for (size_t i = 0; i < a.data().size(); ++i) {
    const double d = double(a.data()[i]) - double(b.data()[i]);
    acc += d * d;
  }
  y.data()[0] = T(acc / denom);
  auto an = a.node(), bn = b.node(), yn = y.node();
  y.node()->backward_fn = [an, bn, yn, denom]() {
    const double gy = double(yn->grad[0]);
    if (an->requires_grad) an->ensure_grad();
    if (bn->requires_grad) bn->ensure_grad();
    for (size_t i = 0; i < an->value.size(); ++i) {
      const T d = T(2.0 * gy * (double(an->value[i]) - double(bn->value[i])) / denom);
      if (an->requires_grad) an->grad[i] += d;
      if (bn->requires_grad) bn->grad[i] -= d;
    }
  };
  return y;
}

// One forward pass worth of decoder outputs, as consumed by the losses.
template <typename T>
struct BatchOutputs {
  Tensor<T> dc_logits;
  Tensor<T> delpu_logits;
  Tensor<T> dc_probs;
  Tensor<T> delpu_probs;
  std::vector<Tensor<T>> ds_probs;
};

template <typename T>
struct TotalLoss {
  Tensor<T> value;
  LossReport report;
};

// Loss = Loss_DC + Loss_DelPU + Loss_DS on labeled data, plus MSE consistency
// on the unlabeled batch. Default assignment: Dice for the DC decoder, CE for
// the DelPU decoder; swap_decoder_losses selects the opposite pairing.
template <typename T>
TotalLoss<T> total_loss(const BatchOutputs<T>& labeled, const BatchOutputs<T>* unlabeled,
                        const LabelBatch& labels, const DsWeights& w,
                        bool swap_decoder_losses = false) {
  if (!labeled.dc_logits.defined() || labeled.dc_logits.shape().n < 1)
    throw std::invalid_argument("total_loss: at least one labeled sample required");

  Tensor<T> dc = swap_decoder_losses ? ce_loss(labeled.dc_logits, labels)
                                     : dice_loss(labeled.dc_probs, labels);
  Tensor<T> delpu = swap_decoder_losses ? dice_loss(labeled.delpu_probs, labels)
                                        : ce_loss(labeled.delpu_logits, labels);
  Tensor<T> ds = ds_loss(labeled.ds_probs, labels, w);

  std::vector<Tensor<T>> terms{dc, delpu, ds};
  std::vector<double> weights{1, 1, 1};
  double unsup_value = 0;
  if (unlabeled && unlabeled->dc_probs.defined() && unlabeled->dc_probs.shape().n > 0) {
    Tensor<T> unsup = mse_consistency(unlabeled->dc_probs, unlabeled->delpu_probs);
    unsup_value = double(unsup.data()[0]);
    terms.push_back(unsup);
    weights.push_back(1);
  }

  TotalLoss<T> out;
  out.value = affine_combine(terms, weights);
  out.report.loss_dc = double(dc.data()[0]);
  out.report.loss_delpu = double(delpu.data()[0]);
  out.report.loss_ds = double(ds.data()[0]);
  out.report.loss_sup = out.report.loss_dc + out.report.loss_delpu + out.report.loss_ds;
  out.report.loss_unsup = unsup_value;
  out.report.total = out.report.loss_sup + out.report.loss_unsup;
  return out;
}

}  // namespace swdl::nn
