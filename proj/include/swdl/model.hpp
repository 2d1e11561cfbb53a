#pragma once

// The SWDL network: shared encoder, DC decoder (learned transposed-conv
// upsampling), DelPU decoder (pyramid upsampling), deep-supervision heads,
// stratum-wise difference computation and encoder injection.
//
// Geometry for S strata with widths c[0..S-1] and resolutions R_1 (input)
// down to R_S: encoder stratum s runs two conv+relu blocks at R_s producing
// the skip feature h^s, then a bare stride-2 conv to c[s] at R_{s+1} whose
// output y^s is the next stratum's input (and the injection point). Each
// decoder runs stages k = S-1..1: upsample the deeper feature to R_k, add the
// 1x1x1-projected skip h^k, then two conv+relu blocks -> stage feature D_k of
// width c[k-1]. The stratum-s decoder feature shared by both paths is D_{s+1}
// (shape of y^s), the bottleneck h^S standing in at s = S-1; since the
// bottleneck is shared, its difference is identically zero and is never
// injected. Deep-supervision heads cover [D_1..D_{S-1}, h^S].

#include <map>
#include <optional>

#include "swdl/losses.hpp"
#include "swdl/nn_ops.hpp"

namespace swdl::nn {

struct ModelConfig {
  int strata = 5;
  std::vector<int> channels = {8, 16, 32, 64, 128};  // toy; full: 16..256
  int num_classes = 2;
  double mu = 1.5;
  int iteration_period = 3;  // T
  double xi = 1e-3;
  bool swap_decoder_losses = false;

  void validate() const {
    if (strata < 2) throw std::invalid_argument("ModelConfig: strata must be >= 2");
    if (int(channels.size()) != strata)
      throw std::invalid_argument("ModelConfig: channels length must equal strata");
    for (size_t i = 1; i < channels.size(); ++i)
      if (channels[i] <= channels[i - 1])
        throw std::invalid_argument("ModelConfig: channels must be strictly increasing");
    if (num_classes < 2) throw std::invalid_argument("ModelConfig: num_classes must be >= 2");
    if (iteration_period < 1) throw std::invalid_argument("ModelConfig: T must be >= 1");
    if (xi < 0) throw std::invalid_argument("ModelConfig: xi must be >= 0");
    if (!std::isfinite(mu)) throw std::invalid_argument("ModelConfig: mu must be finite");
  }
};

template <typename T>
struct EncoderFeatures {
  std::vector<Tensor<T>> skips;       // h^1..h^S at R_1..R_S
  std::vector<Tensor<T>> downsampled;  // y^1..y^{S-1} (inputs of strata 2..S)
};

template <typename T>
struct DecoderOutputs {
  std::vector<Tensor<T>> features;  // [D_1..D_{S-1}, bottleneck h^S]
  Tensor<T> logits;                 // full resolution, num_classes channels
};

template <typename T>
struct IterationOutputs {
  EncoderFeatures<T> encoder;
  DecoderOutputs<T> dc;
  DecoderOutputs<T> delpu;
  BatchOutputs<T> outputs;
  std::vector<Tensor<T>> deltas;  // detached per-stratum differences
};

// Injection map: encoder stratum index (2..S) -> detached difference tensor.
template <typename T>
using InjectionMap = std::map<int, Tensor<T>>;

template <typename T>
class SwdlModel {
 public:
  SwdlModel(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(seed);
    const int S = cfg_.strata;
    const auto& c = cfg_.channels;

    for (int s = 1; s <= S; ++s) {
      const int wch = c[size_t(s - 1)];
      const int in = s == 1 ? 1 : wch;
      enc_c1_.push_back(make_conv("enc.s" + std::to_string(s) + ".conv1", wch, in, 3, rng));
      enc_c2_.push_back(make_conv("enc.s" + std::to_string(s) + ".conv2", wch, wch, 3, rng));
      if (s < S)
        enc_down_.push_back(
            make_conv("enc.s" + std::to_string(s) + ".down", c[size_t(s)], wch, 3, rng));
    }
    for (int k = 1; k <= S - 1; ++k) {
      const int wch = c[size_t(k - 1)], deep = c[size_t(k)];
      const std::string dc = "dc.s" + std::to_string(k), dl = "delpu.s" + std::to_string(k);
      dc_up_.push_back(make_transpose(dc + ".up", deep, wch, 2, rng));
      dc_skip_.push_back(make_conv(dc + ".skip", wch, wch, 1, rng));
      dc_c1_.push_back(make_conv(dc + ".conv1", wch, wch, 3, rng));
      dc_c2_.push_back(make_conv(dc + ".conv2", wch, wch, 3, rng));
      delpu_chan_.push_back(make_conv(dl + ".chan", wch, deep, 1, rng));
      delpu_skip_.push_back(make_conv(dl + ".skip", wch, wch, 1, rng));
      delpu_c1_.push_back(make_conv(dl + ".conv1", wch, wch, 3, rng));
      delpu_c2_.push_back(make_conv(dl + ".conv2", wch, wch, 3, rng));
    }
    dc_final_ = make_conv("dc.final", cfg_.num_classes, c[0], 1, rng);
    delpu_final_ = make_conv("delpu.final", cfg_.num_classes, c[0], 1, rng);
    for (int s = 1; s <= S; ++s)
      ds_head_.push_back(
          make_conv("ds.s" + std::to_string(s), cfg_.num_classes, c[size_t(s - 1)], 1, rng));
  }

  const ModelConfig& config() const { return cfg_; }

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    auto push = [&out](std::vector<ConvParam>& group) {
      for (auto& p : group) {
        out.push_back(&p.w);
        out.push_back(&p.b);
      }
    };
    push(enc_c1_);
    push(enc_c2_);
    push(enc_down_);
    push(dc_up_);
    push(dc_skip_);
    push(dc_c1_);
    push(dc_c2_);
    push(delpu_chan_);
    push(delpu_skip_);
    push(delpu_c1_);
    push(delpu_c2_);
    push(ds_head_);
    out.push_back(&dc_final_.w);
    out.push_back(&dc_final_.b);
    out.push_back(&delpu_final_.w);
    out.push_back(&delpu_final_.b);
    return out;
  }

  // Encoder walk; stratum s > 1 consumes y^{s-1} + xi * delta when an
  // injection for s is present (xi = 0 short-circuits to the plain path so
  // the null case is bit-exact).
  EncoderFeatures<T> encoder_forward(const Tensor<T>& x, const InjectionMap<T>* injections,
                                     double xi) {
    op_counter().bump("model.encoder_forward");
    const int S = cfg_.strata;
    EncoderFeatures<T> f;
    Tensor<T> cur = x;
    for (int s = 1; s <= S; ++s) {
      if (s > 1 && injections && xi != 0.0) {
        const auto it = injections->find(s);
        if (it != injections->end()) {
          if (!(it->second.shape() == cur.shape()))
            throw std::runtime_error("encoder_forward: injection shape " +
                                     it->second.shape().str() + " does not match stratum " +
                                     std::to_string(s) + " input " + cur.shape().str());
          cur = add(cur, scale(it->second, xi));
        }
      }
      Tensor<T> a = relu(conv3d(cur, enc_c1_[size_t(s - 1)].w.tensor,
                                enc_c1_[size_t(s - 1)].b.tensor, 1, 1));
      a = relu(conv3d(a, enc_c2_[size_t(s - 1)].w.tensor, enc_c2_[size_t(s - 1)].b.tensor, 1, 1));
      f.skips.push_back(a);
      if (s < S) {
        cur = conv3d(a, enc_down_[size_t(s - 1)].w.tensor, enc_down_[size_t(s - 1)].b.tensor, 2,
                     1);
        f.downsampled.push_back(cur);
      }
    }
    return f;
  }

  DecoderOutputs<T> dc_decoder_forward(const EncoderFeatures<T>& enc) {
    op_counter().bump("model.dc_decoder");
    return decoder_forward(enc, /*use_pyramid=*/false);
  }

  DecoderOutputs<T> delpu_decoder_forward(const EncoderFeatures<T>& enc) {
    op_counter().bump("model.delpu_decoder");
    return decoder_forward(enc, /*use_pyramid=*/true);
  }

  // Per-stratum class-probability maps at full resolution, highest-resolution
  // feature first.
  std::vector<Tensor<T>> ds_heads(const DecoderOutputs<T>& dc) {
    op_counter().bump("model.ds_heads");
    const Shape3 full = dc.features.front().shape().spatial();
    std::vector<Tensor<T>> heads;
    for (size_t s = 0; s < dc.features.size(); ++s) {
      Tensor<T> logits =
          conv3d(dc.features[s], ds_head_[s].w.tensor, ds_head_[s].b.tensor, 1, 0);
      if (!(logits.shape().spatial() == full)) logits = trilinear_upsample_op(logits, full);
      heads.push_back(softmax_channel(logits));
    }
    return heads;
  }

  // Detached per-stratum differences Delta = y_DC - y_DelPU.
  static std::vector<Tensor<T>> compute_differences(const DecoderOutputs<T>& dc,
                                                    const DecoderOutputs<T>& delpu) {
    if (dc.features.size() != delpu.features.size())
      throw std::runtime_error("compute_differences: stratum count mismatch");
    std::vector<Tensor<T>> deltas;
    for (size_t i = 0; i < dc.features.size(); ++i) {
      if (!(dc.features[i].shape() == delpu.features[i].shape()))
        throw std::runtime_error("compute_differences: shape mismatch at stratum " +
                                 std::to_string(i + 1));
      deltas.push_back(detach(sub(dc.features[i], delpu.features[i])));
    }
    return deltas;
  }

  // Injection targets for the next iteration: deltas[k] (the difference of
  // stage D_{k+1}) feeds encoder stratum k+2, covering strata 2..S-1. The
  // deltas[0] entry (full-resolution stage) has no injection point and the
  // shared bottleneck would contribute exactly zero.
  static InjectionMap<T> injections_from_deltas(const std::vector<Tensor<T>>& deltas) {
    InjectionMap<T> inj;
    for (size_t k = 1; k + 1 < deltas.size(); ++k) inj[int(k) + 1] = deltas[k];
    return inj;
  }

  IterationOutputs<T> forward_train_iteration(const Tensor<T>& x, int p,
                                              const std::vector<Tensor<T>>* prev_deltas) {
    if (p < 1 || p > cfg_.iteration_period)
      throw std::invalid_argument("forward_train_iteration: p out of range");
    if ((p > 1) != (prev_deltas != nullptr))
      throw std::invalid_argument("forward_train_iteration: prev deltas required iff p > 1");

    IterationOutputs<T> it;
    if (p > 1 && cfg_.xi != 0.0) {
      const InjectionMap<T> inj = injections_from_deltas(*prev_deltas);
      it.encoder = encoder_forward(x, &inj, cfg_.xi);
    } else {
      it.encoder = encoder_forward(x, nullptr, 0.0);
    }
    it.dc = dc_decoder_forward(it.encoder);
    it.delpu = delpu_decoder_forward(it.encoder);
    it.outputs.dc_logits = it.dc.logits;
    it.outputs.delpu_logits = it.delpu.logits;
    it.outputs.dc_probs = softmax_channel(it.dc.logits);
    it.outputs.delpu_probs = softmax_channel(it.delpu.logits);
    it.outputs.ds_probs = ds_heads(it.dc);
    it.deltas = compute_differences(it.dc, it.delpu);
    return it;
  }

  // Inference contract: encoder (no injection) -> DC decoder -> softmax.
  // No pyramid ops, no DelPU layers, no differences.
  Tensor<T> infer(const Tensor<T>& x) {
    op_counter().bump("model.infer");
    EncoderFeatures<T> enc = encoder_forward(x, nullptr, 0.0);
    DecoderOutputs<T> dc = dc_decoder_forward(enc);
    return softmax_channel(dc.logits);
  }

 private:
  struct ConvParam {
    Parameter<T> w, b;
  };

  ConvParam make_conv(const std::string& name, int cout, int cin, int k, Rng& rng) {
    ConvParam p;
    p.w = Parameter<T>(name + ".weight", Tensor<T>::zeros(Shape5{cout, cin, k, k, k}));
    kaiming_uniform(p.w.tensor, std::int64_t(cin) * k * k * k, rng);
    p.b = Parameter<T>(name + ".bias", Tensor<T>::zeros(Shape5{1, cout, 1, 1, 1}));
    return p;
  }

  // Transposed-conv weight is stored as (C_deep, C_out, k, k, k): the adjoint
  // of a stride-2 conv from C_out to C_deep.
  ConvParam make_transpose(const std::string& name, int cdeep, int cout, int k, Rng& rng) {
    ConvParam p;
    p.w = Parameter<T>(name + ".weight", Tensor<T>::zeros(Shape5{cdeep, cout, k, k, k}));
    kaiming_uniform(p.w.tensor, std::int64_t(cdeep) * k * k * k, rng);
    p.b = Parameter<T>(name + ".bias", Tensor<T>::zeros(Shape5{1, cout, 1, 1, 1}));
    return p;
  }

  DecoderOutputs<T> decoder_forward(const EncoderFeatures<T>& enc, bool use_pyramid) {
    const int S = cfg_.strata;
    if (int(enc.skips.size()) != S)
      throw std::runtime_error("decoder_forward: encoder features missing");
    DecoderOutputs<T> out;
    out.features.assign(size_t(S), Tensor<T>{});
    out.features[size_t(S - 1)] = enc.skips[size_t(S - 1)];  // shared bottleneck

    Tensor<T> cur = enc.skips[size_t(S - 1)];
    for (int k = S - 1; k >= 1; --k) {
      const Shape3 target = enc.skips[size_t(k - 1)].shape().spatial();
      Tensor<T> up;
      if (use_pyramid) {
        op_counter().bump("model.delpu_stage");
        DelpuConfig pcfg;
        pcfg.mu = cfg_.mu;
        up = delpu_upsample_op(cur, target, pcfg);
        up = conv3d(up, delpu_chan_[size_t(k - 1)].w.tensor, delpu_chan_[size_t(k - 1)].b.tensor,
                    1, 0);
      } else {
        op_counter().bump("model.dc_stage");
        up = conv_transpose3d(cur, dc_up_[size_t(k - 1)].w.tensor,
                              dc_up_[size_t(k - 1)].b.tensor, 2);
        if (!(up.shape().spatial() == target)) up = crop3d(up, target);
      }
      const auto& skip_p = use_pyramid ? delpu_skip_[size_t(k - 1)] : dc_skip_[size_t(k - 1)];
      const auto& c1 = use_pyramid ? delpu_c1_[size_t(k - 1)] : dc_c1_[size_t(k - 1)];
      const auto& c2 = use_pyramid ? delpu_c2_[size_t(k - 1)] : dc_c2_[size_t(k - 1)];
      Tensor<T> skip = conv3d(enc.skips[size_t(k - 1)], skip_p.w.tensor, skip_p.b.tensor, 1, 0);
      Tensor<T> a = add(up, skip);
      a = relu(conv3d(a, c1.w.tensor, c1.b.tensor, 1, 1));
      a = relu(conv3d(a, c2.w.tensor, c2.b.tensor, 1, 1));
      out.features[size_t(k - 1)] = a;
      cur = a;
    }
    const auto& fin = use_pyramid ? delpu_final_ : dc_final_;
    out.logits = conv3d(cur, fin.w.tensor, fin.b.tensor, 1, 0);
    return out;
  }

  ModelConfig cfg_;
  std::vector<ConvParam> enc_c1_, enc_c2_, enc_down_;
  std::vector<ConvParam> dc_up_, dc_skip_, dc_c1_, dc_c2_;
  std::vector<ConvParam> delpu_chan_, delpu_skip_, delpu_c1_, delpu_c2_;
  std::vector<ConvParam> ds_head_;
  ConvParam dc_final_, delpu_final_;
};

}  // namespace swdl::nn
