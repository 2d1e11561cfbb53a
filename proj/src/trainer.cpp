#include "swdl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "swdl/checkpoint.hpp"
#include "swdl/metrics.hpp"
#include "swdl/nifti.hpp"
#include "swdl/phantom.hpp"

namespace swdl {

DatasetSplit make_split(std::vector<std::string> case_ids, double labeled_fraction,
                        std::uint64_t seed) {
  if (case_ids.size() < 5) throw std::invalid_argument("make_split: need at least 5 cases");
  Rng rng(seed);
  rng.shuffle(case_ids);

  const size_t n = case_ids.size();
  const size_t n_test = size_t(std::ceil(0.2 * double(n)));
  const size_t n_train = n - n_test;
  const size_t n_labeled = size_t(std::ceil(labeled_fraction * double(n_train)));
  if (n_labeled == 0)
    throw std::invalid_argument("make_split: labeled fraction yields zero labeled cases");
  if (n_labeled > n_train) throw std::invalid_argument("make_split: labeled fraction too large");

  DatasetSplit split;
  split.split_seed = seed;
  split.labeled.assign(case_ids.begin(), case_ids.begin() + std::ptrdiff_t(n_labeled));
  split.unlabeled.assign(case_ids.begin() + std::ptrdiff_t(n_labeled),
                         case_ids.begin() + std::ptrdiff_t(n_train));
  split.test.assign(case_ids.begin() + std::ptrdiff_t(n_train), case_ids.end());
  return split;
}

void CaseStore::add(SegCase c) {
  c.fg_indices.clear();
  for (std::int64_t i = 0; i < c.label.shape.voxels(); ++i)
    if (c.label.data[size_t(i)]) c.fg_indices.push_back(i);
  cases_.push_back(std::move(c));
}

CaseStore CaseStore::from_manifest(const std::string& manifest_path) {
  CaseStore store;
  for (const auto& entry : read_manifest(manifest_path)) {
    SegCase c;
    c.id = entry.id;
    c.volume = load_nifti(entry.image_path);
    c.label = load_mask_nifti(entry.label_path);
    if (!(c.label.shape == c.volume.shape))
      throw std::runtime_error("case " + c.id + ": label shape mismatch");
    store.add(std::move(c));
  }
  return store;
}

const SegCase& CaseStore::by_id(const std::string& id) const {
  for (const auto& c : cases_)
    if (c.id == id) return c;
  throw std::invalid_argument("CaseStore: unknown case " + id);
}

std::vector<std::string> CaseStore::ids() const {
  std::vector<std::string> out;
  for (const auto& c : cases_) out.push_back(c.id);
  return out;
}

float normalize_intensity(float hu, const TrainConfig& cfg) {
  const float lo = float(cfg.norm_lo), hi = float(cfg.norm_hi);
  const float v = (hu - lo) / (hi - lo);
  return std::clamp(v, 0.f, 1.f);
}

namespace {

struct CropOrigin {
  int z, y, x;
};

CropOrigin sample_origin(const SegCase& c, const TrainConfig& cfg, Rng& rng, bool lesion_biased) {
  const auto& p = cfg.patch;
  const Shape3 s = c.volume.shape;
  if (s.z < p[0] || s.y < p[1] || s.x < p[2])
    throw std::runtime_error("sample_batch: volume " + c.id + " " + s.str() +
                             " smaller than patch");
  auto clamp_origin = [](int v, int lim) { return std::clamp(v, 0, lim); };
  if (lesion_biased && !c.fg_indices.empty()) {
    const std::int64_t idx =
        c.fg_indices[rng.uniform_index(std::uint64_t(c.fg_indices.size()))];
    const int z = int(idx / (std::int64_t(s.y) * s.x));
    const int y = int((idx / s.x) % s.y);
    const int x = int(idx % s.x);
    return CropOrigin{clamp_origin(z - p[0] / 2, s.z - p[0]),
                      clamp_origin(y - p[1] / 2, s.y - p[1]),
                      clamp_origin(x - p[2] / 2, s.x - p[2])};
  }
  return CropOrigin{int(rng.uniform_index(std::uint64_t(s.z - p[0] + 1))),
                    int(rng.uniform_index(std::uint64_t(s.y - p[1] + 1))),
                    int(rng.uniform_index(std::uint64_t(s.x - p[2] + 1)))};
}

void copy_patch(const SegCase& c, const CropOrigin& o, const TrainConfig& cfg, float* x_out,
                std::uint8_t* y_out) {
  const auto& p = cfg.patch;
  std::int64_t idx = 0;
  for (int z = 0; z < p[0]; ++z)
    for (int y = 0; y < p[1]; ++y)
      for (int x = 0; x < p[2]; ++x, ++idx) {
        const float hu = c.volume.at(o.z + z, o.y + y, o.x + x);
        x_out[idx] = normalize_intensity(hu, cfg);
        if (y_out) y_out[idx] = c.label.at(o.z + z, o.y + y, o.x + x);
      }
}

nlohmann::json report_to_jsonl(std::uint64_t step, const nn::LossReport& r) {
  return nlohmann::json{{"step", step},           {"loss_dc", r.loss_dc},
                        {"loss_delpu", r.loss_delpu}, {"loss_ds", r.loss_ds},
                        {"loss_sup", r.loss_sup}, {"loss_unsup", r.loss_unsup},
                        {"total", r.total}};
}

}  // namespace

Batch sample_batch(const CaseStore& store, const DatasetSplit& split, const TrainConfig& cfg,
                   Rng& rng) {
  cfg.validate();
  if (split.labeled.empty()) throw std::invalid_argument("sample_batch: no labeled cases");
  if (cfg.unlabeled_per_batch > 0 && split.unlabeled.empty())
    throw std::invalid_argument("sample_batch: no unlabeled cases");

  const auto& p = cfg.patch;
  const nn::Shape5 xs{cfg.labeled_per_batch, 1, p[0], p[1], p[2]};
  Batch b;
  b.labeled_x = nn::Tensor<float>::zeros(xs);
  b.labeled_y = nn::LabelBatch(nn::Shape5{cfg.labeled_per_batch, 1, p[0], p[1], p[2]});
  const std::int64_t vox = xs.voxels();
  for (int i = 0; i < cfg.labeled_per_batch; ++i) {
    const auto& c = store.by_id(split.labeled[rng.uniform_index(split.labeled.size())]);
    const bool biased = rng.uniform() < cfg.lesion_bias;
    const CropOrigin o = sample_origin(c, cfg, rng, biased);
    copy_patch(c, o, cfg, b.labeled_x.data().data() + i * vox,
               b.labeled_y.data.data() + i * vox);
  }
  if (cfg.unlabeled_per_batch > 0) {
    b.unlabeled_x =
        nn::Tensor<float>::zeros(nn::Shape5{cfg.unlabeled_per_batch, 1, p[0], p[1], p[2]});
    for (int i = 0; i < cfg.unlabeled_per_batch; ++i) {
      const auto& c = store.by_id(split.unlabeled[rng.uniform_index(split.unlabeled.size())]);
      const CropOrigin o = sample_origin(c, cfg, rng, false);
      copy_patch(c, o, cfg, b.unlabeled_x.data().data() + i * vox, nullptr);
    }
  }
  return b;
}

nn::LossReport train_step(Model& model, const std::vector<nn::Parameter<float>*>& params,
                          const Batch& batch, const TrainConfig& cfg) {
  const int T = cfg.model.iteration_period;
  const nn::DsWeights w = nn::DsWeights::for_strata(cfg.model.strata);
  const bool has_unlabeled = batch.unlabeled_x.defined();

  std::vector<nn::Tensor<float>> per_iteration;
  nn::LossReport mean_report;
  std::vector<nn::Tensor<float>> labeled_deltas, unlabeled_deltas;

  for (int p = 1; p <= T; ++p) {
    auto labeled_it =
        model.forward_train_iteration(batch.labeled_x, p, p > 1 ? &labeled_deltas : nullptr);
    std::optional<nn::IterationOutputs<float>> unlabeled_it;
    if (has_unlabeled)
      unlabeled_it = model.forward_train_iteration(batch.unlabeled_x, p,
                                                   p > 1 ? &unlabeled_deltas : nullptr);

    auto loss = nn::total_loss<float>(labeled_it.outputs,
                                      unlabeled_it ? &unlabeled_it->outputs : nullptr,
                                      batch.labeled_y, w, cfg.model.swap_decoder_losses);
    per_iteration.push_back(loss.value);
    mean_report.loss_dc += loss.report.loss_dc / T;
    mean_report.loss_delpu += loss.report.loss_delpu / T;
    mean_report.loss_ds += loss.report.loss_ds / T;
    mean_report.loss_unsup += loss.report.loss_unsup / T;

    labeled_deltas = std::move(labeled_it.deltas);
    if (unlabeled_it) unlabeled_deltas = std::move(unlabeled_it->deltas);
  }
  mean_report.loss_sup = mean_report.loss_dc + mean_report.loss_delpu + mean_report.loss_ds;
  mean_report.total = mean_report.loss_sup + mean_report.loss_unsup;

  if (!std::isfinite(mean_report.total))
    throw std::runtime_error("train_step: non-finite loss " + std::to_string(mean_report.total));

  nn::Tensor<float> averaged =
      nn::affine_combine(per_iteration, std::vector<double>(size_t(T), 1.0 / T));
  nn::backward(averaged);
  nn::sgd_step(params, cfg.lr, cfg.momentum, cfg.weight_decay);
  return mean_report;
}

TrainResult train(const CaseStore& store, const DatasetSplit& split, const TrainConfig& cfg,
                  const std::string& out_dir, const std::string& resume_checkpoint) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);

  Model model(cfg.model, cfg.seed);
  auto params = model.parameters();

  // Separate stream for data sampling, derived from the master seed.
  std::uint64_t sm = cfg.seed ^ 0x5DEECE66DULL;
  Rng data_rng(splitmix64(sm));
  std::uint64_t start_step = 0;

  if (!resume_checkpoint.empty()) {
    const nn::TrainerState st = nn::load_checkpoint<float>(resume_checkpoint, params);
    data_rng.set_state(st.rng_state);
    start_step = st.step;
  }

  TrainResult result;
  result.loss_log = out_dir + "/loss_log.jsonl";
  std::ofstream log(result.loss_log,
                    start_step == 0 ? std::ios::trunc : std::ios::app);
  if (!log) throw std::runtime_error("train: cannot write loss log at " + result.loss_log);

  auto checkpoint_path = [&](std::uint64_t step) {
    return out_dir + "/ckpt_" + std::to_string(step) + ".bin";
  };
  auto save = [&](std::uint64_t step) {
    nn::TrainerState st;
    st.step = step;
    st.rng_state = data_rng.state();
    const std::string path = checkpoint_path(step);
    nn::save_checkpoint(path, params, st);
    return path;
  };

  std::string last = save(start_step);
  for (std::uint64_t step = start_step; step < std::uint64_t(cfg.max_steps); ++step) {
    const Batch batch = sample_batch(store, split, cfg, data_rng);
    nn::LossReport report;
    try {
      report = train_step(model, params, batch, cfg);
    } catch (const std::exception& e) {
      // Diagnostic state dump, then surface the failure with step context.
      write_text_file(out_dir + "/abort_step_" + std::to_string(step) + ".json",
                      nlohmann::json{{"step", step}, {"error", e.what()}}.dump(2));
      throw std::runtime_error("train: step " + std::to_string(step) + ": " + e.what());
    }
    log << report_to_jsonl(step, report).dump() << "\n";
    result.losses.push_back(report);
    const std::uint64_t done = step + 1;
    if (cfg.checkpoint_every > 0 && done % std::uint64_t(cfg.checkpoint_every) == 0 &&
        done < std::uint64_t(cfg.max_steps))
      last = save(done);
  }
  log.flush();
  result.final_checkpoint = save(std::uint64_t(cfg.max_steps));
  (void)last;
  return result;
}

InferenceResult sliding_window_infer(Model& model, const Volume& volume,
                                     const TrainConfig& cfg) {
  const auto& p = cfg.patch;
  const Shape3 s = volume.shape;

  auto positions = [](int n, int patch) {
    std::vector<int> out;
    if (n <= patch) {
      out.push_back(0);
      return out;
    }
    const int stride = std::max(patch / 2, 1);
    for (int pos = 0; pos + patch < n; pos += stride) out.push_back(pos);
    out.push_back(n - patch);  // final tile flush with the border
    return out;
  };
  const auto zs = positions(s.z, p[0]), ys = positions(s.y, p[1]), xs = positions(s.x, p[2]);

  Grid3<float> prob_sum(s, 0.f);
  Grid3<std::int32_t> coverage(s, 0);

  for (int z0 : zs)
    for (int y0 : ys)
      for (int x0 : xs) {
        nn::Tensor<float> x = nn::Tensor<float>::zeros(nn::Shape5{1, 1, p[0], p[1], p[2]});
        // Zero-padded crop (pad only arises when the volume is smaller than
        // the patch; padding is trimmed below via the coverage counter).
        for (int z = 0; z < p[0]; ++z)
          for (int y = 0; y < p[1]; ++y)
            for (int xx = 0; xx < p[2]; ++xx) {
              const int vz = z0 + z, vy = y0 + y, vx = x0 + xx;
              if (vz < s.z && vy < s.y && vx < s.x)
                x.data()[size_t((std::int64_t(z) * p[1] + y) * p[2] + xx)] =
                    normalize_intensity(volume.at(vz, vy, vx), cfg);
            }
        const nn::Tensor<float> probs = model.infer(x);
        const std::int64_t vox = probs.shape().voxels();
        const float* fg = probs.data().data() + vox;  // channel 1
        for (int z = 0; z < p[0]; ++z)
          for (int y = 0; y < p[1]; ++y)
            for (int xx = 0; xx < p[2]; ++xx) {
              const int vz = z0 + z, vy = y0 + y, vx = x0 + xx;
              if (vz >= s.z || vy >= s.y || vx >= s.x) continue;
              prob_sum.at(vz, vy, vx) += fg[(std::int64_t(z) * p[1] + y) * p[2] + xx];
              coverage.at(vz, vy, vx)++;
            }
      }

  InferenceResult out;
  out.probability = Grid3<float>(s);
  out.mask = Mask(s);
  for (std::int64_t i = 0; i < s.voxels(); ++i) {
    const float cov = float(coverage.data[size_t(i)]);
    const float pr = cov > 0 ? prob_sum.data[size_t(i)] / cov : 0.f;
    out.probability.data[size_t(i)] = pr;
    out.mask.data[size_t(i)] = pr > 0.5f ? 1 : 0;
  }
  out.coverage = std::move(coverage);
  return out;
}

}  // namespace swdl
