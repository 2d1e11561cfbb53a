#pragma once

// Semi-supervised training loop: deterministic splits, lesion-biased patch
// sampling, the T-iteration difference-learning schedule with one SGD step
// per batch, checkpointing, loss logging, and sliding-window inference.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "swdl/losses.hpp"
#include "swdl/model.hpp"
#include "swdl/volume.hpp"

namespace swdl {

struct TrainConfig {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::array<int, 3> patch{16, 64, 64};  // (z, y, x)
  int labeled_per_batch = 2;
  int unlabeled_per_batch = 30;
  int max_steps = 2000;
  std::uint64_t seed = 1337;
  std::uint64_t split_seed = 367;
  double labeled_fraction = 0.02;
  double lesion_bias = 0.5;  // probability of centering a labeled crop on a lesion voxel
  double norm_lo = 0.0, norm_hi = 100.0;  // HU window mapped to [0, 1]
  int checkpoint_every = 100;
  nn::ModelConfig model;

  void validate() const {
    if (labeled_per_batch < 1)
      throw std::invalid_argument("TrainConfig: labeled_per_batch must be >= 1");
    if (unlabeled_per_batch < 0)
      throw std::invalid_argument("TrainConfig: unlabeled_per_batch must be >= 0");
    for (int d : patch)
      if (d < 8) throw std::invalid_argument("TrainConfig: patch dims must be >= 8");
    if (!(lr > 0) || !(momentum >= 0) || !(weight_decay >= 0))
      throw std::invalid_argument("TrainConfig: rates must be positive");
    if (!(norm_hi > norm_lo)) throw std::invalid_argument("TrainConfig: bad normalization window");
    model.validate();
  }
};

struct DatasetSplit {
  std::vector<std::string> labeled;
  std::vector<std::string> unlabeled;
  std::vector<std::string> test;
  std::uint64_t split_seed = 367;
};

// Seeded shuffle, last ceil(20%) of cases held out for test, first
// ceil(fraction * train) of the shuffled training list labeled.
DatasetSplit make_split(std::vector<std::string> case_ids, double labeled_fraction,
                        std::uint64_t seed = 367);

struct SegCase {
  std::string id;
  Volume volume;
  Mask label;
  std::vector<std::int64_t> fg_indices;  // flat indices of labeled foreground
};

class CaseStore {
 public:
  void add(SegCase c);
  static CaseStore from_manifest(const std::string& manifest_path);

  const SegCase& by_id(const std::string& id) const;
  std::vector<std::string> ids() const;
  size_t size() const { return cases_.size(); }

 private:
  std::vector<SegCase> cases_;
};

struct Batch {
  nn::Tensor<float> labeled_x;    // (Nl, 1, pz, py, px), normalized
  nn::LabelBatch labeled_y;
  nn::Tensor<float> unlabeled_x;  // (Nu, 1, pz, py, px); Nu may be 0
};

Batch sample_batch(const CaseStore& store, const DatasetSplit& split, const TrainConfig& cfg,
                   Rng& rng);

using Model = nn::SwdlModel<float>;

// One optimizer step over the full T-iteration schedule; losses at every
// iteration are averaged before the single backward pass.
nn::LossReport train_step(Model& model, const std::vector<nn::Parameter<float>*>& params,
                          const Batch& batch, const TrainConfig& cfg);

struct TrainResult {
  std::string final_checkpoint;
  std::string loss_log;
  std::vector<nn::LossReport> losses;
};

TrainResult train(const CaseStore& store, const DatasetSplit& split, const TrainConfig& cfg,
                  const std::string& out_dir, const std::string& resume_checkpoint = "");

struct InferenceResult {
  Mask mask;
  Grid3<float> probability;  // foreground probability per voxel
  Grid3<std::int32_t> coverage;  // tiles covering each voxel
};

// 50% overlapping tiles, probabilities averaged over covering tiles.
InferenceResult sliding_window_infer(Model& model, const Volume& volume, const TrainConfig& cfg);

// Intensity normalization used for every tensor fed to the model.
float normalize_intensity(float hu, const TrainConfig& cfg);

}  // namespace swdl
