// swdl: command line entry point for the full pipeline.
//
//   synth         generate a synthetic phantom dataset (NIfTI pairs + manifest)
//   preprocess    resample / skull-strip / ROI-extract volumes
//   train         semi-supervised training on a dataset manifest
//   infer         sliding-window inference over a case list
//   evaluate      per-case metrics + summary report (JSON/CSV)
//   stats         Wilcoxon signed-rank test between two run CSVs
//   pyramid-demo  run DelPU upsampling on one volume, dump y and L_d levels
//
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <chrono>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "swdl/checkpoint.hpp"
#include "swdl/metrics.hpp"
#include "swdl/nifti.hpp"
#include "swdl/phantom.hpp"
#include "swdl/preprocess.hpp"
#include "swdl/pyramid.hpp"
#include "swdl/run_config.hpp"
#include "swdl/stats.hpp"
#include "swdl/trainer.hpp"

namespace {

using namespace swdl;
namespace fs = std::filesystem;

std::string default_run_dir(std::uint64_t seed) {
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now).count();
  return "runs/" + std::to_string(secs) + "-seed" + std::to_string(seed);
}

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
};

RunConfig resolve_config(const CommonOpts& opts, const std::function<void(RunConfig&)>& apply) {
  RunConfig cfg;
  if (!opts.config_path.empty()) cfg = load_config_file(opts.config_path);
  apply(cfg);
  return cfg;
}

DatasetSplit split_for(const CaseStore& store, const TrainConfig& cfg) {
  return make_split(store.ids(), cfg.labeled_fraction, cfg.split_seed);
}

int run_synth(const CommonOpts& opts, const RunConfig& cfg, int cases) {
  write_resolved_config(cfg, opts.out_dir);
  const auto ids = gen_dataset(cases, cfg.phantom, cfg.train.seed, opts.out_dir);
  std::cout << "wrote " << ids.size() << " cases to " << opts.out_dir << "\n";
  return 0;
}

int run_preprocess(const CommonOpts& opts, const RunConfig& cfg,
                   const std::vector<std::string>& inputs) {
  write_resolved_config(cfg, opts.out_dir);
  for (const auto& in : inputs) {
    const Volume v = load_nifti(in);
    const PreprocessedCase pc = preprocess_case(v, cfg.preprocess);
    const std::string stem = fs::path(in).stem().string();
    save_nifti(pc.volume, opts.out_dir + "/" + stem + "_stripped.nii");
    save_mask_nifti(pc.brain_mask, pc.volume.spacing, opts.out_dir + "/" + stem + "_brain.nii");
    save_mask_nifti(pc.roi, pc.volume.spacing, opts.out_dir + "/" + stem + "_roi.nii");
    write_text_file(opts.out_dir + "/" + stem + "_provenance.json",
                    provenance_json(pc, cfg.preprocess));
    std::cout << stem << ": brain " << pc.brain_mask.count() << " vox, roi " << pc.roi.count()
              << " vox\n";
  }
  return 0;
}

int run_train(const CommonOpts& opts, const RunConfig& cfg, const std::string& manifest,
              const std::string& resume) {
  write_resolved_config(cfg, opts.out_dir);
  const CaseStore store = CaseStore::from_manifest(manifest);
  const DatasetSplit split = split_for(store, cfg.train);
  std::cout << "split: " << split.labeled.size() << " labeled / " << split.unlabeled.size()
            << " unlabeled / " << split.test.size() << " test\n";
  const TrainResult r = train(store, split, cfg.train, opts.out_dir, resume);
  std::cout << "final checkpoint: " << r.final_checkpoint << "\n";
  if (!r.losses.empty())
    std::cout << "final total loss: " << r.losses.back().total << "\n";
  return 0;
}

int run_infer(const CommonOpts& opts, const RunConfig& cfg, const std::string& manifest,
              const std::string& checkpoint, const std::string& subset) {
  write_resolved_config(cfg, opts.out_dir);
  const CaseStore store = CaseStore::from_manifest(manifest);
  std::vector<std::string> ids;
  if (subset == "all") {
    ids = store.ids();
  } else {
    const DatasetSplit split = split_for(store, cfg.train);
    if (subset == "test")
      ids = split.test;
    else if (subset == "labeled")
      ids = split.labeled;
    else if (subset == "unlabeled")
      ids = split.unlabeled;
    else
      throw CLI::ValidationError("--subset must be one of test/labeled/unlabeled/all");
  }

  Model model(cfg.train.model, cfg.train.seed);
  auto params = model.parameters();
  nn::load_checkpoint<float>(checkpoint, params);

  for (const auto& id : ids) {
    const auto& c = store.by_id(id);
    const InferenceResult r = sliding_window_infer(model, c.volume, cfg.train);
    save_mask_nifti(r.mask, c.volume.spacing, opts.out_dir + "/" + id + "_pred.nii");
    Volume prob(c.volume.shape, c.volume.spacing);
    prob.data.assign(r.probability.data.begin(), r.probability.data.end());
    save_nifti(prob, opts.out_dir + "/" + id + "_prob.nii");
    std::cout << id << ": " << r.mask.count() << " foreground voxels\n";
  }
  return 0;
}

int run_evaluate(const CommonOpts& opts, const RunConfig& cfg, const std::string& manifest,
                 const std::string& pred_dir) {
  write_resolved_config(cfg, opts.out_dir);
  const CaseStore store = CaseStore::from_manifest(manifest);
  SurfaceDistanceOptions sd;
  sd.use_spacing = cfg.eval_use_spacing;
  std::vector<CaseMetrics> rows;
  for (const auto& id : store.ids()) {
    const std::string pred_path = pred_dir + "/" + id + "_pred.nii";
    if (!fs::exists(pred_path)) continue;
    const auto& c = store.by_id(id);
    sd.spacing = c.volume.spacing;
    rows.push_back(evaluate_case(load_mask_nifti(pred_path), c.label, id, sd));
  }
  if (rows.empty()) throw std::runtime_error("evaluate: no predictions found in " + pred_dir);
  const MetricsReport report = evaluate_run(rows);
  write_text_file(opts.out_dir + "/report.json", report_to_json(report));
  write_text_file(opts.out_dir + "/report.csv", report_to_csv(report));
  std::cout << "dice mean " << report.dice.mean << " [" << report.dice.ci_lo << ","
            << report.dice.ci_hi << "] over " << report.dice.n << " cases\n";
  return 0;
}

int run_stats(const std::string& csv_a, const std::string& csv_b, const std::string& metric) {
  const MetricsReport a = report_from_csv(read_text_file(csv_a));
  const MetricsReport b = report_from_csv(read_text_file(csv_b));
  std::map<std::string, const CaseMetrics*> by_id;
  for (const auto& c : b.cases) by_id[c.id] = &c;

  auto pick = [&metric](const CaseMetrics& c) -> std::optional<double> {
    if (metric == "dice") return c.dice;
    if (metric == "acc") return c.acc;
    if (metric == "jac") return c.jac;
    if (metric == "pre") return c.pre;
    if (metric == "hd95") return c.hd95;
    if (metric == "asd") return c.asd;
    throw std::runtime_error("stats: unknown metric " + metric);
  };

  std::vector<double> xs, ys;
  for (const auto& c : a.cases) {
    const auto it = by_id.find(c.id);
    if (it == by_id.end()) continue;
    const auto va = pick(c), vb = pick(*it->second);
    if (va && vb) {
      xs.push_back(*va);
      ys.push_back(*vb);
    }
  }
  const WilcoxonResult r = wilcoxon(xs, ys);
  nlohmann::json j{{"metric", metric}, {"W", r.w},
                   {"Z", r.z},         {"p", r.p},
                   {"n", r.n_effective}, {"tie_correction", r.tie_correction}};
  std::cout << j.dump() << "\n";
  return 0;
}

int run_pyramid_demo(const CommonOpts& opts, const RunConfig& cfg, const std::string& input,
                     double mu) {
  write_resolved_config(cfg, opts.out_dir);
  const Volume v = load_nifti(input);
  DelpuConfig pcfg;
  pcfg.mu = mu;

  Grid3<float> grid(v.shape);
  grid.data = v.data;
  const int depth = select_depth(v.shape);
  auto pyr = build_gaussian_pyramid(grid, depth, pcfg);
  build_laplacian_pyramid(pyr, pcfg);
  for (int d = 0; d < depth; ++d) {
    Volume lap(pyr.laplacian[size_t(d)].shape, v.spacing);
    lap.data = pyr.laplacian[size_t(d)].data;
    save_nifti(lap, opts.out_dir + "/laplacian_L" + std::to_string(d) + ".nii");
  }
  const auto y = delpu_upsample_grid(grid, v.shape, pcfg);
  Volume out(v.shape, v.spacing);
  out.data = y.data;
  save_nifti(out, opts.out_dir + "/delpu_y.nii");

  double max_diff = 0;
  for (size_t i = 0; i < out.data.size(); ++i)
    max_diff = std::max(max_diff, std::abs(double(out.data[i]) - double(v.data[i])));
  std::cout << "depth " << depth << ", max |y - x| = " << max_diff << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SWDL semi-supervised 3D segmentation pipeline"};
  app.require_subcommand(1);

  CommonOpts common;
  int synth_cases = 60;
  std::vector<std::string> pre_inputs;
  std::string manifest, checkpoint, resume, subset = "test", pred_dir;
  std::string stats_a, stats_b, metric = "dice";
  std::string demo_input;
  double demo_mu = 1.5;

  // Flag overrides shared by config-driven subcommands.
  std::optional<std::uint64_t> ovr_seed;
  std::optional<int> ovr_steps;
  std::optional<double> ovr_mu, ovr_xi, ovr_lr, ovr_fraction;
  std::optional<int> ovr_T;

  auto add_common = [&](CLI::App* cmd, bool with_overrides = true) {
    cmd->add_option("--config", common.config_path, "JSON config file");
    cmd->add_option("--out", common.out_dir, "output directory");
    if (with_overrides) {
      cmd->add_option("--seed", ovr_seed, "override train.seed");
      cmd->add_option("--max-steps", ovr_steps, "override train.max_steps");
      cmd->add_option("--mu", ovr_mu, "override model.mu");
      cmd->add_option("--xi", ovr_xi, "override model.xi");
      cmd->add_option("--T", ovr_T, "override model.T");
      cmd->add_option("--lr", ovr_lr, "override train.lr");
      cmd->add_option("--labeled-fraction", ovr_fraction, "override train.labeled_fraction");
    }
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic phantom dataset");
  add_common(synth);
  synth->add_option("--cases", synth_cases, "number of cases");

  auto* pre = app.add_subcommand("preprocess", "preprocess NIfTI volumes");
  add_common(pre);
  pre->add_option("inputs", pre_inputs, "input .nii files")->required();

  auto* tr = app.add_subcommand("train", "train on a dataset manifest");
  add_common(tr);
  tr->add_option("--data", manifest, "manifest.json path")->required();
  tr->add_option("--resume", resume, "checkpoint to resume from");

  auto* inf = app.add_subcommand("infer", "sliding-window inference");
  add_common(inf);
  inf->add_option("--data", manifest, "manifest.json path")->required();
  inf->add_option("--checkpoint", checkpoint, "checkpoint path")->required();
  inf->add_option("--subset", subset, "test/labeled/unlabeled/all");

  auto* ev = app.add_subcommand("evaluate", "metrics against ground truth");
  add_common(ev);
  ev->add_option("--data", manifest, "manifest.json path")->required();
  ev->add_option("--pred", pred_dir, "directory with *_pred.nii")->required();

  auto* st = app.add_subcommand("stats", "Wilcoxon test between two run CSVs");
  st->add_option("csv_a", stats_a, "first run report.csv")->required();
  st->add_option("csv_b", stats_b, "second run report.csv")->required();
  st->add_option("--metric", metric, "dice/hd95/asd/acc/pre/jac");

  auto* demo = app.add_subcommand("pyramid-demo", "DelPU on one volume");
  add_common(demo, false);
  demo->add_option("--in", demo_input, "input .nii")->required();
  demo->add_option("--mu", demo_mu, "edge sharpening weight");

  CLI11_PARSE(app, argc, argv);

  try {
    auto apply_overrides = [&](RunConfig& cfg) {
      if (ovr_seed) cfg.train.seed = *ovr_seed;
      if (ovr_steps) cfg.train.max_steps = *ovr_steps;
      if (ovr_mu) cfg.train.model.mu = *ovr_mu;
      if (ovr_xi) cfg.train.model.xi = *ovr_xi;
      if (ovr_T) cfg.train.model.iteration_period = *ovr_T;
      if (ovr_lr) cfg.train.lr = *ovr_lr;
      if (ovr_fraction) cfg.train.labeled_fraction = *ovr_fraction;
    };
    const RunConfig cfg = resolve_config(common, apply_overrides);
    if (common.out_dir.empty()) common.out_dir = default_run_dir(cfg.train.seed);

    if (synth->parsed()) return run_synth(common, cfg, synth_cases);
    if (pre->parsed()) return run_preprocess(common, cfg, pre_inputs);
    if (tr->parsed()) return run_train(common, cfg, manifest, resume);
    if (inf->parsed()) return run_infer(common, cfg, manifest, checkpoint, subset);
    if (ev->parsed()) return run_evaluate(common, cfg, manifest, pred_dir);
    if (st->parsed()) return run_stats(stats_a, stats_b, metric);
    if (demo->parsed()) return run_pyramid_demo(common, cfg, demo_input, demo_mu);
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
  return 2;
}
