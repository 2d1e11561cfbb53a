#include "swdl/run_config.hpp"

#include <filesystem>

#include <json.hpp>

#include "swdl/metrics.hpp"

namespace swdl {

namespace {

using nlohmann::json;

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void spacing_from(const json& j, const char* key, Spacing3& out) {
  if (j.contains(key)) {
    const auto a = j.at(key);
    out = Spacing3{a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
  }
}

void shape_from(const json& j, const char* key, Shape3& out) {
  if (j.contains(key)) {
    const auto a = j.at(key);
    out = Shape3{a.at(0).get<int>(), a.at(1).get<int>(), a.at(2).get<int>()};
  }
}

}  // namespace

RunConfig config_from_json(const std::string& json_text) {
  RunConfig cfg;
  const json j = json::parse(json_text);

  if (j.contains("model")) {
    const auto& m = j.at("model");
    maybe(m, "strata", cfg.train.model.strata);
    maybe(m, "channels", cfg.train.model.channels);
    maybe(m, "num_classes", cfg.train.model.num_classes);
    maybe(m, "mu", cfg.train.model.mu);
    maybe(m, "T", cfg.train.model.iteration_period);
    maybe(m, "xi", cfg.train.model.xi);
    maybe(m, "swap_decoder_losses", cfg.train.model.swap_decoder_losses);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    maybe(t, "lr", cfg.train.lr);
    maybe(t, "momentum", cfg.train.momentum);
    maybe(t, "weight_decay", cfg.train.weight_decay);
    if (t.contains("patch")) {
      const auto a = t.at("patch");
      cfg.train.patch = {a.at(0).get<int>(), a.at(1).get<int>(), a.at(2).get<int>()};
    }
    maybe(t, "labeled_per_batch", cfg.train.labeled_per_batch);
    maybe(t, "unlabeled_per_batch", cfg.train.unlabeled_per_batch);
    maybe(t, "max_steps", cfg.train.max_steps);
    maybe(t, "seed", cfg.train.seed);
    maybe(t, "split_seed", cfg.train.split_seed);
    maybe(t, "labeled_fraction", cfg.train.labeled_fraction);
    maybe(t, "lesion_bias", cfg.train.lesion_bias);
    maybe(t, "norm_lo", cfg.train.norm_lo);
    maybe(t, "norm_hi", cfg.train.norm_hi);
    maybe(t, "checkpoint_every", cfg.train.checkpoint_every);
  }
  if (j.contains("phantom")) {
    const auto& p = j.at("phantom");
    shape_from(p, "shape", cfg.phantom.shape);
    spacing_from(p, "spacing", cfg.phantom.spacing);
    maybe(p, "background_mean", cfg.phantom.background_mean);
    maybe(p, "background_sd", cfg.phantom.background_sd);
    maybe(p, "lesion_mean", cfg.phantom.lesion_mean);
    maybe(p, "lesion_sd", cfg.phantom.lesion_sd);
    maybe(p, "min_lesions", cfg.phantom.min_lesions);
    maybe(p, "max_lesions", cfg.phantom.max_lesions);
  }
  if (j.contains("preprocess")) {
    const auto& p = j.at("preprocess");
    spacing_from(p, "target_spacing", cfg.preprocess.target_spacing);
    maybe(p, "bone_hu", cfg.preprocess.bone_hu);
    maybe(p, "use_otsu_bone", cfg.preprocess.use_otsu_bone);
    maybe(p, "air_hu", cfg.preprocess.air_hu);
    maybe(p, "roi_lo", cfg.preprocess.roi_lo);
    maybe(p, "roi_hi", cfg.preprocess.roi_hi);
    maybe(p, "closing_radius", cfg.preprocess.closing_radius);
    maybe(p, "min_roi_component", cfg.preprocess.min_roi_component);
  }
  if (j.contains("eval")) {
    maybe(j.at("eval"), "use_spacing", cfg.eval_use_spacing);
  }
  return cfg;
}

std::string config_to_json(const RunConfig& cfg) {
  json j;
  j["model"] = {{"strata", cfg.train.model.strata},
                {"channels", cfg.train.model.channels},
                {"num_classes", cfg.train.model.num_classes},
                {"mu", cfg.train.model.mu},
                {"T", cfg.train.model.iteration_period},
                {"xi", cfg.train.model.xi},
                {"swap_decoder_losses", cfg.train.model.swap_decoder_losses}};
  j["train"] = {{"lr", cfg.train.lr},
                {"momentum", cfg.train.momentum},
                {"weight_decay", cfg.train.weight_decay},
                {"patch", cfg.train.patch},
                {"labeled_per_batch", cfg.train.labeled_per_batch},
                {"unlabeled_per_batch", cfg.train.unlabeled_per_batch},
                {"max_steps", cfg.train.max_steps},
                {"seed", cfg.train.seed},
                {"split_seed", cfg.train.split_seed},
                {"labeled_fraction", cfg.train.labeled_fraction},
                {"lesion_bias", cfg.train.lesion_bias},
                {"norm_lo", cfg.train.norm_lo},
                {"norm_hi", cfg.train.norm_hi},
                {"checkpoint_every", cfg.train.checkpoint_every}};
  j["phantom"] = {
      {"shape", {cfg.phantom.shape.z, cfg.phantom.shape.y, cfg.phantom.shape.x}},
      {"spacing", {cfg.phantom.spacing.z, cfg.phantom.spacing.y, cfg.phantom.spacing.x}},
      {"background_mean", cfg.phantom.background_mean},
      {"background_sd", cfg.phantom.background_sd},
      {"lesion_mean", cfg.phantom.lesion_mean},
      {"lesion_sd", cfg.phantom.lesion_sd},
      {"min_lesions", cfg.phantom.min_lesions},
      {"max_lesions", cfg.phantom.max_lesions}};
  j["preprocess"] = {{"target_spacing",
                      {cfg.preprocess.target_spacing.z, cfg.preprocess.target_spacing.y,
                       cfg.preprocess.target_spacing.x}},
                     {"bone_hu", cfg.preprocess.bone_hu},
                     {"use_otsu_bone", cfg.preprocess.use_otsu_bone},
                     {"air_hu", cfg.preprocess.air_hu},
                     {"roi_lo", cfg.preprocess.roi_lo},
                     {"roi_hi", cfg.preprocess.roi_hi},
                     {"closing_radius", cfg.preprocess.closing_radius},
                     {"min_roi_component", cfg.preprocess.min_roi_component}};
  j["eval"] = {{"use_spacing", cfg.eval_use_spacing}};
  return j.dump(2);
}

RunConfig load_config_file(const std::string& path) {
  return config_from_json(read_text_file(path));
}

void write_resolved_config(const RunConfig& cfg, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir + "/resolved_config.json", config_to_json(cfg));
}

}  // namespace swdl
