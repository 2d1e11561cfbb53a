#include "swdl/preprocess.hpp"

#include <limits>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "swdl/grid_ops.hpp"
#include "swdl/volume_ops.hpp"

namespace swdl {

namespace {

// Fill holes per axial slice: background connected to the slice border stays
// background, everything else becomes foreground.
void fill_slice_holes(Mask& m) {
  const Shape3 s = m.shape;
  std::vector<std::uint8_t> reach(size_t(s.y) * s.x);
  std::vector<std::int32_t> stack;
  for (int z = 0; z < s.z; ++z) {
    std::fill(reach.begin(), reach.end(), 0);
    stack.clear();
    auto idx = [&](int y, int x) { return std::int32_t(y) * s.x + x; };
    for (int y = 0; y < s.y; ++y)
      for (int x = 0; x < s.x; ++x) {
        const bool border = y == 0 || y == s.y - 1 || x == 0 || x == s.x - 1;
        if (border && !m.at(z, y, x) && !reach[size_t(idx(y, x))]) {
          reach[size_t(idx(y, x))] = 1;
          stack.push_back(idx(y, x));
          while (!stack.empty()) {
            const auto cur = stack.back();
            stack.pop_back();
            const int cy = cur / s.x, cx = cur % s.x;
            constexpr int nb[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
            for (const auto& d : nb) {
              const int ny = cy + d[0], nx = cx + d[1];
              if (ny < 0 || ny >= s.y || nx < 0 || nx >= s.x) continue;
              if (m.at(z, ny, nx) || reach[size_t(idx(ny, nx))]) continue;
              reach[size_t(idx(ny, nx))] = 1;
              stack.push_back(idx(ny, nx));
            }
          }
        }
      }
    for (int y = 0; y < s.y; ++y)
      for (int x = 0; x < s.x; ++x)
        if (!m.at(z, y, x) && !reach[size_t(idx(y, x))]) m.at(z, y, x) = 1;
  }
}

}  // namespace

SkullStripResult skull_strip(const Volume& v, const PreprocessConfig& cfg) {
  cfg.validate();
  const float inf = std::numeric_limits<float>::max();
  const double bone_thr =
      cfg.use_otsu_bone ? double(otsu_threshold(v)) : cfg.bone_hu;

  const Mask head = threshold_mask(v, float(cfg.air_hu), inf);
  const Mask bone = threshold_mask(v, float(bone_thr), inf);
  Mask cand(v.shape);
  for (size_t i = 0; i < cand.data.size(); ++i)
    cand.data[i] = (head.data[i] && !bone.data[i]) ? 1 : 0;

  cand = morph(cand, MorphOp::Close, cfg.closing_radius);
  if (cand.count() == 0) throw std::runtime_error("skull_strip: empty brain mask");
  Mask brain = largest_component(cand);
  fill_slice_holes(brain);

  SkullStripResult out;
  out.stripped = v;
  for (size_t i = 0; i < brain.data.size(); ++i)
    if (!brain.data[i]) out.stripped.data[i] = float(cfg.masked_value);
  out.brain_mask = std::move(brain);
  return out;
}

Mask extract_roi(const Volume& stripped, const PreprocessConfig& cfg) {
  cfg.validate();
  Mask roi = threshold_mask(stripped, float(cfg.roi_lo), float(cfg.roi_hi));
  if (roi.count() == 0) return roi;
  roi = morph(roi, MorphOp::Dilate, 1);
  roi = morph(roi, MorphOp::Erode, 1);

  const auto cc = connected_components(roi);
  Mask out(roi.shape);
  for (size_t i = 0; i < out.data.size(); ++i) {
    const auto label = cc.labels.data[i];
    out.data[i] =
        (label > 0 && cc.sizes[size_t(label - 1)] >= cfg.min_roi_component) ? 1 : 0;
  }
  return out;
}

PreprocessedCase preprocess_case(const Volume& v, const PreprocessConfig& cfg) {
  cfg.validate();
  PreprocessedCase out;
  out.original_spacing = v.spacing;
  out.original_shape = v.shape;
  const Volume resampled = resample_to_spacing(v, cfg.target_spacing);
  auto strip = skull_strip(resampled, cfg);
  out.bone_threshold_used = cfg.use_otsu_bone ? double(otsu_threshold(resampled)) : cfg.bone_hu;
  out.roi = extract_roi(strip.stripped, cfg);
  out.volume = std::move(strip.stripped);
  out.brain_mask = std::move(strip.brain_mask);
  return out;
}

std::string provenance_json(const PreprocessedCase& c, const PreprocessConfig& cfg) {
  nlohmann::json j;
  j["original_spacing"] = {c.original_spacing.z, c.original_spacing.y, c.original_spacing.x};
  j["original_shape"] = {c.original_shape.z, c.original_shape.y, c.original_shape.x};
  j["target_spacing"] = {cfg.target_spacing.z, cfg.target_spacing.y, cfg.target_spacing.x};
  j["bone_threshold"] = c.bone_threshold_used;
  j["air_threshold"] = cfg.air_hu;
  j["roi_window"] = {cfg.roi_lo, cfg.roi_hi};
  j["closing_radius"] = cfg.closing_radius;
  j["min_roi_component"] = cfg.min_roi_component;
  return j.dump(2);
}

}  // namespace swdl
