#pragma once

// CT preprocessing chain: resampling to the target spacing, threshold- and
// morphology-based skull stripping, and hemorrhage ROI extraction by fixed
// intensity windowing.

#include <string>

#include "swdl/volume.hpp"

namespace swdl {

struct PreprocessConfig {
  Spacing3 target_spacing{5.0, 0.5, 0.5};
  double bone_hu = 150;      // fixed bone threshold (Otsu available via switch)
  bool use_otsu_bone = false;
  double air_hu = -200;      // head/background separation
  double roi_lo = 20, roi_hi = 40;
  int closing_radius = 1;
  int min_roi_component = 10;  // voxels
  double masked_value = -1024;

  void validate() const {
    if (!(bone_hu > roi_hi))
      throw std::invalid_argument("PreprocessConfig: bone_hu must exceed roi window");
    if (!(roi_lo < roi_hi))
      throw std::invalid_argument("PreprocessConfig: roi window must be increasing");
  }
};

struct SkullStripResult {
  Mask brain_mask;
  Volume stripped;  // outside the mask set to masked_value
};

SkullStripResult skull_strip(const Volume& v, const PreprocessConfig& cfg);

Mask extract_roi(const Volume& stripped, const PreprocessConfig& cfg);

struct PreprocessedCase {
  Volume volume;  // resampled and stripped
  Mask brain_mask;
  Mask roi;
  Spacing3 original_spacing;
  Shape3 original_shape;
  double bone_threshold_used = 0;
};

PreprocessedCase preprocess_case(const Volume& v, const PreprocessConfig& cfg);

// Provenance sidecar for one case.
std::string provenance_json(const PreprocessedCase& c, const PreprocessConfig& cfg);

}  // namespace swdl
