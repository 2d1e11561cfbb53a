#pragma once

#include <utility>
#include <vector>

#include "swdl/volume.hpp"

namespace swdl {

enum class MorphOp { Dilate, Erode, Close };

// Voxels with lo <= value <= hi.
Mask threshold_mask(const Volume& v, float lo, float hi);

// Threshold maximizing between-class variance over a 256-bin histogram of the
// value range. Requires at least two distinct values.
float otsu_threshold(const Volume& v);

// Structuring element is the 6-connected ball of the given radius
// (|dz|+|dy|+|dx| <= radius); out-of-bounds voxels count as background.
Mask morph(const Mask& m, MorphOp op, int radius);

struct ComponentLabels {
  Grid3<std::int32_t> labels;       // 0 = background, components dense from 1
  std::vector<std::int64_t> sizes;  // sizes[i] = size of component i+1
};

// 6-connectivity flood labeling in scan order.
ComponentLabels connected_components(const Mask& m);

// Largest component; ties broken by smallest label. Empty mask is an error.
Mask largest_component(const Mask& m);

}  // namespace swdl
