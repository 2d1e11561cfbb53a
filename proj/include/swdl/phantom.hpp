#pragma once

// Deterministic synthetic head phantoms: ellipsoidal brain inside a skull
// shell, Gaussian-noise tissue texture, and 1-3 bright ellipsoidal lesions
// with exact voxel-level ground truth.

#include <string>
#include <vector>

#include "swdl/volume.hpp"

namespace swdl {

struct PhantomSpec {
  Shape3 shape{16, 48, 48};
  Spacing3 spacing{5.0, 0.5, 0.5};
  double background_mean = 35, background_sd = 5;  // brain tissue HU
  double lesion_mean = 65, lesion_sd = 5;
  int min_lesions = 1, max_lesions = 3;
  double lesion_rz_min = 1.5, lesion_rz_max = 2.5;   // voxels
  double lesion_rxy_min = 2.5, lesion_rxy_max = 5.0; // voxels
  double skull_hu = 1000;
  double air_hu = -1000;
  double shell_thickness = 1.5;  // voxels
};

struct PhantomCase {
  std::string id;
  Volume volume;
  Mask label;
};

PhantomCase gen_phantom(const PhantomSpec& spec, std::uint64_t seed);

// n phantoms with per-case seeds seed + i; writes NIfTI pairs plus a JSON
// manifest into out_dir.
std::vector<std::string> gen_dataset(int n, const PhantomSpec& spec, std::uint64_t seed,
                                     const std::string& out_dir);

struct ManifestEntry {
  std::string id;
  std::string image_path;
  std::string label_path;
};

std::vector<ManifestEntry> read_manifest(const std::string& manifest_path);

}  // namespace swdl
