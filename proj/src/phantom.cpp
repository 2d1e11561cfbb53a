#include "swdl/phantom.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "swdl/metrics.hpp"
#include "swdl/nifti.hpp"
#include "swdl/rng.hpp"

namespace swdl {

namespace {

struct Ellipsoid {
  double cz, cy, cx;
  double rz, ry, rx;

  bool contains(int z, int y, int x) const {
    const double az = (z - cz) / rz, ay = (y - cy) / ry, axv = (x - cx) / rx;
    return az * az + ay * ay + axv * axv <= 1.0;
  }
};

std::string case_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "case_%03d", i);
  return buf;
}

}  // namespace

PhantomCase gen_phantom(const PhantomSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  const Shape3 s = spec.shape;

  const Ellipsoid brain{(s.z - 1) / 2.0, (s.y - 1) / 2.0, (s.x - 1) / 2.0,
                        s.z * 0.38, s.y * 0.40, s.x * 0.40};
  const Ellipsoid skull_outer{brain.cz, brain.cy, brain.cx,
                              brain.rz + spec.shell_thickness,
                              brain.ry + spec.shell_thickness,
                              brain.rx + spec.shell_thickness};

  // Lesions sampled fully inside the brain (rejection on the center so the
  // lesion bounding ellipsoid stays within the brain ellipsoid).
  const int n_lesions = rng.uniform_int(spec.min_lesions, spec.max_lesions);
  std::vector<Ellipsoid> lesions;
  for (int l = 0; l < n_lesions; ++l) {
    const double rz = rng.uniform(spec.lesion_rz_min, spec.lesion_rz_max);
    const double ry = rng.uniform(spec.lesion_rxy_min, spec.lesion_rxy_max);
    const double rx = rng.uniform(spec.lesion_rxy_min, spec.lesion_rxy_max);
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      const double cz = rng.uniform(brain.cz - brain.rz, brain.cz + brain.rz);
      const double cy = rng.uniform(brain.cy - brain.ry, brain.cy + brain.ry);
      const double cx = rng.uniform(brain.cx - brain.rx, brain.cx + brain.rx);
      const double az = (cz - brain.cz) / std::max(brain.rz - rz - 0.5, 0.5);
      const double ay = (cy - brain.cy) / std::max(brain.ry - ry - 0.5, 0.5);
      const double axv = (cx - brain.cx) / std::max(brain.rx - rx - 0.5, 0.5);
      if (az * az + ay * ay + axv * axv <= 1.0) {
        lesions.push_back(Ellipsoid{cz, cy, cx, rz, ry, rx});
        placed = true;
      }
    }
    if (!placed) throw std::runtime_error("gen_phantom: lesion cannot fit inside the brain");
  }

  PhantomCase out;
  out.volume = Volume(s, spec.spacing);
  out.label = Mask(s);
  for (int z = 0; z < s.z; ++z)
    for (int y = 0; y < s.y; ++y)
      for (int x = 0; x < s.x; ++x) {
        double hu;
        bool lesion = false;
        if (brain.contains(z, y, x)) {
          for (const auto& e : lesions)
            if (e.contains(z, y, x)) {
              lesion = true;
              break;
            }
          hu = lesion ? rng.normal(spec.lesion_mean, spec.lesion_sd)
                      : rng.normal(spec.background_mean, spec.background_sd);
        } else if (skull_outer.contains(z, y, x)) {
          hu = spec.skull_hu;
        } else {
          hu = spec.air_hu;
        }
        out.volume.at(z, y, x) = float(hu);
        out.label.at(z, y, x) = lesion ? 1 : 0;
      }
  return out;
}

std::vector<std::string> gen_dataset(int n, const PhantomSpec& spec, std::uint64_t seed,
                                     const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  nlohmann::json manifest;
  manifest["seed"] = seed;
  manifest["cases"] = nlohmann::json::array();
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) {
    const std::string id = case_id(i);
    const PhantomCase c = gen_phantom(spec, seed + std::uint64_t(i));
    const std::string img = id + "_img.nii", lab = id + "_lab.nii";
    save_nifti(c.volume, out_dir + "/" + img);
    save_mask_nifti(c.label, c.volume.spacing, out_dir + "/" + lab);
    manifest["cases"].push_back({{"id", id}, {"image", img}, {"label", lab},
                                 {"seed", seed + std::uint64_t(i)}});
    ids.push_back(id);
  }
  write_text_file(out_dir + "/manifest.json", manifest.dump(2));
  return ids;
}

std::vector<ManifestEntry> read_manifest(const std::string& manifest_path) {
  const auto j = nlohmann::json::parse(read_text_file(manifest_path));
  const std::string dir = std::filesystem::path(manifest_path).parent_path().string();
  std::vector<ManifestEntry> out;
  for (const auto& c : j.at("cases")) {
    ManifestEntry e;
    e.id = c.at("id").get<std::string>();
    e.image_path = dir + "/" + c.at("image").get<std::string>();
    e.label_path = dir + "/" + c.at("label").get<std::string>();
    out.push_back(e);
  }
  return out;
}

}  // namespace swdl
