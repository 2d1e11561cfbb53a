#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "swdl/metrics.hpp"
#include "swdl/nifti.hpp"
#include "swdl/phantom.hpp"

using namespace swdl;

TEST_CASE("same seed gives identical volume and label") {
  PhantomSpec spec;
  const auto a = gen_phantom(spec, 42);
  const auto b = gen_phantom(spec, 42);
  CHECK(a.volume.data == b.volume.data);
  CHECK(a.label.data == b.label.data);

  const auto c = gen_phantom(spec, 43);
  CHECK(a.volume.data != c.volume.data);
}

TEST_CASE("zero lesions give an empty label mask") {
  PhantomSpec spec;
  spec.min_lesions = 0;
  spec.max_lesions = 0;
  const auto p = gen_phantom(spec, 7);
  CHECK(p.label.count() == 0);
}

TEST_CASE("lesion statistics and bounds") {
  PhantomSpec spec;
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const auto p = gen_phantom(spec, seed);
    const auto fg = p.label.count();
    CHECK(fg > 0);
    // Foreground fraction within (0, 0.05) by construction.
    CHECK(double(fg) / double(p.label.shape.voxels()) < 0.05);

    double mean = 0;
    for (std::int64_t i = 0; i < p.label.shape.voxels(); ++i)
      if (p.label.data[size_t(i)]) mean += double(p.volume.data[size_t(i)]);
    mean /= double(fg);
    CHECK(mean >= 55.0);
    CHECK(mean <= 75.0);
  }
}

TEST_CASE("label equals analytic membership: lesions sit inside the brain") {
  PhantomSpec spec;
  const auto p = gen_phantom(spec, 11);
  // Lesion voxels must carry soft-tissue-plus HU; never skull or air.
  for (std::int64_t i = 0; i < p.label.shape.voxels(); ++i)
    if (p.label.data[size_t(i)]) {
      CHECK(p.volume.data[size_t(i)] > 30.f);
      CHECK(p.volume.data[size_t(i)] < 110.f);
    }
}

TEST_CASE("lesion too large for the brain is a spec error") {
  PhantomSpec spec;
  spec.shape = Shape3{8, 12, 12};
  spec.lesion_rxy_min = spec.lesion_rxy_max = 30;
  CHECK_THROWS_AS(gen_phantom(spec, 1), std::runtime_error);
}

TEST_CASE("gen_dataset writes pairs and a stable manifest") {
  const std::string dir = "/tmp/swdl_test_dataset";
  std::filesystem::remove_all(dir);
  PhantomSpec spec;
  spec.shape = Shape3{8, 24, 24};
  const auto ids = gen_dataset(5, spec, 2024, dir);
  CHECK(ids.size() == 5);

  const auto entries = read_manifest(dir + "/manifest.json");
  REQUIRE(entries.size() == 5);
  for (const auto& e : entries) {
    const Volume v = load_nifti(e.image_path);
    const Mask m = load_mask_nifti(e.label_path);
    CHECK(v.shape == spec.shape);
    CHECK(m.shape == spec.shape);
  }

  // Stable across runs: regenerate and compare manifest text and one volume.
  const std::string manifest_a = read_text_file(dir + "/manifest.json");
  const Volume va = load_nifti(entries[2].image_path);
  std::filesystem::remove_all(dir);
  gen_dataset(5, spec, 2024, dir);
  CHECK(read_text_file(dir + "/manifest.json") == manifest_a);
  CHECK(load_nifti(entries[2].image_path).data == va.data);
}
