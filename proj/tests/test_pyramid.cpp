#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "swdl/pyramid.hpp"
#include "swdl/rng.hpp"

using namespace swdl;

namespace {

template <typename T>
Grid3<T> random_grid(Shape3 s, Rng& rng) {
  Grid3<T> g(s);
  for (auto& v : g.data) v = T(rng.uniform(-1, 1));
  return g;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <typename T>
double max_abs_diff(const std::vector<T>& a, const std::vector<T>& b) {
  double m = 0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

}  // namespace

TEST_CASE("select_depth matches the depth table on boundary values") {
  CHECK(select_depth(Shape3{1, 1, 1}) == 0);
  CHECK(select_depth(Shape3{8, 8, 8}) == 0);
  CHECK(select_depth(Shape3{1, 1, 9}) == 1);
  CHECK(select_depth(Shape3{4, 32, 32}) == 1);
  CHECK(select_depth(Shape3{1, 33, 2}) == 2);
  CHECK(select_depth(Shape3{16, 64, 64}) == 2);
  CHECK(select_depth(Shape3{65, 1, 1}) == 2);  // clamped beyond the table
  CHECK_THROWS_AS(select_depth(Shape3{0, 1, 1}), std::invalid_argument);
}

TEST_CASE("gaussian pyramid levels and shapes") {
  DelpuConfig cfg;
  Rng rng(1);

  const auto x = random_grid<double>(Shape3{16, 64, 64}, rng);
  const auto p = build_gaussian_pyramid(x, 2, cfg);
  REQUIRE(p.gaussian.size() == 3);
  CHECK(p.recorded_shapes[0] == Shape3{16, 64, 64});
  CHECK(p.recorded_shapes[1] == Shape3{8, 32, 32});
  CHECK(p.recorded_shapes[2] == Shape3{4, 16, 16});
  CHECK(max_abs_diff(p.gaussian[0].data, x.data) == 0.0);

  const auto p0 = build_gaussian_pyramid(x, 0, cfg);
  CHECK(p0.gaussian.size() == 1);

  Grid3<double> c(Shape3{12, 20, 20}, 4.5);
  const auto pc = build_gaussian_pyramid(c, 2, cfg);
  for (const auto& level : pc.gaussian)
    for (double v : level.data) CHECK(v == doctest::Approx(4.5).epsilon(1e-12));

  Grid3<double> tiny(Shape3{1, 1, 1}, 1.0);
  CHECK_THROWS_AS(build_gaussian_pyramid(tiny, 1, cfg), std::invalid_argument);
}

TEST_CASE("laplacian of a constant is zero; D=0 gives empty list") {
  DelpuConfig cfg;
  Grid3<double> c(Shape3{8, 16, 16}, 3.25);
  auto p = build_gaussian_pyramid(c, 2, cfg);
  build_laplacian_pyramid(p, cfg);
  REQUIRE(p.laplacian.size() == 2);
  for (const auto& l : p.laplacian)
    for (double v : l.data) CHECK(std::abs(v) <= 1e-6);

  auto p0 = build_gaussian_pyramid(c, 0, cfg);
  build_laplacian_pyramid(p0, cfg);
  CHECK(p0.laplacian.empty());

  Pyramid<double> broken;
  broken.depth = 1;
  CHECK_THROWS_AS(build_laplacian_pyramid(broken, cfg), std::runtime_error);
}

TEST_CASE("laplacian level matches the direct-formula oracle") {
  DelpuConfig cfg;
  Rng rng(7);
  const auto x = random_grid<double>(Shape3{8, 8, 8}, rng);
  auto p = build_gaussian_pyramid(x, 1, cfg);  // forced depth
  build_laplacian_pyramid(p, cfg);

  // Independent straightforward evaluation of L_0 = G_0 - smooth(up(G_1)).
  const auto up = trilinear_upsample(p.gaussian[1], x.shape);
  const auto low = gaussian_smooth(up, cfg.kernel);
  for (size_t i = 0; i < x.data.size(); ++i)
    CHECK(std::abs(p.laplacian[0].data[i] - (x.data[i] - low.data[i])) <= 1e-12);
}

TEST_CASE("reconstruct: mu=1 telescopes back to G_0") {
  DelpuConfig cfg;
  cfg.mu = 1.0;
  Rng rng(3);
  for (const Shape3 s : {Shape3{8, 8, 8}, Shape3{4, 32, 32}, Shape3{16, 64, 64}}) {
    const auto x = random_grid<double>(s, rng);
    auto p = build_gaussian_pyramid(x, select_depth(s), cfg);
    build_laplacian_pyramid(p, cfg);
    const auto y = reconstruct(p, cfg);
    CHECK(max_abs_diff(y.data, x.data) <= 1e-10);
  }
}

TEST_CASE("reconstruct: D=0 returns input for any mu") {
  DelpuConfig cfg;
  cfg.mu = 2.5;
  Rng rng(4);
  const auto x = random_grid<double>(Shape3{6, 6, 6}, rng);
  auto p = build_gaussian_pyramid(x, 0, cfg);
  build_laplacian_pyramid(p, cfg);
  CHECK(max_abs_diff(reconstruct(p, cfg).data, x.data) == 0.0);
}

TEST_CASE("reconstruct: mu=0 equals the low-pass cascade oracle") {
  DelpuConfig cfg;
  cfg.mu = 0.0;
  Rng rng(5);
  const auto x = random_grid<double>(Shape3{8, 20, 20}, rng);
  const int depth = select_depth(x.shape);
  auto p = build_gaussian_pyramid(x, depth, cfg);
  build_laplacian_pyramid(p, cfg);
  const auto y = reconstruct(p, cfg);

  // Direct cascade smooth(up(...smooth(up(G_D)))).
  Grid3<double> ref = p.gaussian.back();
  for (int d = depth - 1; d >= 0; --d)
    ref = gaussian_smooth(trilinear_upsample(ref, p.recorded_shapes[size_t(d)]), cfg.kernel);
  CHECK(max_abs_diff(y.data, ref.data) <= 1e-12);
}

TEST_CASE("reconstruct rejects mismatched laplacian shapes") {
  DelpuConfig cfg;
  Rng rng(6);
  const auto x = random_grid<double>(Shape3{4, 12, 12}, rng);
  auto p = build_gaussian_pyramid(x, 1, cfg);
  build_laplacian_pyramid(p, cfg);
  p.laplacian[0] = Grid3<double>(Shape3{2, 2, 2});
  CHECK_THROWS_AS(reconstruct(p, cfg), std::runtime_error);
}

TEST_CASE("pipeline is linear in the input") {
  DelpuConfig cfg;  // mu = 1.5
  Rng rng(8);
  const Shape3 s{4, 24, 24};
  const auto x = random_grid<double>(s, rng);
  const auto z = random_grid<double>(s, rng);
  const double a = 1.7, b = -0.6;

  Grid3<double> mix(s);
  for (size_t i = 0; i < mix.data.size(); ++i) mix.data[i] = a * x.data[i] + b * z.data[i];

  const Shape3 target{8, 48, 48};
  const auto fx = delpu_upsample_grid(x, target, cfg);
  const auto fz = delpu_upsample_grid(z, target, cfg);
  const auto fmix = delpu_upsample_grid(mix, target, cfg);
  for (size_t i = 0; i < fmix.data.size(); ++i)
    CHECK(std::abs(fmix.data[i] - (a * fx.data[i] + b * fz.data[i])) <= 1e-6);
}

TEST_CASE("delpu_upsample constants and mu=1 trilinear equivalence") {
  DelpuConfig cfg;
  Grid3<double> c(Shape3{4, 16, 16}, -2.25);
  const auto out = delpu_upsample_grid(c, Shape3{8, 32, 32}, cfg);
  CHECK(out.shape == Shape3{8, 32, 32});
  for (double v : out.data) CHECK(v == doctest::Approx(-2.25).epsilon(1e-9));

  DelpuConfig unit;
  unit.mu = 1.0;
  Rng rng(9);
  const auto x = random_grid<double>(Shape3{8, 24, 24}, rng);
  const auto a = delpu_upsample_grid(x, Shape3{16, 48, 48}, unit);
  const auto b = trilinear_upsample(x, Shape3{16, 48, 48});
  CHECK(max_abs_diff(a.data, b.data) <= 1e-5);

  CHECK_THROWS_AS(delpu_upsample_grid(x, Shape3{4, 48, 48}, unit), std::invalid_argument);
}

TEST_CASE("mu=1.5 sharpens a step edge more than mu=1.0") {
  Grid3<double> step(Shape3{4, 12, 12});
  for (int z = 0; z < 4; ++z)
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 12; ++x) step.at(z, y, x) = x < 6 ? 0.0 : 1.0;

  DelpuConfig sharp;
  sharp.mu = 1.5;
  DelpuConfig unit;
  unit.mu = 1.0;
  const Shape3 target{8, 24, 24};
  const auto a = delpu_upsample_grid(step, target, sharp);
  const auto b = delpu_upsample_grid(step, target, unit);

  auto overshoot = [](const Grid3<double>& g) {
    double m = 0;
    for (double v : g.data) m = std::max(m, std::max(v - 1.0, -v));
    return m;
  };
  CHECK(overshoot(a) > overshoot(b));
}

TEST_CASE("delpu adjoint passes the dot-product test") {
  DelpuConfig cfg;
  cfg.mu = 1.5;
  Rng rng(10);
  for (const Shape3 s : {Shape3{2, 6, 6}, Shape3{4, 12, 12}, Shape3{8, 33, 20}}) {
    const Shape3 target{s.z * 2, s.y * 2, s.x * 2};
    const auto x = random_grid<double>(s, rng);
    const auto y = random_grid<double>(target, rng);
    const auto ax = delpu_upsample_grid(x, target, cfg);
    const auto aty = delpu_upsample_adjoint_grid(y, s, cfg);
    CHECK(std::abs(dot(ax.data, y.data) - dot(x.data, aty.data)) <= 1e-10);
  }
}

TEST_CASE("perfect reconstruction holds in 32-bit arithmetic") {
  DelpuConfig cfg;
  cfg.mu = 1.0;
  Rng rng(12);
  const auto x = random_grid<float>(Shape3{16, 64, 64}, rng);
  auto p = build_gaussian_pyramid(x, 2, cfg);
  build_laplacian_pyramid(p, cfg);
  const auto y = reconstruct(p, cfg);
  CHECK(max_abs_diff(y.data, x.data) <= 1e-5);
}
