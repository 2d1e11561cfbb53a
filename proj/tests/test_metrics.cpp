#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "swdl/metrics.hpp"
#include "swdl/rng.hpp"

using namespace swdl;

namespace {

Mask random_mask(Shape3 s, Rng& rng, double p = 0.4) {
  Mask m(s);
  for (auto& v : m.data) v = rng.uniform() < p ? 1 : 0;
  return m;
}

// Set-counting oracles.
struct Counts {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};
Counts count_oracle(const Mask& s, const Mask& g) {
  Counts c;
  for (size_t i = 0; i < s.data.size(); ++i) {
    const bool sv = s.data[i], gv = g.data[i];
    c.tp += sv && gv;
    c.fp += sv && !gv;
    c.fn += !sv && gv;
    c.tn += !sv && !gv;
  }
  return c;
}

// All-pairs brute-force surface distances with its own percentile.
std::pair<double, double> surface_oracle(const Mask& s, const Mask& g) {
  auto boundary = [](const Mask& m) {
    std::vector<std::array<int, 3>> out;
    for (int z = 0; z < m.shape.z; ++z)
      for (int y = 0; y < m.shape.y; ++y)
        for (int x = 0; x < m.shape.x; ++x) {
          if (!m.at(z, y, x)) continue;
          bool edge = z == 0 || z == m.shape.z - 1 || y == 0 || y == m.shape.y - 1 || x == 0 ||
                      x == m.shape.x - 1;
          if (!edge) {
            edge = !m.at(z - 1, y, x) || !m.at(z + 1, y, x) || !m.at(z, y - 1, x) ||
                   !m.at(z, y + 1, x) || !m.at(z, y, x - 1) || !m.at(z, y, x + 1);
          }
          if (edge) out.push_back({z, y, x});
        }
    return out;
  };
  const auto bs = boundary(s), bg = boundary(g);
  auto directed = [](const std::vector<std::array<int, 3>>& a,
                     const std::vector<std::array<int, 3>>& b) {
    std::vector<double> d;
    for (const auto& p : a) {
      std::int64_t best = std::numeric_limits<std::int64_t>::max();
      for (const auto& q : b) {
        const std::int64_t dz = p[0] - q[0], dy = p[1] - q[1], dx = p[2] - q[2];
        best = std::min(best, dz * dz + dy * dy + dx * dx);
      }
      d.push_back(std::sqrt(double(best)));
    }
    std::sort(d.begin(), d.end());
    return d;
  };
  auto pct95 = [](const std::vector<double>& d) {
    const double rank = 0.95 * double(d.size() - 1);
    const size_t lo = size_t(std::floor(rank));
    if (lo + 1 >= d.size()) return d.back();
    return d[lo] + (d[lo + 1] - d[lo]) * (rank - double(lo));
  };
  auto dsg = directed(bs, bg), dgs = directed(bg, bs);
  const double hd = std::max(pct95(dsg), pct95(dgs));
  std::vector<double> all = dsg;
  all.insert(all.end(), dgs.begin(), dgs.end());
  std::sort(all.begin(), all.end());  // ascending accumulation, per contract
  double sum = 0;
  for (double v : all) sum += v;
  return {hd, sum / double(all.size())};
}

}  // namespace

TEST_CASE("surface_voxels basics") {
  Mask solid(Shape3{3, 3, 3}, 1);
  CHECK(surface_voxels(solid).size() == 26);  // all but the center

  Mask single(Shape3{3, 3, 3});
  single.at(1, 1, 1) = 1;
  const auto sv = surface_voxels(single);
  REQUIRE(sv.size() == 1);
  CHECK(sv[0] == std::array<int, 3>{1, 1, 1});
}

TEST_CASE("surface_voxels matches a neighbor-scan oracle") {
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const auto m = random_mask(Shape3{8, 8, 8}, rng);
    const auto sv = surface_voxels(m);
    std::int64_t expected = 0;
    for (int z = 0; z < 8; ++z)
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
          if (!m.at(z, y, x)) continue;
          bool boundary = false;
          for (int a = 0; a < 3 && !boundary; ++a)
            for (int d = -1; d <= 1 && !boundary; d += 2) {
              const int zz = z + (a == 0 ? d : 0), yy = y + (a == 1 ? d : 0),
                        xx = x + (a == 2 ? d : 0);
              if (zz < 0 || zz >= 8 || yy < 0 || yy >= 8 || xx < 0 || xx >= 8 || !m.at(zz, yy, xx))
                boundary = true;
            }
          expected += boundary;
        }
    CHECK(std::int64_t(sv.size()) == expected);
  }
}

TEST_CASE("overlap metrics: identity, disjoint, counted example") {
  Rng rng(6);
  auto g = random_mask(Shape3{4, 4, 4}, rng);
  g.data[0] = 1;  // nonempty
  CHECK(dice(g, g) == 1.0);
  CHECK(jaccard(g, g) == 1.0);
  CHECK(accuracy(g, g) == 1.0);
  CHECK(precision(g, g) == 1.0);

  Mask a(Shape3{2, 2, 2}), b(Shape3{2, 2, 2});
  a.data[0] = 1;
  b.data[7] = 1;
  CHECK(dice(a, b) == 0.0);
  CHECK(jaccard(a, b) == 0.0);

  // |S| = 4, |G| = 4, |S ∩ G| = 2 on an 8^3 grid.
  Mask s8(Shape3{8, 8, 8}), g8(Shape3{8, 8, 8});
  for (int i = 0; i < 4; ++i) s8.data[size_t(i)] = 1;
  for (int i = 2; i < 6; ++i) g8.data[size_t(i)] = 1;
  CHECK(dice(s8, g8) == 0.5);
  CHECK(jaccard(s8, g8) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(precision(s8, g8) == 0.5);
  CHECK(accuracy(s8, g8) == doctest::Approx((512.0 - 4) / 512).epsilon(1e-15));

  // Conventions for empty masks.
  Mask e(Shape3{2, 2, 2});
  CHECK(dice(e, e) == 1.0);
  CHECK_THROWS_AS(precision(e, g8), std::invalid_argument);  // shape mismatch first
  Mask e8(Shape3{8, 8, 8});
  CHECK_THROWS_AS(precision(e8, g8), std::runtime_error);
}

TEST_CASE("hd95 and asd: identity, singleton pair, symmetry") {
  Rng rng(7);
  auto m = random_mask(Shape3{5, 5, 5}, rng);
  m.data[62] = 1;
  CHECK(hd95(m, m) == 0.0);
  CHECK(asd(m, m) == 0.0);

  Mask a(Shape3{1, 1, 7}), b(Shape3{1, 1, 7});
  a.at(0, 0, 1) = 1;
  b.at(0, 0, 4) = 1;
  CHECK(hd95(a, b) == 3.0);
  CHECK(asd(a, b) == 3.0);

  Mask empty(Shape3{1, 1, 7});
  CHECK_THROWS_AS(hd95(a, empty), std::runtime_error);
  CHECK_THROWS_AS(asd(empty, b), std::runtime_error);
}

TEST_CASE("hd95/asd match the all-pairs brute-force oracle exactly") {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const Shape3 s{rng.uniform_int(2, 8), rng.uniform_int(2, 8), rng.uniform_int(2, 8)};
    auto a = random_mask(s, rng, 0.35);
    auto b = random_mask(s, rng, 0.35);
    if (a.count() == 0) a.data[0] = 1;
    if (b.count() == 0) b.data[size_t(s.voxels() - 1)] = 1;
    const auto [hd_ref, asd_ref] = surface_oracle(a, b);
    CHECK(hd95(a, b) == hd_ref);
    CHECK(asd(a, b) == asd_ref);
    // Symmetry under swapping.
    CHECK(hd95(a, b) == hd95(b, a));
    CHECK(asd(a, b) == asd(b, a));
    CHECK(dice(a, b) == dice(b, a));
  }
}

TEST_CASE("millimeter distances scale with spacing") {
  Mask a(Shape3{1, 1, 5}), b(Shape3{1, 1, 5});
  a.at(0, 0, 0) = 1;
  b.at(0, 0, 2) = 1;
  SurfaceDistanceOptions mm;
  mm.use_spacing = true;
  mm.spacing = Spacing3{5.0, 0.5, 0.5};
  CHECK(hd95(a, b, mm) == doctest::Approx(1.0).epsilon(1e-12));  // 2 voxels * 0.5 mm
}

TEST_CASE("bootstrap_ci: constants, determinism, normal-theory agreement") {
  CHECK(bootstrap_ci({3.5, 3.5, 3.5}, 0.95, 200).first == 3.5);
  CHECK(bootstrap_ci({3.5, 3.5, 3.5}, 0.95, 200).second == 3.5);
  CHECK_THROWS_AS(bootstrap_ci({1.0}), std::invalid_argument);

  std::vector<double> sample;
  Rng rng(10);
  for (int i = 0; i < 50; ++i) sample.push_back(rng.normal(10, 2));
  const auto a = bootstrap_ci(sample, 0.95, 10000, 367);
  const auto b = bootstrap_ci(sample, 0.95, 10000, 367);
  CHECK(a == b);

  double mean = 0;
  for (double v : sample) mean += v;
  mean /= double(sample.size());
  double var = 0;
  for (double v : sample) var += (v - mean) * (v - mean);
  var /= double(sample.size() - 1);
  const double se = std::sqrt(var / double(sample.size()));
  const double lo_ref = mean - 1.96 * se, hi_ref = mean + 1.96 * se;
  const double width = a.second - a.first, width_ref = hi_ref - lo_ref;
  CHECK(std::abs(width - width_ref) / width_ref <= 0.10);
  CHECK(std::abs(a.first - lo_ref) <= 0.15 * width_ref);
}

TEST_CASE("evaluate_case and evaluate_run") {
  Rng rng(11);
  auto g = random_mask(Shape3{6, 6, 6}, rng, 0.3);
  g.data[0] = 1;
  const auto row = evaluate_case(g, g, "perfect");
  CHECK(row.dice == 1.0);
  CHECK(*row.hd95 == 0.0);

  const auto report = evaluate_run({row});
  CHECK(report.dice.mean == 1.0);
  CHECK(report.dice.ci_lo == 1.0);
  CHECK(report.dice.ci_hi == 1.0);

  // jac = dice / (2 - dice) per case.
  std::vector<CaseMetrics> rows;
  for (int i = 0; i < 6; ++i) {
    auto a = random_mask(Shape3{6, 6, 6}, rng, 0.3);
    auto b = random_mask(Shape3{6, 6, 6}, rng, 0.3);
    a.data[0] = b.data[1] = 1;
    rows.push_back(evaluate_case(a, b, "case" + std::to_string(i)));
  }
  for (const auto& r : rows)
    CHECK(std::abs(r.jac - r.dice / (2.0 - r.dice)) <= 1e-12);

  // Missing metrics are recorded, not fabricated.
  Mask empty(Shape3{6, 6, 6});
  const auto miss = evaluate_case(empty, g, "empty");
  CHECK_FALSE(miss.pre.has_value());
  CHECK_FALSE(miss.hd95.has_value());
  CHECK(miss.missing_reason == "empty prediction");

  // Report serialization is deterministic and CSV round-trips per-case rows.
  const auto rep = evaluate_run(rows);
  CHECK(report_to_json(rep) == report_to_json(evaluate_run(rows)));
  const auto csv = report_to_csv(rep);
  CHECK(csv == report_to_csv(evaluate_run(rows)));
  const auto back = report_from_csv(csv);
  REQUIRE(back.cases.size() == rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(back.cases[i].id == rows[i].id);
    CHECK(back.cases[i].dice == doctest::Approx(rows[i].dice).epsilon(1e-9));
  }
}
