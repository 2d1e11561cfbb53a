#include "swdl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "swdl/rng.hpp"

namespace swdl {

namespace {

void require_same_shape(const Mask& s, const Mask& g, const char* op) {
  if (!(s.shape == g.shape))
    throw std::invalid_argument(std::string(op) + ": mask shape mismatch");
}

struct Overlap {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

Overlap overlap(const Mask& s, const Mask& g) {
  Overlap o;
  for (size_t i = 0; i < s.data.size(); ++i) {
    const bool sv = s.data[i] != 0, gv = g.data[i] != 0;
    o.tp += sv && gv;
    o.fp += sv && !gv;
    o.fn += !sv && gv;
    o.tn += !sv && !gv;
  }
  return o;
}

// Linear interpolation between order statistics at rank q*(n-1).
double percentile(std::vector<double>& values, double q) {
  std::sort(values.begin(), values.end());
  const double rank = q * double(values.size() - 1);
  const size_t lo = size_t(std::floor(rank));
  if (lo + 1 >= values.size()) return values.back();
  const double frac = rank - double(lo);
  return values[lo] + (values[lo + 1] - values[lo]) * frac;
}

// Directed minimum distances from every point of a to the set b (exact
// integer squared distances, sqrt at the end; optional mm scaling).
std::vector<double> directed_distances(const std::vector<std::array<int, 3>>& a,
                                       const std::vector<std::array<int, 3>>& b,
                                       const SurfaceDistanceOptions& opts) {
  std::vector<double> out;
  out.reserve(a.size());
  const double sz = opts.use_spacing ? opts.spacing.z : 1.0;
  const double sy = opts.use_spacing ? opts.spacing.y : 1.0;
  const double sx = opts.use_spacing ? opts.spacing.x : 1.0;
  for (const auto& p : a) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : b) {
      const double dz = (p[0] - q[0]) * sz, dy = (p[1] - q[1]) * sy, dx = (p[2] - q[2]) * sx;
      best = std::min(best, dz * dz + dy * dy + dx * dx);
    }
    out.push_back(std::sqrt(best));
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

std::vector<std::array<int, 3>> surface_voxels(const Mask& m) {
  std::vector<std::array<int, 3>> out;
  const Shape3 s = m.shape;
  for (int z = 0; z < s.z; ++z)
    for (int y = 0; y < s.y; ++y)
      for (int x = 0; x < s.x; ++x) {
        if (!m.at(z, y, x)) continue;
        bool boundary = false;
        constexpr int nb[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0},
                                  {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
        for (const auto& d : nb) {
          const int zz = z + d[0], yy = y + d[1], xx = x + d[2];
          if (zz < 0 || zz >= s.z || yy < 0 || yy >= s.y || xx < 0 || xx >= s.x ||
              !m.at(zz, yy, xx)) {
            boundary = true;
            break;
          }
        }
        if (boundary) out.push_back({z, y, x});
      }
  return out;
}

double dice(const Mask& s, const Mask& g) {
  require_same_shape(s, g, "dice");
  const auto o = overlap(s, g);
  const std::int64_t denom = 2 * o.tp + o.fp + o.fn;
  if (denom == 0) return 1.0;  // both empty
  return 2.0 * double(o.tp) / double(denom);
}

double jaccard(const Mask& s, const Mask& g) {
  require_same_shape(s, g, "jaccard");
  const auto o = overlap(s, g);
  const std::int64_t denom = o.tp + o.fp + o.fn;
  if (denom == 0) return 1.0;
  return double(o.tp) / double(denom);
}

double accuracy(const Mask& s, const Mask& g) {
  require_same_shape(s, g, "accuracy");
  const auto o = overlap(s, g);
  return double(o.tp + o.tn) / double(o.tp + o.tn + o.fp + o.fn);
}

double precision(const Mask& s, const Mask& g) {
  require_same_shape(s, g, "precision");
  const auto o = overlap(s, g);
  if (o.tp + o.fp == 0) throw std::runtime_error("precision: empty prediction");
  return double(o.tp) / double(o.tp + o.fp);
}

double hd95(const Mask& s, const Mask& g, const SurfaceDistanceOptions& opts) {
  require_same_shape(s, g, "hd95");
  const auto bs = surface_voxels(s), bg = surface_voxels(g);
  if (bs.empty() || bg.empty()) throw std::runtime_error("hd95: empty mask");
  auto d_sg = directed_distances(bs, bg, opts);
  auto d_gs = directed_distances(bg, bs, opts);
  return std::max(percentile(d_sg, 0.95), percentile(d_gs, 0.95));
}

double asd(const Mask& s, const Mask& g, const SurfaceDistanceOptions& opts) {
  require_same_shape(s, g, "asd");
  const auto bs = surface_voxels(s), bg = surface_voxels(g);
  if (bs.empty() || bg.empty()) throw std::runtime_error("asd: empty mask");
  auto all = directed_distances(bs, bg, opts);
  const auto d_gs = directed_distances(bg, bs, opts);
  all.insert(all.end(), d_gs.begin(), d_gs.end());
  // Summed in ascending order so the value is bit-reproducible and symmetric
  // under swapping the masks.
  std::sort(all.begin(), all.end());
  double sum = 0;
  for (double d : all) sum += d;
  return sum / double(all.size());
}

std::pair<double, double> bootstrap_ci(const std::vector<double>& values, double level,
                                       int resamples, std::uint64_t seed) {
  if (values.size() < 2) throw std::invalid_argument("bootstrap_ci: need at least 2 values");
  Rng rng(seed);
  std::vector<double> means(size_t(resamples), 0.0);
  for (int r = 0; r < resamples; ++r) {
    double acc = 0;
    for (size_t i = 0; i < values.size(); ++i)
      acc += values[rng.uniform_index(values.size())];
    means[size_t(r)] = acc / double(values.size());
  }
  const double alpha = (1.0 - level) / 2.0;
  const double lo = percentile(means, alpha);
  std::sort(means.begin(), means.end());
  const double hi = percentile(means, 1.0 - alpha);
  return {lo, hi};
}

CaseMetrics evaluate_case(const Mask& pred, const Mask& gt, const std::string& id,
                          const SurfaceDistanceOptions& opts) {
  CaseMetrics m;
  m.id = id;
  m.dice = dice(pred, gt);
  m.acc = accuracy(pred, gt);
  m.jac = jaccard(pred, gt);
  if (pred.count() > 0) {
    m.pre = precision(pred, gt);
  } else {
    m.missing_reason = "empty prediction";
  }
  if (pred.count() > 0 && gt.count() > 0) {
    m.hd95 = hd95(pred, gt, opts);
    m.asd = asd(pred, gt, opts);
  } else if (m.missing_reason.empty()) {
    m.missing_reason = "empty mask for surface distances";
  }
  return m;
}

namespace {

MetricSummary summarize(const std::vector<double>& vals, std::uint64_t seed) {
  MetricSummary s;
  s.n = int(vals.size());
  if (vals.empty()) return s;
  double acc = 0;
  for (double v : vals) acc += v;
  s.mean = acc / double(vals.size());
  if (vals.size() >= 2) {
    const auto [lo, hi] = bootstrap_ci(vals, 0.95, 10000, seed);
    s.ci_lo = lo;
    s.ci_hi = hi;
  } else {
    s.ci_lo = s.ci_hi = s.mean;
  }
  return s;
}

}  // namespace

MetricsReport evaluate_run(const std::vector<CaseMetrics>& cases, std::uint64_t ci_seed) {
  MetricsReport r;
  r.cases = cases;
  std::vector<double> v_dice, v_hd, v_asd, v_acc, v_pre, v_jac;
  for (const auto& c : cases) {
    v_dice.push_back(c.dice);
    v_acc.push_back(c.acc);
    v_jac.push_back(c.jac);
    if (c.pre) v_pre.push_back(*c.pre);
    if (c.hd95) v_hd.push_back(*c.hd95);
    if (c.asd) v_asd.push_back(*c.asd);
  }
  r.dice = summarize(v_dice, ci_seed);
  r.hd95 = summarize(v_hd, ci_seed);
  r.asd = summarize(v_asd, ci_seed);
  r.acc = summarize(v_acc, ci_seed);
  r.pre = summarize(v_pre, ci_seed);
  r.jac = summarize(v_jac, ci_seed);
  return r;
}

std::string report_to_json(const MetricsReport& r) {
  nlohmann::json j;
  auto summary = [](const MetricSummary& s) {
    return nlohmann::json{{"mean", s.mean}, {"ci", {s.ci_lo, s.ci_hi}}, {"n", s.n}};
  };
  j["summary"] = {{"dice", summary(r.dice)}, {"hd95", summary(r.hd95)},
                  {"asd", summary(r.asd)},   {"acc", summary(r.acc)},
                  {"pre", summary(r.pre)},   {"jac", summary(r.jac)}};
  j["cases"] = nlohmann::json::array();
  for (const auto& c : r.cases) {
    nlohmann::json jc{{"id", c.id}, {"dice", c.dice}, {"acc", c.acc}, {"jac", c.jac}};
    jc["pre"] = c.pre ? nlohmann::json(*c.pre) : nlohmann::json();
    jc["hd95"] = c.hd95 ? nlohmann::json(*c.hd95) : nlohmann::json();
    jc["asd"] = c.asd ? nlohmann::json(*c.asd) : nlohmann::json();
    if (!c.missing_reason.empty()) jc["missing_reason"] = c.missing_reason;
    j["cases"].push_back(jc);
  }
  return j.dump(2);
}

std::string report_to_csv(const MetricsReport& r) {
  std::string out = "case,dice,hd95,asd,acc,pre,jac\n";
  auto cell = [](const std::optional<double>& v) { return v ? fmt_double(*v) : std::string(); };
  for (const auto& c : r.cases) {
    out += c.id + "," + fmt_double(c.dice) + "," + cell(c.hd95) + "," + cell(c.asd) + "," +
           fmt_double(c.acc) + "," + cell(c.pre) + "," + fmt_double(c.jac) + "\n";
  }
  out += "mean," + fmt_double(r.dice.mean) + "," + fmt_double(r.hd95.mean) + "," +
         fmt_double(r.asd.mean) + "," + fmt_double(r.acc.mean) + "," + fmt_double(r.pre.mean) +
         "," + fmt_double(r.jac.mean) + "\n";
  return out;
}

MetricsReport report_from_csv(const std::string& csv_text) {
  MetricsReport r;
  std::istringstream in(csv_text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    cells.resize(7);
    if (cells[0] == "mean") continue;
    CaseMetrics c;
    c.id = cells[0];
    c.dice = std::stod(cells[1]);
    if (!cells[2].empty()) c.hd95 = std::stod(cells[2]);
    if (!cells[3].empty()) c.asd = std::stod(cells[3]);
    c.acc = std::stod(cells[4]);
    if (!cells[5].empty()) c.pre = std::stod(cells[5]);
    c.jac = std::stod(cells[6]);
    r.cases.push_back(c);
  }
  return r;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace swdl
