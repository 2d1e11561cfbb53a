#pragma once

// Segmentation metrics (Dice, HD95, ASD, accuracy, precision, Jaccard),
// surface extraction, percentile bootstrap confidence intervals, and run
// aggregation with JSON/CSV reports.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "swdl/volume.hpp"

namespace swdl {

// Foreground voxels with at least one background 6-neighbor (out-of-grid
// counts as background).
std::vector<std::array<int, 3>> surface_voxels(const Mask& m);

double dice(const Mask& s, const Mask& g);       // Dice(empty, empty) = 1
double jaccard(const Mask& s, const Mask& g);
double accuracy(const Mask& s, const Mask& g);
double precision(const Mask& s, const Mask& g);  // empty prediction is an error

struct SurfaceDistanceOptions {
  Spacing3 spacing{1, 1, 1};
  bool use_spacing = false;  // default: voxel units
};

// Max of the two directed 95th-percentile surface distances (linear
// interpolation between order statistics). Both masks must be nonempty.
double hd95(const Mask& s, const Mask& g, const SurfaceDistanceOptions& opts = {});

// Symmetric average surface distance. Both masks must be nonempty.
double asd(const Mask& s, const Mask& g, const SurfaceDistanceOptions& opts = {});

// Seeded percentile bootstrap of the mean.
std::pair<double, double> bootstrap_ci(const std::vector<double>& values, double level = 0.95,
                                       int resamples = 10000, std::uint64_t seed = 367);

struct CaseMetrics {
  std::string id;
  double dice = 0, acc = 0, jac = 0;
  std::optional<double> pre;        // missing when the prediction is empty
  std::optional<double> hd95, asd;  // missing when either mask is empty
  std::string missing_reason;
};

struct MetricSummary {
  double mean = 0;
  double ci_lo = 0, ci_hi = 0;
  int n = 0;  // cases with a defined value
};

struct MetricsReport {
  std::vector<CaseMetrics> cases;
  MetricSummary dice, hd95, asd, acc, pre, jac;
};

CaseMetrics evaluate_case(const Mask& pred, const Mask& gt, const std::string& id = "",
                          const SurfaceDistanceOptions& opts = {});
MetricsReport evaluate_run(const std::vector<CaseMetrics>& cases, std::uint64_t ci_seed = 367);

std::string report_to_json(const MetricsReport& r);
std::string report_to_csv(const MetricsReport& r);
MetricsReport report_from_csv(const std::string& csv_text);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace swdl
