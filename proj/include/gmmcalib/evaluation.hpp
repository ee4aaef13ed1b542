#pragma once

// Calibration metrics: transformation-error decomposition, per-pair mean
// distance error, range profile of the global point error, miscalibration
// counts and CSV/JSON tables.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gmmcalib/calibration.hpp"
#include "gmmcalib/cloud_io.hpp"

namespace gmmcalib {

inline constexpr double kMiscalibrationThreshold = 0.1;

/// delta = estimate^-1 * ground_truth as Euler angles and translation.
inline EulerPose transformation_error(const RigidTransform& ground_truth, const RigidTransform& estimate) {
  return transform_to_euler(compose(inverse(estimate), ground_truth));
}

/// Signed per-axis mean of T_gt x - T_est x over the cloud.
inline Vec3 mean_distance_error(const PointCloud& cloud, const RigidTransform& ground_truth,
                                const RigidTransform& estimate) {
  if (cloud.empty()) throw Error(ErrorKind::EmptyCloud, "mean distance error of an empty cloud");
  CompensatedSum sx, sy, sz;
  for (const auto& p : cloud.points) {
    const Vec3 d = ground_truth.apply(p) - estimate.apply(p);
    sx.add(d.x());
    sy.add(d.y());
    sz.add(d.z());
  }
  const double n = static_cast<double>(cloud.size());
  return {sx.value() / n, sy.value() / n, sz.value() / n};
}

struct GlobalFit {
  double slope = 0.0;      // m per m of x-distance
  double intercept = 0.0;  // m
  double std_lower = 0.0;  // intercept - residual standard deviation
  double std_upper = 0.0;  // intercept + residual standard deviation
};

struct RangeSample {
  double x = 0.0;
  double error = 0.0;
};

struct RangeProfile {
  std::vector<RangeSample> points;
  std::vector<RangeSample> bins;  // mean x and mean error per non-empty bin
  GlobalFit fit;
};

struct RangeProfileOptions {
  double bin_width = 0.5;
  /// Keep only points within this azimuth (degrees) of the +x axis.
  double sector_half_angle = 180.0;
};

/// Fills bins and fit from profile.points (which may pool several clouds).
inline void fit_range_profile(RangeProfile& profile, double bin_width = 0.5) {
  if (profile.points.empty()) throw Error(ErrorKind::EmptyCloud, "empty range profile");
  if (!(bin_width > 0.0)) throw Error(ErrorKind::InvalidArgument, "bin width must be positive");
  profile.bins.clear();

  std::map<long long, std::pair<CompensatedSum, CompensatedSum>> acc;
  std::map<long long, std::size_t> counts;
  for (const auto& s : profile.points) {
    const auto key = static_cast<long long>(std::floor(s.x / bin_width));
    acc[key].first.add(s.x);
    acc[key].second.add(s.error);
    ++counts[key];
  }
  for (const auto& [key, sums] : acc) {
    const double n = static_cast<double>(counts[key]);
    profile.bins.push_back({sums.first.value() / n, sums.second.value() / n});
  }

  GlobalFit fit;
  const double nb = static_cast<double>(profile.bins.size());
  double mx = 0.0, my = 0.0;
  for (const auto& b : profile.bins) {
    mx += b.x;
    my += b.error;
  }
  mx /= nb;
  my /= nb;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& b : profile.bins) {
    sxx += (b.x - mx) * (b.x - mx);
    sxy += (b.x - mx) * (b.error - my);
  }
  fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (const auto& s : profile.points) {
    const double r = s.error - (fit.intercept + fit.slope * s.x);
    ss += r * r;
  }
  const double sd = std::sqrt(ss / static_cast<double>(profile.points.size()));
  fit.std_lower = fit.intercept - sd;
  fit.std_upper = fit.intercept + sd;
  profile.fit = fit;
}

/// L2 error |T_gt x - T_est x| against each point's x coordinate. The line
/// is an ordinary least-squares fit to the bin means; the bounds are offset
/// by the standard deviation of the per-point residuals about that line.
inline RangeProfile global_range_profile(const PointCloud& full_cloud, const RigidTransform& ground_truth,
                                         const RigidTransform& estimate, const RangeProfileOptions& options = {}) {
  if (full_cloud.empty()) throw Error(ErrorKind::EmptyCloud, "range profile of an empty cloud");
  if (!(options.bin_width > 0.0)) throw Error(ErrorKind::InvalidArgument, "bin width must be positive");
  RangeProfile profile;
  const double cos_limit = std::cos(std::min(options.sector_half_angle, 180.0) * std::numbers::pi / 180.0);
  for (const auto& p : full_cloud.points) {
    const double r = std::hypot(p.x(), p.y());
    if (options.sector_half_angle < 180.0 && !(r > 0.0 && p.x() / r >= cos_limit)) continue;
    profile.points.push_back({p.x(), (ground_truth.apply(p) - estimate.apply(p)).norm()});
  }
  if (profile.points.empty()) throw Error(ErrorKind::EmptyCloud, "no point inside the range-profile sector");
  fit_range_profile(profile, options.bin_width);
  return profile;
}

/// Pairs whose largest per-axis |mean distance error| exceeds the threshold.
inline std::size_t count_miscalibrations(std::span<const Vec3> distance_errors,
                                         double threshold = kMiscalibrationThreshold) {
  if (!(threshold > 0.0)) throw Error(ErrorKind::InvalidArgument, "miscalibration threshold must be positive");
  return static_cast<std::size_t>(std::count_if(distance_errors.begin(), distance_errors.end(), [&](const Vec3& d) {
    return d.cwiseAbs().maxCoeff() > threshold;
  }));
}

/// Metrics of one algorithm. Pairs are numbered consecutively across every
/// error sample appended to the table, in append order.
struct MetricsTable {
  std::string algorithm;
  std::vector<std::size_t> pair_indices;
  std::vector<EulerPose> per_pair_delta;
  std::vector<Vec3> distance_errors;
  EulerPose mean_delta;                 // mean of absolute components
  Vec3 mean_distance = Vec3::Zero();    // signed per-axis mean
  std::optional<GlobalFit> global_fit;
  std::size_t miscalibration_count = 0;
  std::size_t failed_pairs = 0;
  std::size_t n_pairs = 0;
  double threshold = kMiscalibrationThreshold;
};

/// Recomputes n_pairs, mean_delta, mean_distance and the miscalibration count.
inline void summarize(MetricsTable& table) {
  table.n_pairs = table.per_pair_delta.size();
  table.mean_delta = {};
  table.mean_distance = Vec3::Zero();
  if (table.n_pairs > 0) {
    double a[6] = {0, 0, 0, 0, 0, 0};
    for (const auto& d : table.per_pair_delta) {
      a[0] += std::abs(d.roll);
      a[1] += std::abs(d.pitch);
      a[2] += std::abs(d.yaw);
      a[3] += std::abs(d.x);
      a[4] += std::abs(d.y);
      a[5] += std::abs(d.z);
    }
    const double n = static_cast<double>(table.n_pairs);
    table.mean_delta = {a[0] / n, a[1] / n, a[2] / n, a[3] / n, a[4] / n, a[5] / n};
    for (const auto& d : table.distance_errors) table.mean_distance += d;
    table.mean_distance /= n;
  }
  table.miscalibration_count = count_miscalibrations(table.distance_errors, table.threshold);
}

/// Appends every solved pair of a report. Distance errors use the
/// second-sensor observation of each pair; failed pairs are only counted.
inline void append_report(MetricsTable& table, const CalibrationReport& report, const ObservationSet& pairs,
                          const RigidTransform& ground_truth) {
  if (report.per_pair_transforms.size() != pairs.pair_count()) {
    throw Error(ErrorKind::MisalignedBookkeeping, "report has " + std::to_string(report.per_pair_transforms.size()) +
                                                      " pairs, observations have " +
                                                      std::to_string(pairs.pair_count()));
  }
  if (table.algorithm.empty()) table.algorithm = std::string(to_string(report.algorithm));
  std::size_t next = table.per_pair_delta.size() + table.failed_pairs;
  for (std::size_t j = 0; j < pairs.pair_count(); ++j, ++next) {
    if (report.pair_failed(j)) {
      ++table.failed_pairs;
      continue;
    }
    const RigidTransform& est = report.per_pair_transforms[j];
    table.pair_indices.push_back(next);
    table.per_pair_delta.push_back(transformation_error(ground_truth, est));
    table.distance_errors.push_back(mean_distance_error(pairs.second(j), ground_truth, est));
  }
  summarize(table);
}

enum class MetricsFormat { Csv, Json };

inline constexpr const char* kMetricsCsvHeader =
    "algorithm,pair_index,d_roll,d_pitch,d_yaw,dx,dy,dz,dist_x,dist_y,dist_z";

inline std::string metrics_to_csv(const MetricsTable& table) {
  std::string out = std::string(kMetricsCsvHeader) + "\n";
  for (std::size_t r = 0; r < table.per_pair_delta.size(); ++r) {
    const EulerPose& d = table.per_pair_delta[r];
    const Vec3& e = table.distance_errors[r];
    out += table.algorithm + "," + std::to_string(table.pair_indices[r]);
    for (double v : {d.roll, d.pitch, d.yaw, d.x, d.y, d.z, e.x(), e.y(), e.z()}) out += "," + format_number(v);
    out += "\n";
  }
  return out;
}

inline MetricsTable metrics_from_csv(const std::string& text, const std::string& source = "<csv>") {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  MetricsTable table;
  if (!std::getline(in, line) || (++line_no, line != kMetricsCsvHeader)) {
    throw Error(ErrorKind::ParseError, source + ":1: expected header '" + std::string(kMetricsCsvHeader) + "'");
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 11) {
      throw Error(ErrorKind::ParseError, source + ":" + std::to_string(line_no) + ": expected 11 columns");
    }
    if (table.algorithm.empty()) table.algorithm = cells[0];
    if (cells[0] != table.algorithm) {
      throw Error(ErrorKind::ParseError, source + ":" + std::to_string(line_no) + ": mixed algorithms in one table");
    }
    double v[9];
    try {
      table.pair_indices.push_back(std::stoull(cells[1]));
      for (int i = 0; i < 9; ++i) v[i] = std::stod(cells[2 + i]);
    } catch (const std::exception&) {
      throw Error(ErrorKind::ParseError, source + ":" + std::to_string(line_no) + ": malformed number");
    }
    table.per_pair_delta.push_back({v[0], v[1], v[2], v[3], v[4], v[5]});
    table.distance_errors.emplace_back(v[6], v[7], v[8]);
  }
  summarize(table);
  return table;
}

namespace detail {

inline nlohmann::ordered_json pose_json(const EulerPose& p) {
  return {{"roll", p.roll}, {"pitch", p.pitch}, {"yaw", p.yaw}, {"x", p.x}, {"y", p.y}, {"z", p.z}};
}

inline EulerPose pose_from_json(const nlohmann::json& j) {
  return {j.at("roll").get<double>(), j.at("pitch").get<double>(), j.at("yaw").get<double>(),
          j.at("x").get<double>(),    j.at("y").get<double>(),     j.at("z").get<double>()};
}

inline nlohmann::ordered_json vec_json(const Vec3& v) { return nlohmann::ordered_json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorKind::ParseError, "expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace detail

inline nlohmann::ordered_json metrics_to_json(const MetricsTable& table) {
  nlohmann::ordered_json j;
  j["algorithm"] = table.algorithm;
  j["n_pairs"] = table.n_pairs;
  j["failed_pairs"] = table.failed_pairs;
  j["miscalibration_threshold"] = table.threshold;
  j["miscalibration_count"] = table.miscalibration_count;
  j["mean_delta"] = detail::pose_json(table.mean_delta);
  j["mean_distance"] = detail::vec_json(table.mean_distance);
  if (table.global_fit) {
    const GlobalFit& f = *table.global_fit;
    j["global_fit"] = {{"slope", f.slope}, {"intercept", f.intercept}, {"std_lower", f.std_lower},
                       {"std_upper", f.std_upper}};
  } else {
    j["global_fit"] = nullptr;
  }
  j["pair_index"] = table.pair_indices;
  auto deltas = nlohmann::ordered_json::array();
  for (const auto& d : table.per_pair_delta) deltas.push_back(detail::pose_json(d));
  j["per_pair_delta"] = deltas;
  auto dists = nlohmann::ordered_json::array();
  for (const auto& d : table.distance_errors) dists.push_back(detail::vec_json(d));
  j["distance_errors"] = dists;
  return j;
}

inline MetricsTable metrics_from_json(const nlohmann::json& j) {
  try {
    MetricsTable table;
    table.algorithm = j.at("algorithm").get<std::string>();
    table.threshold = j.at("miscalibration_threshold").get<double>();
    table.failed_pairs = j.at("failed_pairs").get<std::size_t>();
    table.pair_indices = j.at("pair_index").get<std::vector<std::size_t>>();
    for (const auto& d : j.at("per_pair_delta")) table.per_pair_delta.push_back(detail::pose_from_json(d));
    for (const auto& d : j.at("distance_errors")) table.distance_errors.push_back(detail::vec_from_json(d));
    if (!j.at("global_fit").is_null()) {
      const auto& f = j.at("global_fit");
      table.global_fit = GlobalFit{f.at("slope").get<double>(), f.at("intercept").get<double>(),
                                   f.at("std_lower").get<double>(), f.at("std_upper").get<double>()};
    }
    if (table.pair_indices.size() != table.per_pair_delta.size() ||
        table.distance_errors.size() != table.per_pair_delta.size()) {
      throw Error(ErrorKind::ParseError, "metrics lists differ in length");
    }
    summarize(table);
    return table;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("malformed metrics JSON: ") + e.what());
  }
}

inline void export_metrics(const MetricsTable& table, const std::filesystem::path& path, MetricsFormat format) {
  write_text_atomically(path, format == MetricsFormat::Csv ? metrics_to_csv(table) : metrics_to_json(table).dump(2) + "\n");
}

inline MetricsTable read_metrics(const std::filesystem::path& path, MetricsFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  if (format == MetricsFormat::Csv) return metrics_from_csv(buf.str(), path.string());
  try {
    return metrics_from_json(nlohmann::json::parse(buf.str()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
}

inline constexpr const char* kSummaryCsvHeader =
    "algorithm,d_roll,d_pitch,d_yaw,dx,dy,dz,dist_x,dist_y,dist_z,miscalibrations,pairs,failed_pairs";

/// Cross-algorithm summary: mean absolute transformation errors, signed mean
/// distance errors and miscalibration counts, one row per table.
inline std::string summary_csv(std::span<const MetricsTable> tables) {
  std::string out = std::string(kSummaryCsvHeader) + "\n";
  for (const auto& t : tables) {
    const EulerPose& d = t.mean_delta;
    out += t.algorithm;
    for (double v : {d.roll, d.pitch, d.yaw, d.x, d.y, d.z, t.mean_distance.x(), t.mean_distance.y(),
                     t.mean_distance.z()}) {
      out += "," + format_number(v);
    }
    out += "," + std::to_string(t.miscalibration_count) + "," + std::to_string(t.n_pairs) + "," +
           std::to_string(t.failed_pairs) + "\n";
  }
  return out;
}

}  // namespace gmmcalib
