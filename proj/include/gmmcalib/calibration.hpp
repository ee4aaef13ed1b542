#pragma once

// Calibration recovery from registration results, aggregation over pairs and
// the geometric-prior plausibility check of a reconstructed mixture.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gmmcalib/gmm_registration.hpp"
#include "gmmcalib/icp.hpp"
#include "gmmcalib/se3.hpp"

namespace gmmcalib {

enum class Algorithm { Gmm, PointIcp, PlaneIcp, Gicp };

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Gmm: return "gmm";
    case Algorithm::PointIcp: return "point_icp";
    case Algorithm::PlaneIcp: return "plane_icp";
    case Algorithm::Gicp: return "gicp";
  }
  return "gmm";
}

/// Accepts report names ("point_icp") and the short CLI names ("point").
inline Algorithm algorithm_from_string(std::string_view s) {
  if (s == "gmm") return Algorithm::Gmm;
  if (s == "point_icp" || s == "point") return Algorithm::PointIcp;
  if (s == "plane_icp" || s == "plane") return Algorithm::PlaneIcp;
  if (s == "gicp") return Algorithm::Gicp;
  throw Error(ErrorKind::InvalidArgument, "unknown algorithm '" + std::string(s) + "'");
}

inline IcpVariant icp_variant_of(Algorithm a) {
  switch (a) {
    case Algorithm::PointIcp: return IcpVariant::Point;
    case Algorithm::PlaneIcp: return IcpVariant::Plane;
    case Algorithm::Gicp: return IcpVariant::Gicp;
    case Algorithm::Gmm: break;
  }
  throw Error(ErrorKind::InvalidArgument, "gmm is not an ICP variant");
}

inline Algorithm algorithm_of(IcpVariant v) {
  switch (v) {
    case IcpVariant::Point: return Algorithm::PointIcp;
    case IcpVariant::Plane: return Algorithm::PlaneIcp;
    case IcpVariant::Gicp: return Algorithm::Gicp;
  }
  return Algorithm::PointIcp;
}

struct PairFailure {
  std::size_t pair_index = 0;
  ErrorKind kind = ErrorKind::NoCorrespondences;
  std::string message;
};

struct CalibrationReport {
  Algorithm algorithm = Algorithm::Gmm;
  /// One entry per pair; maps first-sensor points onto the second sensor's
  /// erroneous frame. Entries of failed pairs are identity placeholders.
  std::vector<RigidTransform> per_pair_transforms;
  std::vector<EulerPose> per_pair_euler;
  std::vector<PairFailure> failures;
  RigidTransform mean_transform;
  std::optional<GmmModel> reconstruction;
  std::optional<double> plausibility;

  bool pair_failed(std::size_t j) const {
    return std::any_of(failures.begin(), failures.end(), [j](const PairFailure& f) { return f.pair_index == j; });
  }

  /// Transforms of the pairs that produced a solution, in pair order.
  std::vector<RigidTransform> successful_transforms() const {
    std::vector<RigidTransform> out;
    for (std::size_t j = 0; j < per_pair_transforms.size(); ++j) {
      if (!pair_failed(j)) out.push_back(per_pair_transforms[j]);
    }
    return out;
  }
};

/// Pair transform from the two registrations into the latent frame:
/// first-sensor observation -> {R} -> second-sensor observation.
inline RigidTransform pair_calibration(const RigidTransform& first_to_latent, const RigidTransform& second_to_latent) {
  return compose(inverse(second_to_latent), first_to_latent);
}

inline CalibrationReport recover_calibration_gmm(const JointRegistrationResult& result, const ObservationSet& pairs) {
  if (result.transforms.size() != pairs.size()) {
    throw Error(ErrorKind::MisalignedBookkeeping,
                "registration produced " + std::to_string(result.transforms.size()) + " transforms for " +
                    std::to_string(pairs.size()) + " observations");
  }
  CalibrationReport report;
  report.algorithm = Algorithm::Gmm;
  report.per_pair_transforms.reserve(pairs.pair_count());
  for (std::size_t j = 0; j < pairs.pair_count(); ++j) {
    const auto [a, b] = pairs.pair(j);
    if (a >= result.transforms.size() || b >= result.transforms.size() ||
        pairs.observation(a).sensor_id != pairs.sensors()[0] || pairs.observation(b).sensor_id != pairs.sensors()[1]) {
      throw Error(ErrorKind::MisalignedBookkeeping, "pair " + std::to_string(j) + " does not index one observation per sensor");
    }
    report.per_pair_transforms.push_back(pair_calibration(result.transforms[a], result.transforms[b]));
  }
  for (const auto& t : report.per_pair_transforms) report.per_pair_euler.push_back(transform_to_euler(t));
  report.mean_transform = mean_transform(report.per_pair_transforms);
  report.reconstruction = result.model;
  return report;
}

inline CalibrationReport calibrate_gmm(const ObservationSet& pairs, const GmmConfig& config) {
  return recover_calibration_gmm(joint_register(pairs, config), pairs);
}

/// Registers every pair with the second-sensor observation as source and the
/// first-sensor observation as target. The pair transform is the inverse of
/// the source-to-target result. Pairs run concurrently; hard failures are
/// recorded and left out of the mean.
inline CalibrationReport recover_calibration_icp(IcpVariant variant, const ObservationSet& pairs, IcpConfig config) {
  config.variant = variant;
  config.validate();
  const std::size_t n = pairs.pair_count();
  std::vector<std::optional<RigidTransform>> solved(n);
  std::vector<std::optional<PairFailure>> failed(n);
  parallel_for(n, [&](std::size_t j) {
    try {
      solved[j] = inverse(run_icp(pairs.second(j), pairs.first(j), config).transform);
    } catch (const Error& e) {
      failed[j] = PairFailure{j, e.kind(), e.what()};
    }
  });

  CalibrationReport report;
  report.algorithm = algorithm_of(variant);
  for (std::size_t j = 0; j < n; ++j) {
    report.per_pair_transforms.push_back(solved[j].value_or(RigidTransform::identity()));
    report.per_pair_euler.push_back(transform_to_euler(report.per_pair_transforms.back()));
    if (failed[j]) report.failures.push_back(*failed[j]);
  }
  const auto ok = report.successful_transforms();
  if (ok.empty()) {
    const PairFailure& first = report.failures.front();
    throw Error(first.kind, "every pair failed to register; first failure: " + first.message);
  }
  report.mean_transform = mean_transform(ok);
  return report;
}

inline constexpr double kPlausibilityThreshold = 0.05;

/// Components with weight below 0.25/M are ignored by the plausibility check.
inline std::vector<Vec3> pruned_means(const GmmModel& model) {
  std::vector<Vec3> out;
  if (model.size() == 0) return out;
  const double threshold = 0.25 / static_cast<double>(model.size());
  for (std::size_t m : model.surviving(threshold)) out.push_back(model.means[m]);
  return out;
}

namespace detail {

inline double percentile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline std::vector<double> nearest_distances(std::span<const Vec3> from, const SpatialIndex& to) {
  std::vector<double> d;
  d.reserve(from.size());
  for (const auto& p : from) d.push_back(std::sqrt(to.nearest(p).squared_distance));
  return d;
}

}  // namespace detail

/// Symmetric 95th-percentile nearest-neighbor distance (meters) between the
/// surviving component means and the prior, after rigidly aligning the means
/// onto the prior with point-to-point ICP (started from centroid alignment).
inline double plausibility_check(const GmmModel& model, const PointCloud& prior) {
  const std::vector<Vec3> means = pruned_means(model);
  if (means.empty()) throw Error(ErrorKind::EmptyModel, "no mixture component survives pruning");
  if (prior.empty()) throw Error(ErrorKind::EmptyCloud, "empty geometric prior");

  PointCloud source;
  source.points = means;
  Vec3 cs = Vec3::Zero();
  Vec3 ct = Vec3::Zero();
  for (const auto& p : means) cs += p;
  for (const auto& p : prior.points) ct += p;
  cs /= static_cast<double>(means.size());
  ct /= static_cast<double>(prior.size());

  IcpConfig config;
  config.variant = IcpVariant::Point;
  config.max_correspondence_distance = std::numeric_limits<double>::infinity();
  config.max_iterations = 200;
  config.transform_tolerance = 1e-10;
  config.initial = RigidTransform::from_translation(ct - cs);
  RigidTransform alignment = config.initial;
  if (means.size() >= 3) {
    try {
      alignment = icp_point_to_point(source, prior, config).transform;
    } catch (const Error&) {
      // degenerate means (collinear); centroid alignment stands
    }
  }

  const PointCloud aligned = transformed(source, alignment);
  const SpatialIndex prior_index(prior);
  const SpatialIndex model_index(aligned);
  const double forward = detail::percentile(detail::nearest_distances(aligned.points, prior_index), 0.95);
  const double backward = detail::percentile(detail::nearest_distances(prior.points, model_index), 0.95);
  return std::max(forward, backward);
}

}  // namespace gmmcalib
