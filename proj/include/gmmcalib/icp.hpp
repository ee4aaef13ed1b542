#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "gmmcalib/alignment.hpp"
#include "gmmcalib/point_cloud.hpp"

namespace gmmcalib {

enum class IcpVariant { Point, Plane, Gicp };

inline std::string_view to_string(IcpVariant v) {
  switch (v) {
    case IcpVariant::Point: return "point";
    case IcpVariant::Plane: return "plane";
    case IcpVariant::Gicp: return "gicp";
  }
  return "point";
}

inline IcpVariant icp_variant_from_string(std::string_view s) {
  if (s == "point") return IcpVariant::Point;
  if (s == "plane") return IcpVariant::Plane;
  if (s == "gicp") return IcpVariant::Gicp;
  throw Error(ErrorKind::InvalidArgument, "unknown ICP variant '" + std::string(s) + "'");
}

struct IcpConfig {
  IcpVariant variant = IcpVariant::Point;
  double max_correspondence_distance = 1.0;
  std::size_t max_iterations = 100;
  double transform_tolerance = 1e-6;
  std::size_t normal_k = kDefaultNormalK;
  std::size_t covariance_k = 20;
  double gicp_epsilon = 1e-3;
  RigidTransform initial = RigidTransform::identity();

  void validate() const {
    if (!(max_correspondence_distance > 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "max_correspondence_distance must be positive");
    }
    if (max_iterations < 1) throw Error(ErrorKind::InvalidArgument, "max_iterations must be >= 1");
  }
};

struct PairwiseResult {
  RigidTransform transform;  // source -> target
  double fitness = 0.0;      // inlier fraction of the source
  double rmse = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  /// Gated sum of squared residuals at the start of each iteration.
  std::vector<double> objective_trace;
};

namespace detail {

struct Correspondences {
  std::vector<std::size_t> source;
  std::vector<std::size_t> target;
  double sum_squared = 0.0;
};

inline Correspondences find_correspondences(const PointCloud& source, const RigidTransform& t,
                                            const SpatialIndex& target, double gate) {
  const double gate2 = gate * gate;
  std::vector<Neighbor> nn(source.size());
  parallel_for(source.size(), [&](std::size_t k) { nn[k] = target.nearest(t.apply(source.points[k])); });
  Correspondences c;
  for (std::size_t k = 0; k < source.size(); ++k) {
    if (nn[k].squared_distance <= gate2) {
      c.source.push_back(k);
      c.target.push_back(nn[k].index);
      c.sum_squared += nn[k].squared_distance;
    }
  }
  if (c.source.empty()) throw Error(ErrorKind::NoCorrespondences, "no correspondences within the gate");
  return c;
}

inline double transform_change(const RigidTransform& a, const RigidTransform& b) {
  return (a.rotation - b.rotation).norm() + (a.translation - b.translation).norm();
}

// Left-multiplied increment exp([omega]x) with translation delta.
inline RigidTransform increment(const Eigen::Matrix<double, 6, 1>& xi) {
  const Vec3 omega = xi.head<3>();
  const double angle = omega.norm();
  Mat3 r = Mat3::Identity();
  if (angle > 0.0) r = Eigen::AngleAxisd(angle, omega / angle).toRotationMatrix();
  return {r, xi.tail<3>()};
}

inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

// Solves H x = -g over the observable subspace of H. Directions whose
// eigenvalue falls below 1e-12 of the largest stay at zero; fewer than
// three observable directions is treated as ill-conditioned.
inline Eigen::Matrix<double, 6, 1> solve_normal_equations(const Eigen::Matrix<double, 6, 6>& h,
                                                          const Eigen::Matrix<double, 6, 1>& g) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(h);
  const auto& ev = eig.eigenvalues();
  const double top = ev(5);
  if (!(top > 0.0)) throw Error(ErrorKind::IllConditioned, "normal equations are singular");
  Eigen::Matrix<double, 6, 1> x = Eigen::Matrix<double, 6, 1>::Zero();
  int observable = 0;
  for (int i = 0; i < 6; ++i) {
    if (ev(i) <= top * 1e-12) continue;
    ++observable;
    const auto v = eig.eigenvectors().col(i);
    x -= v * (v.dot(g) / ev(i));
  }
  if (observable < 3) {
    throw Error(ErrorKind::IllConditioned, "normal equations have condition number above 1e12");
  }
  return x;
}

inline void finish(const PointCloud& source, const SpatialIndex& target, double gate, PairwiseResult& result) {
  const double gate2 = gate * gate;
  std::size_t inliers = 0;
  double sum = 0.0;
  for (const auto& p : source.points) {
    const auto nn = target.nearest(result.transform.apply(p));
    if (nn.squared_distance <= gate2) {
      ++inliers;
      sum += nn.squared_distance;
    }
  }
  result.fitness = static_cast<double>(inliers) / static_cast<double>(source.size());
  result.rmse = inliers > 0 ? std::sqrt(sum / static_cast<double>(inliers)) : 0.0;
}

// Plane-regularized covariance per point: eigenvalues (eps, 1, 1).
inline std::vector<Mat3> gicp_covariances(const PointCloud& cloud, const SpatialIndex& index, std::size_t k,
                                          double epsilon) {
  std::vector<Mat3> out(cloud.size());
  parallel_for(cloud.size(), [&](std::size_t i) {
    const auto nn = index.knn(cloud.points[i], k);
    Vec3 mean = Vec3::Zero();
    for (const auto& n : nn) mean += cloud.points[n.index];
    mean /= static_cast<double>(nn.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& n : nn) {
      const Vec3 d = cloud.points[n.index] - mean;
      cov.noalias() += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const Mat3 v = eig.eigenvectors();
    out[i] = v * Vec3(epsilon, 1.0, 1.0).asDiagonal() * v.transpose();
  });
  return out;
}

}  // namespace detail

/// Point-to-point ICP (closed-form SVD step per correspondence set).
inline PairwiseResult icp_point_to_point(const PointCloud& source, const PointCloud& target, const IcpConfig& config) {
  config.validate();
  if (source.size() < 3 || target.size() < 3) throw Error(ErrorKind::TooFewPoints, "ICP needs >= 3 points per cloud");
  const SpatialIndex index(target);
  PairwiseResult result;
  result.transform = config.initial;
  std::vector<Vec3> src, tgt;
  for (std::size_t it = 0; it < config.max_iterations; ++it) {
    const auto corr = detail::find_correspondences(source, result.transform, index, config.max_correspondence_distance);
    result.objective_trace.push_back(corr.sum_squared);
    src.clear();
    tgt.clear();
    for (std::size_t c = 0; c < corr.source.size(); ++c) {
      src.push_back(source.points[corr.source[c]]);
      tgt.push_back(index.point(corr.target[c]));
    }
    const RigidTransform next = rigid_alignment(src, tgt, ErrorKind::DegenerateGeometry);
    const double change = detail::transform_change(next, result.transform);
    result.transform = next;
    result.iterations = it + 1;
    if (change < config.transform_tolerance) {
      result.converged = true;
      break;
    }
  }
  detail::finish(source, index, config.max_correspondence_distance, result);
  return result;
}

/// Point-to-plane ICP: linearized 6x6 solve per iteration; target normals
/// are estimated with normal_k neighbors when absent.
inline PairwiseResult icp_point_to_plane(const PointCloud& source, const PointCloud& target, const IcpConfig& config) {
  config.validate();
  if (source.size() < 3 || target.size() < 3) throw Error(ErrorKind::TooFewPoints, "ICP needs >= 3 points per cloud");
  const PointCloud with_normals = target.normals ? target : estimate_normals(target, config.normal_k);
  const auto& normals = *with_normals.normals;
  const SpatialIndex index(with_normals);
  PairwiseResult result;
  result.transform = config.initial;
  for (std::size_t it = 0; it < config.max_iterations; ++it) {
    const auto corr = detail::find_correspondences(source, result.transform, index, config.max_correspondence_distance);
    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    double objective = 0.0;
    for (std::size_t c = 0; c < corr.source.size(); ++c) {
      const Vec3 y = result.transform.apply(source.points[corr.source[c]]);
      const Vec3& n = normals[corr.target[c]];
      const double r = n.dot(y - index.point(corr.target[c]));
      Eigen::Matrix<double, 6, 1> j;
      j.head<3>() = y.cross(n);
      j.tail<3>() = n;
      h.noalias() += j * j.transpose();
      g += j * r;
      objective += r * r;
    }
    result.objective_trace.push_back(objective);
    const auto xi = detail::solve_normal_equations(h, g);
    RigidTransform next = compose(detail::increment(xi), result.transform);
    next.rotation = project_to_rotation(next.rotation);
    const double change = detail::transform_change(next, result.transform);
    result.transform = next;
    result.iterations = it + 1;
    if (change < config.transform_tolerance) {
      result.converged = true;
      break;
    }
  }
  detail::finish(source, index, config.max_correspondence_distance, result);
  return result;
}

/// Generalized ICP: distribution-to-distribution objective
/// sum d^T (C_t + R C_s R^T)^{-1} d, one Gauss-Newton step per
/// correspondence update over a left SE(3) perturbation.
inline PairwiseResult icp_generalized(const PointCloud& source, const PointCloud& target, const IcpConfig& config) {
  config.validate();
  if (source.size() < config.covariance_k || target.size() < config.covariance_k || config.covariance_k < 3) {
    throw Error(ErrorKind::TooFewPoints, "GICP needs >= covariance_k points per cloud");
  }
  const SpatialIndex source_index(source);
  const SpatialIndex index(target);
  const auto cov_s = detail::gicp_covariances(source, source_index, config.covariance_k, config.gicp_epsilon);
  const auto cov_t = detail::gicp_covariances(target, index, config.covariance_k, config.gicp_epsilon);
  PairwiseResult result;
  result.transform = config.initial;
  for (std::size_t it = 0; it < config.max_iterations; ++it) {
    const auto corr = detail::find_correspondences(source, result.transform, index, config.max_correspondence_distance);
    const Mat3& r = result.transform.rotation;
    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    double objective = 0.0;
    for (std::size_t c = 0; c < corr.source.size(); ++c) {
      const Vec3 y = result.transform.apply(source.points[corr.source[c]]);
      const Vec3 d = y - index.point(corr.target[c]);
      const Mat3 info = (cov_t[corr.target[c]] + r * cov_s[corr.source[c]] * r.transpose()).inverse();
      Eigen::Matrix<double, 3, 6> j;
      j.leftCols<3>() = -detail::skew(y);
      j.rightCols<3>() = Mat3::Identity();
      h.noalias() += j.transpose() * info * j;
      g.noalias() += j.transpose() * (info * d);
      objective += d.dot(info * d);
    }
    result.objective_trace.push_back(objective);
    const auto xi = detail::solve_normal_equations(h, g);
    RigidTransform next = compose(detail::increment(xi), result.transform);
    next.rotation = project_to_rotation(next.rotation);
    const double change = detail::transform_change(next, result.transform);
    result.transform = next;
    result.iterations = it + 1;
    if (change < config.transform_tolerance) {
      result.converged = true;
      break;
    }
  }
  detail::finish(source, index, config.max_correspondence_distance, result);
  return result;
}

inline PairwiseResult run_icp(const PointCloud& source, const PointCloud& target, const IcpConfig& config) {
  switch (config.variant) {
    case IcpVariant::Point: return icp_point_to_point(source, target, config);
    case IcpVariant::Plane: return icp_point_to_plane(source, target, config);
    case IcpVariant::Gicp: return icp_generalized(source, target, config);
  }
  return icp_point_to_point(source, target, config);
}

}  // namespace gmmcalib
