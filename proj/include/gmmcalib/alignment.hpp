#pragma once

#include <Eigen/Dense>

#include <span>

#include "gmmcalib/se3.hpp"

namespace gmmcalib {

/// Weighted closed-form rigid alignment (Kabsch/Umeyama without scale).
///
/// Returns T minimizing sum_k w_k * |T(source_k) - target_k|^2. Weights must
/// be non-negative with a positive sum. Throws `failure_kind` when the
/// weighted source covariance has rank < 2, i.e. the points are collinear
/// or coincident and the rotation is not determined.
inline RigidTransform weighted_rigid_alignment(std::span<const Vec3> source, std::span<const Vec3> target,
                                               std::span<const double> weights,
                                               ErrorKind failure_kind = ErrorKind::DegenerateAlignment) {
  if (source.size() != target.size() || source.size() != weights.size()) {
    throw Error(ErrorKind::InvalidArgument, "alignment inputs differ in length");
  }
  double wsum = 0.0;
  Vec3 src_c = Vec3::Zero();
  Vec3 tgt_c = Vec3::Zero();
  for (std::size_t k = 0; k < source.size(); ++k) {
    wsum += weights[k];
    src_c += weights[k] * source[k];
    tgt_c += weights[k] * target[k];
  }
  if (!(wsum > 0.0)) throw Error(failure_kind, "alignment weights sum to zero");
  src_c /= wsum;
  tgt_c /= wsum;

  Mat3 cross = Mat3::Zero();
  Mat3 src_cov = Mat3::Zero();
  for (std::size_t k = 0; k < source.size(); ++k) {
    const Vec3 ds = source[k] - src_c;
    cross.noalias() += weights[k] * (target[k] - tgt_c) * ds.transpose();
    src_cov.noalias() += weights[k] * ds * ds.transpose();
  }

  Eigen::SelfAdjointEigenSolver<Mat3> eig(src_cov / wsum, Eigen::EigenvaluesOnly);
  const Vec3 ev = eig.eigenvalues();  // ascending
  if (!(ev(1) > 1e-12 * std::max(ev(2), 1e-300))) {
    throw Error(failure_kind, "weighted point covariance has rank < 2");
  }

  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Vec3 d(1.0, 1.0, (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0);
  const Mat3 r = u * d.asDiagonal() * v.transpose();
  return {r, tgt_c - r * src_c};
}

inline RigidTransform rigid_alignment(std::span<const Vec3> source, std::span<const Vec3> target,
                                      ErrorKind failure_kind = ErrorKind::DegenerateAlignment) {
  std::vector<double> w(source.size(), 1.0);
  return weighted_rigid_alignment(source, target, w, failure_kind);
}

}  // namespace gmmcalib
