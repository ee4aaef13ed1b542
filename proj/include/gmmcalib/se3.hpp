#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "gmmcalib/common.hpp"

namespace gmmcalib {

/// Rigid transform in SE(3): y = rotation * x + translation.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  static RigidTransform from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }

  static RigidTransform from_rotation(const Mat3& r) { return {r, Vec3::Zero()}; }

  static RigidTransform from_matrix(const Mat4& m) {
    return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
  }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  /// Orthonormality and det(+1) within `tol` per entry.
  bool is_valid(double tol = 1e-9) const {
    if (!rotation.allFinite() || !translation.allFinite()) return false;
    const Mat3 gram = rotation.transpose() * rotation - Mat3::Identity();
    return gram.cwiseAbs().maxCoeff() <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
  }
};

/// a * b: applies b first, then a.
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

inline RigidTransform inverse(const RigidTransform& t) {
  const Mat3 rt = t.rotation.transpose();
  return {rt, -rt * t.translation};
}

inline RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) { return compose(a, b); }

inline Mat3 rot_x(double a) {
  return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix();
}
inline Mat3 rot_y(double a) {
  return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix();
}
inline Mat3 rot_z(double a) {
  return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix();
}

/// Roll/pitch/yaw in radians and translation in meters.
///
/// Convention: extrinsic x-y-z, i.e. R = Rz(yaw) * Ry(pitch) * Rx(roll).
/// Roll is applied about the fixed x axis first, then pitch about fixed y,
/// then yaw about fixed z. All reported angular errors use this convention.
struct EulerPose {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 angles() const { return {roll, pitch, yaw}; }
  Vec3 position() const { return {x, y, z}; }
};

inline RigidTransform euler_to_transform(const EulerPose& p) {
  if (!(std::abs(p.pitch) < std::numbers::pi / 2)) {
    throw Error(ErrorKind::GimbalProximity, "pitch magnitude must be below pi/2");
  }
  return {rot_z(p.yaw) * rot_y(p.pitch) * rot_x(p.roll), Vec3(p.x, p.y, p.z)};
}

inline EulerPose transform_to_euler(const RigidTransform& t) {
  const Mat3& r = t.rotation;
  if (std::abs(r(2, 0)) >= 1.0 - 1e-9) {
    throw Error(ErrorKind::GimbalProximity, "rotation is at or near gimbal lock");
  }
  EulerPose p;
  p.pitch = std::atan2(-r(2, 0), std::hypot(r(0, 0), r(1, 0)));
  p.yaw = std::atan2(r(1, 0), r(0, 0));
  p.roll = std::atan2(r(2, 1), r(2, 2));
  p.x = t.translation.x();
  p.y = t.translation.y();
  p.z = t.translation.z();
  return p;
}

/// Closest rotation (Frobenius) to an arbitrary 3x3 matrix, det forced to +1.
/// Throws DegenerateMean when the matrix has rank < 2, where the projection
/// is not unique.
inline Mat3 project_to_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 s = svd.singularValues();
  if (!(s(1) > 1e-12 * std::max(1.0, s(0)))) {
    throw Error(ErrorKind::DegenerateMean, "averaged rotation matrix is rank deficient");
  }
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Vec3 d(1.0, 1.0, (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0);
  return u * d.asDiagonal() * v.transpose();
}

/// Arithmetic mean of translations and chordal L2 mean of rotations.
/// Inputs are summed in a canonical (lexicographic) order, so the result is
/// bit-identical for every permutation of `ts`.
inline RigidTransform mean_transform(std::span<const RigidTransform> ts) {
  if (ts.empty()) throw Error(ErrorKind::EmptyInput, "mean of zero transforms");
  std::vector<const RigidTransform*> order;
  order.reserve(ts.size());
  for (const auto& t : ts) order.push_back(&t);
  std::sort(order.begin(), order.end(), [](const RigidTransform* a, const RigidTransform* b) {
    const Mat4 ma = a->matrix();
    const Mat4 mb = b->matrix();
    return std::lexicographical_compare(ma.data(), ma.data() + 16, mb.data(), mb.data() + 16);
  });
  Mat3 rsum = Mat3::Zero();
  Vec3 tsum = Vec3::Zero();
  for (const auto* t : order) {
    rsum += t->rotation;
    tsum += t->translation;
  }
  const double n = static_cast<double>(ts.size());
  return {project_to_rotation(rsum / n), tsum / n};
}

/// Rotation angle of R (radians, in [0, pi]).
inline double rotation_angle(const Mat3& r) {
  const double c = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(c);
}

}  // namespace gmmcalib
