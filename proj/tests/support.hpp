#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "gmmcalib/gmmcalib.hpp"

namespace gmmcalib::testing {

inline RigidTransform random_transform(std::mt19937_64& rng, double max_angle = 3.0, double max_t = 2.0) {
  std::uniform_real_distribution<double> a(-max_angle, max_angle);
  std::uniform_real_distribution<double> p(-1.4, 1.4);
  std::uniform_real_distribution<double> t(-max_t, max_t);
  return euler_to_transform({a(rng), std::clamp(p(rng), -1.4, 1.4), a(rng), t(rng), t(rng), t(rng)});
}

inline double max_abs_diff(const Mat4& a, const Mat4& b) { return (a - b).cwiseAbs().maxCoeff(); }

inline double rotation_error(const RigidTransform& a, const RigidTransform& b) {
  return rotation_angle(a.rotation.transpose() * b.rotation);
}

inline double translation_error(const RigidTransform& a, const RigidTransform& b) {
  return (a.translation - b.translation).norm();
}

/// Textbook SVD solution of the unweighted orthogonal Procrustes problem.
inline RigidTransform kabsch_oracle(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= static_cast<double>(src.size());
  cd /= static_cast<double>(dst.size());
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) h += (src[i] - cs) * (dst[i] - cd).transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0 ? -1.0 : 1.0;
  const Mat3 r = svd.matrixV() * d * svd.matrixU().transpose();
  return {r, cd - r * cs};
}

/// Noiseless scans of a single 0.5 m cube 3 m ahead of and below two
/// coincident sensors at the origin, so three faces are visible.
inline SceneSpec single_cube_scene() {
  SceneSpec scene;
  scene.cubes = {{Vec3(3.0, 0.0, -0.4), 0.5, 0.4}};
  scene.ground.enabled = false;
  SensorSpec a;
  a.name = "L1";
  a.noise_sigma = 0.0;
  a.random_azimuth_phase = false;
  SensorSpec b = a;
  b.name = "L2";
  scene.sensors = {a, b};
  scene.target_region = {Vec3(1.0, -3.0, -3.0), Vec3(6.0, 3.0, 3.0)};
  return scene;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("gmmcalib_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace gmmcalib::testing
