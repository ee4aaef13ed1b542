#pragma once

// Synthetic multi-LiDAR scenes: cubic targets on a flat ground patch,
// sampled by a spinning beam model and perturbed by known calibration
// errors.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gmmcalib/point_cloud.hpp"

namespace gmmcalib {

struct Cube {
  Vec3 center = Vec3::Zero();
  double edge = 0.5;
  double yaw = 0.0;  // rotation about the vertical axis
};

struct GroundPlane {
  bool enabled = true;
  double extent = 30.0;  // half-size of the square patch at z = 0, centered on the origin
};

struct SensorSpec {
  std::string name;
  RigidTransform pose_in_vehicle;
  double h_fov = 360.0;        // degrees
  double v_fov = 25.0;         // degrees, symmetric about the sensor's x-y plane
  std::size_t channels = 50;
  double range = 50.0;         // meters
  double azimuth_step = 0.35;  // degrees
  double noise_sigma = 0.01;   // meters, along the ray
  double min_range = 0.5;      // meters
  /// Start each scan at a random azimuth offset in [0, azimuth_step), as an
  /// unsynchronized spinning sensor does. Off: every scan shares one ray grid.
  bool random_azimuth_phase = true;
};

struct SceneSpec {
  std::vector<Cube> cubes;
  GroundPlane ground;
  std::vector<SensorSpec> sensors;
  AxisAlignedBox target_region;  // crop applied to vehicle-frame observations
  std::optional<Cube> validation_cube;

  void validate() const {
    for (const auto& c : cubes) {
      if (!(c.edge > 0.0)) throw Error(ErrorKind::InvalidArgument, "cube edges must be positive");
    }
    if (validation_cube && !(validation_cube->edge > 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "validation cube edge must be positive");
    }
    if (sensors.size() < 2) throw Error(ErrorKind::InvalidArgument, "a scene needs at least one sensor pair");
    for (const auto& s : sensors) {
      if (s.channels < 1 || !(s.range > 0.0) || !(s.noise_sigma >= 0.0) || !(s.azimuth_step > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "invalid sensor spec '" + s.name + "'");
      }
    }
    if (!(target_region.min.array() < target_region.max.array()).all()) {
      throw Error(ErrorKind::InvalidArgument, "target region min must be below max");
    }
  }

  /// Cubes including the validation cube, if any.
  std::vector<Cube> all_cubes() const {
    std::vector<Cube> out = cubes;
    if (validation_cube) out.push_back(*validation_cube);
    return out;
  }
};

/// Ground-truth calibration error applied to the second sensor.
struct CalibrationErrorSample {
  EulerPose error;
  std::uint64_t seed = 0;
};

/// Symmetric uniform bounds per component: |angle| <= angle, |t| <= translation.
struct ErrorBounds {
  double angle = 3.0 * std::numbers::pi / 180.0;
  double translation = 0.1;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ (b + 0x632be59bd9b4e019ULL));
}

// Entry distance of a ray into a yaw-rotated cube, or +inf.
inline double intersect_cube(const Cube& cube, const Vec3& origin, const Vec3& dir) {
  const Mat3 r = rot_z(-cube.yaw);
  const Vec3 o = r * (origin - cube.center);
  const Vec3 d = r * dir;
  const double h = 0.5 * cube.edge;
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d(a)) < 1e-15) {
      if (o(a) < -h || o(a) > h) return std::numeric_limits<double>::infinity();
      continue;
    }
    double t0 = (-h - o(a)) / d(a);
    double t1 = (h - o(a)) / d(a);
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
  }
  if (t_near > t_far || t_far < 0.0) return std::numeric_limits<double>::infinity();
  return t_near >= 0.0 ? t_near : std::numeric_limits<double>::infinity();
}

inline double intersect_ground(const GroundPlane& ground, const Vec3& origin, const Vec3& dir) {
  if (!ground.enabled || dir.z() >= 0.0 || origin.z() <= 0.0) return std::numeric_limits<double>::infinity();
  const double t = -origin.z() / dir.z();
  const Vec3 p = origin + t * dir;
  if (std::abs(p.x()) > ground.extent || std::abs(p.y()) > ground.extent) {
    return std::numeric_limits<double>::infinity();
  }
  return t;
}

// Noise-free returns of one sensor: unit ray directions (sensor frame) and
// hit distances. Noise is added per frame on top of these.
struct BeamReturns {
  std::vector<Vec3> directions;
  std::vector<double> ranges;
};

inline BeamReturns cast_beams(const SceneSpec& scene, const SensorSpec& sensor, double phase_deg = 0.0) {
  BeamReturns out;
  const double deg = std::numbers::pi / 180.0;
  const std::size_t columns =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(sensor.h_fov / sensor.azimuth_step + 1e-9)));
  const bool full_turn = sensor.h_fov >= 360.0 - 1e-9;
  const Vec3 origin = sensor.pose_in_vehicle.translation;
  const Mat3& rot = sensor.pose_in_vehicle.rotation;
  const auto cubes = scene.all_cubes();
  for (std::size_t c = 0; c < sensor.channels; ++c) {
    const double elevation =
        sensor.channels == 1
            ? 0.0
            : (-0.5 * sensor.v_fov + sensor.v_fov * static_cast<double>(c) / static_cast<double>(sensor.channels - 1)) *
                  deg;
    for (std::size_t col = 0; col < columns + (full_turn ? 0 : 1); ++col) {
      const double azimuth =
          (phase_deg + (full_turn ? static_cast<double>(col) * sensor.azimuth_step
                                  : -0.5 * sensor.h_fov + static_cast<double>(col) * sensor.azimuth_step)) *
          deg;
      if (!full_turn && azimuth > 0.5 * sensor.h_fov * deg + 1e-12) break;
      const Vec3 d_sensor(std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth),
                          std::sin(elevation));
      const Vec3 d = rot * d_sensor;
      double t = intersect_ground(scene.ground, origin, d);
      for (const auto& cube : cubes) t = std::min(t, intersect_cube(cube, origin, d));
      if (t >= sensor.min_range && t <= sensor.range) {
        out.directions.push_back(d_sensor);
        out.ranges.push_back(t);
      }
    }
  }
  return out;
}

inline PointCloud returns_to_cloud(const BeamReturns& beams, const SensorSpec& sensor, std::uint64_t noise_seed) {
  PointCloud cloud;
  cloud.sensor_id = sensor.name;
  cloud.frame_label = sensor.name;
  cloud.points.reserve(beams.ranges.size());
  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t k = 0; k < beams.ranges.size(); ++k) {
    const double r = beams.ranges[k] + (sensor.noise_sigma > 0.0 ? sensor.noise_sigma * noise(rng) : 0.0);
    cloud.points.push_back(r * beams.directions[k]);
  }
  return cloud;
}

inline double azimuth_phase(const SensorSpec& sensor, std::uint64_t seed) {
  if (!sensor.random_azimuth_phase) return 0.0;
  std::mt19937_64 rng(derive_seed(seed, 0xa2153));
  return std::uniform_real_distribution<double>(0.0, sensor.azimuth_step)(rng);
}

inline PointCloud scan(const SceneSpec& scene, const SensorSpec& sensor, std::uint64_t seed) {
  return returns_to_cloud(cast_beams(scene, sensor, azimuth_phase(sensor, seed)), sensor, seed);
}

}  // namespace detail

/// One noisy scan in the sensor's own frame. Identical (scene, index, seed)
/// give bit-identical clouds; the seed drives both range noise and the
/// azimuth phase.
inline PointCloud raycast_scan(const SceneSpec& scene, std::size_t sensor_index, std::uint64_t noise_seed = 0) {
  scene.validate();
  return detail::scan(scene, scene.sensors.at(sensor_index), noise_seed);
}

/// Full (uncropped) scan expressed in the vehicle frame via the nominal pose.
inline PointCloud scan_in_vehicle_frame(const SceneSpec& scene, std::size_t sensor_index, std::uint64_t noise_seed = 0) {
  return transformed(raycast_scan(scene, sensor_index, noise_seed), scene.sensors.at(sensor_index).pose_in_vehicle,
                     "vehicle");
}

inline std::vector<CalibrationErrorSample> sample_calibration_errors(std::size_t n, const ErrorBounds& bounds,
                                                                     std::uint64_t seed) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "at least one error sample is required");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<CalibrationErrorSample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& e = out[i].error;
    e.roll = bounds.angle * unit(rng);
    e.pitch = bounds.angle * unit(rng);
    e.yaw = bounds.angle * unit(rng);
    e.x = bounds.translation * unit(rng);
    e.y = bounds.translation * unit(rng);
    e.z = bounds.translation * unit(rng);
    out[i].seed = detail::derive_seed(seed, i, 0x5eed);
  }
  return out;
}

struct SyntheticObservations {
  ObservationSet observations;
  RigidTransform ground_truth;  // maps first-sensor-aligned points onto the perturbed second sensor
};

/// `frames` scans per sensor (fresh noise each), moved into the vehicle frame
/// with nominal poses; the error transform is applied to every second-sensor
/// cloud in the vehicle frame, then all clouds are cropped to the target
/// region. Uses scene.sensors[0] and scene.sensors[1].
inline SyntheticObservations make_observation_set(const SceneSpec& scene, const CalibrationErrorSample& error,
                                                  std::size_t frames, std::uint64_t seed) {
  scene.validate();
  if (frames < 1) throw Error(ErrorKind::InvalidArgument, "at least one frame per sensor is required");
  const RigidTransform error_transform = euler_to_transform(error.error);
  std::vector<PointCloud> per_sensor[2];
  for (std::size_t s = 0; s < 2; ++s) {
    const SensorSpec& sensor = scene.sensors[s];
    const RigidTransform to_vehicle =
        s == 0 ? sensor.pose_in_vehicle : compose(error_transform, sensor.pose_in_vehicle);
    per_sensor[s].resize(frames);
    parallel_for(frames, [&](std::size_t f) {
      const auto cloud_s = detail::scan(scene, sensor, detail::derive_seed(seed, f, s));
      auto cloud = crop_box(transformed(cloud_s, to_vehicle, "vehicle"), scene.target_region.min, scene.target_region.max);
      per_sensor[s][f] = std::move(cloud);
    });
    for (const auto& c : per_sensor[s]) {
      if (c.empty()) throw Error(ErrorKind::EmptyTargetRegion, "cropping removed every point of a '" + sensor.name + "' scan");
    }
  }
  return {ObservationSet(std::move(per_sensor[0]), std::move(per_sensor[1])), error_transform};
}

/// Uniform grid samples (spacing meters) on all six faces of every cube.
inline PointCloud sample_cube_surfaces(const std::vector<Cube>& cubes, double spacing) {
  if (!(spacing > 0.0)) throw Error(ErrorKind::InvalidArgument, "spacing must be positive");
  PointCloud out;
  out.sensor_id = "prior";
  out.frame_label = "vehicle";
  for (const auto& cube : cubes) {
    const double h = 0.5 * cube.edge;
    const auto n = static_cast<std::size_t>(std::ceil(cube.edge / spacing));
    const Mat3 r = rot_z(cube.yaw);
    for (int axis = 0; axis < 3; ++axis) {
      for (double side : {-h, h}) {
        for (std::size_t i = 0; i <= n; ++i) {
          for (std::size_t j = 0; j <= n; ++j) {
            const double u = -h + cube.edge * static_cast<double>(i) / static_cast<double>(n);
            const double v = -h + cube.edge * static_cast<double>(j) / static_cast<double>(n);
            Vec3 p;
            p(axis) = side;
            p((axis + 1) % 3) = u;
            p((axis + 2) % 3) = v;
            out.points.push_back(cube.center + r * p);
          }
        }
      }
    }
  }
  return out;
}

/// Distance from p to the surface of a cube.
inline double distance_to_cube_surface(const Cube& cube, const Vec3& p) {
  const Vec3 q = rot_z(-cube.yaw) * (p - cube.center);
  const double h = 0.5 * cube.edge;
  const Vec3 outside = (q.cwiseAbs().array() - h).matrix().cwiseMax(0.0);
  if (outside.squaredNorm() > 0.0) return outside.norm();
  return (h - q.cwiseAbs().array()).minCoeff();
}

/// Distance from p to the nearest scene surface (cubes and ground plane).
inline double distance_to_scene(const SceneSpec& scene, const Vec3& p) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& c : scene.all_cubes()) d = std::min(d, distance_to_cube_surface(c, p));
  if (scene.ground.enabled) d = std::min(d, std::abs(p.z()));
  return d;
}

/// Two roof sensors (360 deg, 25 deg vertical, 50 channels, 50 m range,
/// 0.01 m precision) tilted 5 deg down, facing three
/// differently oriented 0.5 m cubes ~8 m ahead on a flat road.
inline SceneSpec default_scene(double crop_margin = 0.5) {
  SceneSpec scene;
  scene.cubes = {
      {Vec3(7.6, 1.3, 0.25), 0.5, 0.35},
      {Vec3(8.1, 0.0, 0.25), 0.5, std::numbers::pi / 4},
      {Vec3(7.4, -1.4, 0.25), 0.5, -0.55},
  };
  scene.ground = {true, 30.0};
  const double tilt = 5.0 * std::numbers::pi / 180.0;
  SensorSpec left;
  left.name = "L1";
  left.pose_in_vehicle = euler_to_transform({0.0, tilt, 0.02, 1.5, 0.45, 1.95});
  SensorSpec right = left;
  right.name = "L2";
  right.pose_in_vehicle = euler_to_transform({0.0, tilt, -0.02, 1.5, -0.45, 1.95});
  scene.sensors = {left, right};

  AxisAlignedBox box{scene.cubes.front().center, scene.cubes.front().center};
  for (const auto& c : scene.cubes) {
    const Vec3 h = Vec3::Constant(0.5 * std::sqrt(2.0) * c.edge);
    box.min = box.min.cwiseMin(c.center - h);
    box.max = box.max.cwiseMax(c.center + h);
  }
  box.min.head<2>() -= Eigen::Vector2d::Constant(crop_margin);
  box.max.head<2>() += Eigen::Vector2d::Constant(crop_margin);
  box.min.z() = -0.3;
  box.max.z() += crop_margin;
  scene.target_region = box;
  return scene;
}

}  // namespace gmmcalib
