#include <numbers>

#include "support.hpp"

using namespace gmmcalib;
using namespace gmmcalib::testing;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

SceneSpec noiseless(SceneSpec scene) {
  for (auto& s : scene.sensors) {
    s.noise_sigma = 0.0;
    s.random_azimuth_phase = false;
  }
  return scene;
}

double nearest(const SpatialIndex& index, const Vec3& p) { return std::sqrt(index.nearest(p).squared_distance); }

}  // namespace

TEST(RaycastScan, NoiselessHitsLieOnCubeFaces) {
  const auto scene = single_cube_scene();
  const auto cloud = raycast_scan(scene, 0);
  ASSERT_GT(cloud.size(), 100u);
  for (const auto& p : cloud.points) EXPECT_LT(distance_to_cube_surface(scene.cubes[0], p), 1e-9);
  EXPECT_EQ(cloud.sensor_id, "L1");
}

TEST(RaycastScan, DefaultSceneResidualsBelowTolerance) {
  const auto scene = noiseless(default_scene());
  const auto cloud = scan_in_vehicle_frame(scene, 1);
  for (const auto& p : cloud.points) EXPECT_LT(distance_to_scene(scene, p), 1e-9);
}

TEST(RaycastScan, GroundRingsAtAnalyticRadius) {
  SceneSpec scene;
  scene.ground = {true, 100.0};
  SensorSpec s;
  s.name = "L1";
  s.channels = 5;
  s.v_fov = 20.0;
  s.noise_sigma = 0.0;
  s.random_azimuth_phase = false;
  s.pose_in_vehicle = RigidTransform::from_translation(Vec3(0, 0, 2.0));
  SensorSpec t = s;
  t.name = "L2";
  scene.sensors = {s, t};
  scene.target_region = {Vec3::Constant(-1.0), Vec3::Constant(1.0)};
  const auto cloud = scan_in_vehicle_frame(scene, 0);
  const double r10 = 2.0 / std::tan(10.0 * kDeg);
  const double r5 = 2.0 / std::tan(5.0 * kDeg);
  const std::size_t columns = static_cast<std::size_t>(std::floor(360.0 / s.azimuth_step + 1e-9));
  ASSERT_EQ(cloud.size(), 2 * columns);
  for (const auto& p : cloud.points) {
    EXPECT_NEAR(p.z(), 0.0, 1e-9);
    const double r = p.head<2>().norm();
    EXPECT_LT(std::min(std::abs(r - r10), std::abs(r - r5)), 1e-9);
  }
}

TEST(RaycastScan, CoincidentSensorsSeeTheSamePoints) {
  auto scene = noiseless(default_scene());
  scene.sensors[1].pose_in_vehicle = scene.sensors[0].pose_in_vehicle;
  const auto a = scan_in_vehicle_frame(scene, 0);
  const auto b = scan_in_vehicle_frame(scene, 1);
  ASSERT_EQ(a.size(), b.size());
  const SpatialIndex index(b);
  for (const auto& p : a.points) EXPECT_LT(nearest(index, p), 1e-12);
}

TEST(RaycastScan, DeterministicAndSeedSensitive) {
  const auto scene = default_scene();
  const auto a = raycast_scan(scene, 0, 5);
  const auto b = raycast_scan(scene, 0, 5);
  const auto c = raycast_scan(scene, 0, 6);
  EXPECT_EQ(a.points, b.points);
  EXPECT_NE(a.points, c.points);
}

TEST(RaycastScan, NoiseMatchesSigma) {
  SceneSpec scene = single_cube_scene();
  scene.sensors[0].noise_sigma = 0.01;
  const auto clean = raycast_scan(noiseless(scene), 0);
  const auto noisy = raycast_scan(scene, 0, 3);
  ASSERT_EQ(clean.size(), noisy.size());
  double sum2 = 0.0;
  for (std::size_t k = 0; k < clean.size(); ++k) sum2 += (noisy.points[k] - clean.points[k]).squaredNorm();
  EXPECT_NEAR(std::sqrt(sum2 / static_cast<double>(clean.size())), 0.01, 0.002);
}

TEST(SceneSpec, ValidationRejectsBadInput) {
  auto scene = default_scene();
  scene.cubes[0].edge = 0.0;
  EXPECT_THROW(scene.validate(), Error);
  scene = default_scene();
  scene.sensors.pop_back();
  EXPECT_THROW(scene.validate(), Error);
  scene = default_scene();
  scene.sensors[0].noise_sigma = -1.0;
  EXPECT_THROW(scene.validate(), Error);
}

TEST(SampleCalibrationErrors, WithinBounds) {
  const auto samples = sample_calibration_errors(100, ErrorBounds{}, 17);
  ASSERT_EQ(samples.size(), 100u);
  for (const auto& s : samples) {
    for (double a : {s.error.roll, s.error.pitch, s.error.yaw}) EXPECT_LE(std::abs(a), 3.0 * kDeg);
    for (double t : {s.error.x, s.error.y, s.error.z}) EXPECT_LE(std::abs(t), 0.1);
  }
}

TEST(SampleCalibrationErrors, ZeroBoundsAndDeterminism) {
  for (const auto& s : sample_calibration_errors(5, ErrorBounds{0.0, 0.0}, 1)) {
    EXPECT_EQ(s.error.angles(), Vec3::Zero());
    EXPECT_EQ(s.error.position(), Vec3::Zero());
  }
  const auto a = sample_calibration_errors(10, ErrorBounds{}, 3);
  const auto b = sample_calibration_errors(10, ErrorBounds{}, 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].error.angles(), b[i].error.angles());
    EXPECT_EQ(a[i].error.position(), b[i].error.position());
    EXPECT_EQ(a[i].seed, b[i].seed);
  }
  EXPECT_THROW(sample_calibration_errors(0, ErrorBounds{}, 1), Error);
}

TEST(MakeObservationSet, ZeroErrorOverlaps) {
  const auto scene = default_scene();
  const auto syn = make_observation_set(scene, {}, 3, 9);
  EXPECT_EQ(syn.ground_truth.matrix(), Mat4::Identity());
  ASSERT_EQ(syn.observations.pair_count(), 3u);
  const SpatialIndex index(syn.observations.first(0));
  std::vector<double> d;
  for (const auto& p : syn.observations.second(0).points) d.push_back(nearest(index, p));
  std::sort(d.begin(), d.end());
  EXPECT_LT(d[d.size() / 2], 0.1);
  for (const auto& c : syn.observations.observations()) {
    for (const auto& p : c.points) EXPECT_TRUE(scene.target_region.contains(p));
  }
}

TEST(MakeObservationSet, PureTranslationGroundTruth) {
  const auto syn = make_observation_set(default_scene(), {{0, 0, 0, 0.1, 0, 0}, 1}, 1, 1);
  EXPECT_EQ(syn.ground_truth.translation, Vec3(0.1, 0, 0));
  EXPECT_EQ(syn.ground_truth.rotation, Mat3::Identity());
}

TEST(MakeObservationSet, GroundTruthClosesFrameAlgebra) {
  // Coincident noiseless sensors: every second-sensor observation is the
  // first-sensor one moved by the ground truth.
  auto scene = noiseless(default_scene());
  scene.sensors[1].pose_in_vehicle = scene.sensors[0].pose_in_vehicle;
  scene.target_region = {Vec3::Constant(-100.0), Vec3::Constant(100.0)};
  const EulerPose error{1.0 * kDeg, -2.0 * kDeg, 2.5 * kDeg, 0.05, -0.07, 0.03};
  const auto syn = make_observation_set(scene, {error, 4}, 2, 4);
  EXPECT_LT(max_abs_diff(syn.ground_truth.matrix(), euler_to_transform(error).matrix()), 0.0 + 1e-15);
  const auto& a = syn.observations.first(1);
  const auto& b = syn.observations.second(1);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_LT((syn.ground_truth.apply(a.points[k]) - b.points[k]).norm(), 1e-9);
}

TEST(MakeObservationSet, Deterministic) {
  const auto scene = default_scene();
  const CalibrationErrorSample e{{0.01, 0.02, -0.03, 0.04, 0.05, -0.06}, 77};
  const auto a = make_observation_set(scene, e, 2, 77);
  const auto b = make_observation_set(scene, e, 2, 77);
  for (std::size_t i = 0; i < a.observations.size(); ++i) {
    EXPECT_EQ(a.observations.observation(i).points, b.observations.observation(i).points);
  }
}

TEST(MakeObservationSet, FramesDifferInNoiseAndPhase) {
  const auto syn = make_observation_set(default_scene(), {}, 2, 3);
  EXPECT_NE(syn.observations.first(0).points, syn.observations.first(1).points);
}

TEST(MakeObservationSet, WideCropMatchesPaperCloudSize) {
  const auto syn = make_observation_set(default_scene(2.0), {}, 4, 2);
  double mean = 0.0;
  for (const auto& c : syn.observations.observations()) mean += static_cast<double>(c.size());
  mean /= static_cast<double>(syn.observations.size());
  EXPECT_GT(mean, 1850.0 * 0.7);
  EXPECT_LT(mean, 1850.0 * 1.3);
}

TEST(MakeObservationSet, EmptyTargetRegion) {
  auto scene = default_scene();
  scene.target_region = {Vec3(100, 100, 100), Vec3(101, 101, 101)};
  try {
    make_observation_set(scene, {}, 1, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyTargetRegion);
  }
}

TEST(SampleCubeSurfaces, PointsOnFaces) {
  const Cube cube{Vec3(1, 2, 3), 0.5, 0.3};
  const auto prior = sample_cube_surfaces({cube}, 0.05);
  EXPECT_GT(prior.size(), 500u);
  for (const auto& p : prior.points) EXPECT_LT(distance_to_cube_surface(cube, p), 1e-12);
}
