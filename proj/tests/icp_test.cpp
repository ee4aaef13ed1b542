#include <numbers>

#include "support.hpp"

using namespace gmmcalib;
using namespace gmmcalib::testing;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

/// Noiseless vehicle-frame scan of the three default cubes.
PointCloud cube_cloud(bool ground = false) {
  SceneSpec scene = default_scene();
  scene.ground.enabled = ground;
  for (auto& s : scene.sensors) {
    s.noise_sigma = 0.0;
    s.random_azimuth_phase = false;
  }
  const auto c = scan_in_vehicle_frame(scene, 0);
  return crop_box(c, scene.target_region.min, scene.target_region.max);
}

IcpConfig config_for(IcpVariant v, double gate = 1.0) {
  IcpConfig c;
  c.variant = v;
  c.max_correspondence_distance = gate;
  c.transform_tolerance = 1e-10;
  return c;
}

PointCloud grid(double z, int n, double spacing) {
  PointCloud c;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c.points.emplace_back(i * spacing, j * spacing, z);
  return c;
}

}  // namespace

class IcpIdentity : public ::testing::TestWithParam<IcpVariant> {};

TEST_P(IcpIdentity, SourceEqualsTarget) {
  const auto cloud = cube_cloud(true);
  const auto r = run_icp(cloud, cloud, config_for(GetParam()));
  EXPECT_LT(max_abs_diff(r.transform.matrix(), Mat4::Identity()), 1e-6);
  EXPECT_NEAR(r.rmse, 0.0, 1e-6);
  EXPECT_DOUBLE_EQ(r.fitness, 1.0);
  EXPECT_TRUE(r.converged);
}

INSTANTIATE_TEST_SUITE_P(Variants, IcpIdentity,
                         ::testing::Values(IcpVariant::Point, IcpVariant::Plane, IcpVariant::Gicp));

TEST(PointToPoint, RecoversSmallOffset) {
  const auto source = cube_cloud();
  const auto truth = euler_to_transform({0, 0, 1.0 * kDeg, 0.02, 0, 0});
  const auto r = icp_point_to_point(source, transformed(source, truth), config_for(IcpVariant::Point));
  EXPECT_LT(rotation_error(r.transform, truth), 1e-3);
  EXPECT_LT(translation_error(r.transform, truth), 1e-3);
}

TEST(PointToPoint, SingleStepWithKnownCorrespondencesIsKabsch) {
  // Points 1 m apart moved by a few millimeters: the nearest neighbor of
  // every source point is its own image.
  std::vector<Vec3> src;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) src.emplace_back(i, j, 0.3 * ((i * j) % 3));
  const auto truth = euler_to_transform({0.001, -0.002, 0.003, 0.004, -0.003, 0.002});
  PointCloud source, target;
  source.points = src;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> noise(0.0, 0.002);
  for (const auto& p : src) target.points.push_back(truth.apply(p) + Vec3(noise(rng), noise(rng), noise(rng)));

  auto config = config_for(IcpVariant::Point, 0.4);
  config.max_iterations = 1;
  const auto r = icp_point_to_point(source, target, config);
  EXPECT_EQ(r.iterations, 1u);
  EXPECT_LT(max_abs_diff(r.transform.matrix(), kabsch_oracle(source.points, target.points).matrix()), 1e-9);
}

TEST(PointToPoint, ObjectiveTraceNonIncreasing) {
  const auto source = cube_cloud(true);
  const auto truth = euler_to_transform({0.5 * kDeg, -1.0 * kDeg, 2.0 * kDeg, 0.05, -0.05, 0.02});
  const auto r = icp_point_to_point(source, transformed(source, truth), config_for(IcpVariant::Point));
  for (std::size_t i = 1; i < r.objective_trace.size(); ++i) {
    EXPECT_LE(r.objective_trace[i], r.objective_trace[i - 1] * (1.0 + 1e-12));
  }
}

TEST(PointToPlane, RecoversOffsetAboveGround) {
  const auto target = grid(0.0, 30, 0.1);
  const auto source = grid(0.05, 30, 0.1);
  const auto r = icp_point_to_plane(source, target, config_for(IcpVariant::Plane));
  EXPECT_NEAR(r.transform.translation.z(), -0.05, 1e-3);
  EXPECT_LT(std::abs(r.transform.translation.x()) + std::abs(r.transform.translation.y()), 1e-9);
}

TEST(PointToPlane, RecoversCubeOffset) {
  const auto source = cube_cloud();
  const auto truth = euler_to_transform({0, 0, 2.0 * kDeg, 0.05, 0, 0});
  const auto r = icp_point_to_plane(source, transformed(source, truth), config_for(IcpVariant::Plane));
  EXPECT_LT(rotation_error(r.transform, truth), 2e-3);
  EXPECT_LT(translation_error(r.transform, truth), 5e-3);
}

TEST(PointToPlane, SingleLineIsIllConditioned) {
  PointCloud line;
  for (int i = 0; i < 40; ++i) line.points.emplace_back(0.1 * i, 0, 0);
  line.normals = std::vector<Vec3>(line.size(), Vec3::UnitZ());
  try {
    icp_point_to_plane(line, line, config_for(IcpVariant::Plane));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IllConditioned);
  }
}

TEST(Gicp, RecoversCubeOffset) {
  const auto source = cube_cloud();
  const auto truth = euler_to_transform({0, 0, 3.0 * kDeg, 0.1, 0, 0});
  const auto r = icp_generalized(source, transformed(source, truth), config_for(IcpVariant::Gicp));
  EXPECT_LT(rotation_error(r.transform, truth), 5e-3);
  EXPECT_LT(translation_error(r.transform, truth), 1e-2);
}

TEST(Gicp, IsotropicCovariancesBehaveLikePointToPoint) {
  const auto source = cube_cloud(true);
  const auto truth = euler_to_transform({0.3 * kDeg, -0.4 * kDeg, 1.0 * kDeg, 0.03, -0.02, 0.01});
  const auto target = transformed(source, truth);
  auto gicp = config_for(IcpVariant::Gicp);
  gicp.gicp_epsilon = 1.0;
  const auto a = icp_generalized(source, target, gicp);
  const auto b = icp_point_to_point(source, target, config_for(IcpVariant::Point));
  EXPECT_LT(rotation_error(a.transform, b.transform), 1e-3);
  EXPECT_LT(translation_error(a.transform, b.transform), 1e-3);
}

TEST(Icp, EmptyGateFailsWithNoCorrespondences) {
  const auto source = grid(0.0, 5, 1.0);
  const auto target = grid(10.0, 5, 1.0);
  for (auto v : {IcpVariant::Point, IcpVariant::Plane}) {
    try {
      run_icp(source, target, config_for(v, 0.5));
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::NoCorrespondences);
    }
  }
}

TEST(Icp, RejectsTinyCloudsAndBadConfig) {
  PointCloud two;
  two.points = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  EXPECT_THROW(icp_point_to_point(two, two, IcpConfig{}), Error);
  auto bad = IcpConfig{};
  bad.max_correspondence_distance = 0.0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Icp, VariantNames) {
  EXPECT_EQ(to_string(IcpVariant::Plane), "plane");
  EXPECT_EQ(icp_variant_from_string("gicp"), IcpVariant::Gicp);
  EXPECT_THROW(icp_variant_from_string("ndt"), Error);
}
