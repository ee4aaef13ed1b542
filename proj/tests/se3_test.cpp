#include <numbers>

#include "support.hpp"

using namespace gmmcalib;
using namespace gmmcalib::testing;

namespace {

constexpr double kPi = std::numbers::pi;

RigidTransform yaw_translation(double yaw, const Vec3& t) { return {rot_z(yaw), t}; }

Mat3 direct_rz(double a) {
  Mat3 m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}
Mat3 direct_ry(double a) {
  Mat3 m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}
Mat3 direct_rx(double a) {
  Mat3 m;
  m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return m;
}

}  // namespace

TEST(Compose, IdentityWithIdentity) {
  const auto r = compose(RigidTransform::identity(), RigidTransform::identity());
  EXPECT_EQ(r.matrix(), Mat4::Identity());
}

TEST(Compose, MatchesExplicitMatrixProduct) {
  const auto a = yaw_translation(kPi / 2, Vec3(1, 0, 0));
  const auto b = yaw_translation(kPi / 2, Vec3(0, 0, 0));
  Mat4 ma = Mat4::Identity(), mb = Mat4::Identity();
  ma.topLeftCorner<3, 3>() << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  ma(0, 3) = 1.0;
  mb.topLeftCorner<3, 3>() << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  Mat4 oracle = Mat4::Zero();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) oracle(i, j) += ma(i, k) * mb(k, j);
  const auto c = compose(a, b);
  EXPECT_LT(max_abs_diff(c.matrix(), oracle), 1e-12);
  EXPECT_LT(max_abs_diff(c.matrix(), yaw_translation(kPi, Vec3(1, 0, 0)).matrix()), 1e-12);
}

TEST(Compose, AppliesRightOperandFirst) {
  const auto a = yaw_translation(0.3, Vec3(1, 2, 3));
  const auto b = yaw_translation(-0.7, Vec3(-1, 0.5, 0));
  const Vec3 p(0.2, -0.4, 1.1);
  EXPECT_LT((compose(a, b).apply(p) - a.apply(b.apply(p))).norm(), 1e-12);
}

TEST(Inverse, IdentityAndTranslation) {
  EXPECT_EQ(inverse(RigidTransform::identity()).matrix(), Mat4::Identity());
  const auto t = inverse(RigidTransform::from_translation(Vec3(1, 2, 3)));
  EXPECT_EQ(t.translation, Vec3(-1, -2, -3));
  EXPECT_EQ(t.rotation, Mat3::Identity());
}

TEST(Inverse, ComposesToIdentityForRandomTransforms) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const auto t = random_transform(rng);
    EXPECT_LT(max_abs_diff(compose(inverse(t), t).matrix(), Mat4::Identity()), 1e-9);
    EXPECT_LT(max_abs_diff(compose(t, inverse(t)).matrix(), Mat4::Identity()), 1e-9);
  }
}

TEST(RigidTransformValidity, RejectsScaledRotation) {
  RigidTransform t;
  EXPECT_TRUE(t.is_valid());
  t.rotation *= 1.01;
  EXPECT_FALSE(t.is_valid());
  t.rotation = -Mat3::Identity();
  EXPECT_FALSE(t.is_valid());
}

TEST(EulerToTransform, ZeroPoseIsIdentity) {
  EXPECT_EQ(euler_to_transform({}).matrix(), Mat4::Identity());
}

TEST(EulerToTransform, QuarterYawMapsXToY) {
  const auto t = euler_to_transform({0, 0, kPi / 2, 0, 0, 0});
  EXPECT_LT((t.apply(Vec3::UnitX()) - Vec3::UnitY()).norm(), 1e-12);
}

TEST(EulerToTransform, MatchesElementaryRotationProduct) {
  const auto t = euler_to_transform({0.1, 0.2, 0.3, 1, 2, 3});
  const Mat3 oracle = direct_rz(0.3) * direct_ry(0.2) * direct_rx(0.1);
  EXPECT_LT((t.rotation - oracle).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(t.translation, Vec3(1, 2, 3));
  EXPECT_TRUE(t.is_valid());
}

TEST(EulerToTransform, RejectsGimbalPitch) {
  try {
    euler_to_transform({0, kPi / 2, 0, 0, 0, 0});
    FAIL() << "expected GimbalProximity";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::GimbalProximity);
  }
}

TEST(TransformToEuler, IdentityIsZeroPose) {
  const auto p = transform_to_euler(RigidTransform::identity());
  EXPECT_EQ(p.angles(), Vec3::Zero());
  EXPECT_EQ(p.position(), Vec3::Zero());
}

TEST(TransformToEuler, RoundTripsRandomPoses) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> angle(-kPi + 1e-3, kPi - 1e-3);
  std::uniform_real_distribution<double> pitch(-1.4, 1.4);
  std::uniform_real_distribution<double> t(-10, 10);
  for (int i = 0; i < 1000; ++i) {
    const EulerPose p{angle(rng), pitch(rng), angle(rng), t(rng), t(rng), t(rng)};
    const auto q = transform_to_euler(euler_to_transform(p));
    EXPECT_NEAR(q.roll, p.roll, 1e-9);
    EXPECT_NEAR(q.pitch, p.pitch, 1e-9);
    EXPECT_NEAR(q.yaw, p.yaw, 1e-9);
    EXPECT_NEAR(q.x, p.x, 1e-12);
    EXPECT_NEAR(q.y, p.y, 1e-12);
    EXPECT_NEAR(q.z, p.z, 1e-12);
  }
}

TEST(TransformToEuler, PureYaw) {
  const auto p = transform_to_euler(RigidTransform::from_rotation(rot_z(0.0269)));
  EXPECT_NEAR(p.yaw, 0.0269, 1e-12);
  EXPECT_NEAR(p.roll, 0.0, 1e-12);
  EXPECT_NEAR(p.pitch, 0.0, 1e-12);
}

TEST(TransformToEuler, RejectsGimbalLock) {
  EXPECT_THROW(transform_to_euler(RigidTransform::from_rotation(rot_y(kPi / 2))), Error);
}

TEST(MeanTransform, OfIdenticalTransformsIsThatTransform) {
  const auto t = euler_to_transform({0.1, -0.2, 0.3, 1, 2, 3});
  const std::vector<RigidTransform> ts{t, t, t};
  EXPECT_LT(max_abs_diff(mean_transform(ts).matrix(), t.matrix()), 1e-12);
}

TEST(MeanTransform, SymmetricYawsAverageToIdentity) {
  const std::vector<RigidTransform> ts{RigidTransform::from_rotation(rot_z(0.1)),
                                       RigidTransform::from_rotation(rot_z(-0.1))};
  EXPECT_LT(max_abs_diff(mean_transform(ts).matrix(), Mat4::Identity()), 1e-12);
}

TEST(MeanTransform, ChordalMeanAboutSharedAxis) {
  // For rotations about one axis the chordal mean angle is atan2(mean sin, mean cos).
  const std::vector<double> angles{0.1, 0.5, 1.3};
  std::vector<RigidTransform> ts;
  double s = 0, c = 0;
  for (double a : angles) {
    ts.push_back(RigidTransform::from_rotation(rot_z(a)));
    s += std::sin(a);
    c += std::cos(a);
  }
  const auto m = mean_transform(ts);
  EXPECT_LT((m.rotation - direct_rz(std::atan2(s, c))).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MeanTransform, CloseToKarcherMeanForTightCluster) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 0.02);
  std::vector<RigidTransform> ts;
  for (int i = 0; i < 50; ++i) ts.push_back(euler_to_transform({n(rng), n(rng), 0.3 + n(rng), 0, 0, 0}));

  // Karcher mean by fixed-point iteration in the tangent space.
  Mat3 k = ts.front().rotation;
  for (int it = 0; it < 100; ++it) {
    Vec3 step = Vec3::Zero();
    for (const auto& t : ts) {
      const Eigen::AngleAxisd aa(Mat3(k.transpose() * t.rotation));
      step += aa.angle() * aa.axis();
    }
    step /= static_cast<double>(ts.size());
    if (step.norm() < 1e-15) break;
    k = k * Eigen::AngleAxisd(step.norm(), step.normalized()).toRotationMatrix();
  }
  const auto m = mean_transform(ts);
  EXPECT_LT(rotation_angle(m.rotation.transpose() * k), 1e-3);
  EXPECT_LT(rotation_angle(m.rotation.transpose() * rot_z(0.3)), 1e-2);
}

TEST(MeanTransform, IsPermutationInvariant) {
  std::mt19937_64 rng(9);
  std::vector<RigidTransform> ts;
  for (int i = 0; i < 20; ++i) ts.push_back(random_transform(rng, 0.2, 0.5));
  const Mat4 a = mean_transform(ts).matrix();
  std::shuffle(ts.begin(), ts.end(), rng);
  EXPECT_EQ(mean_transform(ts).matrix(), a);
}

TEST(MeanTransform, EmptyInputThrows) {
  try {
    mean_transform(std::vector<RigidTransform>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyInput);
  }
}

TEST(MeanTransform, OpposedHalfTurnsAreDegenerate) {
  const std::vector<RigidTransform> ts{RigidTransform::identity(), RigidTransform::from_rotation(rot_z(kPi))};
  try {
    mean_transform(ts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateMean);
  }
}

TEST(RotationAngle, MatchesAxisAngle) {
  EXPECT_NEAR(rotation_angle(rot_x(0.7)), 0.7, 1e-12);
  EXPECT_NEAR(rotation_angle(Mat3::Identity()), 0.0, 1e-12);
}
