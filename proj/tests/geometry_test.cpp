#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "handreg/common/error.hpp"
#include "handreg/geometry/crop.hpp"
#include "handreg/geometry/rig_io.hpp"
#include "handreg/geometry/stereo.hpp"

using namespace handreg;
using namespace handreg::geometry;

namespace {

constexpr double kPi = std::numbers::pi;

FisheyeCamera make_camera(std::array<double, 4> k = {}, RigidTransform pose = {},
                          double fx = 200.0, double fy = 200.0) {
  FisheyeIntrinsics in;
  in.fx = fx;
  in.fy = fy;
  in.cx = 320.0;
  in.cy = 320.0;
  in.k = k;
  in.width = 640;
  in.height = 640;
  return FisheyeCamera(in, pose);
}

Mat3 random_rotation(std::mt19937_64& rng, double max_angle = kPi) {
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(0.0, max_angle);
  const Vec3 axis = Vec3(n(rng), n(rng), n(rng)).normalized();
  return axis_angle_to_matrix(axis * u(rng));
}

Vec3 random_ray(std::mt19937_64& rng, double theta_limit) {
  std::uniform_real_distribution<double> ut(0.0, theta_limit);
  std::uniform_real_distribution<double> up(-kPi, kPi);
  const double th = ut(rng), ph = up(rng);
  return {std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
}

// Two outward-yawed cameras 100 mm apart, physical-left at x = -50.
StereoRig make_rig(double yaw = 0.5) {
  RigidTransform wl, wr;  // world_from_cam
  wl.rotation = axis_angle_to_matrix(Vec3(0.0, -yaw, 0.0));
  wl.translation = Vec3(-50.0, 0.0, 0.0);
  wr.rotation = axis_angle_to_matrix(Vec3(0.0, yaw, 0.0));
  wr.translation = Vec3(50.0, 0.0, 0.0);
  return {make_camera({-0.02, 0.004, 0.0, 0.0}, wl.inverse(), 190.0, 191.0),
          make_camera({-0.03, 0.002, 0.001, 0.0}, wr.inverse(), 185.0, 186.0)};
}

double oracle_project_u(const FisheyeCamera& cam, const Vec3& p, double* v) {
  const auto& in = cam.intrinsics();
  const double r = std::sqrt(p.x() * p.x() + p.y() * p.y());
  const double theta = std::atan2(r, p.z());
  const double phi = std::atan2(p.y(), p.x());
  double td = theta;
  td += in.k[0] * std::pow(theta, 3);
  td += in.k[1] * std::pow(theta, 5);
  td += in.k[2] * std::pow(theta, 7);
  td += in.k[3] * std::pow(theta, 9);
  *v = in.fy * td * std::sin(phi) + in.cy;
  return in.fx * td * std::cos(phi) + in.cx;
}

BoundingBox random_box(std::mt19937_64& rng, const FisheyeCamera& cam) {
  // Centre inside the image circle so the centre ray exists.
  const auto& in = cam.intrinsics();
  const double radius = 0.9 * std::min(in.fx, in.fy) * cam.distort(in.theta_max);
  std::uniform_real_distribution<double> side(30.0, 150.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  while (true) {
    const double s = side(rng);
    const Vec2 c(in.cx + radius * unit(rng), in.cy + radius * unit(rng));
    const BoundingBox box{c.x() - s / 2, c.y() - s / 2, c.x() + s / 2, c.y() + s / 2};
    if ((c - Vec2(in.cx, in.cy)).norm() > radius || box.x_min < 0 || box.y_min < 0 ||
        box.x_max > in.width || box.y_max > in.height)
      continue;
    return box;
  }
}

}  // namespace

TEST(Project, OpticalAxisHitsPrincipalPoint) {
  const auto cam = make_camera({-0.05, 0.01, 0.0, 0.0});
  const Vec2 px = cam.project_camera(Vec3(0, 0, 100));
  EXPECT_EQ(px.x(), 320.0);
  EXPECT_EQ(px.y(), 320.0);
}

TEST(Project, ZeroDistortionIsEquidistant) {
  const auto cam = make_camera();
  const Vec2 px = cam.project_camera(Vec3(100, 0, 100));
  EXPECT_NEAR(px.x(), 320.0 + 200.0 * kPi / 4.0, 1e-12);
  EXPECT_NEAR(px.y(), 320.0, 1e-12);
}

TEST(Project, MatchesScalarOracle) {
  const auto cam = make_camera({-0.05, 0.01, 0.0, 0.0});
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> depth(50.0, 900.0);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p = random_ray(rng, 0.99 * kPi / 2) * depth(rng);
    double v = 0.0;
    const double u = oracle_project_u(cam, p, &v);
    const Vec2 px = cam.project_camera(p);
    ASSERT_NEAR(px.x(), u, 1e-9);
    ASSERT_NEAR(px.y(), v, 1e-9);
  }
}

TEST(Project, WorldPointGoesThroughExtrinsics) {
  std::mt19937_64 rng(5);
  RigidTransform pose{random_rotation(rng), Vec3(10, -20, 30)};
  const auto cam = make_camera({-0.05, 0.01, 0.0, 0.0}, pose);
  const Vec3 p_cam(30, -40, 400);
  const Vec3 p_world = pose.inverse().apply(p_cam);
  EXPECT_LT((cam.project(p_world) - cam.project_camera(p_cam)).norm(), 1e-9);
}

TEST(Project, Errors) {
  const auto cam = make_camera();
  try {
    cam.project_camera(Vec3(0, 0, -1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PointBehindCamera);
  }
  FisheyeIntrinsics in = cam.intrinsics();
  in.theta_max = kPi / 4;
  const FisheyeCamera narrow(in, {});
  try {
    narrow.project_camera(Vec3(100, 0, 50));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutsideFov);
  }
}

TEST(Project, JacobianMatchesFiniteDifferences) {
  const auto cam = make_camera({-0.05, 0.01, 0.002, -0.001}, {}, 210.0, 190.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> depth(100.0, 800.0);
  for (int i = 0; i < 200; ++i) {
    const Vec3 p = random_ray(rng, 1.4) * depth(rng);
    Mat23 j;
    cam.project_camera(p, &j);
    Mat23 fd;
    const double h = 1e-4;
    for (int c = 0; c < 3; ++c) {
      Vec3 a = p, b = p;
      a(c) += h;
      b(c) -= h;
      fd.col(c) = (cam.project_camera(a) - cam.project_camera(b)) / (2 * h);
    }
    ASSERT_LT((j - fd).norm() / std::max(fd.norm(), 1e-10), 1e-6) << p.transpose();
  }
  Mat23 axis;
  cam.project_camera(Vec3(0, 0, 200), &axis);
  EXPECT_NEAR(axis(0, 0), 210.0 / 200.0, 1e-12);
  EXPECT_NEAR(axis(1, 1), 190.0 / 200.0, 1e-12);
}

TEST(Camera, RejectsNonMonotoneDistortion) {
  try {
    make_camera({-0.5, 0.0, 0.0, 0.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidCamera);
  }
}

TEST(Camera, RejectsBadIntrinsicsAndPose) {
  FisheyeIntrinsics in = make_camera().intrinsics();
  in.fx = 0.0;
  EXPECT_THROW(FisheyeCamera(in, {}), Error);
  in = make_camera().intrinsics();
  in.cx = 640.0;
  EXPECT_THROW(FisheyeCamera(in, {}), Error);
  RigidTransform bad;
  bad.rotation(0, 0) = 1.01;
  EXPECT_THROW(FisheyeCamera(make_camera().intrinsics(), bad), Error);
}

TEST(Unproject, PrincipalPointIsOpticalAxis) {
  const auto cam = make_camera({-0.05, 0.01, 0.0, 0.0});
  const Vec3 ray = cam.unproject(Vec2(320, 320));
  EXPECT_EQ(ray, Vec3(0, 0, 1));
}

TEST(Unproject, ZeroDistortionInverse) {
  const auto cam = make_camera();
  const Vec3 ray = cam.unproject(Vec2(320 + 200 * kPi / 6, 320));
  EXPECT_NEAR(ray.x(), std::sin(kPi / 6), 1e-12);
  EXPECT_NEAR(ray.y(), 0.0, 1e-12);
  EXPECT_NEAR(ray.z(), std::cos(kPi / 6), 1e-12);
}

TEST(Unproject, RoundTripAngularError) {
  const auto cam = make_camera({-0.05, 0.01, 0.0, 0.0});
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> depth(10.0, 1000.0);
  int tested = 0;
  while (tested < 1000) {
    const Vec3 ray = random_ray(rng, 0.95 * kPi / 2);
    const Vec2 px = cam.project_camera(ray * depth(rng));
    if (!cam.in_image(px)) continue;
    const Vec3 back = cam.unproject(px);
    ASSERT_NEAR(back.norm(), 1.0, 1e-12);
    ASSERT_LT(std::atan2(back.cross(ray).norm(), back.dot(ray)), 1e-7);
    ASSERT_LT((cam.project_camera(back * depth(rng)) - px).norm(), 1e-6);
    ++tested;
  }
}

TEST(Unproject, OutsideImage) {
  const auto cam = make_camera();
  try {
    cam.unproject(Vec2(-1, 10));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutsideImage);
  }
  FisheyeIntrinsics in = cam.intrinsics();
  in.fx = in.fy = 100.0;  // image circle radius 100*pi/2 < corner distance
  const FisheyeCamera small(in, {});
  EXPECT_THROW(small.unproject(Vec2(1, 1)), Error);
}

TEST(CropIntrinsics, FullFrameIsIdentity) {
  const auto cam = make_camera({-0.05, 0.01, 0.0, 0.0});
  const auto ci = crop_intrinsics(cam, {0, 0, 640, 640}, 640);
  EXPECT_EQ(ci.K, cam.intrinsic_matrix());
  EXPECT_EQ(ci.size, 640);
}

TEST(CropIntrinsics, UnitScaleShiftsPrincipalPoint) {
  const auto cam = make_camera();
  const auto ci = crop_intrinsics(cam, {100, 100, 228, 228}, 128);
  Mat3 expected;
  expected << 200, 0, 220, 0, 200, 220, 0, 0, 1;
  EXPECT_EQ(ci.K, expected);
}

TEST(CropIntrinsics, HalvingScale) {
  const auto cam = make_camera({}, {}, 200.0, 180.0);
  const auto ci = crop_intrinsics(cam, {64, 32, 320, 288}, 128);
  // s = 0.5: K' = [0.5*200, 0, 0.5*(320-64); 0, 0.5*180, 0.5*(320-32); 0, 0, 1]
  Mat3 expected;
  expected << 100, 0, 128, 0, 90, 144, 0, 0, 1;
  EXPECT_LT((ci.K - expected).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(ci.K.row(2), Eigen::RowVector3d(0, 0, 1));
}

TEST(CropIntrinsics, MapsFrameToCropPixels) {
  const auto cam = make_camera();
  const BoundingBox box{200, 150, 300, 250};
  const auto ci = crop_intrinsics(cam, box, 32);
  const Vec2 px(245.0, 190.0);
  const Vec3 pc = ci.K * cam.intrinsic_matrix().inverse() * Vec3(px.x(), px.y(), 1.0);
  EXPECT_NEAR(pc.x(), (px.x() - box.x_min) * 0.32, 1e-12);
  EXPECT_NEAR(pc.y(), (px.y() - box.y_min) * 0.32, 1e-12);
}

TEST(CropIntrinsics, Errors) {
  const auto cam = make_camera();
  try {
    crop_intrinsics(cam, {10, 10, 10, 40}, 32);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateBox);
  }
  EXPECT_THROW(crop_intrinsics(cam, {10, 10, 40, 40}, 0), Error);
}

TEST(SquareCropBox, ExpandsAndClamps) {
  const auto cam = make_camera();
  const auto box = square_crop_box(cam, {100, 200, 180, 240});
  EXPECT_DOUBLE_EQ(box.x_min, 90.0);
  EXPECT_DOUBLE_EQ(box.x_max, 190.0);
  EXPECT_DOUBLE_EQ(box.y_min, 170.0);
  EXPECT_DOUBLE_EQ(box.y_max, 270.0);
  const auto edge = square_crop_box(cam, {0, 600, 40, 640});
  EXPECT_DOUBLE_EQ(edge.x_min, 0.0);
  EXPECT_DOUBLE_EQ(edge.y_max, 640.0);
  EXPECT_DOUBLE_EQ(edge.x_max, 45.0);
  EXPECT_THROW(square_crop_box(cam, {700, 700, 720, 720}), Error);
}

TEST(BboxCenterRay, Examples) {
  const auto cam = make_camera();
  EXPECT_EQ(bbox_center_ray(cam, {300, 300, 340, 340}), Vec3(0, 0, 1));
  const double u = 320 + 200 * cam.distort(kPi / 8);
  const Vec3 ray = bbox_center_ray(cam, {u - 20, 300, u + 20, 340});
  EXPECT_NEAR(ray.x(), std::sin(kPi / 8), 1e-12);
  EXPECT_NEAR(ray.y(), 0.0, 1e-12);
  EXPECT_NEAR(ray.z(), std::cos(kPi / 8), 1e-12);
}

TEST(BboxCenterRay, EqualsUnprojectOfCenter) {
  const auto cam = make_camera({-0.05, 0.01, 0.0, 0.0});
  std::mt19937_64 rng(23);
  for (int i = 0; i < 200; ++i) {
    const auto box = random_box(rng, cam);
    const Vec3 a = bbox_center_ray(cam, box);
    const Vec3 b = cam.unproject(box.center());
    ASSERT_EQ(a, b);
  }
}

TEST(RotationToRay, IdentityForOpticalAxis) {
  EXPECT_EQ(rotation_to_ray(Vec3(0, 0, 1)), Mat3::Identity());
}

TEST(RotationToRay, SO3AndMapsAxisOnto1000Rays) {
  std::mt19937_64 rng(29);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 ray = random_ray(rng, kPi * 0.999);
    const Mat3 r = rotation_to_ray(ray);
    ASSERT_LT((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
    ASSERT_NEAR(r.determinant(), 1.0, 1e-9);
    ASSERT_LT((r * Vec3::UnitZ() - ray).norm(), 1e-9);
  }
}

TEST(RotationToRay, SideRayAndMinimality) {
  const Mat3 r = rotation_to_ray(Vec3(1, 0, 0));
  EXPECT_LT((r * Vec3::UnitZ() - Vec3(1, 0, 0)).norm(), 1e-12);
  // Minimal rotation: the axis z x ray = +y is left fixed.
  EXPECT_LT((r * Vec3::UnitY() - Vec3::UnitY()).norm(), 1e-12);
  const Vec3 aa = matrix_to_axis_angle(rotation_to_ray(Vec3(0.6, 0, 0.8)));
  EXPECT_NEAR(aa.norm(), std::acos(0.8), 1e-12);
}

TEST(RotationToRay, AntipodalAndInvalid) {
  const Mat3 r = rotation_to_ray(Vec3(0, 0, -1));
  EXPECT_EQ(r, Mat3(Vec3(1, -1, -1).asDiagonal()));
  try {
    rotation_to_ray(Vec3(0, 0, 1.1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
  }
}

TEST(VirtualExtrinsics, IdenticalCamerasCenteredBoxes) {
  RigidTransform right_pose;
  right_pose.translation = Vec3(-100, 0, 0);
  const auto l = make_camera();
  const auto r = make_camera({}, right_pose);
  const BoundingBox centered{300, 300, 340, 340};
  const auto t = virtual_relative_extrinsics(l, centered, r, centered);
  EXPECT_EQ(t.rotation, Mat3::Identity());
  EXPECT_LT((t.translation - Vec3(-100, 0, 0)).norm(), 1e-12);
}

TEST(VirtualExtrinsics, ReducesToPhysicalForCenteredBoxes) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 50; ++i) {
    const auto l = make_camera({-0.02, 0.0, 0.0, 0.0}, {random_rotation(rng), Vec3(1, 2, 3)});
    const auto r = make_camera({}, {random_rotation(rng), Vec3(-40, 7, 11)});
    const BoundingBox centered{280, 290, 360, 350};
    const auto v = virtual_relative_extrinsics(l, centered, r, centered);
    const auto p = relative_extrinsics(l, r);
    ASSERT_LT((v.rotation - p.rotation).cwiseAbs().maxCoeff(), 1e-9);
    ASSERT_LT((v.translation - p.translation).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(VirtualExtrinsics, CompositionOracle) {
  const auto rig = make_rig();
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(-300.0, 300.0), z(100.0, 600.0);
  for (int i = 0; i < 200; ++i) {
    const auto bl = random_box(rng, rig.left);
    const auto br = random_box(rng, rig.right);
    const auto t = virtual_relative_extrinsics(rig.left, bl, rig.right, br);
    const Mat3 ql = rotation_to_ray(rig.left.unproject(bl.center()));
    const Mat3 qr = rotation_to_ray(rig.right.unproject(br.center()));
    const Vec3 x(u(rng), u(rng), z(rng));
    const Vec3 p_vl = ql.transpose() * rig.left.cam_from_world().apply(x);
    const Vec3 p_vr = qr.transpose() * rig.right.cam_from_world().apply(x);
    ASSERT_LT((t.apply(p_vl) - p_vr).norm(), 1e-9);
    ASSERT_NO_THROW(t.validate());
  }
}

TEST(Triangulate, NoiselessRoundTrip) {
  const auto rig = make_rig();
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-250.0, 250.0), z(150.0, 700.0);
  int tested = 0;
  while (tested < 1000) {
    const Vec3 x(u(rng), u(rng), z(rng));
    const Vec3 pl = rig.left.cam_from_world().apply(x);
    const Vec3 pr = rig.right.cam_from_world().apply(x);
    if (!rig.left.projectable(pl) || !rig.right.projectable(pr)) continue;
    const Vec2 a = rig.left.project(x), b = rig.right.project(x);
    if (!rig.left.in_image(a) || !rig.right.in_image(b)) continue;
    ASSERT_LT((triangulate(rig.left, rig.right, a, b) - x).norm(), 1e-6);
    ++tested;
  }
}

TEST(Triangulate, SymmetricRigGivesSymmetricMidpoint) {
  RigidTransform wl, wr;
  wl.translation = Vec3(-50, 0, 0);
  wr.translation = Vec3(50, 0, 0);
  const auto l = make_camera({}, wl.inverse());
  const auto r = make_camera({}, wr.inverse());
  const Vec3 x(0, 20, 400);
  const Vec3 t = triangulate(l, r, l.project(x), r.project(x));
  EXPECT_NEAR(t.x(), 0.0, 1e-9);
  EXPECT_LT((t - x).norm(), 1e-9);
}

TEST(Triangulate, ParallelRays) {
  RigidTransform wr;
  wr.translation = Vec3(-100, 0, 0);
  const auto l = make_camera();
  const auto r = make_camera({}, wr);
  try {
    triangulate(l, r, Vec2(330, 320), Vec2(330, 320));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NearParallelRays);
  }
}

TEST(RigIo, RoundTripIsExact) {
  const auto rig = make_rig();
  std::stringstream ss;
  write_rig(ss, rig);
  EXPECT_EQ(ss.str().rfind("direg3d-rig v1\n", 0), 0u);
  const auto back = read_rig(ss);
  for (const auto* pair : {&rig}) {
    const FisheyeCamera* a[] = {&pair->left, &pair->right};
    const FisheyeCamera* b[] = {&back.left, &back.right};
    for (int i = 0; i < 2; ++i) {
      EXPECT_EQ(a[i]->intrinsic_matrix(), b[i]->intrinsic_matrix());
      EXPECT_EQ(a[i]->intrinsics().k, b[i]->intrinsics().k);
      EXPECT_EQ(a[i]->intrinsics().theta_max, b[i]->intrinsics().theta_max);
      EXPECT_EQ(a[i]->cam_from_world().rotation, b[i]->cam_from_world().rotation);
      EXPECT_EQ(a[i]->cam_from_world().translation, b[i]->cam_from_world().translation);
    }
  }
}

TEST(RigIo, ParsesCommentsAndDefaults) {
  std::stringstream ss(
      "direg3d-rig v1\n"
      "# hand-written\n"
      "camera left\nfx 200\nfy 200\ncx 320\ncy 240\nk1 0\nk2 0\nk3 0\nk4 0\n"
      "width 640\nheight 480\ncam_from_world 1 0 0 0 0 1 0 0 0 0 1 0\nend\n"
      "camera right  # second\nfx 200\nfy 200\ncx 320\ncy 240\nk1 0\nk2 0\nk3 0\nk4 0\n"
      "width 640\nheight 480\ncam_from_world 1 0 0 -100 0 1 0 0 0 0 1 0\nend\n");
  const auto rig = read_rig(ss);
  EXPECT_DOUBLE_EQ(rig.left.intrinsics().theta_max, kPi / 2);
  EXPECT_DOUBLE_EQ(rig.right.cam_from_world().translation.x(), -100.0);
}

TEST(RigIo, RejectsMalformedInput) {
  std::stringstream bad_magic("direg3d-rig v2\n");
  EXPECT_THROW(read_rig(bad_magic), Error);
  std::stringstream missing("direg3d-rig v1\ncamera left\nfx 1\nend\n");
  try {
    read_rig(missing);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Format);
  }
}

TEST(RigidTransformOps, InverseAndComposition) {
  std::mt19937_64 rng(43);
  const RigidTransform a{random_rotation(rng), Vec3(1, 2, 3)};
  const RigidTransform b{random_rotation(rng), Vec3(-4, 5, 6)};
  const Vec3 x(7, -8, 9);
  EXPECT_LT(((a * b).apply(x) - a.apply(b.apply(x))).norm(), 1e-12);
  EXPECT_LT((a.inverse().apply(a.apply(x)) - x).norm(), 1e-12);
  const Vec3 aa(0.3, -0.2, 0.9);
  EXPECT_LT((matrix_to_axis_angle(axis_angle_to_matrix(aa)) - aa).norm(), 1e-12);
}
