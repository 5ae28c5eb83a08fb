#include "handreg/synth/sampling.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numbers>

namespace handreg::synth {

using geometry::Mat3;
using geometry::Vec3;

namespace {

double deg(double d) { return d * std::numbers::pi / 180.0; }

Mat3 rot(const Vec3& axis, double angle) { return Eigen::AngleAxisd(angle, axis).toRotationMatrix(); }

}  // namespace

geometry::StereoRig make_rig(const RigPreset& preset) {
  geometry::FisheyeIntrinsics l;
  l.fx = l.fy = preset.focal;
  l.cx = 0.5 * (preset.width - 1);
  l.cy = 0.5 * (preset.height - 1);
  l.width = preset.width;
  l.height = preset.height;
  l.theta_max = preset.theta_max;
  geometry::FisheyeIntrinsics r = l;
  l.k = preset.k_left;
  r.k = preset.k_right;
  geometry::RigidTransform wl, wr;  // world_from_cam
  wl.rotation = rot(Vec3::UnitY(), -deg(preset.yaw_deg));
  wl.translation = Vec3(-0.5 * preset.baseline_mm, 0.0, 0.0);
  wr.rotation = rot(Vec3::UnitY(), deg(preset.yaw_deg));
  wr.translation = Vec3(0.5 * preset.baseline_mm, 0.0, 0.0);
  return {geometry::FisheyeCamera(l, wl.inverse()), geometry::FisheyeCamera(r, wr.inverse())};
}

double horizontal_coverage_deg(const geometry::StereoRig& rig, double step_deg) {
  auto sees = [](const geometry::FisheyeCamera& cam, const Vec3& p) {
    const Vec3 pc = cam.cam_from_world().apply(p);
    return cam.projectable(pc) && cam.in_image(cam.project_camera(pc));
  };
  const int n = static_cast<int>(std::round(360.0 / step_deg));
  int covered = 0;
  for (int i = 0; i < n; ++i) {
    const double az = deg(-180.0 + (i + 0.5) * step_deg);
    const Vec3 p = 1000.0 * Vec3(std::sin(az), 0.0, std::cos(az));
    if (sees(rig.left, p) || sees(rig.right, p)) ++covered;
  }
  return covered * step_deg;
}

JointLimits joint_limits(int finger, int level) {
  if (finger == 0) {
    switch (level) {
      case 0: return {Vec3(-0.3, -0.4, -0.3), Vec3(0.9, 0.4, 0.3)};
      case 1: return {Vec3(-0.2, -0.15, -0.1), Vec3(0.9, 0.15, 0.1)};
      default: return {Vec3(-0.2, -0.05, -0.05), Vec3(1.2, 0.05, 0.05)};
    }
  }
  switch (level) {
    case 0: return {Vec3(-0.3, -0.3, -0.15), Vec3(1.5, 0.3, 0.15)};
    case 1: return {Vec3(0.0, -0.05, -0.05), Vec3(1.7, 0.05, 0.05)};
    default: return {Vec3(0.0, -0.05, -0.05), Vec3(1.3, 0.05, 0.05)};
  }
}

Vec3 palm_anchor(const hand::HandTemplate& t) {
  Vec3 c = t.joints.row(0).transpose();
  for (int f = 0; f < hand::kNumFingers; ++f) c += t.joints.row(hand::joint_index(f, 0)).transpose();
  return c / (hand::kNumFingers + 1);
}

Vec3 local_angles(const hand::HandTemplate& t, int joint, const Vec3& pose) {
  return t.joint_axes[joint].transpose() * pose;
}

hand::HandParams sample_hand(Rng& rng, const hand::HandTemplate& t, const SamplingRanges& ranges) {
  hand::HandParams p;

  // One grip value per hand keeps the fingers correlated; each joint adds its own noise.
  const double grip = rng.uniform();
  for (int f = 0; f < hand::kNumFingers; ++f) {
    for (int l = 0; l < 3; ++l) {
      const JointLimits lim = joint_limits(f, l);
      Vec3 a;
      const double u = std::clamp(grip + rng.normal(0.0, 0.2), 0.0, 1.0);
      a.x() = lim.lo.x() + u * (lim.hi.x() - lim.lo.x());
      a.y() = rng.uniform(lim.lo.y(), lim.hi.y());
      a.z() = rng.uniform(lim.lo.z(), lim.hi.z());
      p.joint_pose[hand::joint_index(f, l) - 1] = t.joint_axes[hand::joint_index(f, l)] * a;
    }
  }
  for (auto& s : p.shape)
    s = std::clamp(rng.normal(0.0, ranges.shape_sigma), -ranges.shape_clip, ranges.shape_clip);

  const double distance = rng.uniform(ranges.distance_min_mm, ranges.distance_max_mm);
  const double azimuth = deg(rng.uniform(-ranges.azimuth_max_deg, ranges.azimuth_max_deg));
  const double elevation = deg(rng.uniform(ranges.elevation_min_deg, ranges.elevation_max_deg));
  const Vec3 position = distance * Vec3(std::cos(elevation) * std::sin(azimuth),
                                        -std::sin(elevation),
                                        std::cos(elevation) * std::cos(azimuth));

  // Fingers forward, back of the hand up, then a random tilt of bounded angle.
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  axis.normalize();
  const double tilt = ranges.orientation_jitter_rad * std::cbrt(rng.uniform());
  const Mat3 r = rot(Vec3::UnitY(), azimuth) * rot(axis, tilt) *
                 rot(Vec3::UnitX(), 0.5 * std::numbers::pi);
  p.global_rot = geometry::matrix_to_axis_angle(r);
  p.global_trans = position - r * palm_anchor(t);
  return p;
}

}  // namespace handreg::synth
