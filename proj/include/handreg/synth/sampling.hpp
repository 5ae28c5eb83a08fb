#pragma once
// Head-mounted stereo fisheye rig preset and hand configuration sampler.

#include <array>

#include "handreg/common/random.hpp"
#include "handreg/geometry/rig_io.hpp"
#include "handreg/hand_model/hand_model.hpp"

namespace handreg::synth {

/// Two outward-yawed fisheye cameras on a horizontal baseline. World frame:
/// origin between the cameras, x right, y down, z forward.
struct RigPreset {
  int width = 640;
  int height = 480;
  double focal = 180.0;
  double baseline_mm = 100.0;
  double yaw_deg = 40.0;
  double theta_max = 1.5707963267948966;
  std::array<double, 4> k_left = {-0.012, 0.0035, -0.0006, 0.0};
  std::array<double, 4> k_right = {-0.010, 0.0030, -0.0005, 0.0};
};

geometry::StereoRig make_rig(const RigPreset& preset);

/// Degrees of azimuth (horizontal plane, 1 m range) seen by at least one camera.
double horizontal_coverage_deg(const geometry::StereoRig& rig, double step_deg = 0.25);

/// Per-joint local rotation limits in the joint's (flex, abduct, twist) axes, rad.
struct JointLimits {
  geometry::Vec3 lo;
  geometry::Vec3 hi;
};
JointLimits joint_limits(int finger, int level);

struct SamplingRanges {
  double distance_min_mm = 200.0;
  double distance_max_mm = 700.0;
  double azimuth_max_deg = 75.0;
  double elevation_min_deg = -45.0;  // below the rig
  double elevation_max_deg = 30.0;
  double orientation_jitter_rad = 0.8;
  double shape_sigma = 0.5;
  double shape_clip = 2.0;
};

/// Rest-space point placed at the sampled position: mean of the wrist and knuckles.
geometry::Vec3 palm_anchor(const hand::HandTemplate& t);

/// Local (flex, abduct, twist) angles of a joint pose.
geometry::Vec3 local_angles(const hand::HandTemplate& t, int joint, const geometry::Vec3& pose);

/// Flexion-biased pose within joint_limits, clipped Gaussian shape, and a
/// palm position uniform in (distance, azimuth, elevation) about the rig.
hand::HandParams sample_hand(Rng& rng, const hand::HandTemplate& t,
                             const SamplingRanges& ranges = {});

}  // namespace handreg::synth
