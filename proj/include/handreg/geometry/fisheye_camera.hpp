#pragma once

#include <Eigen/Dense>
#include <array>
#include <numbers>

#include "handreg/geometry/rigid_transform.hpp"

namespace handreg::geometry {

using Vec2 = Eigen::Vector2d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

struct FisheyeIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  std::array<double, 4> k{};  // radial coefficients k1..k4
  int width = 0;
  int height = 0;
  double theta_max = std::numbers::pi / 2.0;  // FOV half-angle (rad)
};

/// Equidistant fisheye with a four-term odd polynomial:
///   theta_d = theta * (1 + k1 theta^2 + k2 theta^4 + k3 theta^6 + k4 theta^8)
///   u = fx * theta_d * cos(phi) + cx,  v = fy * theta_d * sin(phi) + cy
/// theta is the angle to the optical axis and phi the azimuth in the image
/// plane. Construction rejects coefficient sets whose polynomial is not
/// strictly increasing on [0, theta_max].
class FisheyeCamera {
 public:
  FisheyeCamera(const FisheyeIntrinsics& intrinsics, const RigidTransform& cam_from_world);

  const FisheyeIntrinsics& intrinsics() const { return intr_; }
  const RigidTransform& cam_from_world() const { return cam_from_world_; }
  double fx() const { return intr_.fx; }
  double fy() const { return intr_.fy; }
  double cx() const { return intr_.cx; }
  double cy() const { return intr_.cy; }
  const std::array<double, 4>& distortion() const { return intr_.k; }
  int width() const { return intr_.width; }
  int height() const { return intr_.height; }
  double theta_max() const { return intr_.theta_max; }

  /// 3x3 pinhole-style matrix [fx 0 cx; 0 fy cy; 0 0 1].
  Mat3 intrinsic_matrix() const;
  /// Camera centre in world coordinates.
  Vec3 center_world() const;

  double distort(double theta) const;
  double distort_derivative(double theta) const;

  /// World point to pixel. Throws PointBehindCamera or OutsideFov.
  Vec2 project(const Vec3& p_world) const;
  /// Camera-frame point to pixel; optionally writes d(pixel)/d(p_cam).
  Vec2 project_camera(const Vec3& p_cam, Mat23* jacobian = nullptr) const;
  /// True when project_camera would succeed.
  bool projectable(const Vec3& p_cam) const;

  /// Pixel to camera-frame unit ray. Newton inversion of the distortion
  /// polynomial, at most 20 iterations to a residual below 1e-12.
  /// Throws OutsideImage or NoConvergence.
  Vec3 unproject(const Vec2& px) const;

  bool in_image(const Vec2& px) const;

 private:
  FisheyeIntrinsics intr_;
  RigidTransform cam_from_world_;
};

}  // namespace handreg::geometry
