#pragma once

#include <Eigen/Dense>

namespace handreg::geometry {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// x' = rotation * x + translation. Translation in millimetres.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
  RigidTransform inverse() const;
  /// (this * other).apply(x) == this->apply(other.apply(x))
  RigidTransform operator*(const RigidTransform& other) const;

  /// Throws InvalidArgument unless R^T R = I and det R = 1 within tol.
  void validate(double tol = 1e-9) const;
};

/// Rodrigues map from an axis-angle vector (rad) to a rotation matrix.
Mat3 axis_angle_to_matrix(const Vec3& axis_angle);
/// Inverse of axis_angle_to_matrix, angle in [0, pi].
Vec3 matrix_to_axis_angle(const Mat3& r);

}  // namespace handreg::geometry
