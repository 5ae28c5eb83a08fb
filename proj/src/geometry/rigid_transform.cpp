#include "handreg/geometry/rigid_transform.hpp"

#include <Eigen/Geometry>
#include <cmath>

#include "handreg/common/error.hpp"

namespace handreg::geometry {

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

RigidTransform RigidTransform::operator*(const RigidTransform& other) const {
  RigidTransform out;
  out.rotation = rotation * other.rotation;
  out.translation = rotation * other.translation + translation;
  return out;
}

void RigidTransform::validate(double tol) const {
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  HANDREG_THROW_IF(!(ortho <= tol), ErrorCode::InvalidArgument,
                   "rotation is not orthonormal (err " + std::to_string(ortho) + ")");
  HANDREG_THROW_IF(!(std::abs(rotation.determinant() - 1.0) <= tol), ErrorCode::InvalidArgument,
                   "rotation determinant is not 1");
  HANDREG_THROW_IF(!translation.allFinite(), ErrorCode::InvalidArgument, "non-finite translation");
}

Mat3 axis_angle_to_matrix(const Vec3& axis_angle) {
  const double angle = axis_angle.norm();
  if (angle < 1e-15) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, axis_angle / angle).toRotationMatrix();
}

Vec3 matrix_to_axis_angle(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.axis() * aa.angle();
}

}  // namespace handreg::geometry
