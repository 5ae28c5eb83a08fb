#pragma once

#include "handreg/geometry/crop.hpp"

namespace handreg::geometry {

/// Maps physical-left camera coordinates to physical-right camera coordinates.
RigidTransform relative_extrinsics(const FisheyeCamera& left, const FisheyeCamera& right);

/// Rotation Q with p_cam = Q * p_virtual for the virtual camera that looks at
/// the box centre from the same optical centre.
Mat3 virtual_rotation(const FisheyeCamera& cam, const BoundingBox& box);

/// Transform from the virtual-left frame to the virtual-right frame:
///   R = Q_r^T R_rl Q_l,  t = Q_r^T t_rl
RigidTransform virtual_relative_extrinsics(const FisheyeCamera& cam_l, const BoundingBox& box_l,
                                           const FisheyeCamera& cam_r, const BoundingBox& box_r);

/// Midpoint of the common perpendicular of the two world-frame viewing rays.
/// Throws NearParallelRays when the rays differ by less than 1e-6 rad.
Vec3 triangulate(const FisheyeCamera& cam_l, const FisheyeCamera& cam_r, const Vec2& px_l,
                 const Vec2& px_r);

}  // namespace handreg::geometry
