#include "handreg/geometry/stereo.hpp"

#include <cmath>

#include "handreg/common/error.hpp"

namespace handreg::geometry {

RigidTransform relative_extrinsics(const FisheyeCamera& left, const FisheyeCamera& right) {
  return right.cam_from_world() * left.cam_from_world().inverse();
}

Mat3 virtual_rotation(const FisheyeCamera& cam, const BoundingBox& box) {
  return rotation_to_ray(bbox_center_ray(cam, box));
}

RigidTransform virtual_relative_extrinsics(const FisheyeCamera& cam_l, const BoundingBox& box_l,
                                           const FisheyeCamera& cam_r, const BoundingBox& box_r) {
  HANDREG_THROW_IF(!box_l.valid() || !box_r.valid(), ErrorCode::DegenerateBox,
                   "stereo boxes must have positive area");
  const Mat3 q_l = virtual_rotation(cam_l, box_l);
  const Mat3 q_r = virtual_rotation(cam_r, box_r);
  const RigidTransform rl = relative_extrinsics(cam_l, cam_r);
  RigidTransform out;
  out.rotation = q_r.transpose() * rl.rotation * q_l;
  out.translation = q_r.transpose() * rl.translation;
  return out;
}

Vec3 triangulate(const FisheyeCamera& cam_l, const FisheyeCamera& cam_r, const Vec2& px_l,
                 const Vec2& px_r) {
  const Vec3 d_l = cam_l.cam_from_world().rotation.transpose() * cam_l.unproject(px_l);
  const Vec3 d_r = cam_r.cam_from_world().rotation.transpose() * cam_r.unproject(px_r);
  const double angle = std::atan2(d_l.cross(d_r).norm(), d_l.dot(d_r));
  HANDREG_THROW_IF(angle < 1e-6, ErrorCode::NearParallelRays,
                   "ray angle " + std::to_string(angle) + " rad");
  const Vec3 o_l = cam_l.center_world();
  const Vec3 o_r = cam_r.center_world();
  const Vec3 w0 = o_l - o_r;
  const double b = d_l.dot(d_r);
  const double d = d_l.dot(w0);
  const double e = d_r.dot(w0);
  const double denom = 1.0 - b * b;
  const double s = (b * e - d) / denom;
  const double t = (e - b * d) / denom;
  return 0.5 * ((o_l + s * d_l) + (o_r + t * d_r));
}

}  // namespace handreg::geometry
