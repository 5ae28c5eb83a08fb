#include "handreg/geometry/crop.hpp"

#include <algorithm>
#include <cmath>

#include "handreg/common/error.hpp"

namespace handreg::geometry {

BoundingBox square_crop_box(const FisheyeCamera& cam, const BoundingBox& tight, double margin) {
  HANDREG_THROW_IF(!(tight.x_min <= tight.x_max && tight.y_min <= tight.y_max) ||
                       (tight.width() <= 0.0 && tight.height() <= 0.0),
                   ErrorCode::DegenerateBox, "tight box has no extent");
  HANDREG_THROW_IF(!(margin > 0.0), ErrorCode::InvalidArgument, "margin must be positive");
  const Vec2 c = tight.center();
  const double half = 0.5 * margin * tight.side();
  BoundingBox box{std::max(c.x() - half, 0.0), std::max(c.y() - half, 0.0),
                  std::min(c.x() + half, static_cast<double>(cam.width())),
                  std::min(c.y() + half, static_cast<double>(cam.height()))};
  HANDREG_THROW_IF(!box.valid(), ErrorCode::DegenerateBox, "box lies outside the sensor");
  return box;
}

CropIntrinsics crop_intrinsics(const FisheyeCamera& cam, const BoundingBox& box, int out_size) {
  HANDREG_THROW_IF(out_size <= 0, ErrorCode::InvalidArgument, "out_size must be positive");
  HANDREG_THROW_IF(!box.valid(), ErrorCode::DegenerateBox, "box has zero area");
  const double s = out_size / box.side();
  const auto& in = cam.intrinsics();
  CropIntrinsics out;
  out.size = out_size;
  out.K << s * in.fx, 0.0, s * (in.cx - box.x_min),
           0.0, s * in.fy, s * (in.cy - box.y_min),
           0.0, 0.0, 1.0;
  return out;
}

Vec3 bbox_center_ray(const FisheyeCamera& cam, const BoundingBox& box) {
  return cam.unproject(box.center());
}

Mat3 rotation_to_ray(const Vec3& ray) {
  HANDREG_THROW_IF(!(std::abs(ray.norm() - 1.0) <= 1e-9), ErrorCode::InvalidArgument,
                   "ray must be unit length");
  if ((ray + Vec3::UnitZ()).norm() < 1e-6) {
    return Vec3(1.0, -1.0, -1.0).asDiagonal();
  }
  // Rodrigues with axis z x ray; (1 - cos) / sin^2 rewritten as 1 / (1 + cos).
  Mat3 k;
  k << 0.0, 0.0, ray.x(),
       0.0, 0.0, ray.y(),
       -ray.x(), -ray.y(), 0.0;
  return Mat3::Identity() + k + (k * k) / (1.0 + ray.z());
}

}  // namespace handreg::geometry
