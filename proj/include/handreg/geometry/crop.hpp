#pragma once

#include "handreg/geometry/fisheye_camera.hpp"

namespace handreg::geometry {

/// Axis-aligned box in full-frame pixel coordinates.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double side() const { return width() > height() ? width() : height(); }
  Vec2 center() const { return {0.5 * (x_min + x_max), 0.5 * (y_min + y_max)}; }
  bool valid() const { return x_min < x_max && y_min < y_max; }
};

/// Margin applied when a tight box is squared up for cropping.
inline constexpr double kCropMargin = 1.25;

/// Expands `tight` to a square of side margin * max(w, h) about its centre,
/// then clamps it to the sensor. Throws DegenerateBox for an empty box or one
/// that lies entirely outside the sensor.
BoundingBox square_crop_box(const FisheyeCamera& cam, const BoundingBox& tight,
                            double margin = kCropMargin);

/// Intrinsic matrix of the crop resampled to out_size x out_size pixels.
struct CropIntrinsics {
  Mat3 K = Mat3::Identity();
  int size = 0;
};

/// K' = diag(s, s, 1) * T(-x_min, -y_min) * K with s = out_size / max(w, h).
/// Throws DegenerateBox for a zero-area box, InvalidArgument for out_size <= 0.
CropIntrinsics crop_intrinsics(const FisheyeCamera& cam, const BoundingBox& box, int out_size);

/// Unit camera-frame ray through the box centre.
Vec3 bbox_center_ray(const FisheyeCamera& cam, const BoundingBox& box);

/// Minimal rotation taking +z onto `ray`. Identity for ray = +z; for the
/// antipodal ray (within 1e-6 of -z) the result is a rotation by pi about +x.
/// Throws InvalidArgument when |ray| differs from 1 by more than 1e-9.
Mat3 rotation_to_ray(const Vec3& ray);

}  // namespace handreg::geometry
