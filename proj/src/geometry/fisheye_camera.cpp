#include "handreg/geometry/fisheye_camera.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "handreg/common/error.hpp"

namespace handreg::geometry {

namespace {
constexpr int kMonotonicitySamples = 4096;
}

FisheyeCamera::FisheyeCamera(const FisheyeIntrinsics& intrinsics,
                             const RigidTransform& cam_from_world)
    : intr_(intrinsics), cam_from_world_(cam_from_world) {
  HANDREG_THROW_IF(!(intr_.fx > 0.0 && intr_.fy > 0.0), ErrorCode::InvalidCamera,
                   "focal lengths must be positive");
  HANDREG_THROW_IF(intr_.width <= 0 || intr_.height <= 0, ErrorCode::InvalidCamera,
                   "sensor size must be positive");
  HANDREG_THROW_IF(!(intr_.cx >= 0.0 && intr_.cx < intr_.width && intr_.cy >= 0.0 &&
                     intr_.cy < intr_.height),
                   ErrorCode::InvalidCamera, "principal point outside the sensor");
  HANDREG_THROW_IF(!(intr_.theta_max > 0.0 && intr_.theta_max <= std::numbers::pi),
                   ErrorCode::InvalidCamera, "theta_max must lie in (0, pi]");
  for (int i = 0; i <= kMonotonicitySamples; ++i) {
    const double theta = intr_.theta_max * i / kMonotonicitySamples;
    HANDREG_THROW_IF(!(distort_derivative(theta) > 0.0), ErrorCode::InvalidCamera,
                     "distortion polynomial is not increasing at theta=" + std::to_string(theta));
  }
  try {
    cam_from_world_.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidCamera, std::string("cam_from_world: ") + e.what());
  }
}

Mat3 FisheyeCamera::intrinsic_matrix() const {
  Mat3 k;
  k << intr_.fx, 0.0, intr_.cx, 0.0, intr_.fy, intr_.cy, 0.0, 0.0, 1.0;
  return k;
}

Vec3 FisheyeCamera::center_world() const {
  return -cam_from_world_.rotation.transpose() * cam_from_world_.translation;
}

double FisheyeCamera::distort(double theta) const {
  const double t2 = theta * theta;
  const auto& k = intr_.k;
  return theta * (1.0 + t2 * (k[0] + t2 * (k[1] + t2 * (k[2] + t2 * k[3]))));
}

double FisheyeCamera::distort_derivative(double theta) const {
  const double t2 = theta * theta;
  const auto& k = intr_.k;
  return 1.0 + t2 * (3.0 * k[0] + t2 * (5.0 * k[1] + t2 * (7.0 * k[2] + t2 * 9.0 * k[3])));
}

bool FisheyeCamera::projectable(const Vec3& p) const {
  if (!(p.z() > 0.0)) return false;
  return std::atan2(std::hypot(p.x(), p.y()), p.z()) <= intr_.theta_max;
}

Vec2 FisheyeCamera::project(const Vec3& p_world) const {
  return project_camera(cam_from_world_.apply(p_world));
}

Vec2 FisheyeCamera::project_camera(const Vec3& p, Mat23* jacobian) const {
  const double x = p.x(), y = p.y(), z = p.z();
  HANDREG_THROW_IF(!(z > 0.0), ErrorCode::PointBehindCamera, "z=" + std::to_string(z));
  const double r = std::hypot(x, y);
  const double theta = std::atan2(r, z);
  HANDREG_THROW_IF(theta > intr_.theta_max, ErrorCode::OutsideFov,
                   "theta=" + std::to_string(theta));
  const double td = distort(theta);

  constexpr double kAxisEps = 1e-12;
  const double g = r > kAxisEps ? td / r : 1.0 / z;
  const Vec2 px(intr_.fx * g * x + intr_.cx, intr_.fy * g * y + intr_.cy);

  if (jacobian) {
    double gx = 0.0, gy = 0.0, gz = -1.0 / (z * z);
    if (r > kAxisEps) {
      const double rho2 = r * r + z * z;
      const double tdp = distort_derivative(theta);
      const double dth_dx = z * x / (r * rho2);
      const double dth_dy = z * y / (r * rho2);
      const double dth_dz = -r / rho2;
      gx = tdp * dth_dx / r - td * x / (r * r * r);
      gy = tdp * dth_dy / r - td * y / (r * r * r);
      gz = tdp * dth_dz / r;
    }
    auto& j = *jacobian;
    j(0, 0) = intr_.fx * (g + x * gx);
    j(0, 1) = intr_.fx * x * gy;
    j(0, 2) = intr_.fx * x * gz;
    j(1, 0) = intr_.fy * y * gx;
    j(1, 1) = intr_.fy * (g + y * gy);
    j(1, 2) = intr_.fy * y * gz;
  }
  return px;
}

bool FisheyeCamera::in_image(const Vec2& px) const {
  return px.x() >= 0.0 && px.y() >= 0.0 && px.x() < intr_.width && px.y() < intr_.height;
}

Vec3 FisheyeCamera::unproject(const Vec2& px) const {
  HANDREG_THROW_IF(!in_image(px), ErrorCode::OutsideImage,
                   "pixel (" + std::to_string(px.x()) + ", " + std::to_string(px.y()) + ")");
  const double mx = (px.x() - intr_.cx) / intr_.fx;
  const double my = (px.y() - intr_.cy) / intr_.fy;
  const double td = std::hypot(mx, my);
  if (td == 0.0) return Vec3::UnitZ();
  HANDREG_THROW_IF(td > distort(intr_.theta_max), ErrorCode::OutsideImage,
                   "pixel beyond the image circle");

  constexpr int kMaxIterations = 20;
  constexpr double kResidual = 1e-12;
  double theta = std::min(td, intr_.theta_max);
  bool converged = false;
  for (int it = 0; it < kMaxIterations; ++it) {
    const double residual = distort(theta) - td;
    if (std::abs(residual) < kResidual) {
      converged = true;
      break;
    }
    theta -= residual / distort_derivative(theta);
    theta = std::clamp(theta, 0.0, intr_.theta_max);
  }
  if (!converged) converged = std::abs(distort(theta) - td) < kResidual;
  HANDREG_THROW_IF(!converged, ErrorCode::NoConvergence,
                   "Newton inversion of theta_d=" + std::to_string(td));
  const double s = std::sin(theta) / td;
  return Vec3(s * mx, s * my, std::cos(theta));
}

}  // namespace handreg::geometry
