#pragma once
// Human-readable rig calibration file:
//
//   direg3d-rig v1
//   camera <name>
//   fx <f>  fy <f>  cx <f>  cy <f>
//   k1 <f>  k2 <f>  k3 <f>  k4 <f>
//   width <n>  height <n>
//   theta_max <rad>            (optional, default pi/2)
//   cam_from_world <12 numbers, 3x4 row-major, translation in mm>
//   end
//
// One key per line, '#' starts a comment.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "handreg/geometry/fisheye_camera.hpp"

namespace handreg::geometry {

inline constexpr std::string_view kRigMagic = "direg3d-rig v1";

struct StereoRig {
  FisheyeCamera left;
  FisheyeCamera right;
};

void write_rig(std::ostream& os, const StereoRig& rig);
StereoRig read_rig(std::istream& is);

void save_rig(const std::filesystem::path& path, const StereoRig& rig);
StereoRig load_rig(const std::filesystem::path& path);

}  // namespace handreg::geometry
