#pragma once
// Stick-figure rendering of a hand into a square grayscale crop. Positions go
// through the real fisheye projection and then the crop mapping.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "handreg/geometry/crop.hpp"
#include "handreg/hand_model/hand_model.hpp"

namespace handreg::synth {

/// 8-bit square image; pixel (x, y) is centred at crop coordinate (x, y).
struct GrayImage {
  int size = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<std::string> comments;  // PGM header comments, without '#'

  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y * size + x)] / 255.0; }
};

struct RenderOptions {
  double noise = 0.1;  // amplitude of uniform background noise
  std::uint64_t noise_seed = 0;
};

inline constexpr double kBoneRadiusMm = 4.0;
inline constexpr double kBlobRadiusMm = 5.0;

/// Crop coordinates of a world point, or nullopt when it cannot be projected.
std::optional<geometry::Vec2> project_to_crop(const geometry::FisheyeCamera& cam,
                                              const geometry::BoundingBox& box, int crop_size,
                                              const geometry::Vec3& world);

/// Throws EmptyRender when no keypoint lands inside the crop.
GrayImage render_crop(const geometry::FisheyeCamera& cam, const geometry::BoundingBox& box,
                      const hand::Points& keypoints3d, int crop_size,
                      const RenderOptions& options = {});

/// Binary P5, maxval 255, square images only.
void write_pgm(std::ostream& os, const GrayImage& image);
GrayImage read_pgm(std::istream& is);
void save_pgm(const std::filesystem::path& path, const GrayImage& image);
GrayImage load_pgm(const std::filesystem::path& path);

}  // namespace handreg::synth
