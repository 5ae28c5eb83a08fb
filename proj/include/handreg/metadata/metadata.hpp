#pragma once

#include <array>
#include <span>

#include "handreg/geometry/crop.hpp"

namespace handreg::metadata {

inline constexpr size_t kMetadataDim = 28;

/// Frozen layout of the raw metadata vector (layout version 1).
enum Offset : size_t {
  kCenterDistance = 0,  // 1: box centre to principal point, pixels
  kCorners = 1,         // 4: x_min, y_min, x_max, y_max, full-frame pixels
  kScaleRatio = 5,      // 1: crop box side / network input size
  kRotation = 6,        // 9: rotation_to_ray(box centre ray), row-major
  kCropK = 15,          // 9: crop intrinsic matrix, row-major
  kDistortion = 24,     // 4: k1..k4
};

using Raw = std::array<double, kMetadataDim>;

struct MetadataVector {
  Raw raw{};
};

struct NormalizationStats {
  Raw min{};
  Raw max{};

  bool is_constant(size_t i) const { return min[i] == max[i]; }
};

/// `box` is the square crop box the network sees, so scale_ratio = side / crop_size.
MetadataVector compute_metadata(const geometry::FisheyeCamera& cam,
                                const geometry::BoundingBox& box, int crop_size);

/// Exact per-dimension min/max. Throws EmptyDataset for an empty input.
NormalizationStats fit_normalization(std::span<const MetadataVector> dataset);

/// 2 (v - min) / (max - min) - 1 clamped to [-1, 1]; constant dimensions map to 0.
Raw normalize(const MetadataVector& v, const NormalizationStats& stats);

}  // namespace handreg::metadata
