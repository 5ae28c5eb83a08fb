#include "handreg/metadata/metadata.hpp"

#include <algorithm>

#include "handreg/common/error.hpp"

namespace handreg::metadata {

MetadataVector compute_metadata(const geometry::FisheyeCamera& cam,
                                const geometry::BoundingBox& box, int crop_size) {
  HANDREG_THROW_IF(!box.valid(), ErrorCode::DegenerateBox, "metadata box has zero area");
  MetadataVector out;
  auto& m = out.raw;
  const auto& in = cam.intrinsics();
  m[kCenterDistance] = (box.center() - geometry::Vec2(in.cx, in.cy)).norm();
  m[kCorners + 0] = box.x_min;
  m[kCorners + 1] = box.y_min;
  m[kCorners + 2] = box.x_max;
  m[kCorners + 3] = box.y_max;
  const auto crop = geometry::crop_intrinsics(cam, box, crop_size);
  m[kScaleRatio] = box.side() / crop_size;
  const geometry::Mat3 rot = geometry::rotation_to_ray(geometry::bbox_center_ray(cam, box));
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      m[kRotation + 3 * r + c] = rot(r, c);
      m[kCropK + 3 * r + c] = crop.K(r, c);
    }
  }
  for (int i = 0; i < 4; ++i) m[kDistortion + i] = in.k[i];
  return out;
}

NormalizationStats fit_normalization(std::span<const MetadataVector> dataset) {
  HANDREG_THROW_IF(dataset.empty(), ErrorCode::EmptyDataset,
                   "cannot fit normalization on zero vectors");
  NormalizationStats stats{dataset[0].raw, dataset[0].raw};
  for (const auto& v : dataset.subspan(1)) {
    for (size_t i = 0; i < kMetadataDim; ++i) {
      stats.min[i] = std::min(stats.min[i], v.raw[i]);
      stats.max[i] = std::max(stats.max[i], v.raw[i]);
    }
  }
  return stats;
}

Raw normalize(const MetadataVector& v, const NormalizationStats& stats) {
  Raw out{};
  for (size_t i = 0; i < kMetadataDim; ++i) {
    if (stats.is_constant(i)) continue;
    const double t = 2.0 * (v.raw[i] - stats.min[i]) / (stats.max[i] - stats.min[i]) - 1.0;
    out[i] = std::clamp(t, -1.0, 1.0);
  }
  return out;
}

}  // namespace handreg::metadata
