#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "handreg/common/error.hpp"
#include "handreg/metadata/metadata.hpp"

using namespace handreg;
using namespace handreg::metadata;
using geometry::BoundingBox;

namespace {

geometry::FisheyeCamera make_camera() {
  geometry::FisheyeIntrinsics in;
  in.fx = 180.0;
  in.fy = 181.0;
  in.cx = 321.5;
  in.cy = 238.0;
  in.k = {-0.03, 0.004, -0.0005, 0.0001};
  in.width = 640;
  in.height = 480;
  geometry::RigidTransform pose;
  pose.rotation = geometry::axis_angle_to_matrix(geometry::Vec3(0.1, -0.6, 0.05));
  pose.translation = geometry::Vec3(30, 0, -5);
  return geometry::FisheyeCamera(in, pose);
}

BoundingBox random_box(std::mt19937_64& rng) {
  // Centres stay inside the image circle (radius ~262 px for this lens).
  std::uniform_real_distribution<double> side(40.0, 160.0), r(0.0, 230.0), a(-3.14159, 3.14159);
  const double s = side(rng), rho = r(rng), phi = a(rng);
  const double cx = 321.5 + rho * std::cos(phi), cy = 238.0 + rho * std::sin(phi);
  return {std::max(cx - s / 2, 0.0), std::max(cy - s / 2, 0.0), std::min(cx + s / 2, 640.0),
          std::min(cy + s / 2, 480.0)};
}

}  // namespace

TEST(ComputeMetadata, CenteredBox) {
  const auto cam = make_camera();
  const BoundingBox box{321.5 - 40, 238 - 40, 321.5 + 40, 238 + 40};
  const auto m = compute_metadata(cam, box, 32);
  EXPECT_EQ(m.raw[kCenterDistance], 0.0);
  const double identity[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  for (int i = 0; i < 9; ++i) EXPECT_EQ(m.raw[kRotation + i], identity[i]);
  EXPECT_DOUBLE_EQ(m.raw[kScaleRatio], 2.5);
}

TEST(ComputeMetadata, UnitScaleRatio) {
  const auto cam = make_camera();
  const auto m = compute_metadata(cam, {100, 100, 132, 132}, 32);
  EXPECT_EQ(m.raw[kScaleRatio], 1.0);
}

TEST(ComputeMetadata, BlocksMatchGeometry) {
  const auto cam = make_camera();
  std::mt19937_64 rng(7);
  for (int n = 0; n < 200; ++n) {
    const auto box = random_box(rng);
    const auto m = compute_metadata(cam, box, 32);
    const auto k = geometry::crop_intrinsics(cam, box, 32).K;
    const auto r = geometry::rotation_to_ray(geometry::bbox_center_ray(cam, box));
    const geometry::Vec2 c = box.center();
    const double dx = c.x() - 321.5, dy = c.y() - 238.0;
    ASSERT_DOUBLE_EQ(m.raw[kCenterDistance], std::sqrt(dx * dx + dy * dy));
    ASSERT_EQ(m.raw[kCorners + 0], box.x_min);
    ASSERT_EQ(m.raw[kCorners + 1], box.y_min);
    ASSERT_EQ(m.raw[kCorners + 2], box.x_max);
    ASSERT_EQ(m.raw[kCorners + 3], box.y_max);
    ASSERT_EQ(m.raw[kScaleRatio], box.side() / 32);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        ASSERT_EQ(m.raw[kRotation + 3 * i + j], r(i, j));
        ASSERT_EQ(m.raw[kCropK + 3 * i + j], k(i, j));
      }
    }
    for (int i = 0; i < 4; ++i) ASSERT_EQ(m.raw[kDistortion + i], cam.intrinsics().k[i]);
    ASSERT_EQ(compute_metadata(cam, box, 32).raw, m.raw);
  }
}

TEST(FitNormalization, SingleVector) {
  MetadataVector v;
  for (size_t i = 0; i < kMetadataDim; ++i) v.raw[i] = 0.5 * i - 3;
  const auto stats = fit_normalization(std::span(&v, 1));
  EXPECT_EQ(stats.min, v.raw);
  EXPECT_EQ(stats.max, v.raw);
  for (size_t i = 0; i < kMetadataDim; ++i) EXPECT_TRUE(stats.is_constant(i));
}

TEST(FitNormalization, BruteForce) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 10.0);
  std::vector<MetadataVector> data(57);
  for (auto& v : data)
    for (auto& x : v.raw) x = n(rng);
  for (auto& v : data) v.raw[9] = 4.0;
  const auto stats = fit_normalization(data);
  for (size_t i = 0; i < kMetadataDim; ++i) {
    double lo = 1e300, hi = -1e300;
    for (const auto& v : data) {
      if (v.raw[i] < lo) lo = v.raw[i];
      if (v.raw[i] > hi) hi = v.raw[i];
    }
    EXPECT_EQ(stats.min[i], lo);
    EXPECT_EQ(stats.max[i], hi);
    EXPECT_EQ(stats.is_constant(i), i == 9);
  }
}

TEST(FitNormalization, Empty) {
  try {
    fit_normalization({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyDataset);
  }
}

TEST(Normalize, EndpointsMidpointClampAndConstant) {
  NormalizationStats stats;
  for (size_t i = 0; i < kMetadataDim; ++i) {
    stats.min[i] = -2.0 + i;
    stats.max[i] = 3.0 + 2 * i;
  }
  stats.max[4] = stats.min[4];
  MetadataVector lo{stats.min}, hi{stats.max}, mid, beyond;
  for (size_t i = 0; i < kMetadataDim; ++i) {
    mid.raw[i] = 0.5 * (stats.min[i] + stats.max[i]);
    beyond.raw[i] = stats.max[i] + 100.0;
  }
  const auto a = normalize(lo, stats), b = normalize(hi, stats), c = normalize(mid, stats),
             d = normalize(beyond, stats);
  for (size_t i = 0; i < kMetadataDim; ++i) {
    if (i == 4) {
      EXPECT_EQ(a[i], 0.0);
      EXPECT_EQ(d[i], 0.0);
      continue;
    }
    EXPECT_EQ(a[i], -1.0);
    EXPECT_EQ(b[i], 1.0);
    EXPECT_NEAR(c[i], 0.0, 1e-15);
    EXPECT_EQ(d[i], 1.0);
  }
}

TEST(Normalize, TotalAndMonotone) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 50.0);
  NormalizationStats stats;
  for (size_t i = 0; i < kMetadataDim; ++i) {
    stats.min[i] = -10.0 - i;
    stats.max[i] = 10.0 + i;
  }
  for (int t = 0; t < 500; ++t) {
    MetadataVector v, w;
    for (size_t i = 0; i < kMetadataDim; ++i) {
      v.raw[i] = n(rng);
      w.raw[i] = v.raw[i] + std::abs(n(rng));
    }
    const auto a = normalize(v, stats), b = normalize(w, stats);
    for (size_t i = 0; i < kMetadataDim; ++i) {
      ASSERT_GE(a[i], -1.0);
      ASSERT_LE(a[i], 1.0);
      ASSERT_LE(a[i], b[i]);
    }
  }
}
