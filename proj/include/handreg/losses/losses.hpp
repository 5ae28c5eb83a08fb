#pragma once
// Training objective terms. The graph functions are batched and return
// scalar tensors; the array overloads evaluate a single example through the
// same code path.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "handreg/autodiff/tensor.hpp"
#include "handreg/geometry/fisheye_camera.hpp"
#include "handreg/hand_model/hand_model.hpp"

namespace handreg::losses {

using ad::Graph;
using ad::Tensor;

enum Term : int { kKp3d, kMesh, kBoneLength, kBoneAngle, kVariance, kParamReg, kKp2d, kStereo2d };
inline constexpr int kNumTerms = 8;
inline constexpr std::array<std::string_view, kNumTerms> kTermNames = {
    "kp3d", "mesh", "bone_len", "bone_ang", "var", "reg", "kp2d", "stereo2d"};

struct LossWeights {
  std::array<double, kNumTerms> w = {1.0, 1.0, 0.5, 0.5, 0.1, 0.01, 0.01, 0.01};

  /// Throws InvalidConfig for a negative weight or when all are zero.
  void validate() const;
};

/// Scale bound of the variance term's log-scale input.
inline constexpr double kLogScaleMin = -5.0;
inline constexpr double kLogScaleMax = 5.0;
/// Cosines are clamped to +-(1 - kCosineMargin) before acos.
inline constexpr double kCosineMargin = 1e-7;

/// Mean elementwise L1; pred and gt must have the same shape.
Tensor keypoints_3d(Graph& g, const Tensor& pred, const Tensor& gt);
Tensor mesh(Graph& g, const Tensor& pred, const Tensor& gt);
/// [B, 21, 3] inputs; mean |len_pred - len_gt| over the 20 skeleton edges.
Tensor bone_length(Graph& g, const Tensor& pred, const Tensor& gt);
/// Mean |angle_pred - angle_gt| over the 15 inter-bone angles, skipping
/// angles that involve a bone shorter than 1e-9 mm in either input.
Tensor bone_angle(Graph& g, const Tensor& pred, const Tensor& gt);
/// Laplace NLL: mean_k ||pred_k - gt_k||_1 exp(-s_k) + 3 s_k with
/// s = clamp(log_scale, -5, 5). log_scale is [B, 21].
Tensor keypoint_variance(Graph& g, const Tensor& pred, const Tensor& log_scale, const Tensor& gt);
/// Mean square of the 45 joint-pose and 10 shape entries of [B, 61] params.
Tensor param_reg(Graph& g, const Tensor& params);

/// One projection target per batch element.
struct ProjectionTarget {
  const geometry::FisheyeCamera* camera = nullptr;
  std::vector<double> gt2d;       // 21 x 2 pixels
  std::vector<std::uint8_t> gt_valid;  // 21 flags; empty means all valid
};

/// Mean elementwise L1 pixel error between the projection of pred [B, 21, 3]
/// (world mm) and the targets. Keypoints that cannot be projected, or whose
/// target is invalid, are masked. Throws AllMasked when nothing remains.
Tensor projection_2d(Graph& g, const Tensor& pred, std::span<const ProjectionTarget> targets);

/// Average of projection_2d over the views that keep at least one keypoint.
Tensor stereo_reprojection(Graph& g, const Tensor& pred, std::span<const ProjectionTarget> left,
                           std::span<const ProjectionTarget> right);

struct LossTerms {
  std::array<Tensor, kNumTerms> terms;  // undefined = absent
};

struct LossReport {
  std::array<std::optional<double>, kNumTerms> values;
  double total = 0.0;
};

/// Weighted sum of the present terms and the per-term report.
std::pair<Tensor, LossReport> total_loss(Graph& g, const LossTerms& terms,
                                         const LossWeights& weights);

// Single-example evaluation.
using hand::Points;
using Pixels = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;
double loss_keypoints_3d(const Points& pred, const Points& gt);
double loss_mesh(const Points& pred, const Points& gt);
double loss_bone_length(const Points& pred, const Points& gt);
double loss_bone_angle(const Points& pred, const Points& gt);
double loss_keypoint_variance(const Points& pred, std::span<const double> log_scale,
                              const Points& gt);
double loss_param_reg(const hand::HandParams& p);
double loss_projection_2d(const geometry::FisheyeCamera& cam, const Points& pred_world,
                          const Pixels& gt2d, std::span<const std::uint8_t> gt_valid = {});
double loss_stereo_reprojection(const geometry::FisheyeCamera& cam_l,
                                const geometry::FisheyeCamera& cam_r, const Points& pred_world,
                                const Pixels& gt_l, const Pixels& gt_r,
                                std::span<const std::uint8_t> valid_l = {},
                                std::span<const std::uint8_t> valid_r = {});

}  // namespace handreg::losses
