#pragma once
// Differentiable versions of the hand model on top of the autodiff graph.
// Every function is batched: parameters arrive as [B, 61].

#include <cstdint>
#include <vector>

#include "handreg/autodiff/tensor.hpp"
#include "handreg/hand_model/hand_model.hpp"

namespace handreg::hand {

/// Axis-angle vectors [N, 3] to rotation matrices [N, 3, 3] (fused operator).
ad::Tensor rodrigues(ad::Graph& g, const ad::Tensor& r);

struct GraphKinematics {
  ad::Tensor joints;      // [B, 16, 3] posed joints
  ad::Tensor transforms;  // [B, 16, 12]: row-major rotation then translation of G_j
};

/// Constant copies of the template arrays, built once per template.
struct TemplateConstants {
  explicit TemplateConstants(const HandTemplate& t);

  int num_vertices;
  ad::Tensor vertices;           // [V, 3]
  ad::Tensor joints;             // [16, 3]
  ad::Tensor shape_basis_t;      // [10, 3V]
  ad::Tensor joint_shape_basis_t;  // [10, 48]
  ad::Tensor skin_weights;       // [V, 16]
  ad::Tensor keypoint_regressor; // [21, V]
  std::array<int, kNumJoints> parents;
};

GraphKinematics forward_kinematics(ad::Graph& g, const TemplateConstants& t,
                                   const ad::Tensor& params);

/// Shape-adjusted rest vertices [B, V, 3].
ad::Tensor shaped_vertices(ad::Graph& g, const TemplateConstants& t, const ad::Tensor& shape);

/// Blend-skins rest-space points [B, V, 3] with the transforms of `k`.
ad::Tensor skin_points(ad::Graph& g, const TemplateConstants& t, const GraphKinematics& k,
                       const ad::Tensor& rest);

/// M * vertices: [B, V, 3] -> [B, 21, 3].
ad::Tensor regress_keypoints(ad::Graph& g, const TemplateConstants& t, const ad::Tensor& vertices);

struct GraphHandState {
  ad::Tensor keypoints3d;  // [B, 21, 3]
  ad::Tensor vertices;     // [B, V, 3]
  GraphKinematics kinematics;
};

GraphHandState skin(ad::Graph& g, const TemplateConstants& t, const ad::Tensor& params);

/// Non-parametric decoder: latent [B, 32] -> relu(z W1 + b1) W2 + b2 reshaped
/// to vertex offsets [B, V, 3]. The second stage starts at zero.
class MeshDecoder {
 public:
  static constexpr int kLatentDim = 32;

  MeshDecoder(int num_vertices, int hidden, std::uint64_t seed);

  ad::Tensor decode(ad::Graph& g, const ad::Tensor& latent) const;
  /// Single latent vector to offsets V x 3 without recording gradients.
  Points decode_values(std::span<const double> latent) const;

  int num_vertices() const { return num_vertices_; }
  int hidden() const { return hidden_; }
  std::vector<ad::Tensor> parameters() const { return {w1_, b1_, w2_, b2_}; }

 private:
  int num_vertices_;
  int hidden_;
  ad::Tensor w1_, b1_, w2_, b2_;
};

}  // namespace handreg::hand
