#pragma once
// Image + metadata regressor with mono and stereo paths.
//
// Outputs are expressed in the virtual camera frame of the (left) view and
// lifted to world coordinates with the fixed transform of that view, so the
// network never sees absolute camera poses.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "handreg/autodiff/checkpoint.hpp"
#include "handreg/common/random.hpp"
#include "handreg/autodiff/tensor.hpp"
#include "handreg/geometry/stereo.hpp"
#include "handreg/hand_model/graph_model.hpp"
#include "handreg/metadata/metadata.hpp"

namespace handreg::regressor {

using ad::Graph;
using ad::Tensor;

struct NetworkConfig {
  int crop_size = 128;
  std::array<int, 4> backbone_widths = {8, 16, 32, 64};
  std::array<int, 2> meta_widths = {64, 64};
  int fusion_width = 128;
  int stereo_fusion_width = 128;
  int decoder_hidden = 64;
  std::uint64_t template_seed = 0;
  int vertex_budget = hand::kDefaultVertexBudget;
  std::uint64_t init_seed = 0;
  /// Feed zeros instead of the metadata vector (ablation).
  bool zero_metadata = false;

  static constexpr int kMetaDim = static_cast<int>(metadata::kMetadataDim);
  static constexpr int kRelDim = 12;
  static constexpr int kLatentDim = hand::MeshDecoder::kLatentDim;

  int image_feature_dim() const { return backbone_widths[3]; }
  int stereo_input_dim() const { return 2 * image_feature_dim() + 2 * kMetaDim + kRelDim; }
  void validate() const;

  std::vector<double> to_array() const;
  static NetworkConfig from_array(std::span<const double> v);
};

/// Output scaling: keypoints and translation are 100 mm per unit around a
/// point 450 mm down the virtual optical axis.
inline constexpr double kOutputScaleMm = 100.0;
inline constexpr double kOutputDepthMm = 450.0;
/// Stereo relative translation is divided by this before entering the trunk.
inline constexpr double kRelTranslationScaleMm = 1000.0;

/// world = rotation * p_virtual + translation.
struct ViewFrame {
  geometry::Mat3 rotation = geometry::Mat3::Identity();
  geometry::Vec3 translation = geometry::Vec3::Zero();
};

ViewFrame view_frame(const geometry::FisheyeCamera& cam, const geometry::BoundingBox& box);
/// 9 rotation entries (row-major) then translation / 1000 mm.
std::array<double, 12> rel_vector(const geometry::RigidTransform& rel);

/// Raw head outputs mapped to physical units, still in the virtual frame.
struct HeadOutputs {
  Tensor params;      // [B, 61]
  Tensor latent;      // [B, 32]
  Tensor keypoints;   // [B, 21, 3]
  Tensor log_scale;   // [B, 21]
};

/// Batch of per-view frames as constants for lifting.
struct FrameBatch {
  Tensor rotation_t;   // [B, 3, 3] transposed rotations
  Tensor translation;  // [B, 1, 3]
};
FrameBatch make_frame_batch(std::span<const ViewFrame> frames);

/// x [B, N, 3] virtual -> world.
Tensor lift(Graph& g, const Tensor& x, const FrameBatch& frames);

struct WorldOutputs {
  HeadOutputs virtual_frame;
  Tensor keypoints;      // [B, 21, 3] world, independent head
  Tensor mano_keypoints; // [B, 21, 3] world
  Tensor mano_vertices;  // [B, V, 3] world
  Tensor decoded_vertices;  // [B, V, 3] world
};

class Network {
 public:
  explicit Network(const NetworkConfig& config);

  const NetworkConfig& config() const { return config_; }
  const hand::HandTemplate& hand_template() const { return template_; }
  const hand::TemplateConstants& template_constants() const { return constants_; }
  const hand::MeshDecoder& decoder() const { return decoder_; }

  /// crops [B, 1, S, S] -> features [B, F]. Counted in backbone_calls().
  Tensor backbone(Graph& g, const Tensor& crops) const;
  /// Mono trunk and heads on cached per-view features.
  HeadOutputs mono_heads(Graph& g, const Tensor& features, const Tensor& meta) const;
  /// Stereo trunk and heads on cached per-view features.
  HeadOutputs stereo_heads(Graph& g, const Tensor& features_l, const Tensor& meta_l,
                           const Tensor& features_r, const Tensor& meta_r,
                           const Tensor& rel) const;

  HeadOutputs forward_mono(Graph& g, const Tensor& crops, const Tensor& meta) const;
  HeadOutputs forward_stereo(Graph& g, const Tensor& crops_l, const Tensor& meta_l,
                             const Tensor& crops_r, const Tensor& meta_r,
                             const Tensor& rel) const;

  /// Lifts head outputs to world and evaluates the parametric and decoded meshes.
  WorldOutputs predict_state(Graph& g, const HeadOutputs& heads, const FrameBatch& frames) const;

  std::vector<Tensor> parameters() const;
  std::vector<Tensor> mono_parameters() const;
  std::vector<Tensor> stereo_trunk_parameters() const;
  std::size_t parameter_count(const std::vector<Tensor>& params) const;
  void zero_grad() const;

  std::vector<ad::NamedArray> named_parameters() const;
  /// Copies values from matching names; throws Format on missing or mismatched arrays.
  void load_parameters(std::span<const ad::NamedArray> arrays);

  std::size_t backbone_calls() const { return backbone_calls_; }
  std::size_t mono_calls() const { return mono_calls_; }
  std::size_t stereo_calls() const { return stereo_calls_; }

 private:
  struct Linear {
    Tensor w, b;
  };
  struct Conv {
    Tensor w, b;
    std::size_t stride = 1;
  };
  struct Block {
    Conv a, b;
    bool has_skip = false;
    Conv skip;
  };

  Linear make_linear(const std::string& name, int in, int out, double gain = 1.0);
  Conv make_conv(const std::string& name, int in, int out, int k, std::size_t stride);
  Tensor apply(Graph& g, const Linear& l, const Tensor& x) const;
  Tensor apply(Graph& g, const Conv& c, const Tensor& x) const;
  Tensor prepare_meta(Graph& g, const Tensor& meta) const;
  HeadOutputs heads(Graph& g, const Tensor& trunk) const;

  NetworkConfig config_;
  hand::HandTemplate template_;
  hand::TemplateConstants constants_;
  hand::MeshDecoder decoder_;
  Rng rng_;

  Conv stem_;
  std::array<Block, 4> blocks_;
  std::array<Linear, 2> meta_;
  std::array<Linear, 2> mono_trunk_;
  std::array<Linear, 2> stereo_trunk_;
  Linear head_params_, head_latent_, head_keypoints_, head_log_scale_;
  Tensor param_scale_, param_offset_, kp_offset_;

  std::vector<std::pair<std::string, Tensor>> named_;
  std::vector<Tensor> stereo_only_;

  mutable std::size_t backbone_calls_ = 0;
  mutable std::size_t mono_calls_ = 0;
  mutable std::size_t stereo_calls_ = 0;
};

/// Array form of a single prediction in world coordinates.
struct Prediction {
  hand::HandParams hand_params;  // world-frame global rotation and translation
  std::array<double, hand::MeshDecoder::kLatentDim> mesh_latent{};
  hand::Points keypoints;        // 21 x 3 world mm
  std::array<double, hand::kNumKeypoints> log_scale{};
  hand::Points mano_keypoints;
  hand::Points mano_vertices;
  hand::Points decoded_vertices;
};

/// Extracts element b of a world-output batch.
Prediction extract_prediction(const WorldOutputs& out, std::span<const ViewFrame> frames,
                              std::size_t b);

}  // namespace handreg::regressor
