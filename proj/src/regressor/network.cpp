#include "handreg/regressor/network.hpp"

#include <Eigen/Geometry>
#include <cmath>

#include "handreg/autodiff/init.hpp"
#include "handreg/common/error.hpp"

namespace handreg::regressor {

namespace {

constexpr std::size_t kConfigArrayLength = 16;
constexpr double kHeadGain = 0.1;

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

}  // namespace

void NetworkConfig::validate() const {
  HANDREG_THROW_IF(crop_size < 8 || crop_size % 8 != 0, ErrorCode::InvalidConfig,
                   "crop_size must be a positive multiple of 8, got " + std::to_string(crop_size));
  for (int w : backbone_widths)
    HANDREG_THROW_IF(w <= 0, ErrorCode::InvalidConfig, "backbone widths must be positive");
  for (int w : meta_widths)
    HANDREG_THROW_IF(w <= 0, ErrorCode::InvalidConfig, "metadata widths must be positive");
  HANDREG_THROW_IF(fusion_width <= 0 || stereo_fusion_width <= 0 || decoder_hidden <= 0,
                   ErrorCode::InvalidConfig, "layer widths must be positive");
  HANDREG_THROW_IF(vertex_budget < 100, ErrorCode::InvalidConfig, "vertex_budget must be >= 100");
}

std::vector<double> NetworkConfig::to_array() const {
  return {static_cast<double>(crop_size),
          static_cast<double>(backbone_widths[0]),
          static_cast<double>(backbone_widths[1]),
          static_cast<double>(backbone_widths[2]),
          static_cast<double>(backbone_widths[3]),
          static_cast<double>(meta_widths[0]),
          static_cast<double>(meta_widths[1]),
          static_cast<double>(fusion_width),
          static_cast<double>(stereo_fusion_width),
          static_cast<double>(decoder_hidden),
          static_cast<double>(template_seed),
          static_cast<double>(vertex_budget),
          static_cast<double>(init_seed),
          zero_metadata ? 1.0 : 0.0,
          1.0,  // layout version
          0.0};
}

NetworkConfig NetworkConfig::from_array(std::span<const double> v) {
  HANDREG_THROW_IF(v.size() != kConfigArrayLength, ErrorCode::Format,
                   "network config block has " + std::to_string(v.size()) + " entries");
  HANDREG_THROW_IF(v[14] != 1.0, ErrorCode::Format, "unsupported network config version");
  NetworkConfig c;
  c.crop_size = static_cast<int>(v[0]);
  for (int i = 0; i < 4; ++i) c.backbone_widths[i] = static_cast<int>(v[1 + i]);
  c.meta_widths = {static_cast<int>(v[5]), static_cast<int>(v[6])};
  c.fusion_width = static_cast<int>(v[7]);
  c.stereo_fusion_width = static_cast<int>(v[8]);
  c.decoder_hidden = static_cast<int>(v[9]);
  c.template_seed = static_cast<std::uint64_t>(v[10]);
  c.vertex_budget = static_cast<int>(v[11]);
  c.init_seed = static_cast<std::uint64_t>(v[12]);
  c.zero_metadata = v[13] != 0.0;
  c.validate();
  return c;
}

ViewFrame view_frame(const geometry::FisheyeCamera& cam, const geometry::BoundingBox& box) {
  const geometry::Mat3 q = geometry::virtual_rotation(cam, box);
  ViewFrame f;
  f.rotation = cam.cam_from_world().rotation.transpose() * q;
  f.translation = cam.center_world();
  return f;
}

std::array<double, 12> rel_vector(const geometry::RigidTransform& rel) {
  std::array<double, 12> v{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) v[3 * r + c] = rel.rotation(r, c);
    v[9 + r] = rel.translation(r) / kRelTranslationScaleMm;
  }
  return v;
}

FrameBatch make_frame_batch(std::span<const ViewFrame> frames) {
  const std::size_t b = frames.size();
  std::vector<double> rt(b * 9), tr(b * 3);
  for (std::size_t i = 0; i < b; ++i) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) rt[9 * i + 3 * r + c] = frames[i].rotation(c, r);
      tr[3 * i + r] = frames[i].translation(r);
    }
  }
  return {Tensor::constant({b, 3, 3}, std::move(rt)), Tensor::constant({b, 1, 3}, std::move(tr))};
}

Tensor lift(Graph& g, const Tensor& x, const FrameBatch& frames) {
  return g.add(g.matmul(x, frames.rotation_t), frames.translation);
}

Network::Network(const NetworkConfig& config)
    : config_((config.validate(), config)),
      template_(hand::build_template(config.template_seed, config.vertex_budget)),
      constants_(template_),
      decoder_(template_.num_vertices(), config.decoder_hidden, splitmix64(config.init_seed + 1)),
      rng_(config.init_seed) {
  const auto& w = config_.backbone_widths;
  stem_ = make_conv("stem", 1, w[0], 3, 1);
  int in = w[0];
  for (int i = 0; i < 4; ++i) {
    const std::size_t stride = i == 0 ? 1 : 2;
    const std::string name = "block" + std::to_string(i + 1);
    Block& blk = blocks_[i];
    blk.a = make_conv(name + ".a", in, w[i], 3, stride);
    blk.b = make_conv(name + ".b", w[i], w[i], 3, 1);
    blk.has_skip = in != w[i] || stride != 1;
    if (blk.has_skip) blk.skip = make_conv(name + ".skip", in, w[i], 1, stride);
    in = w[i];
  }
  meta_[0] = make_linear("meta.0", NetworkConfig::kMetaDim, config_.meta_widths[0]);
  meta_[1] = make_linear("meta.1", config_.meta_widths[0], config_.meta_widths[1]);
  mono_trunk_[0] = make_linear("mono.0", config_.image_feature_dim() + config_.meta_widths[1],
                               config_.fusion_width);
  mono_trunk_[1] = make_linear("mono.1", config_.fusion_width, config_.fusion_width);
  const std::size_t before_stereo = named_.size();
  stereo_trunk_[0] = make_linear("stereo.0", config_.stereo_input_dim(), config_.stereo_fusion_width);
  stereo_trunk_[1] =
      make_linear("stereo.1", config_.stereo_fusion_width, config_.fusion_width);
  for (std::size_t i = before_stereo; i < named_.size(); ++i) stereo_only_.push_back(named_[i].second);
  head_params_ = make_linear("head.params", config_.fusion_width, hand::kParamDim, kHeadGain);
  head_latent_ = make_linear("head.latent", config_.fusion_width, NetworkConfig::kLatentDim, kHeadGain);
  head_keypoints_ =
      make_linear("head.keypoints", config_.fusion_width, 3 * hand::kNumKeypoints, kHeadGain);
  head_log_scale_ = make_linear("head.log_scale", config_.fusion_width, hand::kNumKeypoints, kHeadGain);

  const auto dec = decoder_.parameters();
  const char* dec_names[] = {"decoder.w1", "decoder.b1", "decoder.w2", "decoder.b2"};
  for (std::size_t i = 0; i < dec.size(); ++i) named_.emplace_back(dec_names[i], dec[i]);

  std::vector<double> scale(hand::kParamDim, 1.0), offset(hand::kParamDim, 0.0);
  for (int c = 0; c < 3; ++c) scale[hand::kGlobalTransOffset + c] = kOutputScaleMm;
  offset[hand::kGlobalTransOffset + 2] = kOutputDepthMm;
  param_scale_ = Tensor::constant({hand::kParamDim}, std::move(scale));
  param_offset_ = Tensor::constant({hand::kParamDim}, std::move(offset));
  kp_offset_ = Tensor::constant({3}, {0.0, 0.0, kOutputDepthMm});
}

Network::Linear Network::make_linear(const std::string& name, int in, int out, double gain) {
  Linear l{ad::he_uniform({sz(in), sz(out)}, sz(in), rng_), ad::zeros_parameter({sz(out)})};
  if (gain != 1.0)
    for (auto& v : l.w.value()) v *= gain;
  named_.emplace_back(name + ".w", l.w);
  named_.emplace_back(name + ".b", l.b);
  return l;
}

Network::Conv Network::make_conv(const std::string& name, int in, int out, int k,
                                 std::size_t stride) {
  Conv c{ad::he_uniform({sz(out), sz(in), sz(k), sz(k)}, sz(in * k * k), rng_),
         ad::zeros_parameter({sz(out)}), stride};
  named_.emplace_back(name + ".w", c.w);
  named_.emplace_back(name + ".b", c.b);
  return c;
}

Tensor Network::apply(Graph& g, const Linear& l, const Tensor& x) const {
  return g.add(g.matmul(x, l.w), l.b);
}

Tensor Network::apply(Graph& g, const Conv& c, const Tensor& x) const {
  return g.conv2d(x, c.w, c.b, c.stride);
}

Tensor Network::backbone(Graph& g, const Tensor& crops) const {
  const std::size_t s = sz(config_.crop_size);
  HANDREG_THROW_IF(crops.rank() != 4 || crops.dim(1) != 1 || crops.dim(2) != s || crops.dim(3) != s,
                   ErrorCode::ShapeMismatch,
                   "crops must be [B, 1, " + std::to_string(s) + ", " + std::to_string(s) +
                       "], got " + ad::shape_str(crops.shape()));
  ++backbone_calls_;
  Tensor x = g.relu(apply(g, stem_, crops));
  for (const Block& blk : blocks_) {
    const Tensor y = apply(g, blk.b, g.relu(apply(g, blk.a, x)));
    const Tensor skip = blk.has_skip ? apply(g, blk.skip, x) : x;
    x = g.relu(g.add(y, skip));
  }
  const std::size_t b = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  return g.mean_axis(g.reshape(x, {b, c, hw}), 2);
}

Tensor Network::prepare_meta(Graph& g, const Tensor& meta) const {
  HANDREG_THROW_IF(meta.rank() != 2 || meta.dim(1) != sz(NetworkConfig::kMetaDim),
                   ErrorCode::ShapeMismatch,
                   "metadata must be [B, 28], got " + ad::shape_str(meta.shape()));
  if (!config_.zero_metadata) return meta;
  return g.input(meta.shape(), std::vector<double>(meta.numel(), 0.0));
}

HeadOutputs Network::heads(Graph& g, const Tensor& trunk) const {
  const std::size_t b = trunk.dim(0);
  HeadOutputs h;
  h.params = g.add(g.mul(apply(g, head_params_, trunk), param_scale_), param_offset_);
  h.latent = apply(g, head_latent_, trunk);
  const Tensor kp = g.reshape(apply(g, head_keypoints_, trunk), {b, hand::kNumKeypoints, 3});
  h.keypoints = g.add(g.scale(kp, kOutputScaleMm), kp_offset_);
  h.log_scale = apply(g, head_log_scale_, trunk);
  return h;
}

HeadOutputs Network::mono_heads(Graph& g, const Tensor& features, const Tensor& meta) const {
  HANDREG_THROW_IF(features.rank() != 2 || features.dim(1) != sz(config_.image_feature_dim()) ||
                       meta.dim(0) != features.dim(0),
                   ErrorCode::ShapeMismatch,
                   "mono heads: features " + ad::shape_str(features.shape()) + ", metadata " +
                       ad::shape_str(meta.shape()));
  const Tensor m = prepare_meta(g, meta);
  const Tensor mf = g.relu(apply(g, meta_[1], g.relu(apply(g, meta_[0], m))));
  Tensor t = g.concat({features, mf}, 1);
  for (const auto& l : mono_trunk_) t = g.relu(apply(g, l, t));
  return heads(g, t);
}

HeadOutputs Network::stereo_heads(Graph& g, const Tensor& features_l, const Tensor& meta_l,
                                  const Tensor& features_r, const Tensor& meta_r,
                                  const Tensor& rel) const {
  HANDREG_THROW_IF(rel.rank() != 2 || rel.dim(1) != sz(NetworkConfig::kRelDim) ||
                       features_l.shape() != features_r.shape() ||
                       rel.dim(0) != features_l.dim(0),
                   ErrorCode::ShapeMismatch,
                   "stereo heads: features " + ad::shape_str(features_l.shape()) + " / " +
                       ad::shape_str(features_r.shape()) + ", rel " + ad::shape_str(rel.shape()));
  Tensor t = g.concat({features_l, features_r, prepare_meta(g, meta_l), prepare_meta(g, meta_r), rel},
                      1);
  for (const auto& l : stereo_trunk_) t = g.relu(apply(g, l, t));
  return heads(g, t);
}

HeadOutputs Network::forward_mono(Graph& g, const Tensor& crops, const Tensor& meta) const {
  ++mono_calls_;
  return mono_heads(g, backbone(g, crops), meta);
}

HeadOutputs Network::forward_stereo(Graph& g, const Tensor& crops_l, const Tensor& meta_l,
                                    const Tensor& crops_r, const Tensor& meta_r,
                                    const Tensor& rel) const {
  ++stereo_calls_;
  return stereo_heads(g, backbone(g, crops_l), meta_l, backbone(g, crops_r), meta_r, rel);
}

WorldOutputs Network::predict_state(Graph& g, const HeadOutputs& h, const FrameBatch& frames) const {
  WorldOutputs out;
  out.virtual_frame = h;
  out.keypoints = lift(g, h.keypoints, frames);
  const auto state = hand::skin(g, constants_, h.params);
  out.mano_keypoints = lift(g, state.keypoints3d, frames);
  out.mano_vertices = lift(g, state.vertices, frames);
  const Tensor rest = g.add(decoder_.decode(g, h.latent), constants_.vertices);
  out.decoded_vertices = lift(g, hand::skin_points(g, constants_, state.kinematics, rest), frames);
  return out;
}

std::vector<Tensor> Network::parameters() const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : named_) out.push_back(t);
  return out;
}

std::vector<Tensor> Network::mono_parameters() const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : named_) {
    bool stereo = false;
    for (const auto& s : stereo_only_) stereo = stereo || s.node() == t.node();
    if (!stereo) out.push_back(t);
  }
  return out;
}

std::vector<Tensor> Network::stereo_trunk_parameters() const { return stereo_only_; }

std::size_t Network::parameter_count(const std::vector<Tensor>& params) const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.numel();
  return n;
}

void Network::zero_grad() const {
  for (const auto& [name, t] : named_) Tensor(t).zero_grad();
}

std::vector<ad::NamedArray> Network::named_parameters() const {
  std::vector<ad::NamedArray> out;
  for (const auto& [name, t] : named_)
    out.push_back({"param/" + name, t.shape(), {t.value().begin(), t.value().end()}});
  return out;
}

void Network::load_parameters(std::span<const ad::NamedArray> arrays) {
  for (auto& [name, t] : named_) {
    const std::string key = "param/" + name;
    const ad::NamedArray* found = nullptr;
    for (const auto& a : arrays)
      if (a.name == key) found = &a;
    HANDREG_THROW_IF(found == nullptr, ErrorCode::Format, "checkpoint lacks " + key);
    HANDREG_THROW_IF(found->shape != t.shape(), ErrorCode::Format,
                     key + " has shape " + ad::shape_str(found->shape) + ", expected " +
                         ad::shape_str(t.shape()));
    std::copy(found->data.begin(), found->data.end(), t.value().begin());
  }
}

Prediction extract_prediction(const WorldOutputs& out, std::span<const ViewFrame> frames,
                              std::size_t b) {
  auto rows = [b](const Tensor& t) {
    const std::size_t n = t.dim(1);
    hand::Points p(static_cast<Eigen::Index>(n), 3);
    std::copy_n(t.value().data() + b * n * 3, n * 3, p.data());
    return p;
  };
  Prediction p;
  p.keypoints = rows(out.keypoints);
  p.mano_keypoints = rows(out.mano_keypoints);
  p.mano_vertices = rows(out.mano_vertices);
  p.decoded_vertices = rows(out.decoded_vertices);
  const auto& h = out.virtual_frame;
  std::copy_n(h.latent.value().data() + b * p.mesh_latent.size(), p.mesh_latent.size(),
              p.mesh_latent.begin());
  std::copy_n(h.log_scale.value().data() + b * p.log_scale.size(), p.log_scale.size(),
              p.log_scale.begin());
  const auto params = std::span<const double>(h.params.value()).subspan(b * hand::kParamDim,
                                                                        hand::kParamDim);
  p.hand_params = hand::HandParams::from_vector(params);
  // Re-express the global motion in world coordinates: the model applies it
  // about the virtual-frame origin, which the lift maps rigidly.
  const ViewFrame& f = frames[b];
  const hand::Vec3 r = p.hand_params.global_rot;
  const hand::Mat3 rv = r.norm() == 0.0 ? hand::Mat3::Identity()
                                        : hand::Mat3(Eigen::AngleAxisd(r.norm(), r / r.norm()));
  const Eigen::AngleAxisd world(f.rotation * rv);
  p.hand_params.global_rot = world.axis() * world.angle();
  p.hand_params.global_trans = f.rotation * p.hand_params.global_trans + f.translation;
  return p;
}

}  // namespace handreg::regressor
