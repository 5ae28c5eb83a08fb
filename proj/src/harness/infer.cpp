#include "handreg/harness/infer.hpp"

#include <json.hpp>
#include <sstream>

#include "handreg/common/error.hpp"
#include "handreg/common/key_value.hpp"

namespace handreg::harness {

namespace {

struct PreparedInput {
  std::vector<double> crop;
  std::vector<double> meta;
  regressor::ViewFrame frame;
};

PreparedInput prepare(const Model& model, const geometry::FisheyeCamera& cam, const InferView& v) {
  const int size = model.net->config().crop_size;
  HANDREG_THROW_IF(v.crop.size != size, ErrorCode::ShapeMismatch,
                   "crop is " + std::to_string(v.crop.size) + " px, the model expects " +
                       std::to_string(size));
  PreparedInput p;
  p.crop.reserve(v.crop.pixels.size());
  for (auto px : v.crop.pixels) p.crop.push_back(px / 255.0);
  const auto raw = metadata::normalize(metadata::compute_metadata(cam, v.box, size), model.stats);
  p.meta.assign(raw.begin(), raw.end());
  p.frame = regressor::view_frame(cam, v.box);
  return p;
}

}  // namespace

std::optional<geometry::BoundingBox> box_from_comments(const synth::GrayImage& img) {
  for (const auto& c : img.comments) {
    std::istringstream ss(c);
    std::string tag;
    geometry::BoundingBox b;
    if (ss >> tag && tag == "box" && ss >> b.x_min >> b.y_min >> b.x_max >> b.y_max) return b;
  }
  return std::nullopt;
}

std::string box_comment(const geometry::BoundingBox& box) {
  return "box " + format_number(box.x_min) + " " + format_number(box.y_min) + " " +
         format_number(box.x_max) + " " + format_number(box.y_max);
}

std::string_view route_name(Route r) {
  switch (r) {
    case Route::MonoLeft: return "mono-left";
    case Route::MonoRight: return "mono-right";
    case Route::Stereo: return "stereo";
  }
  return "?";
}

InferResult infer(const Model& model, const geometry::StereoRig& rig,
                  const std::optional<InferView>& left, const std::optional<InferView>& right) {
  HANDREG_THROW_IF(!left && !right, ErrorCode::EmptyInput, "inference needs at least one view");
  const auto& net = *model.net;
  const auto side = static_cast<std::size_t>(net.config().crop_size);
  ad::Graph g;
  InferResult result;
  std::vector<regressor::ViewFrame> frames;
  regressor::HeadOutputs heads;
  if (left && right) {
    result.route = Route::Stereo;
    const auto l = prepare(model, rig.left, *left);
    const auto r = prepare(model, rig.right, *right);
    const auto rel = regressor::rel_vector(
        geometry::virtual_relative_extrinsics(rig.left, left->box, rig.right, right->box));
    heads = net.forward_stereo(g, g.input({1, 1, side, side}, l.crop), g.input({1, 28}, l.meta),
                               g.input({1, 1, side, side}, r.crop), g.input({1, 28}, r.meta),
                               g.input({1, 12}, std::vector<double>(rel.begin(), rel.end())));
    frames.push_back(l.frame);
  } else {
    result.route = left ? Route::MonoLeft : Route::MonoRight;
    const auto p = prepare(model, left ? rig.left : rig.right, left ? *left : *right);
    heads = net.forward_mono(g, g.input({1, 1, side, side}, p.crop), g.input({1, 28}, p.meta));
    frames.push_back(p.frame);
  }
  const auto out = net.predict_state(g, heads, regressor::make_frame_batch(frames));
  result.prediction = regressor::extract_prediction(out, frames, 0);
  return result;
}

std::string prediction_to_json(const InferResult& result) {
  const auto& p = result.prediction;
  auto rows = [](const hand::Points& pts) {
    std::vector<std::array<double, 3>> v;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) v.push_back({pts(i, 0), pts(i, 1), pts(i, 2)});
    return v;
  };
  nlohmann::ordered_json j;
  j["route"] = route_name(result.route);
  j["keypoints_mm"] = rows(p.keypoints);
  j["keypoint_log_scale"] = p.log_scale;
  j["mano_keypoints_mm"] = rows(p.mano_keypoints);
  j["hand_params"] = p.hand_params.to_vector();
  j["mesh_latent"] = p.mesh_latent;
  return j.dump(2) + "\n";
}

}  // namespace handreg::harness
