#include "handreg/harness/data.hpp"

#include <cmath>

#include "handreg/common/error.hpp"

namespace handreg::harness {

namespace {

using losses::ProjectionTarget;

struct ViewInputs {
  Tensor crops, meta, gt_kp, gt_vertices;
  std::vector<regressor::ViewFrame> frames;
  std::vector<ProjectionTarget> targets;
};

ProjectionTarget target_for(const PreparedSplit& data, const geometry::StereoRig& rig,
                            std::size_t record, int view) {
  const auto& v = data.records[record].views[view];
  ProjectionTarget t;
  t.camera = &camera(rig, view);
  t.gt2d.assign(v.keypoints2d.data(), v.keypoints2d.data() + v.keypoints2d.size());
  return t;
}

Tensor gt_points(Graph& g, const PreparedSplit& data, std::span<const std::size_t> records,
                 bool vertices) {
  const std::size_t rows = vertices ? data.records.front().vertices.rows() : hand::kNumKeypoints;
  std::vector<double> v;
  v.reserve(records.size() * rows * 3);
  for (std::size_t r : records) {
    const hand::Points& p = vertices ? data.records[r].vertices : data.records[r].keypoints3d;
    HANDREG_THROW_IF(static_cast<std::size_t>(p.rows()) != rows, ErrorCode::DimensionMismatch,
                     "records disagree on vertex count");
    v.insert(v.end(), p.data(), p.data() + p.size());
  }
  return g.input({records.size(), rows, 3}, std::move(v));
}

// Inputs of the views `views` (indices into data.views).
ViewInputs view_inputs(Graph& g, const PreparedSplit& data, const geometry::StereoRig& rig,
                       std::span<const std::size_t> views, bool with_gt) {
  ViewInputs in;
  const std::size_t n = views.size();
  const std::size_t pixels = data.views[views[0]].crop.size();
  const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(pixels))));
  std::vector<double> crops, meta;
  crops.reserve(n * pixels);
  meta.reserve(n * metadata::kMetadataDim);
  std::vector<std::size_t> records;
  for (std::size_t i : views) {
    const PreparedView& v = data.views[i];
    crops.insert(crops.end(), v.crop.begin(), v.crop.end());
    meta.insert(meta.end(), v.meta.begin(), v.meta.end());
    in.frames.push_back(v.frame);
    records.push_back(v.record);
    if (with_gt) in.targets.push_back(target_for(data, rig, v.record, v.view));
  }
  in.crops = g.input({n, 1, side, side}, std::move(crops));
  in.meta = g.input({n, metadata::kMetadataDim}, std::move(meta));
  if (with_gt) {
    in.gt_kp = gt_points(g, data, records, false);
    in.gt_vertices = gt_points(g, data, records, true);
  }
  return in;
}

Tensor gather_rows(Graph& g, const Tensor& x, std::span<const std::size_t> rows) {
  std::vector<Tensor> parts;
  parts.reserve(rows.size());
  for (std::size_t r : rows) parts.push_back(g.slice(x, 0, r, 1));
  return g.concat(parts, 0);
}

Tensor rel_input(Graph& g, const PreparedSplit& data, std::span<const std::size_t> records) {
  std::vector<double> v;
  for (std::size_t r : records) v.insert(v.end(), data.rel[r].begin(), data.rel[r].end());
  return g.input({records.size(), regressor::NetworkConfig::kRelDim}, std::move(v));
}

std::vector<regressor::Prediction> extract_all(const regressor::WorldOutputs& out,
                                               std::span<const regressor::ViewFrame> frames) {
  std::vector<regressor::Prediction> preds;
  for (std::size_t b = 0; b < frames.size(); ++b)
    preds.push_back(regressor::extract_prediction(out, frames, b));
  return preds;
}

}  // namespace

std::vector<synth::SampleRecord> Corpus::load(synth::Split split) const {
  return synth::load_split(dir, manifest, split);
}

Corpus open_corpus(const std::filesystem::path& dir) {
  return {dir, synth::load_manifest(dir), geometry::load_rig(dir / "rig.txt")};
}

const geometry::FisheyeCamera& camera(const geometry::StereoRig& rig, int view) {
  return view == 0 ? rig.left : rig.right;
}

metadata::NormalizationStats fit_stats(std::span<const synth::SampleRecord> records) {
  std::vector<metadata::MetadataVector> metas;
  for (const auto& r : records)
    for (const auto& v : r.views)
      if (v.visible) metas.push_back(v.meta);
  return metadata::fit_normalization(metas);
}

std::vector<std::size_t> PreparedSplit::stereo_records() const {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < records.size(); ++r)
    if (view_of[r][0] >= 0 && view_of[r][1] >= 0) out.push_back(r);
  return out;
}

PreparedSplit prepare_split(std::vector<synth::SampleRecord> records,
                            const geometry::StereoRig& rig,
                            const metadata::NormalizationStats& stats) {
  PreparedSplit s;
  s.records = std::move(records);
  s.view_of.assign(s.records.size(), {-1, -1});
  s.rel.assign(s.records.size(), {});
  for (std::size_t r = 0; r < s.records.size(); ++r) {
    const auto& rec = s.records[r];
    for (int v = 0; v < 2; ++v) {
      const auto& view = rec.views[v];
      if (!view.visible) continue;
      PreparedView p;
      p.record = r;
      p.view = v;
      p.crop.resize(view.crop.pixels.size());
      for (std::size_t i = 0; i < p.crop.size(); ++i) p.crop[i] = view.crop.pixels[i] / 255.0;
      p.meta = metadata::normalize(view.meta, stats);
      p.frame = regressor::view_frame(camera(rig, v), view.crop_box);
      s.view_of[r][v] = static_cast<int>(s.views.size());
      s.views.push_back(std::move(p));
    }
    if (rec.views[0].visible && rec.views[1].visible)
      s.rel[r] = regressor::rel_vector(geometry::virtual_relative_extrinsics(
          rig.left, rec.views[0].crop_box, rig.right, rec.views[1].crop_box));
  }
  return s;
}

hand::Points mean_pose(std::span<const synth::SampleRecord> records) {
  HANDREG_THROW_IF(records.empty(), ErrorCode::EmptyInput, "mean pose of an empty split");
  hand::Points m = hand::Points::Zero(hand::kNumKeypoints, 3);
  for (const auto& r : records) m += r.keypoints3d;
  return m / static_cast<double>(records.size());
}

losses::LossTerms make_terms(Graph& g, const regressor::WorldOutputs& out, const Tensor& gt_kp,
                             const Tensor& gt_vertices,
                             std::span<const losses::ProjectionTarget> targets,
                             std::span<const losses::ProjectionTarget> right_targets,
                             const losses::LossWeights& weights) {
  using namespace losses;
  LossTerms t;
  const auto& w = weights.w;
  if (w[kKp3d] > 0.0)
    t.terms[kKp3d] = g.scale(g.add(keypoints_3d(g, out.keypoints, gt_kp),
                                   keypoints_3d(g, out.mano_keypoints, gt_kp)),
                             0.5);
  if (w[kMesh] > 0.0)
    t.terms[kMesh] = g.scale(g.add(mesh(g, out.mano_vertices, gt_vertices),
                                   mesh(g, out.decoded_vertices, gt_vertices)),
                             0.5);
  if (w[kBoneLength] > 0.0) t.terms[kBoneLength] = bone_length(g, out.keypoints, gt_kp);
  if (w[kBoneAngle] > 0.0) t.terms[kBoneAngle] = bone_angle(g, out.keypoints, gt_kp);
  if (w[kVariance] > 0.0)
    t.terms[kVariance] = keypoint_variance(g, out.keypoints, out.virtual_frame.log_scale, gt_kp);
  if (w[kParamReg] > 0.0) t.terms[kParamReg] = param_reg(g, out.virtual_frame.params);
  try {
    if (w[kKp2d] > 0.0) t.terms[kKp2d] = projection_2d(g, out.keypoints, targets);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::AllMasked) throw;
  }
  try {
    if (w[kStereo2d] > 0.0 && !right_targets.empty())
      t.terms[kStereo2d] = stereo_reprojection(g, out.keypoints, targets, right_targets);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::AllMasked) throw;
  }
  return t;
}

BatchLoss batch_loss(Graph& g, const Network& net, const PreparedSplit& data,
                     const geometry::StereoRig& rig, std::span<const std::size_t> records,
                     const losses::LossWeights& weights, StereoMode mode) {
  std::vector<std::size_t> views;
  std::vector<std::size_t> stereo;
  std::vector<std::size_t> left_pos, right_pos;
  for (std::size_t r : records) {
    const auto& vo = data.view_of.at(r);
    for (int v = 0; v < 2; ++v)
      if (vo[v] >= 0) views.push_back(static_cast<std::size_t>(vo[v]));
    if (mode == StereoMode::Mixed && data.records[r].stereo && vo[0] >= 0 && vo[1] >= 0) {
      stereo.push_back(r);
      left_pos.push_back(views.size() - 2);
      right_pos.push_back(views.size() - 1);
    }
  }
  HANDREG_THROW_IF(views.empty(), ErrorCode::EmptyInput, "batch has no visible view");

  const ViewInputs in = view_inputs(g, data, rig, views, true);
  const Tensor features = net.backbone(g, in.crops);
  const auto mono_out =
      net.predict_state(g, net.mono_heads(g, features, in.meta), regressor::make_frame_batch(in.frames));
  auto [mono_total, mono_report] =
      losses::total_loss(g, make_terms(g, mono_out, in.gt_kp, in.gt_vertices, in.targets, {}, weights),
                         weights);
  BatchLoss result;
  result.total = mono_total;
  result.mono = mono_report;

  if (!stereo.empty()) {
    std::vector<regressor::ViewFrame> frames;
    std::vector<ProjectionTarget> left, right;
    for (std::size_t i = 0; i < stereo.size(); ++i) {
      frames.push_back(in.frames[left_pos[i]]);
      left.push_back(target_for(data, rig, stereo[i], 0));
      right.push_back(target_for(data, rig, stereo[i], 1));
    }
    const auto heads = net.stereo_heads(
        g, gather_rows(g, features, left_pos), gather_rows(g, in.meta, left_pos),
        gather_rows(g, features, right_pos), gather_rows(g, in.meta, right_pos),
        rel_input(g, data, stereo));
    const auto out = net.predict_state(g, heads, regressor::make_frame_batch(frames));
    auto [stereo_total, stereo_report] = losses::total_loss(
        g,
        make_terms(g, out, gt_points(g, data, stereo, false), gt_points(g, data, stereo, true),
                   left, right, weights),
        weights);
    result.total = g.add(result.total, stereo_total);
    result.stereo = stereo_report;
  }
  result.value = result.total.item();
  return result;
}

std::vector<regressor::Prediction> predict_mono(const Network& net, const PreparedSplit& data,
                                                std::span<const std::size_t> views,
                                                std::size_t chunk) {
  std::vector<regressor::Prediction> preds;
  for (std::size_t start = 0; start < views.size(); start += chunk) {
    const auto part = views.subspan(start, std::min(chunk, views.size() - start));
    Graph g;
    std::vector<double> crops, meta;
    std::vector<regressor::ViewFrame> frames;
    for (std::size_t i : part) {
      const PreparedView& v = data.views[i];
      crops.insert(crops.end(), v.crop.begin(), v.crop.end());
      meta.insert(meta.end(), v.meta.begin(), v.meta.end());
      frames.push_back(v.frame);
    }
    const auto side = static_cast<std::size_t>(net.config().crop_size);
    const auto heads = net.forward_mono(g, g.input({part.size(), 1, side, side}, std::move(crops)),
                                        g.input({part.size(), metadata::kMetadataDim}, std::move(meta)));
    const auto out = net.predict_state(g, heads, regressor::make_frame_batch(frames));
    auto p = extract_all(out, frames);
    std::move(p.begin(), p.end(), std::back_inserter(preds));
  }
  return preds;
}

std::vector<regressor::Prediction> predict_stereo(const Network& net, const PreparedSplit& data,
                                                  std::span<const std::size_t> records,
                                                  std::size_t chunk) {
  std::vector<regressor::Prediction> preds;
  const auto side = static_cast<std::size_t>(net.config().crop_size);
  for (std::size_t start = 0; start < records.size(); start += chunk) {
    const auto part = records.subspan(start, std::min(chunk, records.size() - start));
    Graph g;
    std::array<std::vector<double>, 2> crops, meta;
    std::vector<regressor::ViewFrame> frames;
    for (std::size_t r : part) {
      for (int v = 0; v < 2; ++v) {
        const int idx = data.view_of.at(r)[v];
        HANDREG_THROW_IF(idx < 0, ErrorCode::InvalidArgument,
                         "record " + std::to_string(data.records[r].id) + " lacks view " +
                             std::to_string(v));
        const PreparedView& pv = data.views[idx];
        crops[v].insert(crops[v].end(), pv.crop.begin(), pv.crop.end());
        meta[v].insert(meta[v].end(), pv.meta.begin(), pv.meta.end());
        if (v == 0) frames.push_back(pv.frame);
      }
    }
    const std::size_t n = part.size();
    const auto heads = net.forward_stereo(
        g, g.input({n, 1, side, side}, std::move(crops[0])),
        g.input({n, metadata::kMetadataDim}, std::move(meta[0])),
        g.input({n, 1, side, side}, std::move(crops[1])),
        g.input({n, metadata::kMetadataDim}, std::move(meta[1])), rel_input(g, data, part));
    const auto out = net.predict_state(g, heads, regressor::make_frame_batch(frames));
    auto p = extract_all(out, frames);
    std::move(p.begin(), p.end(), std::back_inserter(preds));
  }
  return preds;
}

}  // namespace handreg::harness
