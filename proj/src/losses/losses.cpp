#include "handreg/losses/losses.hpp"

#include <cmath>
#include <string>

#include "handreg/common/error.hpp"

namespace handreg::losses {

namespace {

constexpr double kSqrtEps = 1e-24;

void require_same_shape(const char* what, const Tensor& a, const Tensor& b) {
  HANDREG_THROW_IF(a.shape() != b.shape(), ErrorCode::ShapeMismatch,
                   std::string(what) + ": " + ad::shape_str(a.shape()) + " vs " +
                       ad::shape_str(b.shape()));
}

void require_keypoints(const char* what, const Tensor& t) {
  HANDREG_THROW_IF(t.rank() != 3 || t.dim(1) != hand::kNumKeypoints || t.dim(2) != 3,
                   ErrorCode::ShapeMismatch,
                   std::string(what) + ": expected [B, 21, 3], got " + ad::shape_str(t.shape()));
}

Tensor constant(ad::Shape shape, std::vector<double> v) {
  return Tensor::constant(std::move(shape), std::move(v));
}

// Skeleton edge operator E [20, 21] (child minus parent).
const Tensor& edge_matrix() {
  static const Tensor e = [] {
    std::vector<double> m(hand::kNumBones * hand::kNumKeypoints, 0.0);
    for (int b = 0; b < hand::kNumBones; ++b) {
      m[b * hand::kNumKeypoints + hand::kSkeletonEdges[b].child] = 1.0;
      m[b * hand::kNumKeypoints + hand::kSkeletonEdges[b].parent] = -1.0;
    }
    return constant({hand::kNumBones, hand::kNumKeypoints}, std::move(m));
  }();
  return e;
}

// Selectors [15, 20] picking the first and second bone of each angle.
const Tensor& pair_matrix(bool second) {
  static const std::array<Tensor, 2> p = [] {
    std::array<Tensor, 2> out;
    for (int s = 0; s < 2; ++s) {
      std::vector<double> m(hand::kNumBoneAngles * hand::kNumBones, 0.0);
      for (int a = 0; a < hand::kNumBoneAngles; ++a) {
        const auto pair = hand::kBonePairs[a];
        m[a * hand::kNumBones + (s == 0 ? pair.first : pair.second)] = 1.0;
      }
      out[s] = constant({hand::kNumBoneAngles, hand::kNumBones}, std::move(m));
    }
    return out;
  }();
  return p[second ? 1 : 0];
}

Tensor row_norms(Graph& g, const Tensor& v) {
  return g.sqrt(g.add_scalar(g.sum_axis(g.square(v), v.rank() - 1), kSqrtEps));
}

struct AngleData {
  Tensor angles;              // [B, 15]
  std::vector<double> valid;  // B * 15 flags as 0/1
};

AngleData bone_angles(Graph& g, const Tensor& kp) {
  const Tensor bones = g.matmul(edge_matrix(), kp);
  const Tensor a = g.matmul(pair_matrix(false), bones);
  const Tensor b = g.matmul(pair_matrix(true), bones);
  const Tensor na = row_norms(g, a), nb = row_norms(g, b);
  const Tensor cosine = g.div(g.sum_axis(g.mul(a, b), 2), g.mul(na, nb));
  AngleData out;
  out.angles = g.acos(g.clamp(cosine, -1.0 + kCosineMargin, 1.0 - kCosineMargin));
  out.valid.resize(na.numel());
  for (std::size_t i = 0; i < na.numel(); ++i) {
    out.valid[i] =
        na.value()[i] >= hand::kMinBoneLength && nb.value()[i] >= hand::kMinBoneLength ? 1.0 : 0.0;
  }
  return out;
}

struct Projected {
  double sum = 0.0;
  std::size_t count = 0;
};

}  // namespace

void LossWeights::validate() const {
  bool any = false;
  for (int i = 0; i < kNumTerms; ++i) {
    HANDREG_THROW_IF(!(w[i] >= 0.0) || !std::isfinite(w[i]), ErrorCode::InvalidConfig,
                     "loss weight " + std::string(kTermNames[i]) + " must be non-negative");
    any = any || w[i] > 0.0;
  }
  HANDREG_THROW_IF(!any, ErrorCode::InvalidConfig, "all loss weights are zero");
}

Tensor keypoints_3d(Graph& g, const Tensor& pred, const Tensor& gt) {
  require_same_shape("keypoints_3d", pred, gt);
  return g.mean(g.abs(g.sub(pred, gt)));
}

Tensor mesh(Graph& g, const Tensor& pred, const Tensor& gt) {
  require_same_shape("mesh", pred, gt);
  return g.mean(g.abs(g.sub(pred, gt)));
}

Tensor bone_length(Graph& g, const Tensor& pred, const Tensor& gt) {
  require_same_shape("bone_length", pred, gt);
  require_keypoints("bone_length", pred);
  const Tensor lp = row_norms(g, g.matmul(edge_matrix(), pred));
  const Tensor lg = row_norms(g, g.matmul(edge_matrix(), gt));
  return g.mean(g.abs(g.sub(lp, lg)));
}

Tensor bone_angle(Graph& g, const Tensor& pred, const Tensor& gt) {
  require_same_shape("bone_angle", pred, gt);
  require_keypoints("bone_angle", pred);
  const AngleData ap = bone_angles(g, pred);
  const AngleData ag = bone_angles(g, gt);
  std::vector<double> mask(ap.valid.size());
  double count = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = ap.valid[i] * ag.valid[i];
    count += mask[i];
  }
  if (count == 0.0) return g.input({1}, {0.0});
  const Tensor diff = g.abs(g.sub(ap.angles, ag.angles));
  const Tensor masked = g.mul(diff, g.input(diff.shape(), std::move(mask)));
  return g.scale(g.sum(masked), 1.0 / count);
}

Tensor keypoint_variance(Graph& g, const Tensor& pred, const Tensor& log_scale, const Tensor& gt) {
  require_same_shape("keypoint_variance", pred, gt);
  HANDREG_THROW_IF(pred.rank() != 3 || log_scale.rank() != 2 || log_scale.dim(0) != pred.dim(0) ||
                       log_scale.dim(1) != pred.dim(1),
                   ErrorCode::ShapeMismatch,
                   "keypoint_variance: " + ad::shape_str(pred.shape()) + " vs log_scale " +
                       ad::shape_str(log_scale.shape()));
  const Tensor err = g.sum_axis(g.abs(g.sub(pred, gt)), 2);
  const Tensor s = g.clamp(log_scale, kLogScaleMin, kLogScaleMax);
  return g.mean(g.add(g.mul(err, g.exp(g.neg(s))), g.scale(s, 3.0)));
}

Tensor param_reg(Graph& g, const Tensor& params) {
  HANDREG_THROW_IF(params.rank() != 2 || params.dim(1) != hand::kParamDim,
                   ErrorCode::ShapeMismatch,
                   "param_reg: expected [B, 61], got " + ad::shape_str(params.shape()));
  return g.mean(g.square(g.slice(params, 1, hand::kJointPoseOffset,
                                 hand::kParamDim - hand::kJointPoseOffset)));
}

Tensor projection_2d(Graph& g, const Tensor& pred, std::span<const ProjectionTarget> targets) {
  HANDREG_THROW_IF(pred.rank() != 3 || pred.dim(2) != 3 || pred.dim(0) != targets.size(),
                   ErrorCode::ShapeMismatch,
                   "projection_2d: " + ad::shape_str(pred.shape()) + " with " +
                       std::to_string(targets.size()) + " targets");
  const std::size_t batch = pred.dim(0), kps = pred.dim(1);
  // Per keypoint: d loss / d p_world (unnormalized) for the backward pass.
  auto jac = std::make_shared<std::vector<double>>(batch * kps * 3, 0.0);
  Projected acc;
  const double* pv = pred.value().data();
  for (std::size_t b = 0; b < batch; ++b) {
    const auto& tgt = targets[b];
    HANDREG_THROW_IF(tgt.camera == nullptr || tgt.gt2d.size() != kps * 2 ||
                         (!tgt.gt_valid.empty() && tgt.gt_valid.size() != kps),
                     ErrorCode::ShapeMismatch, "projection_2d: malformed target");
    const auto& cam = *tgt.camera;
    const auto& pose = cam.cam_from_world();
    for (std::size_t k = 0; k < kps; ++k) {
      if (!tgt.gt_valid.empty() && !tgt.gt_valid[k]) continue;
      const double* p = pv + (b * kps + k) * 3;
      const geometry::Vec3 pc = pose.apply(geometry::Vec3(p[0], p[1], p[2]));
      if (!pc.allFinite() || !cam.projectable(pc)) continue;
      geometry::Mat23 jc;
      const geometry::Vec2 px = cam.project_camera(pc, &jc);
      const double du = px.x() - tgt.gt2d[2 * k], dv = px.y() - tgt.gt2d[2 * k + 1];
      acc.sum += std::abs(du) + std::abs(dv);
      ++acc.count;
      const double su = du > 0 ? 1.0 : (du < 0 ? -1.0 : 0.0);
      const double sv = dv > 0 ? 1.0 : (dv < 0 ? -1.0 : 0.0);
      const Eigen::RowVector3d row = (su * jc.row(0) + sv * jc.row(1)) * pose.rotation;
      for (int c = 0; c < 3; ++c) (*jac)[(b * kps + k) * 3 + c] = row(c);
    }
  }
  HANDREG_THROW_IF(acc.count == 0, ErrorCode::AllMasked,
                   "no keypoint is both projectable and labelled");
  const double norm = 1.0 / (2.0 * static_cast<double>(acc.count));
  return g.custom("projection_2d", {1}, {acc.sum * norm}, {pred}, [jac, norm](ad::Node& o) {
    ad::Node& in = *o.inputs[0];
    if (!in.requires_grad) return;
    const double go = o.grad[0] * norm;
    for (std::size_t i = 0; i < jac->size(); ++i) in.grad[i] += go * (*jac)[i];
  });
}

Tensor stereo_reprojection(Graph& g, const Tensor& pred, std::span<const ProjectionTarget> left,
                           std::span<const ProjectionTarget> right) {
  std::vector<Tensor> views;
  for (auto side : {left, right}) {
    try {
      views.push_back(projection_2d(g, pred, side));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AllMasked) throw;
    }
  }
  HANDREG_THROW_IF(views.empty(), ErrorCode::AllMasked, "no keypoint is usable in either view");
  if (views.size() == 1) return views[0];
  return g.scale(g.add(views[0], views[1]), 0.5);
}

std::pair<Tensor, LossReport> total_loss(Graph& g, const LossTerms& terms,
                                         const LossWeights& weights) {
  LossReport report;
  Tensor total;
  for (int i = 0; i < kNumTerms; ++i) {
    const Tensor& t = terms.terms[i];
    if (!t.defined()) continue;
    HANDREG_THROW_IF(t.numel() != 1, ErrorCode::NonScalarLoss,
                     std::string(kTermNames[i]) + " term is not scalar");
    report.values[i] = t.item();
    const Tensor weighted = g.scale(t, weights.w[i]);
    total = total.defined() ? g.add(total, weighted) : weighted;
  }
  HANDREG_THROW_IF(!total.defined(), ErrorCode::InvalidArgument, "no loss term present");
  report.total = total.item();
  return {total, report};
}

namespace {

Tensor points_input(Graph& g, const Points& p) {
  return g.input({1, static_cast<std::size_t>(p.rows()), 3},
                 std::vector<double>(p.data(), p.data() + p.size()));
}

ProjectionTarget make_target(const geometry::FisheyeCamera& cam, const Pixels& gt,
                             std::span<const std::uint8_t> valid) {
  ProjectionTarget t;
  t.camera = &cam;
  t.gt2d.assign(gt.data(), gt.data() + gt.size());
  t.gt_valid.assign(valid.begin(), valid.end());
  return t;
}

void require_same_rows(const char* what, const Points& a, const Points& b) {
  HANDREG_THROW_IF(a.rows() != b.rows(), ErrorCode::ShapeMismatch,
                   std::string(what) + ": [" + std::to_string(a.rows()) + ", 3] vs [" +
                       std::to_string(b.rows()) + ", 3]");
}

}  // namespace

double loss_keypoints_3d(const Points& pred, const Points& gt) {
  require_same_rows("keypoints_3d", pred, gt);
  Graph g;
  return keypoints_3d(g, points_input(g, pred), points_input(g, gt)).item();
}

double loss_mesh(const Points& pred, const Points& gt) {
  require_same_rows("mesh", pred, gt);
  Graph g;
  return mesh(g, points_input(g, pred), points_input(g, gt)).item();
}

double loss_bone_length(const Points& pred, const Points& gt) {
  Graph g;
  return bone_length(g, points_input(g, pred), points_input(g, gt)).item();
}

double loss_bone_angle(const Points& pred, const Points& gt) {
  Graph g;
  return bone_angle(g, points_input(g, pred), points_input(g, gt)).item();
}

double loss_keypoint_variance(const Points& pred, std::span<const double> log_scale,
                              const Points& gt) {
  Graph g;
  const Tensor s = g.input({1, log_scale.size()}, {log_scale.begin(), log_scale.end()});
  return keypoint_variance(g, points_input(g, pred), s, points_input(g, gt)).item();
}

double loss_param_reg(const hand::HandParams& p) {
  Graph g;
  const auto v = p.to_vector();
  return param_reg(g, g.input({1, hand::kParamDim}, {v.begin(), v.end()})).item();
}

double loss_projection_2d(const geometry::FisheyeCamera& cam, const Points& pred_world,
                          const Pixels& gt2d, std::span<const std::uint8_t> gt_valid) {
  Graph g;
  const ProjectionTarget t = make_target(cam, gt2d, gt_valid);
  return projection_2d(g, points_input(g, pred_world), std::span(&t, 1)).item();
}

double loss_stereo_reprojection(const geometry::FisheyeCamera& cam_l,
                                const geometry::FisheyeCamera& cam_r, const Points& pred_world,
                                const Pixels& gt_l, const Pixels& gt_r,
                                std::span<const std::uint8_t> valid_l,
                                std::span<const std::uint8_t> valid_r) {
  Graph g;
  const ProjectionTarget tl = make_target(cam_l, gt_l, valid_l);
  const ProjectionTarget tr = make_target(cam_r, gt_r, valid_r);
  return stereo_reprojection(g, points_input(g, pred_world), std::span(&tl, 1),
                             std::span(&tr, 1))
      .item();
}

}  // namespace handreg::losses
