#include <gtest/gtest.h>

#include <Eigen/Geometry>
#include <cmath>

#include "handreg/common/error.hpp"
#include "handreg/common/random.hpp"
#include "handreg/losses/losses.hpp"
#include "support/gradient_check.hpp"
#include "support/test_rig.hpp"

using namespace handreg;
using namespace handreg::losses;
using hand::kNumKeypoints;

namespace {

const hand::HandTemplate& tmpl() {
  static const hand::HandTemplate t = hand::build_template(7);
  return t;
}

// Posed hand keypoints around `center` (world mm).
Points random_hand(Rng& rng, const Eigen::Vector3d& center = {0, 0, 400}) {
  hand::HandParams p;
  p.global_rot = Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  p.global_trans = center;
  for (auto& j : p.joint_pose)
    for (int c = 0; c < 3; ++c) j(c) = rng.uniform(-0.5, 0.5);
  return hand::skin(tmpl(), p).keypoints3d;
}

Points jitter(Rng& rng, const Points& p, double sigma) {
  Points out = p;
  for (int i = 0; i < out.size(); ++i) out.data()[i] += rng.normal(0.0, sigma);
  return out;
}

Pixels project_all(const geometry::FisheyeCamera& cam, const Points& p) {
  Pixels px(p.rows(), 2);
  for (int k = 0; k < p.rows(); ++k) px.row(k) = cam.project(p.row(k).transpose()).transpose();
  return px;
}

std::vector<double> flat(const Points& p) { return {p.data(), p.data() + p.size()}; }

}  // namespace

TEST(Keypoints3d, Examples) {
  Rng rng(1);
  const Points gt = random_hand(rng);
  EXPECT_EQ(loss_keypoints_3d(gt, gt), 0.0);
  EXPECT_NEAR(loss_keypoints_3d(gt.array() + 2.0, gt), 2.0, 1e-12);
  for (int t = 0; t < 20; ++t) {
    const Points pred = jitter(rng, gt, 15.0);
    double acc = 0.0;
    for (int k = 0; k < kNumKeypoints; ++k)
      for (int c = 0; c < 3; ++c) acc += std::abs(pred(k, c) - gt(k, c));
    EXPECT_NEAR(loss_keypoints_3d(pred, gt), acc / (3 * kNumKeypoints), 1e-12);
  }
  try {
    loss_keypoints_3d(gt, gt.topRows(20));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(Mesh, Examples) {
  Rng rng(2);
  const Points gt = tmpl().vertices;
  EXPECT_EQ(loss_mesh(gt, gt), 0.0);
  EXPECT_NEAR(loss_mesh(gt.array() + 2.0, gt), 2.0, 1e-12);
  const Points pred = jitter(rng, gt, 3.0);
  double acc = 0.0;
  for (int i = 0; i < gt.size(); ++i) acc += std::abs(pred.data()[i] - gt.data()[i]);
  EXPECT_NEAR(loss_mesh(pred, gt), acc / gt.size(), 1e-12);
  EXPECT_THROW(loss_mesh(gt, gt.topRows(10)), Error);
}

TEST(BoneLength, Examples) {
  Rng rng(3);
  const Points gt = random_hand(rng, {0, 0, 0});
  EXPECT_EQ(loss_bone_length(gt, gt), 0.0);
  Points scaled = gt;
  for (int k = 0; k < kNumKeypoints; ++k) scaled.row(k) = gt.row(0) + 2.0 * (gt.row(k) - gt.row(0));
  double mean_len = 0.0;
  for (const auto& e : hand::kSkeletonEdges) mean_len += (gt.row(e.child) - gt.row(e.parent)).norm();
  EXPECT_NEAR(loss_bone_length(scaled, gt), mean_len / hand::kNumBones, 1e-12);
  for (int t = 0; t < 20; ++t) {
    const Points pred = jitter(rng, gt, 8.0);
    double acc = 0.0;
    for (const auto& e : hand::kSkeletonEdges) {
      double lp = 0.0, lg = 0.0;
      for (int c = 0; c < 3; ++c) {
        lp += std::pow(pred(e.child, c) - pred(e.parent, c), 2);
        lg += std::pow(gt(e.child, c) - gt(e.parent, c), 2);
      }
      acc += std::abs(std::sqrt(lp) - std::sqrt(lg));
    }
    EXPECT_NEAR(loss_bone_length(pred, gt), acc / hand::kNumBones, 1e-12);
  }
}

TEST(BoneAngle, Examples) {
  Rng rng(4);
  const Points gt = random_hand(rng);
  EXPECT_EQ(loss_bone_angle(gt, gt), 0.0);
  const Eigen::Matrix3d r(Eigen::AngleAxisd(1.1, Eigen::Vector3d(1, 2, -1).normalized()));
  const Points rotated = (gt * r.transpose()).rowwise() + Eigen::RowVector3d(30, -20, 5);
  EXPECT_NEAR(loss_bone_angle(rotated, gt), 0.0, 1e-9);
  for (int t = 0; t < 20; ++t) {
    const Points pred = jitter(rng, gt, 6.0);
    double acc = 0.0;
    for (int f = 0; f < hand::kNumFingers; ++f) {
      for (int a = 0; a < 3; ++a) {
        const int k0 = a == 0 ? 0 : hand::keypoint_index(f, a - 1);
        const int k1 = hand::keypoint_index(f, a), k2 = hand::keypoint_index(f, a + 1);
        auto angle = [&](const Points& p) {
          const Eigen::Vector3d u = (p.row(k1) - p.row(k0)).transpose();
          const Eigen::Vector3d v = (p.row(k2) - p.row(k1)).transpose();
          return std::acos(std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0));
        };
        acc += std::abs(angle(pred) - angle(gt));
      }
    }
    EXPECT_NEAR(loss_bone_angle(pred, gt), acc / hand::kNumBoneAngles, 1e-9);
  }
}

TEST(BoneAngle, DegenerateBonesAreMasked) {
  Rng rng(5);
  const Points gt = random_hand(rng);
  Points pred = jitter(rng, gt, 4.0);
  const double full = loss_bone_angle(pred, gt);
  pred.row(hand::keypoint_index(2, 2)) = pred.row(hand::keypoint_index(2, 1));
  const double masked = loss_bone_angle(pred, gt);
  EXPECT_TRUE(std::isfinite(masked));
  EXPECT_NE(masked, full);
  Graph g;
  const Tensor p = g.input({1, 21, 3}, flat(pred), true);
  g.backward(bone_angle(g, p, g.input({1, 21, 3}, flat(gt))));
  for (double v : p.grad()) ASSERT_TRUE(std::isfinite(v));
}

TEST(RigidMotionSensitivity, BoneTermsInvariantKeypointsNot) {
  Rng rng(6);
  const Points gt = random_hand(rng);
  const Points pred = jitter(rng, gt, 5.0);
  const Eigen::Matrix3d r(Eigen::AngleAxisd(0.7, Eigen::Vector3d(0, 1, 1).normalized()));
  const Points moved = (pred * r.transpose()).rowwise() + Eigen::RowVector3d(100, 0, -40);
  EXPECT_NEAR(loss_bone_length(moved, gt), loss_bone_length(pred, gt), 1e-9);
  EXPECT_NEAR(loss_bone_angle(moved, gt), loss_bone_angle(pred, gt), 1e-9);
  EXPECT_GT(std::abs(loss_keypoints_3d(moved, gt) - loss_keypoints_3d(pred, gt)), 1.0);
}

TEST(KeypointVariance, ZeroAndMonotone) {
  Rng rng(7);
  const Points gt = random_hand(rng);
  const std::vector<double> zero(kNumKeypoints, 0.0);
  EXPECT_EQ(loss_keypoint_variance(gt, zero, gt), 0.0);
  double prev = 0.0;
  for (double s = 0.5; s <= 5.0; s += 0.5) {
    const double v = loss_keypoint_variance(gt, std::vector<double>(kNumKeypoints, s), gt);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(KeypointVariance, OptimumMatchesClosedForm) {
  Rng rng(8);
  const Points gt = random_hand(rng);
  for (double e : {0.5, 3.0, 12.0, 40.0}) {
    // Every keypoint off by e in L1 (split across the three axes).
    const Points pred = gt.array() + e / 3.0;
    auto f = [&](double s) {
      return loss_keypoint_variance(pred, std::vector<double>(kNumKeypoints, s), gt);
    };
    double lo = -5.0, hi = 5.0;
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 200; ++it) {
      const double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
      (f(a) < f(b) ? hi : lo) = (f(a) < f(b) ? b : a);
    }
    EXPECT_NEAR(0.5 * (lo + hi), std::log(e / 3.0), 1e-6) << e;
  }
}

TEST(ParamReg, Examples) {
  hand::HandParams p;
  EXPECT_EQ(loss_param_reg(p), 0.0);
  p.shape[0] = 1.0;
  EXPECT_NEAR(loss_param_reg(p), 1.0 / 55.0, 1e-15);
  Rng rng(9);
  for (auto& j : p.joint_pose)
    for (int c = 0; c < 3; ++c) j(c) = rng.normal();
  for (auto& s : p.shape) s = rng.normal();
  p.global_rot = Eigen::Vector3d(5, 5, 5);
  p.global_trans = Eigen::Vector3d(500, 5, 5);
  const double base = loss_param_reg(p);
  auto v = p.to_vector();
  for (auto& x : v) x *= 2.0;
  EXPECT_NEAR(loss_param_reg(hand::HandParams::from_vector(v)), 4.0 * base, 1e-12);
}

TEST(Projection2d, ExactPredictionIsZero) {
  const auto rig = handreg::testing::make_test_rig();
  Rng rng(10);
  const Points gt = random_hand(rng);
  EXPECT_EQ(loss_projection_2d(rig.left, gt, project_all(rig.left, gt)), 0.0);
}

TEST(Projection2d, AxialShiftMatchesOracle) {
  // Camera looking straight down +z with the hand 500 mm away.
  const auto rig = handreg::testing::make_test_rig(0.0);
  const auto& cam = rig.left;
  Rng rng(11);
  const Eigen::Vector3d center = cam.cam_from_world().inverse().apply({0, 0, 500});
  const Points gt = random_hand(rng, center);
  const Pixels gt2d = project_all(cam, gt);
  const Points pred = gt.rowwise() + Eigen::RowVector3d(0, 0, 10);
  const Pixels moved = project_all(cam, pred);
  const double oracle = (moved - gt2d).cwiseAbs().sum() / (2.0 * kNumKeypoints);
  const double loss = loss_projection_2d(cam, pred, gt2d);
  EXPECT_GT(loss, 0.0);
  EXPECT_NEAR(loss, oracle, 1e-9);
}

TEST(Projection2d, BehindCameraKeypointIsMasked) {
  const auto rig = handreg::testing::make_test_rig(0.0);
  const auto& cam = rig.left;
  Rng rng(12);
  const Points gt = random_hand(rng, cam.cam_from_world().inverse().apply({0, 0, 400}));
  const Pixels gt2d = project_all(cam, gt);
  Points pred = jitter(rng, gt, 5.0);
  const Pixels pred2d = project_all(cam, pred);
  pred.row(7) = cam.cam_from_world().inverse().apply({0, 0, -50}).transpose();
  double acc = 0.0;
  for (int k = 0; k < kNumKeypoints; ++k)
    if (k != 7) acc += (pred2d.row(k) - gt2d.row(k)).cwiseAbs().sum();
  EXPECT_NEAR(loss_projection_2d(cam, pred, gt2d), acc / 40.0, 1e-9);

  Points behind = pred;
  for (int k = 0; k < kNumKeypoints; ++k) behind(k, 2) = -1000.0;
  try {
    loss_projection_2d(cam, behind, gt2d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllMasked);
  }
}

TEST(StereoReprojection, ExactIsZeroAndSingleViewFallback) {
  const auto rig = handreg::testing::make_test_rig();
  Rng rng(13);
  const Points gt = random_hand(rng, {0, 0, 350});
  const Pixels gl = project_all(rig.left, gt), gr = project_all(rig.right, gt);
  EXPECT_EQ(loss_stereo_reprojection(rig.left, rig.right, gt, gl, gr), 0.0);

  const Points pred = jitter(rng, gt, 5.0);
  const std::vector<std::uint8_t> none(kNumKeypoints, 0), all(kNumKeypoints, 1);
  EXPECT_NEAR(loss_stereo_reprojection(rig.left, rig.right, pred, gl, gr, all, none),
              loss_projection_2d(rig.left, pred, gl), 1e-12);
  EXPECT_NEAR(loss_stereo_reprojection(rig.left, rig.right, pred, gl, gr),
              0.5 * (loss_projection_2d(rig.left, pred, gl) +
                     loss_projection_2d(rig.right, pred, gr)),
              1e-12);
}

TEST(TotalLoss, WeightingAndAbsentTerms) {
  Rng rng(14);
  const Points gt = random_hand(rng);
  const Points pred = jitter(rng, gt, 5.0);
  Graph g;
  const Tensor p = g.input({1, 21, 3}, flat(pred));
  const Tensor t = g.input({1, 21, 3}, flat(gt));
  std::vector<double> s(kNumKeypoints);
  for (auto& x : s) x = rng.normal();
  LossTerms terms;
  terms.terms[kKp3d] = keypoints_3d(g, p, t);
  terms.terms[kBoneLength] = bone_length(g, p, t);
  terms.terms[kBoneAngle] = bone_angle(g, p, t);
  terms.terms[kVariance] = keypoint_variance(g, p, g.input({1, 21}, s), t);

  LossWeights only_kp;
  only_kp.w.fill(0.0);
  only_kp.w[kKp3d] = 1.0;
  EXPECT_EQ(total_loss(g, terms, only_kp).second.total, terms.terms[kKp3d].item());

  const LossWeights w;
  const auto [total, report] = total_loss(g, terms, w);
  double hand_sum = 0.0;
  for (int i : {kKp3d, kBoneLength, kBoneAngle, kVariance}) hand_sum += w.w[i] * terms.terms[i].item();
  EXPECT_NEAR(report.total, hand_sum, 1e-12);
  EXPECT_EQ(total.item(), report.total);
  EXPECT_FALSE(report.values[kStereo2d].has_value());
  EXPECT_TRUE(report.values[kKp3d].has_value());
}

TEST(LossWeights, Validation) {
  LossWeights w;
  EXPECT_NO_THROW(w.validate());
  w.w[3] = -1.0;
  EXPECT_THROW(w.validate(), Error);
  w.w.fill(0.0);
  EXPECT_THROW(w.validate(), Error);
}

TEST(LossGradients, EveryTermMatchesFiniteDifferences) {
  const auto rig = handreg::testing::make_test_rig();
  Rng rng(15);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> gtv, predv, gl, gr;
    std::vector<ProjectionTarget> tl(2), tr(2);
    for (int b = 0; b < 2; ++b) {
      const Points gt = random_hand(rng, {rng.uniform(-50, 50), rng.uniform(-50, 50), 350});
      const Points pred = jitter(rng, gt, 6.0);
      gtv.insert(gtv.end(), gt.data(), gt.data() + gt.size());
      predv.insert(predv.end(), pred.data(), pred.data() + pred.size());
      const Pixels pl = project_all(rig.left, gt), pr = project_all(rig.right, gt);
      tl[b] = {&rig.left, {pl.data(), pl.data() + pl.size()}, {}};
      tr[b] = {&rig.right, {pr.data(), pr.data() + pr.size()}, {}};
    }
    std::vector<double> scales(2 * kNumKeypoints);
    for (auto& x : scales) x = rng.uniform(-2, 2);
    const ad::Shape shape{2, 21, 3};
    auto gt_t = [&](Graph& g) { return g.input(shape, gtv); };
    using Fn = handreg::testing::GraphFunction;
    const std::vector<std::pair<const char*, Fn>> cases = {
        {"kp3d", [&](Graph& g, const Tensor& x) { return keypoints_3d(g, x, gt_t(g)); }},
        {"mesh", [&](Graph& g, const Tensor& x) { return mesh(g, x, gt_t(g)); }},
        {"bone_len", [&](Graph& g, const Tensor& x) { return bone_length(g, x, gt_t(g)); }},
        {"bone_ang", [&](Graph& g, const Tensor& x) { return bone_angle(g, x, gt_t(g)); }},
        {"var",
         [&](Graph& g, const Tensor& x) {
           return keypoint_variance(g, x, g.input({2, 21}, scales), gt_t(g));
         }},
        {"kp2d", [&](Graph& g, const Tensor& x) { return projection_2d(g, x, tl); }},
        {"stereo2d", [&](Graph& g, const Tensor& x) { return stereo_reprojection(g, x, tl, tr); }},
    };
    for (const auto& [name, fn] : cases) {
      EXPECT_LT(handreg::testing::graph_gradient_error(fn, shape, predv), 1e-4) << name;
    }
    std::vector<double> scale_x(scales);
    EXPECT_LT(handreg::testing::graph_gradient_error(
                  [&](Graph& g, const Tensor& s) {
                    return keypoint_variance(g, g.input(shape, predv), s, gt_t(g));
                  },
                  {2, 21}, scale_x),
              1e-4);
    std::vector<double> params(2 * hand::kParamDim);
    for (auto& x : params) x = rng.normal();
    EXPECT_LT(handreg::testing::graph_gradient_error(
                  [&](Graph& g, const Tensor& x) { return param_reg(g, x); },
                  {2, hand::kParamDim}, params),
              1e-4);
  }
}
