#include "handreg/hand_model/graph_model.hpp"

#include <cmath>

#include "handreg/autodiff/init.hpp"
#include "handreg/common/error.hpp"

namespace handreg::hand {

namespace {

using ad::Graph;
using ad::Shape;
using ad::Tensor;

// Coefficients of R = I + A S + B S^2 (S = skew(r)) and a1 = A'/theta,
// b1 = B'/theta, with series expansions near zero.
struct RodriguesCoeffs {
  double a, b, a1, b1;
};

RodriguesCoeffs rodrigues_coeffs(double theta) {
  const double t2 = theta * theta;
  if (theta < 0.05) {
    return {1.0 - t2 / 6.0 + t2 * t2 / 120.0, 0.5 - t2 / 24.0 + t2 * t2 / 720.0,
            -1.0 / 3.0 + t2 / 30.0 - t2 * t2 / 840.0, -1.0 / 12.0 + t2 / 180.0 - t2 * t2 / 6720.0};
  }
  const double s = std::sin(theta), c = std::cos(theta);
  return {s / theta, (1.0 - c) / t2, (theta * c - s) / (t2 * theta),
          (theta * s - 2.0 * (1.0 - c)) / (t2 * t2)};
}

using M3 = std::array<double, 9>;

M3 skew(const double* r) { return {0, -r[2], r[1], r[2], 0, -r[0], -r[1], r[0], 0}; }

M3 mul3(const M3& a, const M3& b) {
  M3 c{};
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k)
      for (int j = 0; j < 3; ++j) c[3 * i + j] += a[3 * i + k] * b[3 * k + j];
  return c;
}

Tensor constant(Shape shape, const double* data) {
  const std::size_t n = ad::numel(shape);
  return Tensor::constant(std::move(shape), std::vector<double>(data, data + n));
}

Tensor matvec(Graph& g, const Tensor& r, const Tensor& v) {
  const std::size_t b = v.dim(0);
  return g.reshape(g.matmul(r, g.reshape(v, {b, 3, 1})), {b, 3});
}

Tensor joint_row(Graph& g, const Tensor& joints, int j) {
  return g.reshape(g.slice(joints, 1, j, 1), {joints.dim(0), 3});
}

}  // namespace

Tensor rodrigues(Graph& g, const Tensor& r) {
  HANDREG_THROW_IF(r.rank() != 2 || r.dim(1) != 3, ErrorCode::ShapeMismatch,
                   "rodrigues expects [N, 3], got " + ad::shape_str(r.shape()));
  const std::size_t n = r.dim(0);
  std::vector<double> out(n * 9);
  const double* rv = r.value().data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* ri = rv + 3 * i;
    const double theta = std::sqrt(ri[0] * ri[0] + ri[1] * ri[1] + ri[2] * ri[2]);
    const auto cf = rodrigues_coeffs(theta);
    const M3 s = skew(ri);
    const M3 s2 = mul3(s, s);
    for (int e = 0; e < 9; ++e)
      out[9 * i + e] = (e % 4 == 0 ? 1.0 : 0.0) + cf.a * s[e] + cf.b * s2[e];
  }
  return g.custom("rodrigues", {n, 3, 3}, std::move(out), {r}, [n](ad::Node& o) {
    ad::Node& in = *o.inputs[0];
    if (!in.requires_grad) return;
    for (std::size_t i = 0; i < n; ++i) {
      const double* ri = in.value.data() + 3 * i;
      const double* gi = o.grad.data() + 9 * i;
      const double theta = std::sqrt(ri[0] * ri[0] + ri[1] * ri[1] + ri[2] * ri[2]);
      const auto cf = rodrigues_coeffs(theta);
      const M3 s = skew(ri);
      const M3 s2 = mul3(s, s);
      for (int c = 0; c < 3; ++c) {
        double e_unit[3] = {0, 0, 0};
        e_unit[c] = 1.0;
        const M3 e = skew(e_unit);
        const M3 es = mul3(e, s), se = mul3(s, e);
        double acc = 0.0;
        for (int k = 0; k < 9; ++k) {
          const double d = cf.a1 * ri[c] * s[k] + cf.a * e[k] + cf.b1 * ri[c] * s2[k] +
                           cf.b * (es[k] + se[k]);
          acc += gi[k] * d;
        }
        in.grad[3 * i + c] += acc;
      }
    }
  });
}

TemplateConstants::TemplateConstants(const HandTemplate& t)
    : num_vertices(t.num_vertices()), parents(t.parents) {
  const std::size_t v = static_cast<std::size_t>(num_vertices);
  vertices = constant({v, 3}, t.vertices.data());
  joints = constant({kNumJoints, 3}, t.joints.data());
  const RowMatrix bt = t.shape_basis.transpose();
  shape_basis_t = constant({kNumShape, 3 * v}, bt.data());
  const RowMatrix bjt = t.joint_shape_basis.transpose();
  joint_shape_basis_t = constant({kNumShape, 3 * kNumJoints}, bjt.data());
  skin_weights = constant({v, kNumJoints}, t.skin_weights.data());
  keypoint_regressor = constant({kNumKeypoints, v}, t.keypoint_regressor.data());
}

GraphKinematics forward_kinematics(Graph& g, const TemplateConstants& t, const Tensor& params) {
  HANDREG_THROW_IF(params.rank() != 2 || params.dim(1) != static_cast<std::size_t>(kParamDim),
                   ErrorCode::ShapeMismatch,
                   "hand parameters must be [B, 61], got " + ad::shape_str(params.shape()));
  const std::size_t b = params.dim(0);
  const Tensor global_rot = g.slice(params, 1, kGlobalRotOffset, 3);
  const Tensor trans = g.slice(params, 1, kGlobalTransOffset, 3);
  const Tensor pose = g.slice(params, 1, kJointPoseOffset, 3 * (kNumJoints - 1));
  const Tensor shape = g.slice(params, 1, kShapeOffset, kNumShape);

  const Tensor rotvecs = g.concat({global_rot, pose}, 1);  // [B, 48]
  const Tensor local = g.reshape(rodrigues(g, g.reshape(rotvecs, {b * kNumJoints, 3})),
                                 {b, kNumJoints, 3, 3});
  const Tensor rest = g.add(
      g.reshape(g.matmul(shape, t.joint_shape_basis_t), {b, kNumJoints, 3}), t.joints);

  std::vector<Tensor> abs_r(kNumJoints), abs_t(kNumJoints), rest_j(kNumJoints);
  for (int j = 0; j < kNumJoints; ++j) rest_j[j] = joint_row(g, rest, j);
  auto local_r = [&](int j) { return g.reshape(g.slice(local, 1, j, 1), {b, 3, 3}); };

  abs_r[0] = local_r(0);
  abs_t[0] = g.add(matvec(g, abs_r[0], rest_j[0]), trans);
  for (int j = 1; j < kNumJoints; ++j) {
    const int p = t.parents[j];
    abs_r[j] = g.matmul(abs_r[p], local_r(j));
    abs_t[j] = g.add(matvec(g, abs_r[p], g.sub(rest_j[j], rest_j[p])), abs_t[p]);
  }

  std::vector<Tensor> joints(kNumJoints), transforms(kNumJoints);
  for (int j = 0; j < kNumJoints; ++j) {
    joints[j] = g.reshape(abs_t[j], {b, 1, 3});
    const Tensor gt = g.sub(abs_t[j], matvec(g, abs_r[j], rest_j[j]));
    transforms[j] = g.reshape(g.concat({g.reshape(abs_r[j], {b, 9}), gt}, 1), {b, 1, 12});
  }
  return {g.concat(joints, 1), g.concat(transforms, 1)};
}

Tensor shaped_vertices(Graph& g, const TemplateConstants& t, const Tensor& shape) {
  const std::size_t b = shape.dim(0);
  const std::size_t v = static_cast<std::size_t>(t.num_vertices);
  return g.add(g.reshape(g.matmul(shape, t.shape_basis_t), {b, v, 3}), t.vertices);
}

Tensor skin_points(Graph& g, const TemplateConstants& t, const GraphKinematics& k,
                   const Tensor& rest) {
  const std::size_t b = rest.dim(0);
  const std::size_t v = static_cast<std::size_t>(t.num_vertices);
  HANDREG_THROW_IF(rest.rank() != 3 || rest.dim(1) != v || rest.dim(2) != 3,
                   ErrorCode::ShapeMismatch,
                   "rest points " + ad::shape_str(rest.shape()) + " vs template V=" +
                       std::to_string(v));
  const Tensor blended = g.matmul(t.skin_weights, k.transforms);  // [B, V, 12]
  const Tensor rot = g.reshape(g.slice(blended, 2, 0, 9), {b, v, 3, 3});
  const Tensor tr = g.slice(blended, 2, 9, 3);
  const Tensor rotated = g.sum_axis(g.mul(rot, g.reshape(rest, {b, v, 1, 3})), 3);
  return g.add(rotated, tr);
}

Tensor regress_keypoints(Graph& g, const TemplateConstants& t, const Tensor& vertices) {
  return g.matmul(t.keypoint_regressor, vertices);
}

GraphHandState skin(Graph& g, const TemplateConstants& t, const Tensor& params) {
  GraphHandState s;
  s.kinematics = forward_kinematics(g, t, params);
  const Tensor rest = shaped_vertices(g, t, g.slice(params, 1, kShapeOffset, kNumShape));
  s.vertices = skin_points(g, t, s.kinematics, rest);
  s.keypoints3d = regress_keypoints(g, t, s.vertices);
  return s;
}

MeshDecoder::MeshDecoder(int num_vertices, int hidden, std::uint64_t seed)
    : num_vertices_(num_vertices), hidden_(hidden) {
  HANDREG_THROW_IF(num_vertices <= 0 || hidden <= 0, ErrorCode::InvalidArgument,
                   "decoder sizes must be positive");
  Rng rng(seed);
  const std::size_t h = static_cast<std::size_t>(hidden);
  const std::size_t out = 3 * static_cast<std::size_t>(num_vertices);
  w1_ = ad::he_uniform({kLatentDim, h}, kLatentDim, rng);
  b1_ = ad::zeros_parameter({h});
  w2_ = ad::zeros_parameter({h, out});
  b2_ = ad::zeros_parameter({out});
}

Tensor MeshDecoder::decode(Graph& g, const Tensor& latent) const {
  HANDREG_THROW_IF(latent.rank() != 2 || latent.dim(1) != kLatentDim,
                   ErrorCode::DimensionMismatch,
                   "latent must be [B, 32], got " + ad::shape_str(latent.shape()));
  const Tensor hidden = g.relu(g.add(g.matmul(latent, w1_), b1_));
  const Tensor flat = g.add(g.matmul(hidden, w2_), b2_);
  return g.reshape(flat, {latent.dim(0), static_cast<std::size_t>(num_vertices_), 3});
}

Points MeshDecoder::decode_values(std::span<const double> latent) const {
  HANDREG_THROW_IF(latent.size() != kLatentDim, ErrorCode::DimensionMismatch,
                   "latent has " + std::to_string(latent.size()) + " values, expected 32");
  Graph g;
  const Tensor z = g.input({1, kLatentDim}, {latent.begin(), latent.end()});
  const Tensor out = decode(g, z);
  Points p(num_vertices_, 3);
  std::copy(out.value().begin(), out.value().end(), p.data());
  return p;
}

}  // namespace handreg::hand
