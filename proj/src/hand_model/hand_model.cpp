#include "handreg/hand_model/hand_model.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include "handreg/common/error.hpp"
#include "handreg/common/random.hpp"

namespace handreg::hand {

namespace {

struct FingerSpec {
  Vec3 knuckle;
  Vec3 direction;
  std::array<double, 3> lengths;  // knuckle -> l1 -> l2 -> tip
  Vec3 up;                        // back-of-finger direction
  double radius_wrist;
  double radius_knuckle;
  double radius_tip;
};

std::array<FingerSpec, kNumFingers> base_fingers() {
  const Vec3 up = Vec3::UnitZ();
  return {{
      {{24, 20, -6}, Vec3(0.8, 1.0, -0.35).normalized(), {40, 32, 26},
       Vec3(-0.6, 0.4, 0.7).normalized(), 12.0, 11.0, 8.0},
      {{25, 88, 0}, Vec3(0.08, 1, 0).normalized(), {40, 24, 21}, up, 11.0, 9.0, 7.0},
      {{5, 92, 0}, Vec3(0, 1, 0), {45, 28, 22}, up, 11.0, 9.5, 7.0},
      {{-14, 87, 0}, Vec3(-0.06, 1, 0).normalized(), {42, 27, 21}, up, 11.0, 9.0, 6.5},
      {{-31, 79, 0}, Vec3(-0.14, 1, 0).normalized(), {33, 20, 19}, up, 10.0, 8.0, 6.0},
  }};
}

Mat3 rodrigues(const Vec3& r) {
  const double angle = r.norm();
  if (angle == 0.0) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, r / angle).toRotationMatrix();
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

// Sample point of the procedural mesh described by its place on a finger
// chain; the shape fields are functions of this description.
struct ChainPoint {
  int finger = 0;
  int segment = 0;  // 0 = wrist->knuckle, 1..3 along the finger
  Vec3 center;
  Vec3 radial = Vec3::Zero();
};

// Displacement of `p` under unit shape coefficient k.
Vec3 shape_field(int k, const ChainPoint& p, const std::array<Vec3, kNumFingers>& knuckles) {
  const Vec3& knuckle = knuckles[p.finger];
  const bool on_finger = p.segment >= 1;
  switch (k) {
    case 0:  // overall size
      return 0.06 * (p.center + p.radial);
    case 1:  // thumb spread about the palm normal
      if (p.finger == 0 && on_finger) return 0.12 * Vec3::UnitZ().cross(p.center - knuckle);
      return Vec3::Zero();
    case 2:  // palm length
      return 0.07 * Vec3(0, on_finger ? knuckle.y() : p.center.y(), 0);
    case 3:  // palm width
      return 0.08 * Vec3(on_finger ? knuckle.x() : p.center.x(), 0, 0);
    case 4:  // thickness
      return 0.12 * p.radial;
    default:  // per-finger length, fingers 0..4
      if (p.finger == k - 5 && on_finger) return 0.08 * (p.center - knuckle);
      return Vec3::Zero();
  }
}

struct MeshLayout {
  int rings_per_bone;
  int sides;
  int count() const { return kNumFingers * (4 * rings_per_bone + 1) * sides + kNumFingers; }
};

MeshLayout choose_layout(int budget) {
  MeshLayout best{1, 3};
  int best_err = std::numeric_limits<int>::max();
  for (int sides = 3; sides <= 12; ++sides) {
    for (int n = 1; n <= 64; ++n) {
      const MeshLayout l{n, sides};
      const int err = std::abs(l.count() - budget);
      if (err < best_err || (err == best_err && sides > best.sides)) {
        best = l;
        best_err = err;
      }
    }
  }
  return best;
}

}  // namespace

HandTemplate build_template(std::uint64_t seed, int vertex_budget) {
  HANDREG_THROW_IF(vertex_budget < 100, ErrorCode::BudgetTooSmall,
                   "vertex_budget " + std::to_string(vertex_budget) + " < 100");
  Rng rng(seed);
  auto fingers = base_fingers();
  for (auto& f : fingers) {
    for (int c = 0; c < 3; ++c) f.knuckle(c) += rng.uniform(-2.0, 2.0);
    for (auto& len : f.lengths) len *= 1.0 + rng.uniform(-0.04, 0.04);
  }

  const MeshLayout layout = choose_layout(vertex_budget);
  const int n = layout.rings_per_bone;
  const int sides = layout.sides;
  const int rings = 4 * n + 1;
  const int per_finger = rings * sides;

  HandTemplate t;
  t.seed = seed;
  t.rings_per_bone = n;
  t.ring_sides = sides;
  const int v_count = layout.count();
  t.vertices.resize(v_count, 3);
  t.joints.setZero(kNumJoints, 3);

  std::array<std::array<Vec3, 5>, kNumFingers> chains;
  std::array<Vec3, kNumFingers> knuckles;
  for (int f = 0; f < kNumFingers; ++f) {
    const auto& spec = fingers[f];
    chains[f][0] = Vec3::Zero();
    chains[f][1] = spec.knuckle;
    for (int l = 0; l < 3; ++l)
      chains[f][l + 2] = chains[f][l + 1] + spec.lengths[l] * spec.direction;
    knuckles[f] = spec.knuckle;
    for (int l = 0; l < 3; ++l) t.joints.row(joint_index(f, l)) = chains[f][l + 1].transpose();
  }

  std::vector<ChainPoint> points(v_count);
  const double kTwoPi = 2.0 * std::numbers::pi;
  for (int f = 0; f < kNumFingers; ++f) {
    const auto& spec = fingers[f];
    const auto& chain = chains[f];
    for (int r = 0; r < rings; ++r) {
      const int seg = std::min(r / n, 3);
      const double s = r == rings - 1 ? 1.0 : static_cast<double>(r % n) / n;
      const Vec3 center = chain[seg] + s * (chain[seg + 1] - chain[seg]);
      const Vec3 dir = (chain[seg + 1] - chain[seg]).normalized();
      const Vec3 u = (spec.up - spec.up.dot(dir) * dir).normalized();
      const Vec3 w = dir.cross(u);
      const double pos = (seg + s) / 4.0;  // 0 at wrist, 0.25 at knuckle, 1 at tip
      const double radius = pos < 0.25 ? spec.radius_wrist + (spec.radius_knuckle - spec.radius_wrist) * pos / 0.25
                                       : spec.radius_knuckle + (spec.radius_tip - spec.radius_knuckle) * (pos - 0.25) / 0.75;
      for (int k = 0; k < sides; ++k) {
        const double phi = kTwoPi * (k + 0.5) / sides;
        const Vec3 radial = radius * (std::cos(phi) * u + std::sin(phi) * w);
        const int v = f * per_finger + r * sides + k;
        t.vertices.row(v) = (center + radial).transpose();
        points[v] = {f, seg, center, radial};
      }
    }
    const Vec3 tip_dir = (chain[4] - chain[3]).normalized();
    const int cap = kNumFingers * per_finger + f;
    const Vec3 radial = 0.8 * spec.radius_tip * tip_dir;
    t.vertices.row(cap) = (chain[4] + radial).transpose();
    points[cap] = {f, 3, chain[4], radial};
  }

  // Faces: quads between consecutive rings, fan over each fingertip.
  for (int f = 0; f < kNumFingers; ++f) {
    const int base = f * per_finger;
    for (int r = 0; r + 1 < rings; ++r) {
      for (int k = 0; k < sides; ++k) {
        const int a = base + r * sides + k;
        const int b = base + r * sides + (k + 1) % sides;
        const int c = a + sides;
        const int d = b + sides;
        t.faces.push_back({a, b, d});
        t.faces.push_back({a, d, c});
      }
    }
    const int last = base + (rings - 1) * sides;
    const int cap = kNumFingers * per_finger + f;
    for (int k = 0; k < sides; ++k) t.faces.push_back({last + k, last + (k + 1) % sides, cap});
  }

  // Skinning: inverse distance to the two nearest bones of the vertex's own
  // finger chain. Bone s of finger f is driven by joint 0 (s = 0) or by the
  // finger joint at its proximal end.
  t.skin_weights.setZero(v_count, kNumJoints);
  for (int v = 0; v < v_count; ++v) {
    const int f = points[v].finger;
    const Vec3 p = t.vertices.row(v).transpose();
    std::array<std::pair<double, int>, 4> d;
    for (int s = 0; s < 4; ++s) {
      const int owner = s == 0 ? 0 : joint_index(f, s - 1);
      d[s] = {std::max(point_segment_distance(p, chains[f][s], chains[f][s + 1]), 1e-9), owner};
    }
    std::sort(d.begin(), d.end());
    const double w0 = 1.0 / d[0].first, w1 = 1.0 / d[1].first;
    t.skin_weights(v, d[0].second) += w0 / (w0 + w1);
    t.skin_weights(v, d[1].second) += w1 / (w0 + w1);
  }

  // Keypoint regressor: uniform over the ring whose centre is the keypoint.
  t.keypoint_regressor.setZero(kNumKeypoints, v_count);
  for (int f = 0; f < kNumFingers; ++f) {
    for (int k = 0; k < sides; ++k)
      t.keypoint_regressor(0, f * per_finger + k) = 1.0 / (kNumFingers * sides);
    for (int l = 0; l < 4; ++l) {
      const int ring = (l + 1) * n;
      for (int k = 0; k < sides; ++k)
        t.keypoint_regressor(keypoint_index(f, l), f * per_finger + ring * sides + k) = 1.0 / sides;
    }
  }

  t.shape_basis.setZero(3 * v_count, kNumShape);
  for (int v = 0; v < v_count; ++v)
    for (int k = 0; k < kNumShape; ++k)
      t.shape_basis.block<3, 1>(3 * v, k) = shape_field(k, points[v], knuckles);

  t.joint_shape_basis.setZero(3 * kNumJoints, kNumShape);
  for (int f = 0; f < kNumFingers; ++f) {
    for (int l = 0; l < 3; ++l) {
      const ChainPoint jp{f, l + 1, chains[f][l + 1]};
      for (int k = 0; k < kNumShape; ++k)
        t.joint_shape_basis.block<3, 1>(3 * joint_index(f, l), k) = shape_field(k, jp, knuckles);
    }
  }

  t.joint_axes[0] = Mat3::Identity();
  for (int f = 0; f < kNumFingers; ++f) {
    const Vec3 dir = fingers[f].direction;
    const Vec3 up = fingers[f].up;
    const Vec3 flex = up.cross(dir).normalized();
    const Vec3 abd = dir.cross(flex);
    for (int l = 0; l < 3; ++l) {
      Mat3 axes;
      axes.col(0) = flex;
      axes.col(1) = abd;
      axes.col(2) = dir;
      t.joint_axes[joint_index(f, l)] = axes;
    }
  }
  return t;
}

std::array<double, kParamDim> HandParams::to_vector() const {
  std::array<double, kParamDim> v{};
  for (int c = 0; c < 3; ++c) {
    v[kGlobalRotOffset + c] = global_rot(c);
    v[kGlobalTransOffset + c] = global_trans(c);
  }
  for (int j = 0; j < kNumJoints - 1; ++j)
    for (int c = 0; c < 3; ++c) v[kJointPoseOffset + 3 * j + c] = joint_pose[j](c);
  for (int k = 0; k < kNumShape; ++k) v[kShapeOffset + k] = shape[k];
  return v;
}

HandParams HandParams::from_vector(std::span<const double> v) {
  HANDREG_THROW_IF(v.size() != static_cast<size_t>(kParamDim), ErrorCode::DimensionMismatch,
                   "hand parameter vector has " + std::to_string(v.size()) + " values, expected 61");
  HandParams p;
  for (int c = 0; c < 3; ++c) {
    p.global_rot(c) = v[kGlobalRotOffset + c];
    p.global_trans(c) = v[kGlobalTransOffset + c];
  }
  for (int j = 0; j < kNumJoints - 1; ++j)
    for (int c = 0; c < 3; ++c) p.joint_pose[j](c) = v[kJointPoseOffset + 3 * j + c];
  for (int k = 0; k < kNumShape; ++k) p.shape[k] = v[kShapeOffset + k];
  return p;
}

Points shaped_joints(const HandTemplate& t, std::span<const double, kNumShape> shape) {
  const Eigen::Map<const Eigen::Matrix<double, kNumShape, 1>> beta(shape.data());
  const Eigen::VectorXd offsets = t.joint_shape_basis * beta;
  Points out = t.joints;
  for (int j = 0; j < kNumJoints; ++j) out.row(j) += offsets.segment<3>(3 * j).transpose();
  return out;
}

Points shaped_vertices(const HandTemplate& t, std::span<const double, kNumShape> shape) {
  const Eigen::Map<const Eigen::Matrix<double, kNumShape, 1>> beta(shape.data());
  const Eigen::VectorXd offsets = t.shape_basis * beta;
  Points out = t.vertices;
  for (int v = 0; v < out.rows(); ++v) out.row(v) += offsets.segment<3>(3 * v).transpose();
  return out;
}

Kinematics forward_kinematics(const HandTemplate& t, const HandParams& p) {
  const Points rest = shaped_joints(t, p.shape);
  Kinematics k;
  k.posed_joints.resize(kNumJoints, 3);
  std::array<RigidMotion, kNumJoints> abs;
  const Mat3 rg = rodrigues(p.global_rot);
  abs[0].rotation = rg;
  abs[0].translation = rg * rest.row(0).transpose() + p.global_trans;
  for (int j = 1; j < kNumJoints; ++j) {
    const int parent = t.parents[j];
    const Vec3 offset = (rest.row(j) - rest.row(parent)).transpose();
    abs[j].rotation = abs[parent].rotation * rodrigues(p.joint_pose[j - 1]);
    abs[j].translation = abs[parent].rotation * offset + abs[parent].translation;
  }
  for (int j = 0; j < kNumJoints; ++j) {
    k.posed_joints.row(j) = abs[j].translation.transpose();
    k.transforms[j].rotation = abs[j].rotation;
    k.transforms[j].translation = abs[j].translation - abs[j].rotation * rest.row(j).transpose();
  }
  return k;
}

Points skin_points(const HandTemplate& t, const Kinematics& k, const Points& rest) {
  HANDREG_THROW_IF(rest.rows() != t.num_vertices(), ErrorCode::DimensionMismatch,
                   "mesh has " + std::to_string(rest.rows()) + " vertices, template has " +
                       std::to_string(t.num_vertices()));
  Points out(rest.rows(), 3);
  for (int v = 0; v < rest.rows(); ++v) {
    Mat3 r = Mat3::Zero();
    Vec3 tr = Vec3::Zero();
    for (int j = 0; j < kNumJoints; ++j) {
      const double w = t.skin_weights(v, j);
      if (w == 0.0) continue;
      r += w * k.transforms[j].rotation;
      tr += w * k.transforms[j].translation;
    }
    out.row(v) = (r * rest.row(v).transpose() + tr).transpose();
  }
  return out;
}

HandState skin(const HandTemplate& t, const HandParams& p) {
  const Kinematics k = forward_kinematics(t, p);
  HandState s;
  s.vertices = skin_points(t, k, shaped_vertices(t, p.shape));
  s.keypoints3d = t.keypoint_regressor * s.vertices;
  s.posed_joints = k.posed_joints;
  return s;
}

BoneGeometry bone_vectors(const Points& keypoints3d) {
  HANDREG_THROW_IF(keypoints3d.rows() != kNumKeypoints, ErrorCode::ShapeMismatch,
                   "expected 21 keypoints, got " + std::to_string(keypoints3d.rows()));
  BoneGeometry g;
  for (int b = 0; b < kNumBones; ++b) {
    const auto [parent, child] = kSkeletonEdges[b];
    g.vectors[b] = (keypoints3d.row(child) - keypoints3d.row(parent)).transpose();
    g.lengths[b] = g.vectors[b].norm();
  }
  for (int a = 0; a < kNumBoneAngles; ++a) {
    const auto [first, second] = kBonePairs[a];
    const double la = g.lengths[first], lb = g.lengths[second];
    g.angle_valid[a] = la >= kMinBoneLength && lb >= kMinBoneLength;
    if (!g.angle_valid[a]) continue;
    const double c = g.vectors[first].dot(g.vectors[second]) / (la * lb);
    g.angles[a] = std::acos(std::clamp(c, -1.0, 1.0));
  }
  return g;
}

void write_obj(std::ostream& os, const Points& vertices, std::span<const Face> faces) {
  const auto precision = os.precision(17);
  for (int v = 0; v < vertices.rows(); ++v)
    os << "v " << vertices(v, 0) << " " << vertices(v, 1) << " " << vertices(v, 2) << "\n";
  for (const auto& f : faces) os << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
  os.precision(precision);
}

void save_obj(const std::filesystem::path& path, const Points& vertices,
              std::span<const Face> faces) {
  std::ofstream os(path);
  HANDREG_THROW_IF(!os, ErrorCode::Io, "cannot write " + path.string());
  write_obj(os, vertices, faces);
  HANDREG_THROW_IF(!os, ErrorCode::Io, "write failed for " + path.string());
}

ObjMesh read_obj(std::istream& is) {
  std::vector<Vec3> verts;
  ObjMesh mesh;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 v;
      HANDREG_THROW_IF(!(ss >> v.x() >> v.y() >> v.z()), ErrorCode::Format,
                       "line " + std::to_string(line_no) + ": bad vertex");
      verts.push_back(v);
    } else if (tag == "f") {
      Face f;
      for (auto& idx : f) {
        std::string tok;
        HANDREG_THROW_IF(!(ss >> tok), ErrorCode::Format,
                         "line " + std::to_string(line_no) + ": face needs 3 indices");
        idx = std::stoi(tok.substr(0, tok.find('/'))) - 1;
      }
      mesh.faces.push_back(f);
    }
  }
  mesh.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
  for (size_t i = 0; i < verts.size(); ++i) mesh.vertices.row(i) = verts[i].transpose();
  for (const auto& f : mesh.faces)
    for (int idx : f)
      HANDREG_THROW_IF(idx < 0 || idx >= static_cast<int>(verts.size()), ErrorCode::Format,
                       "face index out of range");
  return mesh;
}

ObjMesh load_obj(const std::filesystem::path& path) {
  std::ifstream is(path);
  HANDREG_THROW_IF(!is, ErrorCode::Io, "cannot open " + path.string());
  return read_obj(is);
}

}  // namespace handreg::hand
