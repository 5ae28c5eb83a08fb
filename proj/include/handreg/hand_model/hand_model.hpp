#pragma once
// Procedural hand with the structure of a MANO-style parametric model:
// 16-joint kinematic tree, linear shape basis, linear blend skinning and a
// vertex-to-keypoint regressor. All lengths in millimetres.

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "handreg/hand_model/skeleton.hpp"

namespace handreg::hand {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Face = std::array<int, 3>;

inline constexpr int kDefaultVertexBudget = 256;

struct HandTemplate {
  Points vertices;                       // V x 3, canonical pose
  std::vector<Face> faces;
  Points joints;                         // 16 x 3 rest positions
  std::array<int, kNumJoints> parents = kJointParents;
  RowMatrix skin_weights;                // V x 16, rows sum to 1
  RowMatrix shape_basis;                 // 3V x 10, row 3v + c
  RowMatrix joint_shape_basis;           // 48 x 10, row 3j + c
  RowMatrix keypoint_regressor;          // 21 x V, rows sum to 1
  /// Anatomical rotation axes per joint in the rest frame (flexion,
  /// abduction, twist); used to sample plausible poses.
  std::array<Mat3, kNumJoints> joint_axes;
  std::uint64_t seed = 0;
  int rings_per_bone = 0;
  int ring_sides = 0;

  int num_vertices() const { return static_cast<int>(vertices.rows()); }
};

/// Deterministic template. The seed jitters bone lengths by a few percent.
/// Throws BudgetTooSmall for vertex_budget < 100.
HandTemplate build_template(std::uint64_t seed, int vertex_budget = kDefaultVertexBudget);

struct HandParams {
  Vec3 global_rot = Vec3::Zero();    // axis-angle, rad
  Vec3 global_trans = Vec3::Zero();  // mm
  std::array<Vec3, kNumJoints - 1> joint_pose{};  // axis-angle per joint 1..15
  std::array<double, kNumShape> shape{};

  HandParams() { joint_pose.fill(Vec3::Zero()); }

  std::array<double, kParamDim> to_vector() const;
  static HandParams from_vector(std::span<const double> v);
};

struct RigidMotion {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
};

struct Kinematics {
  Points posed_joints;  // 16 x 3
  /// G_j mapping shaped rest-space points to posed world points.
  std::array<RigidMotion, kNumJoints> transforms;
};

struct HandState {
  Points keypoints3d;   // 21 x 3
  Points vertices;      // V x 3
  Points posed_joints;  // 16 x 3
};

/// Shape-adjusted rest joints J + B_J * shape.
Points shaped_joints(const HandTemplate& t, std::span<const double, kNumShape> shape);
/// Shape-adjusted rest vertices v + B * shape.
Points shaped_vertices(const HandTemplate& t, std::span<const double, kNumShape> shape);

/// A_0 = [R_g | R_g J_0 + tau], A_j = A_parent [R_j | J_j - J_parent];
/// G_j = A_j [I | -J_j]. Global rotation therefore acts about the origin.
Kinematics forward_kinematics(const HandTemplate& t, const HandParams& p);

/// Linear blend skinning of the shaped template; keypoints = M * vertices.
HandState skin(const HandTemplate& t, const HandParams& p);

/// Skins an arbitrary rest-space mesh with precomputed transforms.
Points skin_points(const HandTemplate& t, const Kinematics& k, const Points& rest);

struct BoneGeometry {
  std::array<Vec3, kNumBones> vectors;
  std::array<double, kNumBones> lengths{};
  std::array<double, kNumBoneAngles> angles{};
  /// False where either bone is shorter than kMinBoneLength (angle set to 0).
  std::array<bool, kNumBoneAngles> angle_valid{};
};

inline constexpr double kMinBoneLength = 1e-9;

BoneGeometry bone_vectors(const Points& keypoints3d);

/// ASCII OBJ with "v x y z" and 1-based "f a b c" records.
void write_obj(std::ostream& os, const Points& vertices, std::span<const Face> faces);
void save_obj(const std::filesystem::path& path, const Points& vertices,
              std::span<const Face> faces);
struct ObjMesh {
  Points vertices;
  std::vector<Face> faces;
};
ObjMesh read_obj(std::istream& is);
ObjMesh load_obj(const std::filesystem::path& path);

}  // namespace handreg::hand
