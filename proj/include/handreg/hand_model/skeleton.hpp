#pragma once
// Joint and keypoint conventions.
//
// Joints (16): 0 wrist, then three per finger in the order thumb, index,
// middle, ring, pinky: joint 1 + 3f + l for finger f and level l = 0..2
// (l = 0 is the knuckle nearest the palm).
//
// Keypoints (21): 0 wrist, then four per finger: keypoint 1 + 4f + l for
// l = 0..2 at the finger's joints and l = 3 at the fingertip.

#include <array>
#include <cstddef>

namespace handreg::hand {

inline constexpr int kNumFingers = 5;
inline constexpr int kNumJoints = 16;
inline constexpr int kNumKeypoints = 21;
inline constexpr int kNumShape = 10;
inline constexpr int kNumBones = 20;
inline constexpr int kNumBoneAngles = 15;
inline constexpr int kParamDim = 3 + 3 + 3 * (kNumJoints - 1) + kNumShape;  // 61

/// Offsets into the flat 61-D parameter vector.
inline constexpr int kGlobalRotOffset = 0;
inline constexpr int kGlobalTransOffset = 3;
inline constexpr int kJointPoseOffset = 6;
inline constexpr int kShapeOffset = 51;

constexpr int joint_index(int finger, int level) { return 1 + 3 * finger + level; }
constexpr int keypoint_index(int finger, int level) { return 1 + 4 * finger + level; }

inline constexpr std::array<int, kNumJoints> kJointParents = {
    -1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 0, 10, 11, 0, 13, 14};

struct Edge {
  int parent;
  int child;
};

/// Bone b of finger f is edge 4f + b: wrist -> knuckle, then along the finger.
constexpr std::array<Edge, kNumBones> make_skeleton_edges() {
  std::array<Edge, kNumBones> edges{};
  for (int f = 0; f < kNumFingers; ++f) {
    edges[4 * f] = {0, keypoint_index(f, 0)};
    for (int l = 1; l < 4; ++l) edges[4 * f + l] = {keypoint_index(f, l - 1), keypoint_index(f, l)};
  }
  return edges;
}
inline constexpr std::array<Edge, kNumBones> kSkeletonEdges = make_skeleton_edges();

/// Consecutive bone pairs within each finger: angle a of finger f is between
/// bones 4f + a and 4f + a + 1.
struct BonePair {
  int first;
  int second;
};
constexpr std::array<BonePair, kNumBoneAngles> make_bone_pairs() {
  std::array<BonePair, kNumBoneAngles> pairs{};
  for (int f = 0; f < kNumFingers; ++f)
    for (int a = 0; a < 3; ++a) pairs[3 * f + a] = {4 * f + a, 4 * f + a + 1};
  return pairs;
}
inline constexpr std::array<BonePair, kNumBoneAngles> kBonePairs = make_bone_pairs();

inline constexpr std::array<const char*, kNumKeypoints> kKeypointNames = {
    "wrist",     "thumb1",  "thumb2",  "thumb3",  "thumb_tip",  "index1", "index2",
    "index3",    "index_tip", "middle1", "middle2", "middle3", "middle_tip", "ring1",
    "ring2",     "ring3",   "ring_tip", "pinky1", "pinky2",  "pinky3",  "pinky_tip"};

}  // namespace handreg::hand
