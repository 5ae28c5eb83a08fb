#pragma once
// Synthetic dataset: record generation, shard files and manifest.
//
// Layout of <dir>:
//   manifest.txt           key = value summary (format, seed, counts, config)
//   rig.txt                rig calibration
//   <split>-NNNNN.bin      shards of up to shard_size records
// Shard byte layout is documented in docs/formats.md.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "handreg/common/key_value.hpp"
#include "handreg/metadata/metadata.hpp"
#include "handreg/synth/render.hpp"
#include "handreg/synth/sampling.hpp"

namespace handreg::synth {

inline constexpr std::string_view kShardMagic = "direg3d-shard v1\n";

enum class Split { Train = 0, Val = 1, Test = 2 };
inline constexpr std::array<std::string_view, 3> kSplitNames = {"train", "val", "test"};
Split parse_split(std::string_view name);

struct DataConfig {
  std::array<int, 3> counts = {5000, 500, 500};
  int crop_size = 32;
  double stereo_fraction = 0.35;
  std::uint64_t template_seed = 0;
  int vertex_budget = hand::kDefaultVertexBudget;
  RigPreset rig;
  SamplingRanges ranges;
  double noise = 0.1;
  int shard_size = 1000;
  int max_attempts = 10000;
  int threads = 1;  // does not affect output bytes

  void validate() const;
  static DataConfig from_key_values(const KeyValues& kv);
  KeyValues to_key_values() const;
};

struct ViewRecord {
  bool visible = false;
  geometry::BoundingBox tight_box;  // around projected keypoints
  geometry::BoundingBox crop_box;   // squared with margin and clamped
  metadata::MetadataVector meta;
  Eigen::Matrix<double, hand::kNumKeypoints, 2, Eigen::RowMajor> keypoints2d =
      Eigen::Matrix<double, hand::kNumKeypoints, 2, Eigen::RowMajor>::Zero();  // full-frame px
  GrayImage crop;
};

struct SampleRecord {
  std::uint64_t id = 0;
  bool stereo = false;
  hand::HandParams params;
  hand::Points keypoints3d;  // 21 x 3 world mm
  hand::Points vertices;     // V x 3 world mm
  std::array<ViewRecord, 2> views;  // left, right

  int visible_views() const { return views[0].visible + views[1].visible; }
};

/// Stereo-flagged when floor((i + 1) f) > floor(i f), so any prefix of a
/// split holds floor(n f) stereo records.
bool stereo_slot(std::size_t index, double fraction);

/// Shared state for generating records of one dataset.
struct Generator {
  Generator(const DataConfig& config, std::uint64_t seed);

  DataConfig config;
  std::uint64_t seed;
  geometry::StereoRig rig;
  hand::HandTemplate hand_template;

  /// Per-record rng seeded from seed ^ id. Samples until the record's
  /// visibility matches its stratum; `attempts` receives the number of draws.
  SampleRecord generate(std::uint64_t id, bool stereo, int* attempts = nullptr) const;
  /// Fills the per-view fields for a given hand; returns visibility of each view.
  std::array<bool, 2> observe(SampleRecord& rec, std::uint64_t noise_seed) const;
};

struct SplitSummary {
  std::uint64_t first_id = 0;
  int count = 0;
  int stereo = 0;
  std::vector<std::string> shards;
};

struct DatasetManifest {
  std::string format;
  std::uint64_t seed = 0;
  DataConfig config;
  std::array<SplitSummary, 3> splits;
  long long resampled = 0;
  int num_vertices = 0;

  double stereo_fraction(Split s) const;
  KeyValues to_key_values() const;
  static DatasetManifest from_key_values(const KeyValues& kv);
};

DatasetManifest generate_dataset(const DataConfig& config, std::uint64_t seed,
                                 const std::filesystem::path& out_dir);

void write_shard(std::ostream& os, std::span<const SampleRecord> records, int crop_size,
                 int num_vertices);
std::vector<SampleRecord> read_shard(std::istream& is);

DatasetManifest load_manifest(const std::filesystem::path& dir);
std::vector<SampleRecord> load_split(const std::filesystem::path& dir, const DatasetManifest& m,
                                     Split split);

}  // namespace handreg::synth
