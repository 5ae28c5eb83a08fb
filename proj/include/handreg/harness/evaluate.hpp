#pragma once
// Evaluation report: MKPE and AUC(0-50 mm) per method, PCK curves,
// per-keypoint errors, baselines and published reference values.

#include <iosfwd>
#include <string>
#include <vector>

#include "handreg/harness/data.hpp"
#include "handreg/harness/metrics.hpp"
#include "handreg/harness/model.hpp"

namespace handreg::harness {

struct MethodResult {
  std::string name;
  std::string subset;  // which samples the row covers
  std::size_t samples = 0;
  double mkpe = 0.0;
  double auc = 0.0;
  PckCurve pck{};
  std::array<double, hand::kNumKeypoints> per_keypoint{};
  bool reference = false;  // externally reported value, not measured here
};

struct EvalReport {
  std::string split;
  std::size_t records = 0;
  std::size_t stereo_records = 0;
  std::size_t mono_views = 0;
  std::vector<MethodResult> rows;

  const MethodResult& row(const std::string& name) const;
};

/// Row names.
inline constexpr const char* kMono = "mono";
inline constexpr const char* kMonoStereoSubset = "mono_on_stereo_subset";
inline constexpr const char* kStereo = "stereo";
inline constexpr const char* kMonoMano = "mono_mano";
inline constexpr const char* kStereoMano = "stereo_mano";
inline constexpr const char* kMeanPose = "baseline_mean_pose";
inline constexpr const char* kTriangulation = "baseline_triangulation_gt2d";

/// Builds a row from per-sample keypoint errors (21 per sample).
MethodResult summarize(const std::string& name, const std::string& subset,
                       const std::vector<std::array<double, hand::kNumKeypoints>>& errors);

/// Mono rows over every visible view; stereo rows over two-view records.
/// `mean` is the mean-pose baseline prediction.
EvalReport evaluate(const Model& model, const geometry::StereoRig& rig, const PreparedSplit& split,
                    const hand::Points& mean, const std::string& split_name);

/// Opens the dataset, loads the split and the training split's mean pose.
EvalReport evaluate_dataset(const Model& model, const std::filesystem::path& data_dir,
                            synth::Split split);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
/// Method / MKPE / AUC table.
void write_table(std::ostream& os, const EvalReport& report);

}  // namespace handreg::harness
