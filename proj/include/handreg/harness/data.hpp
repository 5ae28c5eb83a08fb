#pragma once
// Dataset views prepared for the network and batched loss assembly.

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "handreg/harness/train_config.hpp"
#include "handreg/synth/dataset.hpp"

namespace handreg::harness {

using ad::Graph;
using ad::Tensor;
using regressor::Network;

struct Corpus {
  std::filesystem::path dir;
  synth::DatasetManifest manifest;
  geometry::StereoRig rig;

  std::vector<synth::SampleRecord> load(synth::Split split) const;
};
Corpus open_corpus(const std::filesystem::path& dir);

const geometry::FisheyeCamera& camera(const geometry::StereoRig& rig, int view);

/// Min/max over the metadata of every visible view.
metadata::NormalizationStats fit_stats(std::span<const synth::SampleRecord> records);

/// Network-ready form of one visible view.
struct PreparedView {
  std::size_t record = 0;
  int view = 0;
  std::vector<double> crop;  // crop_size^2 values in [0, 1]
  metadata::Raw meta{};      // normalized
  regressor::ViewFrame frame;
};

struct PreparedSplit {
  std::vector<synth::SampleRecord> records;
  std::vector<PreparedView> views;
  std::vector<std::array<int, 2>> view_of;  // per record: index into views, -1 if hidden
  std::vector<std::array<double, 12>> rel;  // per record; set for two-view records

  std::vector<std::size_t> stereo_records() const;
};

PreparedSplit prepare_split(std::vector<synth::SampleRecord> records,
                            const geometry::StereoRig& rig,
                            const metadata::NormalizationStats& stats);

/// Mean-pose predictor: average GT keypoints of a record set.
hand::Points mean_pose(std::span<const synth::SampleRecord> records);

struct BatchLoss {
  Tensor total;
  losses::LossReport mono;
  std::optional<losses::LossReport> stereo;
  double value = 0.0;
};

/// Mono loss over every visible view of the given records, plus the stereo
/// loss over the two-view records when mode is Mixed. The backbone runs once
/// per visible view.
BatchLoss batch_loss(Graph& g, const Network& net, const PreparedSplit& data,
                     const geometry::StereoRig& rig, std::span<const std::size_t> records,
                     const losses::LossWeights& weights, StereoMode mode);

/// Loss terms of one forward pass against ground truth. kp2d uses the first
/// target list; stereo2d is present when right-view targets are given.
losses::LossTerms make_terms(Graph& g, const regressor::WorldOutputs& out, const Tensor& gt_kp,
                             const Tensor& gt_vertices,
                             std::span<const losses::ProjectionTarget> targets,
                             std::span<const losses::ProjectionTarget> right_targets,
                             const losses::LossWeights& weights);

/// Inference over views (mono path) or two-view records (stereo path), in
/// chunks of `chunk` samples. Predictions are in world coordinates.
std::vector<regressor::Prediction> predict_mono(const Network& net, const PreparedSplit& data,
                                                std::span<const std::size_t> views,
                                                std::size_t chunk = 64);
std::vector<regressor::Prediction> predict_stereo(const Network& net, const PreparedSplit& data,
                                                  std::span<const std::size_t> records,
                                                  std::size_t chunk = 64);

}  // namespace handreg::harness
