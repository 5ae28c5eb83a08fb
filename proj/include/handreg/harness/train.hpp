#pragma once
// Training loop. Deterministic for a fixed seed: single-threaded, double
// precision, shuffling from the config seed only.

#include <iosfwd>

#include "handreg/autodiff/optimizer.hpp"
#include "handreg/harness/data.hpp"
#include "handreg/harness/model.hpp"

namespace handreg::harness {

/// Tab-separated metrics log: step, epoch, total, then mono.<term> and
/// stereo.<term> for every loss term ("NA" when a term is absent).
void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, long long step, int epoch, const BatchLoss& loss);

class Trainer {
 public:
  Trainer(TrainConfig config, const geometry::StereoRig& rig, PreparedSplit train,
          metadata::NormalizationStats stats);

  /// Loss of `records` at the current weights, then one Adam update.
  /// Throws NonFiniteLoss naming the first non-finite term.
  BatchLoss step(std::span<const std::size_t> records);

  /// Runs the configured epochs (or max_steps), writing a metrics row every
  /// log_every steps. `progress` receives an occasional human-readable line.
  void run(std::ostream* metrics, std::ostream* progress = nullptr);

  const TrainConfig& config() const { return config_; }
  const PreparedSplit& data() const { return data_; }
  const Model& model() const { return model_; }
  Model& model() { return model_; }
  long long steps() const { return model_.steps; }

 private:
  TrainConfig config_;
  geometry::StereoRig rig_;
  PreparedSplit data_;
  Model model_;
  ad::Adam optimizer_;
};

/// Loads the dataset, fits normalization on the training split, trains and
/// saves the checkpoint. The metrics log goes to `metrics` when non-null.
Model train_from_dataset(TrainConfig config, const std::filesystem::path& data_dir,
                         std::ostream* metrics, std::ostream* progress = nullptr);

}  // namespace handreg::harness
