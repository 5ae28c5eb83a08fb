#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "handreg/common/key_value.hpp"
#include "handreg/losses/losses.hpp"
#include "handreg/regressor/network.hpp"

namespace handreg::harness {

enum class StereoMode { Mono, Mixed };

/// Flat key-value training configuration. Keys:
///   seed (required), data, stereo_mode = mono | mixed, epochs, max_steps,
///   batch_size, learning_rate, log_every,
///   net.crop_size, net.backbone_widths (4 comma-separated), net.meta_widths (2),
///   net.fusion_width, net.stereo_fusion_width, net.decoder_hidden,
///   net.zero_metadata,
///   loss.<term> for each term name.
/// The hand template (seed and vertex budget) always follows the dataset.
struct TrainConfig {
  std::filesystem::path data;
  regressor::NetworkConfig network;
  losses::LossWeights weights;
  double learning_rate = 1e-3;
  int batch_size = 16;
  int epochs = 10;
  long long max_steps = 0;  // 0 = run all epochs
  int log_every = 1;
  std::uint64_t seed = 0;
  StereoMode stereo_mode = StereoMode::Mixed;

  void validate() const;
  /// Relative `data` is resolved against `base_dir`. Unknown keys are rejected.
  static TrainConfig from_key_values(const KeyValues& kv,
                                     const std::filesystem::path& base_dir = {});
  static TrainConfig load(const std::filesystem::path& path);
  KeyValues to_key_values() const;
};

}  // namespace handreg::harness
