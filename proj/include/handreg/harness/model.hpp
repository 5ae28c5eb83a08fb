#pragma once
// A trained network bundled with the metadata normalization it was trained with.
//
// Checkpoint arrays: "param/<name>" for every weight, "config/network",
// "norm/min", "norm/max" and "train/steps".

#include <filesystem>
#include <memory>

#include "handreg/metadata/metadata.hpp"
#include "handreg/regressor/network.hpp"

namespace handreg::harness {

struct Model {
  std::unique_ptr<regressor::Network> net;
  metadata::NormalizationStats stats;
  long long steps = 0;
};

void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace handreg::harness
