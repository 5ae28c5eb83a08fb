#include "handreg/harness/model.hpp"

#include "handreg/common/error.hpp"

namespace handreg::harness {

void save_model(const std::filesystem::path& path, const Model& model) {
  auto arrays = model.net->named_parameters();
  const auto cfg = model.net->config().to_array();
  arrays.push_back({"config/network", {cfg.size()}, cfg});
  arrays.push_back({"norm/min", {metadata::kMetadataDim},
                    {model.stats.min.begin(), model.stats.min.end()}});
  arrays.push_back({"norm/max", {metadata::kMetadataDim},
                    {model.stats.max.begin(), model.stats.max.end()}});
  arrays.push_back({"train/steps", {1}, {static_cast<double>(model.steps)}});
  ad::save_checkpoint(path, arrays);
}

Model load_model(const std::filesystem::path& path) {
  const auto arrays = ad::load_checkpoint(path);
  Model m;
  m.net = std::make_unique<regressor::Network>(
      regressor::NetworkConfig::from_array(ad::find_array(arrays, "config/network").data));
  m.net->load_parameters(arrays);
  const auto& lo = ad::find_array(arrays, "norm/min").data;
  const auto& hi = ad::find_array(arrays, "norm/max").data;
  HANDREG_THROW_IF(lo.size() != metadata::kMetadataDim || hi.size() != metadata::kMetadataDim,
                   ErrorCode::Format, "normalization blocks must hold 28 values");
  std::copy(lo.begin(), lo.end(), m.stats.min.begin());
  std::copy(hi.begin(), hi.end(), m.stats.max.begin());
  m.steps = static_cast<long long>(ad::find_array(arrays, "train/steps").data.at(0));
  return m;
}

}  // namespace handreg::harness
