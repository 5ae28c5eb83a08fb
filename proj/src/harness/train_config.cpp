#include "handreg/harness/train_config.hpp"

#include <sstream>

#include "handreg/common/error.hpp"

namespace handreg::harness {

namespace {

template <std::size_t N>
std::array<int, N> parse_widths(const std::string& key, const std::string& text) {
  std::array<int, N> out{};
  std::stringstream ss(text);
  std::string item;
  std::size_t n = 0;
  while (std::getline(ss, item, ',')) {
    HANDREG_THROW_IF(n >= N, ErrorCode::InvalidConfig, key + ": too many widths");
    try {
      out[n++] = std::stoi(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidConfig, key + ": bad width '" + item + "'");
    }
  }
  HANDREG_THROW_IF(n != N, ErrorCode::InvalidConfig,
                   key + ": expected " + std::to_string(N) + " widths");
  return out;
}

template <std::size_t N>
std::string join(const std::array<int, N>& v) {
  std::string s;
  for (std::size_t i = 0; i < N; ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

void TrainConfig::validate() const {
  network.validate();
  weights.validate();
  HANDREG_THROW_IF(!(learning_rate > 0.0), ErrorCode::InvalidConfig, "learning_rate must be > 0");
  HANDREG_THROW_IF(batch_size <= 0, ErrorCode::InvalidConfig, "batch_size must be > 0");
  HANDREG_THROW_IF(epochs <= 0, ErrorCode::InvalidConfig, "epochs must be > 0");
  HANDREG_THROW_IF(max_steps < 0, ErrorCode::InvalidConfig, "max_steps must be >= 0");
  HANDREG_THROW_IF(log_every <= 0, ErrorCode::InvalidConfig, "log_every must be > 0");
}

TrainConfig TrainConfig::from_key_values(const KeyValues& kv,
                                         const std::filesystem::path& base_dir) {
  TrainConfig c;
  HANDREG_THROW_IF(!kv.has("seed"), ErrorCode::InvalidConfig, "seed is required");
  c.seed = kv.get_u64("seed");
  if (kv.has("data")) {
    c.data = kv.get_string("data");
    if (c.data.is_relative() && !base_dir.empty()) c.data = base_dir / c.data;
    HANDREG_THROW_IF(!std::filesystem::is_directory(c.data), ErrorCode::Io,
                     "dataset directory not found: " + c.data.string());
  }
  const std::string mode = kv.get_string("stereo_mode", "mixed");
  HANDREG_THROW_IF(mode != "mono" && mode != "mixed", ErrorCode::InvalidConfig,
                   "stereo_mode must be 'mono' or 'mixed', got '" + mode + "'");
  c.stereo_mode = mode == "mono" ? StereoMode::Mono : StereoMode::Mixed;
  c.epochs = static_cast<int>(kv.get_int("epochs", c.epochs));
  c.max_steps = kv.get_int("max_steps", c.max_steps);
  c.batch_size = static_cast<int>(kv.get_int("batch_size", c.batch_size));
  c.learning_rate = kv.get_double("learning_rate", c.learning_rate);
  c.log_every = static_cast<int>(kv.get_int("log_every", c.log_every));

  auto& n = c.network;
  n.crop_size = static_cast<int>(kv.get_int("net.crop_size", n.crop_size));
  if (kv.has("net.backbone_widths"))
    n.backbone_widths = parse_widths<4>("net.backbone_widths", kv.get_string("net.backbone_widths"));
  if (kv.has("net.meta_widths"))
    n.meta_widths = parse_widths<2>("net.meta_widths", kv.get_string("net.meta_widths"));
  n.fusion_width = static_cast<int>(kv.get_int("net.fusion_width", n.fusion_width));
  n.stereo_fusion_width =
      static_cast<int>(kv.get_int("net.stereo_fusion_width", n.stereo_fusion_width));
  n.decoder_hidden = static_cast<int>(kv.get_int("net.decoder_hidden", n.decoder_hidden));
  n.zero_metadata = kv.get_bool("net.zero_metadata", n.zero_metadata);
  n.init_seed = c.seed;

  for (int t = 0; t < losses::kNumTerms; ++t)
    c.weights.w[t] = kv.get_double("loss." + std::string(losses::kTermNames[t]), c.weights.w[t]);

  kv.check_all_used();
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  return from_key_values(KeyValues::load(path), path.parent_path());
}

KeyValues TrainConfig::to_key_values() const {
  KeyValues kv;
  kv.set("seed", seed);
  if (!data.empty()) kv.set("data", data.string());
  kv.set("stereo_mode", std::string(stereo_mode == StereoMode::Mono ? "mono" : "mixed"));
  kv.set("epochs", epochs);
  kv.set("max_steps", max_steps);
  kv.set("batch_size", batch_size);
  kv.set("learning_rate", learning_rate);
  kv.set("log_every", log_every);
  kv.set("net.crop_size", network.crop_size);
  kv.set("net.backbone_widths", join(network.backbone_widths));
  kv.set("net.meta_widths", join(network.meta_widths));
  kv.set("net.fusion_width", network.fusion_width);
  kv.set("net.stereo_fusion_width", network.stereo_fusion_width);
  kv.set("net.decoder_hidden", network.decoder_hidden);
  kv.set("net.zero_metadata", std::string(network.zero_metadata ? "true" : "false"));
  for (int t = 0; t < losses::kNumTerms; ++t)
    kv.set("loss." + std::string(losses::kTermNames[t]), weights.w[t]);
  return kv;
}

}  // namespace handreg::harness
