#include "handreg/synth/dataset.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "handreg/common/binary_io.hpp"
#include "handreg/common/error.hpp"

namespace handreg::synth {

namespace {

constexpr std::uint8_t kFlagStereo = 1;
constexpr std::uint8_t kFlagVisibleLeft = 2;
constexpr std::uint8_t kFlagVisibleRight = 4;

std::string shard_name(Split s, int index) {
  std::ostringstream os;
  os << kSplitNames[static_cast<int>(s)] << '-' << std::setw(5) << std::setfill('0') << index
     << ".bin";
  return os.str();
}

void write_box(std::ostream& os, const geometry::BoundingBox& b) {
  io::write_le(os, b.x_min);
  io::write_le(os, b.y_min);
  io::write_le(os, b.x_max);
  io::write_le(os, b.y_max);
}

geometry::BoundingBox read_box(std::istream& is) {
  geometry::BoundingBox b;
  b.x_min = io::read_le<double>(is);
  b.y_min = io::read_le<double>(is);
  b.x_max = io::read_le<double>(is);
  b.y_max = io::read_le<double>(is);
  return b;
}

void write_points(std::ostream& os, const hand::Points& p) {
  for (Eigen::Index i = 0; i < p.size(); ++i) io::write_le(os, p.data()[i]);
}

hand::Points read_points(std::istream& is, int rows) {
  hand::Points p(rows, 3);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = io::read_le<double>(is);
  return p;
}

}  // namespace

Split parse_split(std::string_view name) {
  for (std::size_t i = 0; i < kSplitNames.size(); ++i)
    if (kSplitNames[i] == name) return static_cast<Split>(i);
  throw Error(ErrorCode::InvalidArgument, "unknown split '" + std::string(name) + "'");
}

void DataConfig::validate() const {
  for (int c : counts) HANDREG_THROW_IF(c < 0, ErrorCode::InvalidConfig, "negative record count");
  HANDREG_THROW_IF(crop_size < 8 || crop_size % 8 != 0, ErrorCode::InvalidConfig,
                   "crop_size must be a positive multiple of 8");
  HANDREG_THROW_IF(!(stereo_fraction >= 0.0 && stereo_fraction <= 1.0), ErrorCode::InvalidConfig,
                   "stereo_fraction must lie in [0, 1]");
  HANDREG_THROW_IF(!(ranges.distance_min_mm > 0.0 && ranges.distance_max_mm > ranges.distance_min_mm),
                   ErrorCode::InvalidConfig, "bad distance range");
  HANDREG_THROW_IF(!(ranges.elevation_max_deg > ranges.elevation_min_deg),
                   ErrorCode::InvalidConfig, "bad elevation range");
  HANDREG_THROW_IF(shard_size <= 0 || max_attempts <= 0 || threads <= 0, ErrorCode::InvalidConfig,
                   "shard_size, max_attempts and threads must be positive");
  HANDREG_THROW_IF(noise < 0.0 || noise > 1.0, ErrorCode::InvalidConfig,
                   "noise must lie in [0, 1]");
}

DataConfig DataConfig::from_key_values(const KeyValues& kv) {
  DataConfig c;
  c.counts[0] = static_cast<int>(kv.get_int("train_count", c.counts[0]));
  c.counts[1] = static_cast<int>(kv.get_int("val_count", c.counts[1]));
  c.counts[2] = static_cast<int>(kv.get_int("test_count", c.counts[2]));
  c.crop_size = static_cast<int>(kv.get_int("crop_size", c.crop_size));
  c.stereo_fraction = kv.get_double("stereo_fraction", c.stereo_fraction);
  c.template_seed = static_cast<std::uint64_t>(kv.get_int("template_seed", 0));
  c.vertex_budget = static_cast<int>(kv.get_int("vertex_budget", c.vertex_budget));
  c.rig.width = static_cast<int>(kv.get_int("rig.width", c.rig.width));
  c.rig.height = static_cast<int>(kv.get_int("rig.height", c.rig.height));
  c.rig.focal = kv.get_double("rig.focal", c.rig.focal);
  c.rig.baseline_mm = kv.get_double("rig.baseline_mm", c.rig.baseline_mm);
  c.rig.yaw_deg = kv.get_double("rig.yaw_deg", c.rig.yaw_deg);
  auto& r = c.ranges;
  r.distance_min_mm = kv.get_double("sample.distance_min_mm", r.distance_min_mm);
  r.distance_max_mm = kv.get_double("sample.distance_max_mm", r.distance_max_mm);
  r.azimuth_max_deg = kv.get_double("sample.azimuth_max_deg", r.azimuth_max_deg);
  r.elevation_min_deg = kv.get_double("sample.elevation_min_deg", r.elevation_min_deg);
  r.elevation_max_deg = kv.get_double("sample.elevation_max_deg", r.elevation_max_deg);
  r.orientation_jitter_rad = kv.get_double("sample.orientation_jitter_rad", r.orientation_jitter_rad);
  r.shape_sigma = kv.get_double("sample.shape_sigma", r.shape_sigma);
  c.noise = kv.get_double("noise", c.noise);
  c.shard_size = static_cast<int>(kv.get_int("shard_size", c.shard_size));
  c.max_attempts = static_cast<int>(kv.get_int("max_attempts", c.max_attempts));
  c.threads = static_cast<int>(kv.get_int("threads", c.threads));
  c.validate();
  return c;
}

KeyValues DataConfig::to_key_values() const {
  KeyValues kv;
  kv.set("train_count", counts[0]);
  kv.set("val_count", counts[1]);
  kv.set("test_count", counts[2]);
  kv.set("crop_size", crop_size);
  kv.set("stereo_fraction", stereo_fraction);
  kv.set("template_seed", template_seed);
  kv.set("vertex_budget", vertex_budget);
  kv.set("rig.width", rig.width);
  kv.set("rig.height", rig.height);
  kv.set("rig.focal", rig.focal);
  kv.set("rig.baseline_mm", rig.baseline_mm);
  kv.set("rig.yaw_deg", rig.yaw_deg);
  kv.set("sample.distance_min_mm", ranges.distance_min_mm);
  kv.set("sample.distance_max_mm", ranges.distance_max_mm);
  kv.set("sample.azimuth_max_deg", ranges.azimuth_max_deg);
  kv.set("sample.elevation_min_deg", ranges.elevation_min_deg);
  kv.set("sample.elevation_max_deg", ranges.elevation_max_deg);
  kv.set("sample.orientation_jitter_rad", ranges.orientation_jitter_rad);
  kv.set("sample.shape_sigma", ranges.shape_sigma);
  kv.set("noise", noise);
  kv.set("shard_size", shard_size);
  kv.set("max_attempts", max_attempts);
  return kv;
}

bool stereo_slot(std::size_t index, double fraction) {
  return std::floor((index + 1) * fraction) > std::floor(index * fraction);
}

Generator::Generator(const DataConfig& c, std::uint64_t s)
    : config((c.validate(), c)),
      seed(s),
      rig(make_rig(c.rig)),
      hand_template(hand::build_template(c.template_seed, c.vertex_budget)) {}

std::array<bool, 2> Generator::observe(SampleRecord& rec, std::uint64_t noise_seed) const {
  std::array<bool, 2> visible{};
  for (int v = 0; v < 2; ++v) {
    const geometry::FisheyeCamera& cam = v == 0 ? rig.left : rig.right;
    ViewRecord view;
    bool ok = true;
    for (int i = 0; i < hand::kNumKeypoints && ok; ++i) {
      const geometry::Vec3 pc = cam.cam_from_world().apply(rec.keypoints3d.row(i).transpose());
      ok = cam.projectable(pc);
      if (!ok) break;
      const geometry::Vec2 px = cam.project_camera(pc);
      ok = cam.in_image(px);
      view.keypoints2d.row(i) = px.transpose();
    }
    if (ok) {
      auto& t = view.tight_box;
      t.x_min = view.keypoints2d.col(0).minCoeff();
      t.x_max = view.keypoints2d.col(0).maxCoeff();
      t.y_min = view.keypoints2d.col(1).minCoeff();
      t.y_max = view.keypoints2d.col(1).maxCoeff();
      try {
        view.crop_box = geometry::square_crop_box(cam, t);
        view.meta = metadata::compute_metadata(cam, view.crop_box, config.crop_size);
        RenderOptions opt{config.noise, splitmix64(noise_seed + static_cast<std::uint64_t>(v))};
        view.crop = render_crop(cam, view.crop_box, rec.keypoints3d, config.crop_size, opt);
      } catch (const Error&) {
        ok = false;
      }
    }
    view.visible = ok;
    rec.views[v] = ok ? std::move(view) : ViewRecord{};
    visible[v] = ok;
  }
  return visible;
}

SampleRecord Generator::generate(std::uint64_t id, bool stereo, int* attempts) const {
  Rng rng(seed ^ id);
  for (int attempt = 1; attempt <= config.max_attempts; ++attempt) {
    SampleRecord rec;
    rec.id = id;
    rec.stereo = stereo;
    rec.params = sample_hand(rng, hand_template, config.ranges);
    const std::uint64_t noise_seed = rng.bits();
    hand::HandState state = hand::skin(hand_template, rec.params);
    rec.keypoints3d = std::move(state.keypoints3d);
    rec.vertices = std::move(state.vertices);
    const auto vis = observe(rec, noise_seed);
    const bool accept = stereo ? (vis[0] && vis[1]) : (vis[0] != vis[1]);
    if (accept) {
      if (attempts) *attempts = attempt;
      return rec;
    }
  }
  throw Error(ErrorCode::InvalidConfig,
              "record " + std::to_string(id) + ": no " + (stereo ? "stereo" : "mono") +
                  " configuration found in " + std::to_string(config.max_attempts) + " draws");
}

double DatasetManifest::stereo_fraction(Split s) const {
  const auto& sp = splits[static_cast<int>(s)];
  return sp.count == 0 ? 0.0 : static_cast<double>(sp.stereo) / sp.count;
}

KeyValues DatasetManifest::to_key_values() const {
  KeyValues kv;
  const KeyValues cfg = config.to_key_values();
  for (const auto& [k, v] : cfg.entries()) kv.set("config." + k, v);
  kv.set("format", format.substr(0, format.find('\n')));
  kv.set("seed", seed);
  kv.set("resampled", resampled);
  kv.set("num_vertices", num_vertices);
  kv.set("rig", std::string("rig.txt"));
  for (int s = 0; s < 3; ++s) {
    const std::string p = "split." + std::string(kSplitNames[s]) + ".";
    const auto& sp = splits[s];
    kv.set(p + "first_id", sp.first_id);
    kv.set(p + "count", sp.count);
    kv.set(p + "stereo", sp.stereo);
    kv.set(p + "stereo_fraction", stereo_fraction(static_cast<Split>(s)));
    std::string shards;
    for (const auto& name : sp.shards) shards += (shards.empty() ? "" : " ") + name;
    kv.set(p + "shards", shards);
  }
  return kv;
}

DatasetManifest DatasetManifest::from_key_values(const KeyValues& kv) {
  DatasetManifest m;
  m.format = kv.get_string("format") + "\n";
  HANDREG_THROW_IF(m.format != kShardMagic, ErrorCode::Format,
                   "unsupported dataset format '" + kv.get_string("format") + "'");
  KeyValues config;
  for (const auto& [k, v] : kv.entries())
    if (k.rfind("config.", 0) == 0) config.set(k.substr(7), v);
  m.config = DataConfig::from_key_values(config);
  m.seed = kv.get_u64("seed");
  m.resampled = kv.get_int("resampled");
  m.num_vertices = static_cast<int>(kv.get_int("num_vertices"));
  for (int s = 0; s < 3; ++s) {
    const std::string p = "split." + std::string(kSplitNames[s]) + ".";
    auto& sp = m.splits[s];
    sp.first_id = kv.get_u64(p + "first_id");
    sp.count = static_cast<int>(kv.get_int(p + "count"));
    sp.stereo = static_cast<int>(kv.get_int(p + "stereo"));
    std::istringstream names(kv.get_string(p + "shards"));
    for (std::string n; names >> n;) sp.shards.push_back(n);
  }
  return m;
}

void write_shard(std::ostream& os, std::span<const SampleRecord> records, int crop_size,
                 int num_vertices) {
  io::write_bytes(os, kShardMagic);
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(records.size()));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(crop_size));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(num_vertices));
  io::write_le<std::uint32_t>(os, 0);
  const std::vector<std::uint8_t> blank(static_cast<std::size_t>(crop_size * crop_size), 0);
  for (const auto& r : records) {
    HANDREG_THROW_IF(r.vertices.rows() != num_vertices, ErrorCode::DimensionMismatch,
                     "record vertex count differs from the shard header");
    io::write_le(os, r.id);
    const std::uint8_t flags = (r.stereo ? kFlagStereo : 0) |
                               (r.views[0].visible ? kFlagVisibleLeft : 0) |
                               (r.views[1].visible ? kFlagVisibleRight : 0);
    io::write_le(os, flags);
    for (double v : r.params.to_vector()) io::write_le(os, v);
    write_points(os, r.keypoints3d);
    write_points(os, r.vertices);
    for (const auto& view : r.views) {
      write_box(os, view.tight_box);
      write_box(os, view.crop_box);
      for (double v : view.meta.raw) io::write_le(os, v);
      for (Eigen::Index i = 0; i < view.keypoints2d.size(); ++i)
        io::write_le(os, view.keypoints2d.data()[i]);
      const auto& px = view.visible ? view.crop.pixels : blank;
      HANDREG_THROW_IF(px.size() != blank.size(), ErrorCode::DimensionMismatch,
                       "crop size differs from the shard header");
      os.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
    }
  }
  HANDREG_THROW_IF(!os, ErrorCode::Io, "shard write failed");
}

std::vector<SampleRecord> read_shard(std::istream& is) {
  io::expect_magic(is, kShardMagic);
  const auto count = io::read_le<std::uint32_t>(is);
  const int crop_size = static_cast<int>(io::read_le<std::uint32_t>(is));
  const int num_vertices = static_cast<int>(io::read_le<std::uint32_t>(is));
  io::read_le<std::uint32_t>(is);
  std::vector<SampleRecord> out(count);
  for (auto& r : out) {
    r.id = io::read_le<std::uint64_t>(is);
    const auto flags = io::read_le<std::uint8_t>(is);
    r.stereo = flags & kFlagStereo;
    std::array<double, hand::kParamDim> p{};
    for (double& v : p) v = io::read_le<double>(is);
    r.params = hand::HandParams::from_vector(p);
    r.keypoints3d = read_points(is, hand::kNumKeypoints);
    r.vertices = read_points(is, num_vertices);
    for (int v = 0; v < 2; ++v) {
      auto& view = r.views[v];
      view.visible = flags & (v == 0 ? kFlagVisibleLeft : kFlagVisibleRight);
      view.tight_box = read_box(is);
      view.crop_box = read_box(is);
      for (double& x : view.meta.raw) x = io::read_le<double>(is);
      for (Eigen::Index i = 0; i < view.keypoints2d.size(); ++i)
        view.keypoints2d.data()[i] = io::read_le<double>(is);
      std::string px = io::read_bytes(is, static_cast<std::size_t>(crop_size * crop_size));
      if (view.visible) {
        view.crop.size = crop_size;
        view.crop.pixels.assign(px.begin(), px.end());
      }
    }
  }
  return out;
}

DatasetManifest generate_dataset(const DataConfig& config, std::uint64_t seed,
                                 const std::filesystem::path& out_dir) {
  const Generator gen(config, seed);
  std::filesystem::create_directories(out_dir);

  DatasetManifest m;
  m.format = std::string(kShardMagic);
  m.seed = seed;
  m.config = config;
  m.num_vertices = gen.hand_template.num_vertices();

  std::uint64_t next_id = 0;
  for (int s = 0; s < 3; ++s) {
    const int n = config.counts[s];
    auto& sp = m.splits[s];
    sp.first_id = next_id;
    sp.count = n;
    std::vector<SampleRecord> records(static_cast<std::size_t>(n));
    std::vector<int> attempts(static_cast<std::size_t>(n), 0);
    std::atomic<int> cursor{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
      for (int i = cursor++; i < n; i = cursor++) {
        try {
          records[i] = gen.generate(next_id + i, stereo_slot(i, config.stereo_fraction),
                                    &attempts[i]);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          cursor = n;
        }
      }
    };
    const int threads = std::min(config.threads, std::max(1, n));
    if (threads <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    for (int i = 0; i < n; ++i) {
      sp.stereo += records[i].stereo;
      m.resampled += attempts[i] - 1;
    }
    for (int start = 0, index = 0; start < n; start += config.shard_size, ++index) {
      const int len = std::min(config.shard_size, n - start);
      const std::string name = shard_name(static_cast<Split>(s), index);
      std::ofstream os(out_dir / name, std::ios::binary);
      HANDREG_THROW_IF(!os, ErrorCode::Io, "cannot write " + (out_dir / name).string());
      write_shard(os, std::span(records).subspan(start, len), config.crop_size, m.num_vertices);
      sp.shards.push_back(name);
    }
    next_id += n;
  }

  geometry::save_rig(out_dir / "rig.txt", gen.rig);
  std::ofstream os(out_dir / "manifest.txt");
  HANDREG_THROW_IF(!os, ErrorCode::Io, "cannot write manifest");
  os << "# synthetic stereo fisheye hand dataset\n";
  m.to_key_values().write(os);
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& dir) {
  return DatasetManifest::from_key_values(KeyValues::load(dir / "manifest.txt"));
}

std::vector<SampleRecord> load_split(const std::filesystem::path& dir, const DatasetManifest& m,
                                     Split split) {
  std::vector<SampleRecord> out;
  for (const auto& name : m.splits[static_cast<int>(split)].shards) {
    std::ifstream is(dir / name, std::ios::binary);
    HANDREG_THROW_IF(!is, ErrorCode::Io, "cannot open shard " + (dir / name).string());
    auto part = read_shard(is);
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  const auto& sp = m.splits[static_cast<int>(split)];
  HANDREG_THROW_IF(out.size() != static_cast<std::size_t>(sp.count), ErrorCode::Format,
                   "split " + std::string(kSplitNames[static_cast<int>(split)]) + " holds " +
                       std::to_string(out.size()) + " records, manifest says " +
                       std::to_string(sp.count));
  return out;
}

}  // namespace handreg::synth
