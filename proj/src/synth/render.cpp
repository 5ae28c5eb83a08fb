#include "handreg/synth/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "handreg/common/error.hpp"
#include "handreg/common/random.hpp"
#include "handreg/hand_model/skeleton.hpp"

namespace handreg::synth {

using geometry::Vec2;
using geometry::Vec3;

namespace {

constexpr int kBoneSubdivisions = 6;
constexpr double kBoneIntensity = 0.6;

struct CropMapping {
  double scale;
  double x0, y0;
  double focal;  // crop pixels per radian near the axis

  Vec2 map(const Vec2& px) const { return {scale * (px.x() - x0), scale * (px.y() - y0)}; }
};

CropMapping crop_mapping(const geometry::FisheyeCamera& cam, const geometry::BoundingBox& box,
                         int crop_size) {
  const auto k = geometry::crop_intrinsics(cam, box, crop_size);
  const double s = k.K(0, 0) / cam.intrinsics().fx;
  return {s, box.x_min, box.y_min, k.K(0, 0)};
}

std::optional<Vec2> project_cam(const geometry::FisheyeCamera& cam, const CropMapping& m,
                                const Vec3& pc) {
  if (!cam.projectable(pc)) return std::nullopt;
  return m.map(cam.project_camera(pc));
}

// Brighter when nearer than the hand's mean distance.
double depth_intensity(double depth, double reference) {
  return std::clamp(0.7 + 1.5 * (reference - depth) / reference, 0.3, 1.0);
}

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

struct Canvas {
  int size;
  std::vector<double> v;

  void splat_max(int x, int y, double value) {
    double& dst = v[static_cast<std::size_t>(y * size + x)];
    dst = std::max(dst, value);
  }
  void window(double cx, double cy, double radius, int& x0, int& x1, int& y0, int& y1) const {
    x0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
    y0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
    x1 = std::min(size - 1, static_cast<int>(std::ceil(cx + radius)));
    y1 = std::min(size - 1, static_cast<int>(std::ceil(cy + radius)));
  }
};

void draw_segment(Canvas& c, const Vec2& a, const Vec2& b, double half_width, double value) {
  int x0, x1, y0, y1;
  const Vec2 mid = 0.5 * (a + b);
  c.window(mid.x(), mid.y(), 0.5 * (b - a).norm() + half_width + 1.0, x0, x1, y0, y1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double d = segment_distance(Vec2(x, y), a, b);
      const double coverage = std::clamp(half_width + 0.5 - d, 0.0, 1.0);
      if (coverage > 0.0) c.splat_max(x, y, value * coverage);
    }
}

void draw_blob(Canvas& c, const Vec2& center, double sigma, double value) {
  int x0, x1, y0, y1;
  c.window(center.x(), center.y(), 3.0 * sigma, x0, x1, y0, y1);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double r2 = (Vec2(x, y) - center).squaredNorm();
      c.splat_max(x, y, value * std::exp(-r2 * inv));
    }
}

}  // namespace

std::optional<Vec2> project_to_crop(const geometry::FisheyeCamera& cam,
                                    const geometry::BoundingBox& box, int crop_size,
                                    const Vec3& world) {
  return project_cam(cam, crop_mapping(cam, box, crop_size), cam.cam_from_world().apply(world));
}

GrayImage render_crop(const geometry::FisheyeCamera& cam, const geometry::BoundingBox& box,
                      const hand::Points& keypoints3d, int crop_size,
                      const RenderOptions& options) {
  HANDREG_THROW_IF(keypoints3d.rows() != hand::kNumKeypoints, ErrorCode::DimensionMismatch,
                   "render_crop expects 21 keypoints");
  const CropMapping m = crop_mapping(cam, box, crop_size);

  std::array<Vec3, hand::kNumKeypoints> pc;
  std::array<std::optional<Vec2>, hand::kNumKeypoints> px;
  double reference = 0.0;
  int projectable = 0;
  bool any_inside = false;
  for (int i = 0; i < hand::kNumKeypoints; ++i) {
    pc[i] = cam.cam_from_world().apply(keypoints3d.row(i).transpose());
    px[i] = project_cam(cam, m, pc[i]);
    if (!px[i]) continue;
    reference += pc[i].norm();
    ++projectable;
    const Vec2& q = *px[i];
    any_inside = any_inside || (q.x() >= -0.5 && q.y() >= -0.5 && q.x() < crop_size - 0.5 &&
                                q.y() < crop_size - 0.5);
  }
  HANDREG_THROW_IF(!any_inside, ErrorCode::EmptyRender, "no keypoint inside the crop");
  reference /= projectable;

  Canvas canvas{crop_size, std::vector<double>(static_cast<std::size_t>(crop_size * crop_size))};
  Rng rng(options.noise_seed);
  for (double& v : canvas.v) v = options.noise * rng.uniform();

  for (const auto& e : hand::kSkeletonEdges) {
    const Vec3 a = pc[e.parent], b = pc[e.child];
    std::optional<Vec2> prev = project_cam(cam, m, a);
    for (int k = 1; k <= kBoneSubdivisions; ++k) {
      const Vec3 p = a + (b - a) * (static_cast<double>(k) / kBoneSubdivisions);
      const std::optional<Vec2> cur = project_cam(cam, m, p);
      if (prev && cur) {
        const Vec3 mid = a + (b - a) * ((k - 0.5) / kBoneSubdivisions);
        const double depth = mid.norm();
        const double half_width = std::max(0.5, kBoneRadiusMm * m.focal / depth);
        draw_segment(canvas, *prev, *cur, half_width,
                     kBoneIntensity * depth_intensity(depth, reference));
      }
      prev = cur;
    }
  }
  for (int i = 0; i < hand::kNumKeypoints; ++i) {
    if (!px[i]) continue;
    const double depth = pc[i].norm();
    draw_blob(canvas, *px[i], std::max(0.5, kBlobRadiusMm * m.focal / depth),
              depth_intensity(depth, reference));
  }

  GrayImage img;
  img.size = crop_size;
  img.pixels.resize(canvas.v.size());
  for (std::size_t i = 0; i < canvas.v.size(); ++i)
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(canvas.v[i], 0.0, 1.0)));
  return img;
}

void write_pgm(std::ostream& os, const GrayImage& image) {
  os << "P5\n";
  for (const auto& c : image.comments) os << "# " << c << '\n';
  os << image.size << ' ' << image.size << "\n255\n";
  os.write(reinterpret_cast<const char*>(image.pixels.data()),
           static_cast<std::streamsize>(image.pixels.size()));
}

GrayImage read_pgm(std::istream& is) {
  GrayImage img;
  auto token = [&]() {
    std::string t;
    while (is) {
      const int c = is.peek();
      if (c == '#') {
        std::string line;
        std::getline(is, line);
        const auto b = line.find_first_not_of("# ");
        img.comments.push_back(b == std::string::npos ? "" : line.substr(b));
      } else if (std::isspace(c)) {
        is.get();
      } else {
        break;
      }
    }
    is >> t;
    return t;
  };
  HANDREG_THROW_IF(token() != "P5", ErrorCode::Format, "only binary PGM (P5) is supported");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw Error(ErrorCode::Format, "malformed PGM header");
  }
  HANDREG_THROW_IF(maxval != 255, ErrorCode::Format, "PGM maxval must be 255");
  HANDREG_THROW_IF(w != h || w <= 0, ErrorCode::Format,
                   "crop must be square, got " + std::to_string(w) + "x" + std::to_string(h));
  is.get();
  img.size = w;
  img.pixels.resize(static_cast<std::size_t>(w * h));
  is.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(w * h));
  HANDREG_THROW_IF(!is, ErrorCode::Format, "truncated PGM data");
  return img;
}

void save_pgm(const std::filesystem::path& path, const GrayImage& image) {
  std::ofstream os(path, std::ios::binary);
  HANDREG_THROW_IF(!os, ErrorCode::Io, "cannot write " + path.string());
  write_pgm(os, image);
}

GrayImage load_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  HANDREG_THROW_IF(!is, ErrorCode::Io, "cannot open " + path.string());
  return read_pgm(is);
}

}  // namespace handreg::synth
