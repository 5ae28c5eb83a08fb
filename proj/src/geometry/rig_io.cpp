#include "handreg/geometry/rig_io.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include "handreg/common/error.hpp"

namespace handreg::geometry {

namespace {

void write_camera(std::ostream& os, const std::string& name, const FisheyeCamera& cam) {
  const auto& in = cam.intrinsics();
  os << "camera " << name << "\n";
  os << "fx " << in.fx << "\nfy " << in.fy << "\ncx " << in.cx << "\ncy " << in.cy << "\n";
  for (int i = 0; i < 4; ++i) os << "k" << (i + 1) << " " << in.k[i] << "\n";
  os << "width " << in.width << "\nheight " << in.height << "\n";
  os << "theta_max " << in.theta_max << "\n";
  const auto& t = cam.cam_from_world();
  os << "cam_from_world";
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) os << " " << t.rotation(r, c);
    os << " " << t.translation(r);
  }
  os << "\nend\n";
}

struct CameraBlock {
  std::map<std::string, std::vector<double>> values;
};

double scalar(const CameraBlock& block, const std::string& key, const std::string& cam) {
  const auto it = block.values.find(key);
  HANDREG_THROW_IF(it == block.values.end(), ErrorCode::Format,
                   "camera '" + cam + "' is missing key '" + key + "'");
  HANDREG_THROW_IF(it->second.size() != 1, ErrorCode::Format,
                   "key '" + key + "' expects one value");
  return it->second[0];
}

FisheyeCamera build_camera(const CameraBlock& block, const std::string& name) {
  FisheyeIntrinsics in;
  in.fx = scalar(block, "fx", name);
  in.fy = scalar(block, "fy", name);
  in.cx = scalar(block, "cx", name);
  in.cy = scalar(block, "cy", name);
  for (int i = 0; i < 4; ++i) in.k[i] = scalar(block, "k" + std::to_string(i + 1), name);
  in.width = static_cast<int>(scalar(block, "width", name));
  in.height = static_cast<int>(scalar(block, "height", name));
  if (block.values.count("theta_max")) in.theta_max = scalar(block, "theta_max", name);
  const auto it = block.values.find("cam_from_world");
  HANDREG_THROW_IF(it == block.values.end() || it->second.size() != 12, ErrorCode::Format,
                   "camera '" + name + "' needs 12 cam_from_world values");
  RigidTransform t;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) t.rotation(r, c) = it->second[4 * r + c];
    t.translation(r) = it->second[4 * r + 3];
  }
  return FisheyeCamera(in, t);
}

}  // namespace

void write_rig(std::ostream& os, const StereoRig& rig) {
  const auto flags = os.flags();
  const auto precision = os.precision(17);
  os << kRigMagic << "\n";
  write_camera(os, "left", rig.left);
  write_camera(os, "right", rig.right);
  os.flags(flags);
  os.precision(precision);
}

StereoRig read_rig(std::istream& is) {
  std::string line;
  HANDREG_THROW_IF(!std::getline(is, line), ErrorCode::Format, "empty rig file");
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
  HANDREG_THROW_IF(line != kRigMagic, ErrorCode::Format, "bad rig header '" + line + "'");

  std::map<std::string, CameraBlock> blocks;
  std::optional<std::string> current;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key)) continue;
    if (key == "camera") {
      HANDREG_THROW_IF(current.has_value(), ErrorCode::Format,
                       "line " + std::to_string(line_no) + ": nested camera block");
      std::string name;
      HANDREG_THROW_IF(!(ss >> name), ErrorCode::Format,
                       "line " + std::to_string(line_no) + ": camera needs a name");
      current = name;
      blocks[name];
      continue;
    }
    HANDREG_THROW_IF(!current.has_value(), ErrorCode::Format,
                     "line " + std::to_string(line_no) + ": key outside camera block");
    if (key == "end") {
      current.reset();
      continue;
    }
    std::vector<double> values;
    std::string token;
    while (ss >> token) {
      try {
        size_t used = 0;
        values.push_back(std::stod(token, &used));
        HANDREG_THROW_IF(used != token.size(), ErrorCode::Format, "trailing characters");
      } catch (const std::logic_error&) {
        throw Error(ErrorCode::Format,
                    "line " + std::to_string(line_no) + ": bad number '" + token + "'");
      }
    }
    HANDREG_THROW_IF(values.empty(), ErrorCode::Format,
                     "line " + std::to_string(line_no) + ": key '" + key + "' has no value");
    blocks[*current].values[key] = std::move(values);
  }
  HANDREG_THROW_IF(current.has_value(), ErrorCode::Format, "unterminated camera block");
  HANDREG_THROW_IF(!blocks.count("left") || !blocks.count("right"), ErrorCode::Format,
                   "rig needs cameras 'left' and 'right'");
  return StereoRig{build_camera(blocks.at("left"), "left"),
                   build_camera(blocks.at("right"), "right")};
}

void save_rig(const std::filesystem::path& path, const StereoRig& rig) {
  std::ofstream os(path);
  HANDREG_THROW_IF(!os, ErrorCode::Io, "cannot write " + path.string());
  write_rig(os, rig);
  HANDREG_THROW_IF(!os, ErrorCode::Io, "write failed for " + path.string());
}

StereoRig load_rig(const std::filesystem::path& path) {
  std::ifstream is(path);
  HANDREG_THROW_IF(!is, ErrorCode::Io, "cannot open " + path.string());
  return read_rig(is);
}

}  // namespace handreg::geometry
