#include "handreg/autodiff/checkpoint.hpp"

#include <fstream>

#include "handreg/common/binary_io.hpp"
#include "handreg/common/error.hpp"

namespace handreg::ad {

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  HANDREG_THROW_IF(!os, ErrorCode::Io, "cannot write " + path.string());
  io::write_bytes(os, kCheckpointMagic);
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    HANDREG_THROW_IF(numel(a.shape) != a.data.size(), ErrorCode::ShapeMismatch,
                     a.name + ": shape " + shape_str(a.shape) + " does not match data");
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(a.name.size()));
    io::write_bytes(os, a.name);
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(a.shape.size()));
    for (auto d : a.shape) io::write_le<std::uint64_t>(os, d);
    for (double v : a.data) io::write_le<double>(os, v);
  }
  HANDREG_THROW_IF(!os, ErrorCode::Io, "write failed for " + path.string());
}

std::vector<NamedArray> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  HANDREG_THROW_IF(!is, ErrorCode::Io, "cannot open " + path.string());
  io::expect_magic(is, kCheckpointMagic);
  const auto count = io::read_le<std::uint32_t>(is);
  std::vector<NamedArray> arrays;
  arrays.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = io::read_bytes(is, io::read_le<std::uint32_t>(is));
    const auto rank = io::read_le<std::uint32_t>(is);
    HANDREG_THROW_IF(rank > 8, ErrorCode::Format, a.name + ": implausible rank");
    for (std::uint32_t r = 0; r < rank; ++r) a.shape.push_back(io::read_le<std::uint64_t>(is));
    a.data.resize(numel(a.shape));
    for (double& v : a.data) v = io::read_le<double>(is);
    arrays.push_back(std::move(a));
  }
  return arrays;
}

const NamedArray& find_array(const std::vector<NamedArray>& arrays, std::string_view name) {
  for (const auto& a : arrays)
    if (a.name == name) return a;
  throw Error(ErrorCode::Format, "checkpoint has no array '" + std::string(name) + "'");
}

}  // namespace handreg::ad
