#pragma once
// Flat binary checkpoint of named arrays.
//
// Layout (little-endian):
//   "direg3d-ckpt v1\n"           16 bytes
//   u32 array count
//   per array:
//     u32 name length, name bytes
//     u32 rank, u64 dims[rank]
//     f64 data[prod(dims)]

#include <filesystem>
#include <string>
#include <vector>

#include "handreg/autodiff/tensor.hpp"

namespace handreg::ad {

inline constexpr std::string_view kCheckpointMagic = "direg3d-ckpt v1\n";

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> load_checkpoint(const std::filesystem::path& path);

/// Finds an array by name; throws Format if absent.
const NamedArray& find_array(const std::vector<NamedArray>& arrays, std::string_view name);

}  // namespace handreg::ad
