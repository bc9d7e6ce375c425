#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "gap/ndiff/params.hpp"
#include "gap/ndiff/tensor.hpp"

namespace gap::ndiff {

inline constexpr char kWeightsMagic[] = "GAPW";
inline constexpr std::uint32_t kWeightsVersion = 1;

// Layout (all integers little-endian):
//   "GAPW" | u32 version | u32 tensor count |
//   per tensor: u32 name length, UTF-8 name, u32 rank, u64 extents[rank],
//               f64 values[product(extents)]
void write_tensors(const std::filesystem::path& path, const std::map<std::string, Tensor>& tensors);
std::map<std::string, Tensor> read_tensors(const std::filesystem::path& path);

void save_params(const std::filesystem::path& path, const ParamStore& store);
/// Overwrites values of an existing store; names and shapes must match exactly.
void load_params(const std::filesystem::path& path, ParamStore& store);

}  // namespace gap::ndiff
