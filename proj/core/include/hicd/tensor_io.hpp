#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "hicd/tensor.hpp"

namespace hicd {

// CDTK binary tensor file, all fields little-endian:
//   "CDTK" | u32 rank | u64 extent[rank] | f64 value[product(extents)]
inline constexpr char kCdtkMagic[4] = {'C', 'D', 'T', 'K'};

void write_u64(std::ostream& os, std::uint64_t v);
std::uint64_t read_u64(std::istream& is);

void write_cdtk(std::ostream& os, const Tensor& tensor);
Tensor read_cdtk(std::istream& is);

void save_cdtk(const std::filesystem::path& path, const Tensor& tensor);
Tensor load_cdtk(const std::filesystem::path& path);

/// Directory of `<name>.cdtk` files.
void save_tensor_map(const std::filesystem::path& dir, const std::map<std::string, Tensor>& tensors);
std::map<std::string, Tensor> load_tensor_map(const std::filesystem::path& dir);

}  // namespace hicd
