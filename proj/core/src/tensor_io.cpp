#include "hicd/tensor_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "hicd/error.hpp"

namespace hicd {

namespace {

template <class T>
void write_le(std::ostream& os, T v) {
  std::array<unsigned char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <class T>
T read_le(std::istream& is) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) throw IoError("cdtk: truncated stream");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T v;
  std::memcpy(&v, bytes.data(), sizeof(T));
  return v;
}

}  // namespace

void write_u64(std::ostream& os, std::uint64_t v) { write_le(os, v); }
std::uint64_t read_u64(std::istream& is) { return read_le<std::uint64_t>(is); }

void write_cdtk(std::ostream& os, const Tensor& tensor) {
  os.write(kCdtkMagic, 4);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(tensor.rank()));
  for (auto extent : tensor.shape()) write_le<std::uint64_t>(os, extent);
  for (double v : tensor.values()) write_le(os, v);
  if (!os) throw IoError("cdtk: write failed");
}

Tensor read_cdtk(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCdtkMagic, 4) != 0) throw IoError("cdtk: bad magic");
  const auto rank = read_le<std::uint32_t>(is);
  if (rank == 0 || rank > 16) throw IoError("cdtk: unsupported rank " + std::to_string(rank));
  Shape shape(rank);
  for (auto& extent : shape) {
    extent = read_le<std::uint64_t>(is);
    if (extent == 0) throw IoError("cdtk: zero extent");
  }
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = read_le<double>(is);
  return Tensor(std::move(shape), std::move(values));
}

void save_cdtk(const std::filesystem::path& path, const Tensor& tensor) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cdtk: cannot open " + path.string() + " for writing");
  write_cdtk(os, tensor);
}

Tensor load_cdtk(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cdtk: cannot open " + path.string());
  try {
    return read_cdtk(is);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void save_tensor_map(const std::filesystem::path& dir, const std::map<std::string, Tensor>& tensors) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, t] : tensors) save_cdtk(dir / (name + ".cdtk"), t);
}

std::map<std::string, Tensor> load_tensor_map(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("tensor map: " + dir.string() + " is not a directory");
  std::map<std::string, Tensor> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".cdtk") continue;
    out.emplace(entry.path().stem().string(), load_cdtk(entry.path()));
  }
  return out;
}

}  // namespace hicd
