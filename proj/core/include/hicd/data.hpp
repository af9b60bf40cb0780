#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <random>
#include <string>
#include <vector>

#include "hicd/image.hpp"
#include "hicd/tensor.hpp"

namespace hicd {

/// Co-registered bi-temporal images and their change label.
struct ImagePair {
  Image t1;
  Image t2;
  Label label;

  /// Throws DimensionError unless all three share extents and the images have `channels` channels.
  void check(std::size_t channels = 3) const;
  friend bool operator==(const ImagePair&, const ImagePair&) = default;
};

struct SyntheticSceneSpec {
  std::size_t canvas = 96;
  std::uint64_t background_seed = 1;
  std::size_t min_buildings = 3;
  std::size_t max_buildings = 6;
  std::size_t min_building_side = 8;
  std::size_t max_building_side = 20;
  double change_probability = 0.5;
  std::size_t min_distractors = 3;
  std::size_t max_distractors = 8;
  double distractor_change_probability = 0.7;
  double photometric_jitter = 0.05;
  std::uint64_t rng_seed = 0;
};

void to_json(nlohmann::json& j, const SyntheticSceneSpec& s);
void from_json(const nlohmann::json& j, SyntheticSceneSpec& s);

/// Textured background, rectangular buildings that may appear or vanish
/// between t1 and t2, and unlabeled distractors (cars, vegetation) that also
/// change. The label is exactly the union of the changed buildings.
ImagePair generate_synthetic(const SyntheticSceneSpec& spec);

/// `count` scenes; scene i uses rng_seed = spec.rng_seed + i and a background
/// seed drawn from spec.background_seed.
std::vector<ImagePair> generate_synthetic_set(const SyntheticSceneSpec& spec, std::size_t count);

enum class GeoOp { identity, hflip, vflip, rot90, rot180, rot270 };

/// The same geometric transform applied to t1, t2 and the label. rot90 turns clockwise.
ImagePair apply_geo(const ImagePair& pair, GeoOp op);
GeoOp random_geo(std::mt19937_64& rng);
ImagePair augment(const ImagePair& pair, std::mt19937_64& rng);

ImagePair crop_pair(const ImagePair& pair, std::size_t y, std::size_t x, std::size_t h, std::size_t w);

/// `batch` aligned square crops of side `crop`, each from a uniformly chosen entry.
std::vector<ImagePair> crop_batch(const std::vector<ImagePair>& entries, std::size_t crop, std::size_t batch,
                                  std::mt19937_64& rng);

/// Stacked [N, H, W, C] tensors and a flat label vector.
struct Batch {
  Tensor t1;
  Tensor t2;
  std::vector<std::uint8_t> labels;
};

Batch stack_batch(const std::vector<ImagePair>& pairs);

struct ManifestEntry {
  std::string t1, t2, label;  // relative to the manifest root
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::string split = "train";
  std::vector<ManifestEntry> entries;
};

/// Relative roots resolve against the manifest's own directory.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Decodes every entry; throws IoError naming the entry on missing or corrupt files.
std::vector<ImagePair> load_pairs(const DatasetManifest& manifest);

/// Writes PNG triplets under `dir` and a manifest.json next to them.
DatasetManifest write_dataset(const std::filesystem::path& dir, const std::vector<ImagePair>& pairs,
                              const std::string& split);

}  // namespace hicd
