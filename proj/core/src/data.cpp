#include "hicd/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>

#include "hicd/error.hpp"

namespace hicd {

void ImagePair::check(std::size_t channels) const {
  if (t1.channels != channels || t2.channels != channels) throw DimensionError("image pair: unexpected channel count");
  if (t1.height != t2.height || t1.width != t2.width || label.height != t1.height || label.width != t1.width) {
    throw DimensionError("image pair: t1 " + std::to_string(t1.height) + "x" + std::to_string(t1.width) + ", t2 " +
                         std::to_string(t2.height) + "x" + std::to_string(t2.width) + ", label " +
                         std::to_string(label.height) + "x" + std::to_string(label.width));
  }
}

void to_json(nlohmann::json& j, const SyntheticSceneSpec& s) {
  j = nlohmann::json{{"canvas", s.canvas},
                     {"background_seed", s.background_seed},
                     {"min_buildings", s.min_buildings},
                     {"max_buildings", s.max_buildings},
                     {"min_building_side", s.min_building_side},
                     {"max_building_side", s.max_building_side},
                     {"change_probability", s.change_probability},
                     {"min_distractors", s.min_distractors},
                     {"max_distractors", s.max_distractors},
                     {"distractor_change_probability", s.distractor_change_probability},
                     {"photometric_jitter", s.photometric_jitter},
                     {"rng_seed", s.rng_seed}};
}

void from_json(const nlohmann::json& j, SyntheticSceneSpec& s) {
  SyntheticSceneSpec d;
  s.canvas = j.value("canvas", d.canvas);
  s.background_seed = j.value("background_seed", d.background_seed);
  s.min_buildings = j.value("min_buildings", d.min_buildings);
  s.max_buildings = j.value("max_buildings", d.max_buildings);
  s.min_building_side = j.value("min_building_side", d.min_building_side);
  s.max_building_side = j.value("max_building_side", d.max_building_side);
  s.change_probability = j.value("change_probability", d.change_probability);
  s.min_distractors = j.value("min_distractors", d.min_distractors);
  s.max_distractors = j.value("max_distractors", d.max_distractors);
  s.distractor_change_probability = j.value("distractor_change_probability", d.distractor_change_probability);
  s.photometric_jitter = j.value("photometric_jitter", d.photometric_jitter);
  s.rng_seed = j.value("rng_seed", d.rng_seed);
}

namespace {

using Rgb = std::array<double, 3>;

struct Rect {
  std::size_t y0, x0, h, w;
  bool overlaps(const Rect& o, std::size_t margin) const {
    return y0 < o.y0 + o.h + margin && o.y0 < y0 + h + margin && x0 < o.x0 + o.w + margin && o.x0 < x0 + w + margin;
  }
};

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
std::size_t uniform_int(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Image make_background(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Rgb base{uniform(rng, 0.30, 0.45), uniform(rng, 0.35, 0.50), uniform(rng, 0.22, 0.35)};
  struct Wave {
    double fy, fx, phase, amp;
    Rgb tint;
  };
  std::vector<Wave> waves(4);
  for (auto& w : waves) {
    w.fy = uniform(rng, -3.0, 3.0) * 2.0 * std::numbers::pi / static_cast<double>(n);
    w.fx = uniform(rng, -3.0, 3.0) * 2.0 * std::numbers::pi / static_cast<double>(n);
    w.phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    w.amp = uniform(rng, 0.02, 0.06);
    w.tint = {uniform(rng, 0.6, 1.0), uniform(rng, 0.6, 1.0), uniform(rng, 0.6, 1.0)};
  }
  Image img(n, n, 3);
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      const double grain = uniform(rng, -0.03, 0.03);
      for (std::size_t c = 0; c < 3; ++c) {
        double v = base[c] + grain;
        for (const auto& w : waves) v += w.amp * w.tint[c] * std::sin(w.fy * y + w.fx * x + w.phase);
        img.at(y, x, c) = v;
      }
    }
  }
  return img;
}

void fill_rect(Image& img, const Rect& r, const Rgb& color, const Rgb& edge) {
  for (std::size_t y = r.y0; y < r.y0 + r.h; ++y) {
    for (std::size_t x = r.x0; x < r.x0 + r.w; ++x) {
      const bool border = y == r.y0 || x == r.x0 || y + 1 == r.y0 + r.h || x + 1 == r.x0 + r.w;
      for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = border ? edge[c] : color[c];
    }
  }
}

void fill_disk(Image& img, double cy, double cx, double radius, const Rgb& color) {
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const double dy = y - cy, dx = x - cx;
      if (dy * dy + dx * dx <= radius * radius) {
        for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = color[c];
      }
    }
  }
}

// Which of the two epochs shows an object.
struct Presence {
  bool t1, t2;
};

Presence draw_presence(std::mt19937_64& rng, double change_probability) {
  if (std::bernoulli_distribution(change_probability)(rng)) {
    const bool first = std::bernoulli_distribution(0.5)(rng);
    return {first, !first};
  }
  return {true, true};
}

}  // namespace

ImagePair generate_synthetic(const SyntheticSceneSpec& spec) {
  const std::size_t n = spec.canvas;
  if (n < 8) throw ParameterError("synthetic: canvas must be at least 8");
  if (spec.min_buildings > spec.max_buildings || spec.min_distractors > spec.max_distractors ||
      spec.min_building_side < 3 || spec.min_building_side > spec.max_building_side || spec.max_building_side > n) {
    throw ParameterError("synthetic: inconsistent object ranges");
  }
  if (spec.change_probability < 0.0 || spec.change_probability > 1.0 || spec.distractor_change_probability < 0.0 ||
      spec.distractor_change_probability > 1.0) {
    throw ParameterError("synthetic: probabilities must lie in [0, 1]");
  }
  std::mt19937_64 rng(spec.rng_seed);
  ImagePair pair;
  pair.t1 = make_background(n, spec.background_seed);
  pair.t2 = pair.t1;
  pair.label = Label(n, n);

  // Distractors first so that buildings occlude them and the label stays exact.
  const std::size_t distractors = uniform_int(rng, spec.min_distractors, spec.max_distractors);
  for (std::size_t i = 0; i < distractors; ++i) {
    const Presence p = draw_presence(rng, spec.distractor_change_probability);
    if (std::bernoulli_distribution(0.5)(rng)) {
      const std::size_t h = uniform_int(rng, 2, 3), w = uniform_int(rng, 4, 6);
      const bool vertical = std::bernoulli_distribution(0.5)(rng);
      Rect r{0, 0, vertical ? w : h, vertical ? h : w};
      r.y0 = uniform_int(rng, 0, n - r.h);
      r.x0 = uniform_int(rng, 0, n - r.w);
      const Rgb color{uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0)};
      if (p.t1) fill_rect(pair.t1, r, color, color);
      if (p.t2) fill_rect(pair.t2, r, color, color);
    } else {
      const double radius = uniform(rng, 2.5, 6.0);
      const double cy = uniform(rng, 0.0, static_cast<double>(n)), cx = uniform(rng, 0.0, static_cast<double>(n));
      const Rgb color{uniform(rng, 0.08, 0.2), uniform(rng, 0.3, 0.5), uniform(rng, 0.08, 0.2)};
      if (p.t1) fill_disk(pair.t1, cy, cx, radius, color);
      if (p.t2) fill_disk(pair.t2, cy, cx, radius, color);
    }
  }

  const std::size_t buildings = uniform_int(rng, spec.min_buildings, spec.max_buildings);
  std::vector<Rect> placed;
  for (std::size_t i = 0; i < buildings; ++i) {
    const Presence p = draw_presence(rng, spec.change_probability);
    const double tone = uniform(rng, 0.6, 0.9);
    const Rgb roof{std::min(1.0, tone + uniform(rng, 0.0, 0.1)), tone, std::max(0.0, tone - uniform(rng, 0.0, 0.1))};
    const Rgb edge{roof[0] - 0.2, roof[1] - 0.2, roof[2] - 0.2};
    for (int attempt = 0; attempt < 100; ++attempt) {
      Rect r{0, 0, uniform_int(rng, spec.min_building_side, spec.max_building_side),
             uniform_int(rng, spec.min_building_side, spec.max_building_side)};
      r.y0 = uniform_int(rng, 0, n - r.h);
      r.x0 = uniform_int(rng, 0, n - r.w);
      if (std::any_of(placed.begin(), placed.end(), [&](const Rect& o) { return r.overlaps(o, 2); })) continue;
      placed.push_back(r);
      if (p.t1) fill_rect(pair.t1, r, roof, edge);
      if (p.t2) fill_rect(pair.t2, r, roof, edge);
      if (p.t1 != p.t2) {
        for (std::size_t y = r.y0; y < r.y0 + r.h; ++y)
          for (std::size_t x = r.x0; x < r.x0 + r.w; ++x) pair.label.at(y, x) = 1;
      }
      break;
    }
  }

  const double j = spec.photometric_jitter;
  for (std::size_t c = 0; c < 3; ++c) {
    const double gain = uniform(rng, 1.0 - j, 1.0 + j), bias = uniform(rng, -0.5 * j, 0.5 * j);
    for (std::size_t k = c; k < pair.t2.pixels.size(); k += 3) pair.t2.pixels[k] = pair.t2.pixels[k] * gain + bias;
  }
  clip_unit(pair.t1);
  clip_unit(pair.t2);
  return pair;
}

std::vector<ImagePair> generate_synthetic_set(const SyntheticSceneSpec& spec, std::size_t count) {
  std::mt19937_64 backgrounds(spec.background_seed);
  std::vector<ImagePair> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SyntheticSceneSpec s = spec;
    s.rng_seed = spec.rng_seed + i;
    s.background_seed = backgrounds();
    out.push_back(generate_synthetic(s));
  }
  return out;
}

namespace {

// Source coordinate for destination (y, x) of an h x w input under `op`.
std::pair<std::size_t, std::size_t> geo_source(GeoOp op, std::size_t y, std::size_t x, std::size_t h, std::size_t w) {
  switch (op) {
    case GeoOp::identity: return {y, x};
    case GeoOp::hflip: return {y, w - 1 - x};
    case GeoOp::vflip: return {h - 1 - y, x};
    case GeoOp::rot90: return {h - 1 - x, y};
    case GeoOp::rot180: return {h - 1 - y, w - 1 - x};
    case GeoOp::rot270: return {x, w - 1 - y};
  }
  return {y, x};
}

bool swaps_axes(GeoOp op) { return op == GeoOp::rot90 || op == GeoOp::rot270; }

Image geo_image(const Image& in, GeoOp op) {
  Image out = swaps_axes(op) ? Image(in.width, in.height, in.channels) : Image(in.height, in.width, in.channels);
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) {
      const auto [sy, sx] = geo_source(op, y, x, in.height, in.width);
      for (std::size_t c = 0; c < in.channels; ++c) out.at(y, x, c) = in.at(sy, sx, c);
    }
  }
  return out;
}

Label geo_label(const Label& in, GeoOp op) {
  Label out = swaps_axes(op) ? Label(in.width, in.height) : Label(in.height, in.width);
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) {
      const auto [sy, sx] = geo_source(op, y, x, in.height, in.width);
      out.at(y, x) = in.at(sy, sx);
    }
  }
  return out;
}

}  // namespace

ImagePair apply_geo(const ImagePair& pair, GeoOp op) {
  if (op == GeoOp::identity) return pair;
  return {geo_image(pair.t1, op), geo_image(pair.t2, op), geo_label(pair.label, op)};
}

GeoOp random_geo(std::mt19937_64& rng) { return static_cast<GeoOp>(std::uniform_int_distribution<int>(0, 5)(rng)); }

ImagePair augment(const ImagePair& pair, std::mt19937_64& rng) { return apply_geo(pair, random_geo(rng)); }

ImagePair crop_pair(const ImagePair& pair, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  pair.check(pair.t1.channels);
  if (y0 + h > pair.t1.height || x0 + w > pair.t1.width) {
    throw ParameterError("crop: window exceeds the " + std::to_string(pair.t1.height) + "x" +
                         std::to_string(pair.t1.width) + " image");
  }
  const std::size_t c = pair.t1.channels;
  ImagePair out{Image(h, w, c), Image(h, w, c), Label(h, w)};
  for (std::size_t y = 0; y < h; ++y) {
    const auto src = ((y0 + y) * pair.t1.width + x0) * c;
    std::copy_n(pair.t1.pixels.begin() + static_cast<std::ptrdiff_t>(src), w * c,
                out.t1.pixels.begin() + static_cast<std::ptrdiff_t>(y * w * c));
    std::copy_n(pair.t2.pixels.begin() + static_cast<std::ptrdiff_t>(src), w * c,
                out.t2.pixels.begin() + static_cast<std::ptrdiff_t>(y * w * c));
    std::copy_n(pair.label.values.begin() + static_cast<std::ptrdiff_t>((y0 + y) * pair.label.width + x0), w,
                out.label.values.begin() + static_cast<std::ptrdiff_t>(y * w));
  }
  return out;
}

std::vector<ImagePair> crop_batch(const std::vector<ImagePair>& entries, std::size_t crop, std::size_t batch,
                                  std::mt19937_64& rng) {
  if (entries.empty()) throw ParameterError("crop_batch: no entries");
  std::vector<ImagePair> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    const ImagePair& e = entries[uniform_int(rng, 0, entries.size() - 1)];
    if (crop > e.t1.height || crop > e.t1.width) throw ParameterError("crop_batch: crop exceeds image extents");
    const std::size_t y = uniform_int(rng, 0, e.t1.height - crop);
    const std::size_t x = uniform_int(rng, 0, e.t1.width - crop);
    out.push_back(crop_pair(e, y, x, crop, crop));
  }
  return out;
}

Batch stack_batch(const std::vector<ImagePair>& pairs) {
  if (pairs.empty()) throw ParameterError("stack_batch: empty batch");
  const auto& first = pairs.front();
  const std::size_t h = first.t1.height, w = first.t1.width, c = first.t1.channels;
  std::vector<double> v1, v2;
  v1.reserve(pairs.size() * h * w * c);
  v2.reserve(pairs.size() * h * w * c);
  Batch b;
  for (const auto& p : pairs) {
    p.check(c);
    if (p.t1.height != h || p.t1.width != w) throw DimensionError("stack_batch: pairs differ in extents");
    v1.insert(v1.end(), p.t1.pixels.begin(), p.t1.pixels.end());
    v2.insert(v2.end(), p.t2.pixels.begin(), p.t2.pixels.end());
    b.labels.insert(b.labels.end(), p.label.values.begin(), p.label.values.end());
  }
  b.t1 = Tensor({pairs.size(), h, w, c}, std::move(v1));
  b.t2 = Tensor({pairs.size(), h, w, c}, std::move(v2));
  return b;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("manifest: cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("manifest: " + path.string() + ": " + e.what());
  }
  DatasetManifest m;
  try {
    m.root = j.value("root", std::string("."));
    m.split = j.value("split", std::string("train"));
    for (const auto& e : j.at("entries")) {
      m.entries.push_back({e.at("t1").get<std::string>(), e.at("t2").get<std::string>(),
                           e.at("label").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("manifest: " + path.string() + ": " + e.what());
  }
  if (m.root.is_relative()) m.root = path.parent_path() / m.root;
  return m;
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : manifest.entries) entries.push_back({{"t1", e.t1}, {"t2", e.t2}, {"label", e.label}});
  const nlohmann::json j{{"root", manifest.root.string()}, {"split", manifest.split}, {"entries", entries}};
  std::ofstream out(path);
  if (!out) throw IoError("manifest: cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<ImagePair> load_pairs(const DatasetManifest& manifest) {
  std::vector<ImagePair> pairs;
  pairs.reserve(manifest.entries.size());
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    try {
      ImagePair p{read_png(manifest.root / e.t1), read_png(manifest.root / e.t2),
                  read_label_png(manifest.root / e.label)};
      p.check();
      pairs.push_back(std::move(p));
    } catch (const Error& err) {
      throw IoError("manifest entry " + std::to_string(i) + " (" + e.t1 + "): " + err.what());
    }
  }
  return pairs;
}

DatasetManifest write_dataset(const std::filesystem::path& dir, const std::vector<ImagePair>& pairs,
                              const std::string& split) {
  std::filesystem::create_directories(dir / "t1");
  std::filesystem::create_directories(dir / "t2");
  std::filesystem::create_directories(dir / "label");
  DatasetManifest m;
  m.root = ".";
  m.split = split;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%05zu.png", i);
    ManifestEntry e{std::string("t1/") + name, std::string("t2/") + name, std::string("label/") + name};
    write_png(dir / e.t1, pairs[i].t1);
    write_png(dir / e.t2, pairs[i].t2);
    write_label_png(dir / e.label, pairs[i].label);
    m.entries.push_back(std::move(e));
  }
  save_manifest(dir / "manifest.json", m);
  m.root = dir;
  return m;
}

}  // namespace hicd
