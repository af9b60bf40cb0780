#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "hicd/resample.hpp"
#include "hicd/tensor.hpp"

namespace hicd {

/// H x W x C image with channel-interleaved values nominally in [0, 1].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
      : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

  double& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
  double at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }
  bool empty() const { return pixels.empty(); }

  Tensor to_tensor() const;
  static Image from_tensor(const Tensor& t);

  friend bool operator==(const Image&, const Image&) = default;
};

/// Binary change map; 1 marks change.
struct Label {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> values;

  Label() = default;
  Label(std::size_t h, std::size_t w, std::uint8_t fill = 0) : height(h), width(w), values(h * w, fill) {}

  std::uint8_t& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
  std::uint8_t at(std::size_t y, std::size_t x) const { return values[y * width + x]; }

  friend bool operator==(const Label&, const Label&) = default;
};

Image resize_image(const Image& img, std::size_t out_h, std::size_t out_w, Interp interp);
void clip_unit(Image& img);

/// 8-bit RGB PNG <-> [0, 1] reals (v / 255 on read, round(v * 255) on write).
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img);
/// Grayscale PNG; pixels > 127 read as change.
Label read_label_png(const std::filesystem::path& path);
void write_label_png(const std::filesystem::path& path, const Label& label);

}  // namespace hicd
