#include "hicd/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "hicd/error.hpp"

namespace hicd {

Tensor Image::to_tensor() const { return Tensor({height, width, channels}, pixels); }

Image Image::from_tensor(const Tensor& t) {
  if (t.rank() != 3) throw DimensionError("image: expected [H, W, C] tensor, got " + shape_to_string(t.shape()));
  Image img(t.dim(0), t.dim(1), t.dim(2));
  std::copy(t.values().begin(), t.values().end(), img.pixels.begin());
  return img;
}

Image resize_image(const Image& img, std::size_t out_h, std::size_t out_w, Interp interp) {
  Image out(out_h, out_w, img.channels);
  resize_hwc(img.pixels, 1, img.height, img.width, img.channels, out.pixels, out_h, out_w, interp);
  return out;
}

void clip_unit(Image& img) {
  for (auto& v : img.pixels) v = std::clamp(v, 0.0, 1.0);
}

namespace {

std::vector<std::uint8_t> read_png_bytes(const std::filesystem::path& path, std::uint32_t format, std::size_t& h,
                                         std::size_t& w) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw IoError("png: cannot read " + path.string() + ": " + image.message);
  }
  image.format = format;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("png: cannot decode " + path.string() + ": " + image.message);
  }
  h = image.height;
  w = image.width;
  return buffer;
}

void write_png_bytes(const std::filesystem::path& path, std::uint32_t format, std::size_t h, std::size_t w,
                     const std::vector<std::uint8_t>& bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = format;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, bytes.data(), 0, nullptr)) {
    throw IoError("png: cannot write " + path.string() + ": " + image.message);
  }
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

Image read_png(const std::filesystem::path& path) {
  std::size_t h = 0, w = 0;
  const auto bytes = read_png_bytes(path, PNG_FORMAT_RGB, h, w);
  Image img(h, w, 3);
  for (std::size_t i = 0; i < bytes.size(); ++i) img.pixels[i] = bytes[i] / 255.0;
  return img;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  if (img.channels != 3 && img.channels != 1) throw ParameterError("png: only 1 or 3 channel images are supported");
  std::vector<std::uint8_t> bytes(img.pixels.size());
  std::transform(img.pixels.begin(), img.pixels.end(), bytes.begin(), to_byte);
  write_png_bytes(path, img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY, img.height, img.width, bytes);
}

Label read_label_png(const std::filesystem::path& path) {
  std::size_t h = 0, w = 0;
  const auto bytes = read_png_bytes(path, PNG_FORMAT_GRAY, h, w);
  Label label(h, w);
  for (std::size_t i = 0; i < bytes.size(); ++i) label.values[i] = bytes[i] > 127 ? 1 : 0;
  return label;
}

void write_label_png(const std::filesystem::path& path, const Label& label) {
  std::vector<std::uint8_t> bytes(label.values.size());
  std::transform(label.values.begin(), label.values.end(), bytes.begin(),
                 [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 255 : 0); });
  write_png_bytes(path, PNG_FORMAT_GRAY, label.height, label.width, bytes);
}

}  // namespace hicd
