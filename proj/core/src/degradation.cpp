#include "hicd/degradation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "hicd/error.hpp"

namespace hicd {

std::string_view to_string(KernelKind kind) { return kind == KernelKind::isotropic ? "isotropic" : "anisotropic"; }

KernelKind kernel_kind_from_string(std::string_view name) {
  if (name == "isotropic") return KernelKind::isotropic;
  if (name == "anisotropic") return KernelKind::anisotropic;
  throw ParameterError("unknown kernel kind '" + std::string(name) + "'");
}

BlurKernel make_kernel(KernelKind kind, std::size_t size, double sigma_x, double sigma_y, double angle) {
  if (size % 2 == 0) throw ParameterError("make_kernel: size must be odd, got " + std::to_string(size));
  if (kind == KernelKind::isotropic) {
    sigma_y = sigma_x;
    angle = 0.0;
  }
  if (!(sigma_x > 0.0) || !(sigma_y > 0.0)) throw ParameterError("make_kernel: sigmas must be positive");

  BlurKernel k{kind, size, sigma_x, sigma_y, angle, std::vector<double>(size * size)};
  // Inverse covariance of R diag(sx^2, sy^2) R^T.
  const double c = std::cos(angle), s = std::sin(angle);
  const double ix = 1.0 / (sigma_x * sigma_x), iy = 1.0 / (sigma_y * sigma_y);
  const double a = c * c * ix + s * s * iy;
  const double b = c * s * (ix - iy);
  const double d = s * s * ix + c * c * iy;
  const auto half = static_cast<double>(size / 2);
  for (std::size_t r = 0; r < size; ++r) {
    const double y = static_cast<double>(r) - half;
    for (std::size_t col = 0; col < size; ++col) {
      const double x = static_cast<double>(col) - half;
      k.weights[r * size + col] = std::exp(-0.5 * (a * x * x + 2.0 * b * x * y + d * y * y));
    }
  }
  const double total = std::accumulate(k.weights.begin(), k.weights.end(), 0.0);
  for (auto& w : k.weights) w /= total;
  return k;
}

DegradationSpec identity_spec() {
  DegradationSpec spec;
  spec.kernel = make_kernel(KernelKind::isotropic, 1, 1.0);
  return spec;
}

DegradationSpec sample_spec(std::mt19937_64& rng, std::size_t scale, const DegradationRanges& ranges) {
  if (scale == 0) throw ParameterError("sample_spec: scale must be positive");
  std::uniform_int_distribution<int> coin(0, 1);
  const std::size_t n_sizes = (ranges.max_kernel - ranges.min_kernel) / 2 + 1;
  std::uniform_int_distribution<std::size_t> size_pick(0, n_sizes - 1);
  std::uniform_int_distribution<int> resample_pick(0, 2);

  const auto kind = coin(rng) == 0 ? KernelKind::isotropic : KernelKind::anisotropic;
  const std::size_t size = ranges.min_kernel + 2 * size_pick(rng);
  DegradationSpec spec;
  if (kind == KernelKind::isotropic) {
    const double sigma = std::uniform_real_distribution<double>(ranges.iso_sigma_min, ranges.iso_sigma_max)(rng);
    spec.kernel = make_kernel(kind, size, sigma);
  } else {
    const double longer = std::uniform_real_distribution<double>(ranges.aniso_sigma_min, ranges.aniso_sigma_max)(rng);
    const double shorter = std::uniform_real_distribution<double>(ranges.iso_sigma_min, longer)(rng);
    const double angle = std::uniform_real_distribution<double>(0.0, std::numbers::pi)(rng);
    spec.kernel = make_kernel(kind, size, longer, shorter, angle);
  }
  spec.scale = scale;
  spec.resample = static_cast<Interp>(resample_pick(rng));
  spec.noise_sigma = std::uniform_real_distribution<double>(0.0, ranges.max_noise_sigma)(rng);
  spec.rng_seed = rng();
  return spec;
}

Image blur(const Image& img, const BlurKernel& kernel) {
  if (kernel.weights.size() != kernel.size * kernel.size) throw ParameterError("blur: malformed kernel");
  Image out(img.height, img.width, img.channels);
  const auto H = static_cast<std::ptrdiff_t>(img.height);
  const auto W = static_cast<std::ptrdiff_t>(img.width);
  const auto half = static_cast<std::ptrdiff_t>(kernel.size / 2);
  const std::size_t C = img.channels;
  for (std::ptrdiff_t y = 0; y < H; ++y) {
    for (std::ptrdiff_t x = 0; x < W; ++x) {
      double* dst = &out.pixels[(static_cast<std::size_t>(y) * img.width + static_cast<std::size_t>(x)) * C];
      for (std::size_t r = 0; r < kernel.size; ++r) {
        const auto sy = static_cast<std::size_t>(reflect_index(y + static_cast<std::ptrdiff_t>(r) - half, H));
        for (std::size_t col = 0; col < kernel.size; ++col) {
          const double w = kernel.weights[r * kernel.size + col];
          const auto sx = static_cast<std::size_t>(reflect_index(x + static_cast<std::ptrdiff_t>(col) - half, W));
          const double* src = &img.pixels[(sy * img.width + sx) * C];
          for (std::size_t c = 0; c < C; ++c) dst[c] += w * src[c];
        }
      }
    }
  }
  return out;
}

Image degrade(const Image& hq, const DegradationSpec& spec) {
  if (spec.scale == 0) throw ParameterError("degrade: scale must be positive");
  if (spec.scale > hq.height || spec.scale > hq.width) {
    throw ParameterError("degrade: scale " + std::to_string(spec.scale) + " exceeds image extent " +
                         std::to_string(hq.height) + "x" + std::to_string(hq.width));
  }
  if (spec.noise_sigma < 0.0) throw ParameterError("degrade: negative noise sigma");
  Image blurred = blur(hq, spec.kernel);
  Image lq = resize_image(blurred, hq.height / spec.scale, hq.width / spec.scale, spec.resample);
  if (spec.noise_sigma > 0.0) {
    std::mt19937_64 rng(spec.rng_seed);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (auto& v : lq.pixels) v += noise(rng);
  }
  clip_unit(lq);
  return lq;
}

Image upsample_to(const Image& lq, std::size_t target_h, std::size_t target_w) {
  if (lq.empty()) throw ParameterError("upsample_to: empty input");
  if (target_h < lq.height || target_w < lq.width) throw ParameterError("upsample_to: target smaller than input");
  Image out = resize_image(lq, target_h, target_w, Interp::bicubic);
  clip_unit(out);
  return out;
}

void to_json(nlohmann::json& j, const DegradationRanges& r) {
  j = nlohmann::json{{"min_kernel", r.min_kernel},         {"max_kernel", r.max_kernel},
                     {"iso_sigma_min", r.iso_sigma_min},   {"iso_sigma_max", r.iso_sigma_max},
                     {"aniso_sigma_min", r.aniso_sigma_min}, {"aniso_sigma_max", r.aniso_sigma_max},
                     {"max_noise_sigma", r.max_noise_sigma}};
}

void from_json(const nlohmann::json& j, DegradationRanges& r) {
  DegradationRanges d;
  r.min_kernel = j.value("min_kernel", d.min_kernel);
  r.max_kernel = j.value("max_kernel", d.max_kernel);
  r.iso_sigma_min = j.value("iso_sigma_min", d.iso_sigma_min);
  r.iso_sigma_max = j.value("iso_sigma_max", d.iso_sigma_max);
  r.aniso_sigma_min = j.value("aniso_sigma_min", d.aniso_sigma_min);
  r.aniso_sigma_max = j.value("aniso_sigma_max", d.aniso_sigma_max);
  r.max_noise_sigma = j.value("max_noise_sigma", d.max_noise_sigma);
  if (r.min_kernel % 2 == 0 || r.max_kernel % 2 == 0 || r.min_kernel > r.max_kernel) {
    throw ConfigError("degradation ranges: kernel sizes must be odd and ordered");
  }
  if (!(r.iso_sigma_min > 0.0 && r.iso_sigma_min < r.iso_sigma_max && r.aniso_sigma_min > 0.0 &&
        r.aniso_sigma_min < r.aniso_sigma_max && r.max_noise_sigma >= 0.0)) {
    throw ConfigError("degradation ranges: sigma bounds must be positive and ordered");
  }
}

void to_json(nlohmann::json& j, const DegradationSpec& spec) {
  j = nlohmann::json{{"kernel",
                      {{"kind", to_string(spec.kernel.kind)},
                       {"size", spec.kernel.size},
                       {"sigma_x", spec.kernel.sigma_x},
                       {"sigma_y", spec.kernel.sigma_y},
                       {"angle", spec.kernel.angle}}},
                     {"scale", spec.scale},
                     {"resample", to_string(spec.resample)},
                     {"noise_sigma", spec.noise_sigma},
                     {"rng_seed", spec.rng_seed}};
}

void from_json(const nlohmann::json& j, DegradationSpec& spec) {
  const auto& k = j.at("kernel");
  spec.kernel = make_kernel(kernel_kind_from_string(k.at("kind").get<std::string>()), k.at("size").get<std::size_t>(),
                            k.at("sigma_x").get<double>(), k.value("sigma_y", 0.0), k.value("angle", 0.0));
  spec.scale = j.at("scale").get<std::size_t>();
  spec.resample = interp_from_string(j.at("resample").get<std::string>());
  spec.noise_sigma = j.at("noise_sigma").get<double>();
  spec.rng_seed = j.value("rng_seed", std::uint64_t{0});
}

}  // namespace hicd
