#pragma once

#include <cstddef>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <random>
#include <vector>

#include "hicd/image.hpp"
#include "hicd/resample.hpp"

// Synthesis of low-quality images: lq = clip(downsample(hq * k, s) + n).
namespace hicd {

enum class KernelKind { isotropic, anisotropic };

struct BlurKernel {
  KernelKind kind = KernelKind::isotropic;
  std::size_t size = 1;
  double sigma_x = 1.0;
  double sigma_y = 1.0;
  double angle = 0.0;           // radians, rotation of the sigma_x axis
  std::vector<double> weights;  // size x size, row-major, sums to 1
};

/// Normalized Gaussian with covariance R(angle) diag(sx^2, sy^2) R(angle)^T.
/// Isotropic kernels ignore sigma_y and angle.
BlurKernel make_kernel(KernelKind kind, std::size_t size, double sigma_x, double sigma_y = 0.0, double angle = 0.0);

struct DegradationSpec {
  BlurKernel kernel;
  std::size_t scale = 1;
  Interp resample = Interp::bicubic;
  double noise_sigma = 0.0;  // intensity units on [0, 1] images
  std::uint64_t rng_seed = 0;
};

/// Sampling ranges used for training-time degradations.
struct DegradationRanges {
  std::size_t min_kernel = 7;
  std::size_t max_kernel = 21;
  double iso_sigma_min = 0.1;
  double iso_sigma_max = 2.4;
  double aniso_sigma_min = 0.5;
  double aniso_sigma_max = 6.0;
  double max_noise_sigma = 25.0 / 255.0;
};

/// 1x1 delta kernel, scale 1, no noise.
DegradationSpec identity_spec();

DegradationSpec sample_spec(std::mt19937_64& rng, std::size_t scale, const DegradationRanges& ranges = {});

/// Depthwise convolution with reflect (REFLECT_101) borders.
Image blur(const Image& img, const BlurKernel& kernel);

/// blur -> downsample to floor(H/s) x floor(W/s) -> additive Gaussian noise -> clip to [0, 1].
Image degrade(const Image& hq, const DegradationSpec& spec);

/// Bicubic resize to exactly target_h x target_w, clipped to [0, 1].
Image upsample_to(const Image& lq, std::size_t target_h, std::size_t target_w);

std::string_view to_string(KernelKind kind);
KernelKind kernel_kind_from_string(std::string_view name);

void to_json(nlohmann::json& j, const DegradationRanges& r);
void from_json(const nlohmann::json& j, DegradationRanges& r);
void to_json(nlohmann::json& j, const DegradationSpec& spec);
void from_json(const nlohmann::json& j, DegradationSpec& spec);

}  // namespace hicd
