#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hicd {

enum class Interp { nearest, bilinear, bicubic };

std::string_view to_string(Interp interp);
Interp interp_from_string(std::string_view name);

/// Keys cubic convolution coefficient (same value as OpenCV / PyTorch).
inline constexpr double kBicubicA = -0.75;

/// Cubic convolution weight for offset t.
double cubic_weight(double t);

/// One output coordinate's contributing source indices and weights.
struct ResampleTaps {
  std::vector<std::size_t> index;
  std::vector<double> weight;
};

/// Per-axis interpolation table mapping `in_size` samples to `out_size` with
/// half-pixel centers. Source indices past the border are clamped. Nearest
/// picks floor(dst * in / out). When sizes match every mode is the identity.
std::vector<ResampleTaps> make_resample_table(std::size_t in_size, std::size_t out_size, Interp interp);

/// Resamples an H x W x C row-major buffer (optionally a batch of them) to
/// out_h x out_w. `out` must hold batch * out_h * out_w * c values.
void resize_hwc(std::span<const double> in, std::size_t batch, std::size_t h, std::size_t w, std::size_t c,
                std::span<double> out, std::size_t out_h, std::size_t out_w, Interp interp);

/// Adjoint of resize_hwc: accumulates the transposed map of `grad_out` into `grad_in`.
void resize_hwc_adjoint(std::span<const double> grad_out, std::size_t batch, std::size_t h, std::size_t w,
                        std::size_t c, std::span<double> grad_in, std::size_t out_h, std::size_t out_w,
                        Interp interp);

/// Mirror index into [0, n) without repeating the edge sample (OpenCV REFLECT_101);
/// folds repeatedly when the offset exceeds the extent.
std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n);

}  // namespace hicd
