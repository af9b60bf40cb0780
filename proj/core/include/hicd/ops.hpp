#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hicd/resample.hpp"
#include "hicd/tensor.hpp"

// Differentiable primitives. Spatial ops use channels-last layout: a batch is
// [N, H, W, C] and a single map [H, W, C] (treated as N = 1).
namespace hicd {

// Elementwise, with numpy-style broadcasting for the binary forms.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
/// Gradient at exactly 0 is 0.
Tensor relu(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor power(const Tensor& a, double exponent);

// Reductions.
Tensor sum(const Tensor& a);
Tensor sum(const Tensor& a, std::size_t axis, bool keepdim = false);
Tensor mean(const Tensor& a);

// Shape manipulation.
Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose2d(const Tensor& a);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Slice `index` along axis 0, dropping that axis.
Tensor select(const Tensor& a, std::size_t index);
/// Stack equally shaped tensors along a new leading axis.
Tensor stack(const std::vector<Tensor>& parts);

Tensor matmul(const Tensor& a, const Tensor& b);

enum class PadMode { zeros, reflect };

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
  PadMode pad_mode = PadMode::zeros;
};

/// Cross-correlation with kernel layout [kh, kw, in_channels, out_channels].
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Conv2dOptions& options = {});

/// Adjoint of conv2d (zero padding). Kernel layout [kh, kw, out_channels, in_channels];
/// output extent is stride * (H - 1) + kh - 2 * padding.
Tensor transposed_conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding);

/// Spatial resampling with half-pixel centers and clamped borders.
Tensor resize(const Tensor& input, std::size_t out_h, std::size_t out_w, Interp interp);
Tensor upsample_bilinear(const Tensor& input, std::size_t out_h, std::size_t out_w);
Tensor upsample_bicubic(const Tensor& input, std::size_t out_h, std::size_t out_w);

struct BatchNormStats {
  std::vector<double> mean;
  std::vector<double> variance;  // biased
  std::size_t count = 0;         // samples per channel
};

/// Normalizes over every axis but the last using the batch's own statistics.
Tensor batchnorm_lite(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                      BatchNormStats* stats_out = nullptr);
/// Same affine map with fixed (running) statistics.
Tensor batchnorm_lite_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta, std::span<const double> mean,
                           std::span<const double> variance, double eps);

/// Mean softmax cross-entropy over all positions; the class axis is the last one.
Tensor cross_entropy(const Tensor& logits, std::span<const std::uint8_t> targets);

/// Index of the maximum along the last axis (ties resolve to the lower index).
std::vector<std::uint8_t> argmax_last_axis(const Tensor& logits);

}  // namespace hicd
