#include "hicd/resample.hpp"

#include <algorithm>
#include <cmath>

#include "hicd/error.hpp"

namespace hicd {

std::string_view to_string(Interp interp) {
  switch (interp) {
    case Interp::nearest:
      return "nearest";
    case Interp::bilinear:
      return "bilinear";
    case Interp::bicubic:
      return "bicubic";
  }
  return "unknown";
}

Interp interp_from_string(std::string_view name) {
  if (name == "nearest") return Interp::nearest;
  if (name == "bilinear") return Interp::bilinear;
  if (name == "bicubic") return Interp::bicubic;
  throw ParameterError("unknown interpolation '" + std::string(name) + "'");
}

double cubic_weight(double t) {
  constexpr double a = kBicubicA;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

std::vector<ResampleTaps> make_resample_table(std::size_t in_size, std::size_t out_size, Interp interp) {
  if (in_size == 0 || out_size == 0) throw ParameterError("resample: zero extent");
  std::vector<ResampleTaps> table(out_size);
  const auto last = static_cast<std::ptrdiff_t>(in_size) - 1;
  auto clamp = [last](std::ptrdiff_t i) { return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, last)); };

  if (in_size == out_size) {
    for (std::size_t o = 0; o < out_size; ++o) table[o] = {{o}, {1.0}};
    return table;
  }

  const double ratio = static_cast<double>(in_size) / static_cast<double>(out_size);
  for (std::size_t o = 0; o < out_size; ++o) {
    auto& taps = table[o];
    switch (interp) {
      case Interp::nearest: {
        auto src = static_cast<std::ptrdiff_t>(std::floor(static_cast<double>(o) * ratio));
        taps.index = {clamp(src)};
        taps.weight = {1.0};
        break;
      }
      case Interp::bilinear: {
        const double src = std::max(0.0, (static_cast<double>(o) + 0.5) * ratio - 0.5);
        const auto i0 = static_cast<std::ptrdiff_t>(std::floor(src));
        const double t = src - static_cast<double>(i0);
        taps.index = {clamp(i0), clamp(i0 + 1)};
        taps.weight = {1.0 - t, t};
        break;
      }
      case Interp::bicubic: {
        const double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
        const auto i0 = static_cast<std::ptrdiff_t>(std::floor(src));
        const double t = src - static_cast<double>(i0);
        for (std::ptrdiff_t k = -1; k <= 2; ++k) {
          taps.index.push_back(clamp(i0 + k));
          taps.weight.push_back(cubic_weight(t - static_cast<double>(k)));
        }
        break;
      }
    }
  }
  return table;
}

namespace {

// Separable pass along one spatial axis. `outer` counts independent slabs,
// `inner` is the contiguous stride below the resampled axis.
void resample_axis(std::span<const double> in, std::span<double> out, std::size_t outer, std::size_t in_len,
                   std::size_t out_len, std::size_t inner, const std::vector<ResampleTaps>& table) {
  for (std::size_t s = 0; s < outer; ++s) {
    const double* src = in.data() + s * in_len * inner;
    double* dst = out.data() + s * out_len * inner;
    for (std::size_t o = 0; o < out_len; ++o) {
      double* row = dst + o * inner;
      std::fill(row, row + inner, 0.0);
      const auto& taps = table[o];
      for (std::size_t k = 0; k < taps.index.size(); ++k) {
        const double wgt = taps.weight[k];
        const double* srow = src + taps.index[k] * inner;
        for (std::size_t j = 0; j < inner; ++j) row[j] += wgt * srow[j];
      }
    }
  }
}

void resample_axis_adjoint(std::span<const double> grad_out, std::span<double> grad_in, std::size_t outer,
                           std::size_t in_len, std::size_t out_len, std::size_t inner,
                           const std::vector<ResampleTaps>& table) {
  for (std::size_t s = 0; s < outer; ++s) {
    double* dsrc = grad_in.data() + s * in_len * inner;
    const double* ddst = grad_out.data() + s * out_len * inner;
    for (std::size_t o = 0; o < out_len; ++o) {
      const double* row = ddst + o * inner;
      const auto& taps = table[o];
      for (std::size_t k = 0; k < taps.index.size(); ++k) {
        const double wgt = taps.weight[k];
        double* srow = dsrc + taps.index[k] * inner;
        for (std::size_t j = 0; j < inner; ++j) srow[j] += wgt * row[j];
      }
    }
  }
}

}  // namespace

void resize_hwc(std::span<const double> in, std::size_t batch, std::size_t h, std::size_t w, std::size_t c,
                std::span<double> out, std::size_t out_h, std::size_t out_w, Interp interp) {
  if (in.size() != batch * h * w * c || out.size() != batch * out_h * out_w * c) {
    throw DimensionError("resize: buffer sizes do not match extents");
  }
  const auto rows = make_resample_table(h, out_h, interp);
  const auto cols = make_resample_table(w, out_w, interp);
  // Height first, then width.
  std::vector<double> tmp(batch * out_h * w * c);
  resample_axis(in, tmp, batch, h, out_h, w * c, rows);
  resample_axis(tmp, out, batch * out_h, w, out_w, c, cols);
}

void resize_hwc_adjoint(std::span<const double> grad_out, std::size_t batch, std::size_t h, std::size_t w,
                        std::size_t c, std::span<double> grad_in, std::size_t out_h, std::size_t out_w,
                        Interp interp) {
  if (grad_in.size() != batch * h * w * c || grad_out.size() != batch * out_h * out_w * c) {
    throw DimensionError("resize adjoint: buffer sizes do not match extents");
  }
  const auto rows = make_resample_table(h, out_h, interp);
  const auto cols = make_resample_table(w, out_w, interp);
  std::vector<double> tmp(batch * out_h * w * c, 0.0);
  resample_axis_adjoint(grad_out, tmp, batch * out_h, w, out_w, c, cols);
  resample_axis_adjoint(tmp, grad_in, batch, h, out_h, w * c, rows);
}

std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace hicd
