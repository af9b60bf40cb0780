#include "hicd/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "hicd/error.hpp"

namespace hicd {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_to_string(a) + " and " +
                       shape_to_string(b));
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const std::string& why) {
  throw DimensionError(std::string(op) + ": shape " + shape_to_string(a) + " " + why);
}

// ---------------------------------------------------------------------------
// Broadcasting

struct Broadcast {
  Shape out;
  bool same = false;
  std::vector<std::size_t> a_index;  // empty when a matches out
  std::vector<std::size_t> b_index;  // empty when b matches out
};

std::vector<std::size_t> broadcast_indices(const Shape& src, const Shape& out) {
  const std::size_t rank = out.size();
  Shape padded(rank, 1);
  std::copy(src.begin(), src.end(), padded.begin() + static_cast<std::ptrdiff_t>(rank - src.size()));
  std::vector<std::size_t> stride(rank, 0);
  std::size_t s = 1;
  for (std::size_t i = rank; i-- > 0;) {
    stride[i] = padded[i] == 1 ? 0 : s;
    s *= padded[i];
  }
  const std::size_t n = shape_numel(out);
  std::vector<std::size_t> index(n);
  std::vector<std::size_t> counter(rank, 0);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < n; ++k) {
    index[k] = offset;
    for (std::size_t d = rank; d-- > 0;) {
      ++counter[d];
      offset += stride[d];
      if (counter[d] < out[d]) break;
      offset -= stride[d] * counter[d];
      counter[d] = 0;
    }
  }
  return index;
}

Broadcast broadcast(const char* op, const Shape& a, const Shape& b) {
  Broadcast bc;
  if (a == b) {
    bc.out = a;
    bc.same = true;
    return bc;
  }
  const std::size_t rank = std::max(a.size(), b.size());
  bc.out.assign(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) shape_error(op, a, b);
    bc.out[i] = std::max(da, db);
  }
  if (a != bc.out) bc.a_index = broadcast_indices(a, bc.out);
  if (b != bc.out) bc.b_index = broadcast_indices(b, bc.out);
  return bc;
}

template <class Fwd, class DA, class DB>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, DA da, DB db) {
  auto bc = broadcast(name, a.shape(), b.shape());
  const std::size_t n = shape_numel(bc.out);
  std::vector<double> out(n);
  auto av = a.values();
  auto bv = b.values();
  auto ia = [&bc](std::size_t k) { return bc.a_index.empty() ? k : bc.a_index[k]; };
  auto ib = [&bc](std::size_t k) { return bc.b_index.empty() ? k : bc.b_index[k]; };
  for (std::size_t k = 0; k < n; ++k) out[k] = fwd(av[ia(k)], bv[ib(k)]);

  Shape out_shape = bc.out;
  return Tensor::from_op(name, std::move(out_shape), std::move(out), {a, b},
                         [a, b, bc = std::move(bc), da, db](std::span<const double> g, InputGrads& grads) {
                           auto av = a.values();
                           auto bv = b.values();
                           const std::size_t n = g.size();
                           auto ia = [&bc](std::size_t k) { return bc.a_index.empty() ? k : bc.a_index[k]; };
                           auto ib = [&bc](std::size_t k) { return bc.b_index.empty() ? k : bc.b_index[k]; };
                           if (!grads[0].empty()) {
                             for (std::size_t k = 0; k < n; ++k) grads[0][ia(k)] += g[k] * da(av[ia(k)], bv[ib(k)]);
                           }
                           if (!grads[1].empty()) {
                             for (std::size_t k = 0; k < n; ++k) grads[1][ib(k)] += g[k] * db(av[ia(k)], bv[ib(k)]);
                           }
                         });
}

template <class Fwd, class Deriv>
Tensor unary_op(const char* name, const Tensor& a, Fwd fwd, Deriv deriv) {
  auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t k = 0; k < av.size(); ++k) out[k] = fwd(av[k]);
  return Tensor::from_op(name, a.shape(), std::move(out), {a},
                         [a, deriv](std::span<const double> g, InputGrads& grads) {
                           auto av = a.values();
                           for (std::size_t k = 0; k < g.size(); ++k) grads[0][k] += g[k] * deriv(av[k]);
                         });
}

// ---------------------------------------------------------------------------
// Spatial helpers

struct Spatial {
  std::size_t n, h, w, c;
  bool batched;
};

Spatial spatial_of(const char* op, const Tensor& x) {
  const auto& s = x.shape();
  if (s.size() == 4) return {s[0], s[1], s[2], s[3], true};
  if (s.size() == 3) return {1, s[0], s[1], s[2], false};
  shape_error(op, s, "is not [N, H, W, C] or [H, W, C]");
}

Shape spatial_shape(const Spatial& sp, std::size_t h, std::size_t w, std::size_t c) {
  return sp.batched ? Shape{sp.n, h, w, c} : Shape{h, w, c};
}

struct ConvGeom {
  std::size_t n, h, w, c;  // input
  std::size_t kh, kw;
  std::size_t stride, pad;
  std::size_t oh, ow;
  PadMode mode;
  std::size_t col_width() const { return kh * kw * c; }
  std::size_t col_rows() const { return n * oh * ow; }
};

// col is [n*oh*ow, kh*kw*c], row-major.
void im2col(const double* x, const ConvGeom& g, double* col) {
  const auto H = static_cast<std::ptrdiff_t>(g.h);
  const auto W = static_cast<std::ptrdiff_t>(g.w);
  const std::size_t width = g.col_width();
  for (std::size_t n = 0; n < g.n; ++n) {
    const double* img = x + n * g.h * g.w * g.c;
    for (std::size_t oy = 0; oy < g.oh; ++oy) {
      for (std::size_t ox = 0; ox < g.ow; ++ox) {
        double* row = col + ((n * g.oh + oy) * g.ow + ox) * width;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          const bool y_out = iy < 0 || iy >= H;
          if (y_out && g.mode == PadMode::reflect) iy = reflect_index(iy, H);
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            double* dst = row + (ky * g.kw + kx) * g.c;
            auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            const bool x_out = ix < 0 || ix >= W;
            if ((y_out || x_out) && g.mode == PadMode::zeros) {
              std::fill(dst, dst + g.c, 0.0);
              continue;
            }
            if (x_out) ix = reflect_index(ix, W);
            const double* src = img + (static_cast<std::size_t>(iy) * g.w + static_cast<std::size_t>(ix)) * g.c;
            std::copy(src, src + g.c, dst);
          }
        }
      }
    }
  }
}

// Accumulating adjoint of im2col.
void col2im(const double* col, const ConvGeom& g, double* x) {
  const auto H = static_cast<std::ptrdiff_t>(g.h);
  const auto W = static_cast<std::ptrdiff_t>(g.w);
  const std::size_t width = g.col_width();
  for (std::size_t n = 0; n < g.n; ++n) {
    double* img = x + n * g.h * g.w * g.c;
    for (std::size_t oy = 0; oy < g.oh; ++oy) {
      for (std::size_t ox = 0; ox < g.ow; ++ox) {
        const double* row = col + ((n * g.oh + oy) * g.ow + ox) * width;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          const bool y_out = iy < 0 || iy >= H;
          if (y_out && g.mode == PadMode::zeros) continue;
          if (y_out) iy = reflect_index(iy, H);
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            const bool x_out = ix < 0 || ix >= W;
            if (x_out && g.mode == PadMode::zeros) continue;
            if (x_out) ix = reflect_index(ix, W);
            const double* src = row + (ky * g.kw + kx) * g.c;
            double* dst = img + (static_cast<std::size_t>(iy) * g.w + static_cast<std::size_t>(ix)) * g.c;
            for (std::size_t k = 0; k < g.c; ++k) dst[k] += src[k];
          }
        }
      }
    }
  }
}

bool is_pointwise(const ConvGeom& g) { return g.kh == 1 && g.kw == 1 && g.stride == 1 && g.pad == 0; }

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      "div", a, b, [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary_op(
      "add_scalar", a, [s](double x) { return x + s; }, [](double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
  return unary_op(
      "mul_scalar", a, [s](double x) { return x * s; }, [s](double) { return s; });
}

Tensor relu(const Tensor& a) {
  return unary_op(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sqrt(const Tensor& a) {
  return unary_op(
      "sqrt", a, [](double x) { return std::sqrt(x); }, [](double x) { return 0.5 / std::sqrt(x); });
}

Tensor power(const Tensor& a, double exponent) {
  return unary_op(
      "power", a, [exponent](double x) { return std::pow(x, exponent); },
      [exponent](double x) { return exponent * std::pow(x, exponent - 1.0); });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& a) {
  auto av = a.values();
  const double total = std::accumulate(av.begin(), av.end(), 0.0);
  return Tensor::from_op("sum", {1}, {total}, {a}, [](std::span<const double> g, InputGrads& grads) {
    for (auto& v : grads[0]) v += g[0];
  });
}

Tensor sum(const Tensor& a, std::size_t axis, bool keepdim) {
  const auto& s = a.shape();
  if (axis >= s.size()) shape_error("sum", s, "has no axis " + std::to_string(axis));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  auto av = a.values();
  std::vector<double> out(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t l = 0; l < len; ++l)
      for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += av[(o * len + l) * inner + i];

  Shape out_shape;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i == axis) {
      if (keepdim) out_shape.push_back(1);
    } else {
      out_shape.push_back(s[i]);
    }
  }
  if (out_shape.empty()) out_shape.push_back(1);
  return Tensor::from_op("sum_axis", std::move(out_shape), std::move(out), {a},
                         [outer, inner, len](std::span<const double> g, InputGrads& grads) {
                           for (std::size_t o = 0; o < outer; ++o)
                             for (std::size_t l = 0; l < len; ++l)
                               for (std::size_t i = 0; i < inner; ++i)
                                 grads[0][(o * len + l) * inner + i] += g[o * inner + i];
                         });
}

Tensor mean(const Tensor& a) { return mul_scalar(sum(a), 1.0 / static_cast<double>(a.numel())); }

// ---------------------------------------------------------------------------
// Shape manipulation

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) shape_error("reshape", a.shape(), "cannot become " + shape_to_string(shape));
  auto av = a.values();
  return Tensor::from_op("reshape", std::move(shape), std::vector<double>(av.begin(), av.end()), {a},
                         [](std::span<const double> g, InputGrads& grads) {
                           for (std::size_t k = 0; k < g.size(); ++k) grads[0][k] += g[k];
                         });
}

Tensor transpose2d(const Tensor& a) {
  if (a.rank() != 2) shape_error("transpose2d", a.shape(), "is not a matrix");
  const std::size_t r = a.dim(0), c = a.dim(1);
  auto av = a.values();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  return Tensor::from_op("transpose2d", {c, r}, std::move(out), {a},
                         [r, c](std::span<const double> g, InputGrads& grads) {
                           for (std::size_t i = 0; i < r; ++i)
                             for (std::size_t j = 0; j < c; ++j) grads[0][i * c + j] += g[j * r + i];
                         });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ParameterError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) shape_error("concat", first, "has no axis " + std::to_string(axis));
  std::vector<std::size_t> lens;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    if (s.size() != first.size()) shape_error("concat", first, s);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) shape_error("concat", first, s);
    }
    lens.push_back(s[axis]);
    total += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  Shape out_shape = first;
  out_shape[axis] = total;
  std::vector<double> out(shape_numel(out_shape));
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    auto v = parts[p].values();
    const std::size_t chunk = lens[p] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(o * chunk), chunk,
                  out.begin() + static_cast<std::ptrdiff_t>(o * total * inner + offset));
    }
    offset += chunk;
  }
  return Tensor::from_op("concat", std::move(out_shape), std::move(out), parts,
                         [lens, outer, inner, total](std::span<const double> g, InputGrads& grads) {
                           std::size_t offset = 0;
                           for (std::size_t p = 0; p < lens.size(); ++p) {
                             const std::size_t chunk = lens[p] * inner;
                             if (!grads[p].empty()) {
                               for (std::size_t o = 0; o < outer; ++o)
                                 for (std::size_t k = 0; k < chunk; ++k)
                                   grads[p][o * chunk + k] += g[o * total * inner + offset + k];
                             }
                             offset += chunk;
                           }
                         });
}

Tensor select(const Tensor& a, std::size_t index) {
  const auto& s = a.shape();
  if (s.size() < 2) shape_error("select", s, "needs rank >= 2");
  if (index >= s[0]) shape_error("select", s, "has no index " + std::to_string(index));
  Shape out_shape(s.begin() + 1, s.end());
  const std::size_t chunk = shape_numel(out_shape);
  auto v = a.values();
  std::vector<double> out(v.begin() + static_cast<std::ptrdiff_t>(index * chunk),
                          v.begin() + static_cast<std::ptrdiff_t>((index + 1) * chunk));
  return Tensor::from_op("select", std::move(out_shape), std::move(out), {a},
                         [index, chunk](std::span<const double> g, InputGrads& grads) {
                           for (std::size_t k = 0; k < chunk; ++k) grads[0][index * chunk + k] += g[k];
                         });
}

Tensor stack(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ParameterError("stack: no inputs");
  std::vector<Tensor> expanded;
  expanded.reserve(parts.size());
  for (const auto& p : parts) {
    if (p.shape() != parts.front().shape()) shape_error("stack", parts.front().shape(), p.shape());
    Shape s = p.shape();
    s.insert(s.begin(), 1);
    expanded.push_back(reshape(p, std::move(s)));
  }
  return concat(expanded, 0);
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) shape_error("matmul", a.shape(), b.shape());
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n);
  MutMap(out.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n)).noalias() =
      ConstMap(a.values().data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) *
      ConstMap(b.values().data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
  return Tensor::from_op("matmul", {m, n}, std::move(out), {a, b},
                         [a, b, m, k, n](std::span<const double> g, InputGrads& grads) {
                           const auto M = static_cast<Eigen::Index>(m);
                           const auto K = static_cast<Eigen::Index>(k);
                           const auto N = static_cast<Eigen::Index>(n);
                           ConstMap G(g.data(), M, N);
                           if (!grads[0].empty()) {
                             MutMap(grads[0].data(), M, K).noalias() += G * ConstMap(b.values().data(), K, N).transpose();
                           }
                           if (!grads[1].empty()) {
                             MutMap(grads[1].data(), K, N).noalias() += ConstMap(a.values().data(), M, K).transpose() * G;
                           }
                         });
}

// ---------------------------------------------------------------------------
// Convolutions

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Conv2dOptions& options) {
  const auto sp = spatial_of("conv2d", input);
  const auto& ks = kernel.shape();
  if (ks.size() != 4 || ks[2] != sp.c) shape_error("conv2d", input.shape(), ks);
  if (options.stride == 0) throw ParameterError("conv2d: stride must be positive");
  const std::size_t kh = ks[0], kw = ks[1], cout = ks[3];
  if (sp.h + 2 * options.padding < kh || sp.w + 2 * options.padding < kw) shape_error("conv2d", input.shape(), ks);
  ConvGeom g{sp.n, sp.h, sp.w, sp.c, kh, kw, options.stride, options.padding, 0, 0, options.pad_mode};
  g.oh = (sp.h + 2 * options.padding - kh) / options.stride + 1;
  g.ow = (sp.w + 2 * options.padding - kw) / options.stride + 1;

  const auto rows = static_cast<Eigen::Index>(g.col_rows());
  const auto width = static_cast<Eigen::Index>(g.col_width());
  const auto C = static_cast<Eigen::Index>(cout);
  const bool pointwise = is_pointwise(g);
  std::vector<double> col;
  if (!pointwise) {
    col.resize(g.col_rows() * g.col_width());
    im2col(input.values().data(), g, col.data());
  }
  const double* col_ptr = pointwise ? input.values().data() : col.data();
  std::vector<double> out(g.col_rows() * cout);
  MutMap(out.data(), rows, C).noalias() = ConstMap(col_ptr, rows, width) * ConstMap(kernel.values().data(), width, C);

  auto out_shape = spatial_shape(sp, g.oh, g.ow, cout);
  return Tensor::from_op(
      "conv2d", std::move(out_shape), std::move(out), {input, kernel},
      [input, kernel, g, col = std::move(col), pointwise, rows, width, C](std::span<const double> grad,
                                                                          InputGrads& grads) {
        ConstMap G(grad.data(), rows, C);
        const double* col_ptr = pointwise ? input.values().data() : col.data();
        if (!grads[1].empty()) {
          MutMap(grads[1].data(), width, C).noalias() += ConstMap(col_ptr, rows, width).transpose() * G;
        }
        if (!grads[0].empty()) {
          ConstMap K(kernel.values().data(), width, C);
          if (pointwise) {
            MutMap(grads[0].data(), rows, width).noalias() += G * K.transpose();
          } else {
            RowMat dcol = G * K.transpose();
            col2im(dcol.data(), g, grads[0].data());
          }
        }
      });
}

Tensor transposed_conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding) {
  const auto sp = spatial_of("transposed_conv2d", input);
  const auto& ks = kernel.shape();
  if (ks.size() != 4 || ks[3] != sp.c) shape_error("transposed_conv2d", input.shape(), ks);
  if (stride == 0) throw ParameterError("transposed_conv2d: stride must be positive");
  const std::size_t kh = ks[0], kw = ks[1], cout = ks[2];
  if (stride * (sp.h - 1) + kh <= 2 * padding || stride * (sp.w - 1) + kw <= 2 * padding) {
    shape_error("transposed_conv2d", input.shape(), ks);
  }
  const std::size_t oh = stride * (sp.h - 1) + kh - 2 * padding;
  const std::size_t ow = stride * (sp.w - 1) + kw - 2 * padding;
  // Geometry of the forward conv whose adjoint this is.
  ConvGeom g{sp.n, oh, ow, cout, kh, kw, stride, padding, sp.h, sp.w, PadMode::zeros};

  const auto rows = static_cast<Eigen::Index>(g.col_rows());
  const auto width = static_cast<Eigen::Index>(g.col_width());
  const auto Cin = static_cast<Eigen::Index>(sp.c);
  RowMat cols = ConstMap(input.values().data(), rows, Cin) * ConstMap(kernel.values().data(), width, Cin).transpose();
  std::vector<double> out(sp.n * oh * ow * cout, 0.0);
  col2im(cols.data(), g, out.data());

  auto out_shape = spatial_shape(sp, oh, ow, cout);
  return Tensor::from_op("transposed_conv2d", std::move(out_shape), std::move(out), {input, kernel},
                         [input, kernel, g, rows, width, Cin](std::span<const double> grad, InputGrads& grads) {
                           RowMat dcols(rows, width);
                           im2col(grad.data(), g, dcols.data());
                           if (!grads[0].empty()) {
                             MutMap(grads[0].data(), rows, Cin).noalias() +=
                                 dcols * ConstMap(kernel.values().data(), width, Cin);
                           }
                           if (!grads[1].empty()) {
                             MutMap(grads[1].data(), width, Cin).noalias() +=
                                 dcols.transpose() * ConstMap(input.values().data(), rows, Cin);
                           }
                         });
}

// ---------------------------------------------------------------------------
// Resampling

Tensor resize(const Tensor& input, std::size_t out_h, std::size_t out_w, Interp interp) {
  const auto sp = spatial_of("resize", input);
  if (out_h == 0 || out_w == 0) throw ParameterError("resize: zero output extent");
  std::vector<double> out(sp.n * out_h * out_w * sp.c);
  resize_hwc(input.values(), sp.n, sp.h, sp.w, sp.c, out, out_h, out_w, interp);
  const char* name = interp == Interp::bicubic    ? "upsample_bicubic"
                     : interp == Interp::bilinear ? "upsample_bilinear"
                                                  : "resize_nearest";
  return Tensor::from_op(name, spatial_shape(sp, out_h, out_w, sp.c), std::move(out), {input},
                         [sp, out_h, out_w, interp](std::span<const double> g, InputGrads& grads) {
                           resize_hwc_adjoint(g, sp.n, sp.h, sp.w, sp.c, grads[0], out_h, out_w, interp);
                         });
}

Tensor upsample_bilinear(const Tensor& input, std::size_t out_h, std::size_t out_w) {
  return resize(input, out_h, out_w, Interp::bilinear);
}

Tensor upsample_bicubic(const Tensor& input, std::size_t out_h, std::size_t out_w) {
  return resize(input, out_h, out_w, Interp::bicubic);
}

// ---------------------------------------------------------------------------
// Normalization

namespace {

void check_bn_args(const char* op, const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.rank() < 2) shape_error(op, x.shape(), "needs rank >= 2");
  const std::size_t c = x.shape().back();
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) shape_error(op, x.shape(), gamma.shape());
  if (!(eps > 0.0)) throw ParameterError(std::string(op) + ": eps must be positive");
}

}  // namespace

Tensor batchnorm_lite(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                      BatchNormStats* stats_out) {
  check_bn_args("batchnorm_lite", x, gamma, beta, eps);
  const std::size_t c = x.shape().back();
  const std::size_t m = x.numel() / c;
  auto xv = x.values();
  std::vector<double> mu(c, 0.0), var(c, 0.0);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t j = 0; j < c; ++j) mu[j] += xv[r * c + j];
  for (auto& v : mu) v /= static_cast<double>(m);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t j = 0; j < c; ++j) {
      const double d = xv[r * c + j] - mu[j];
      var[j] += d * d;
    }
  for (auto& v : var) v /= static_cast<double>(m);
  std::vector<double> inv_std(c);
  for (std::size_t j = 0; j < c; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + eps);

  std::vector<double> xhat(x.numel()), out(x.numel());
  auto gv = gamma.values();
  auto bv = beta.values();
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t j = 0; j < c; ++j) {
      const std::size_t k = r * c + j;
      xhat[k] = (xv[k] - mu[j]) * inv_std[j];
      out[k] = gv[j] * xhat[k] + bv[j];
    }
  if (stats_out) *stats_out = {mu, var, m};

  return Tensor::from_op(
      "batchnorm_lite", x.shape(), std::move(out), {x, gamma, beta},
      [gamma, xhat = std::move(xhat), inv_std = std::move(inv_std), m, c](std::span<const double> g,
                                                                          InputGrads& grads) {
        std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t j = 0; j < c; ++j) {
            sum_g[j] += g[r * c + j];
            sum_gx[j] += g[r * c + j] * xhat[r * c + j];
          }
        if (!grads[1].empty())
          for (std::size_t j = 0; j < c; ++j) grads[1][j] += sum_gx[j];
        if (!grads[2].empty())
          for (std::size_t j = 0; j < c; ++j) grads[2][j] += sum_g[j];
        if (!grads[0].empty()) {
          auto gv = gamma.values();
          const double inv_m = 1.0 / static_cast<double>(m);
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t j = 0; j < c; ++j) {
              const std::size_t k = r * c + j;
              grads[0][k] += gv[j] * inv_std[j] * (g[k] - inv_m * sum_g[j] - xhat[k] * inv_m * sum_gx[j]);
            }
        }
      });
}

Tensor batchnorm_lite_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta, std::span<const double> mean,
                           std::span<const double> variance, double eps) {
  check_bn_args("batchnorm_lite_eval", x, gamma, beta, eps);
  const std::size_t c = x.shape().back();
  if (mean.size() != c || variance.size() != c) shape_error("batchnorm_lite_eval", x.shape(), "statistics size mismatch");
  const std::size_t m = x.numel() / c;
  auto xv = x.values();
  auto gv = gamma.values();
  auto bv = beta.values();
  std::vector<double> inv_std(c), mu(mean.begin(), mean.end());
  for (std::size_t j = 0; j < c; ++j) inv_std[j] = 1.0 / std::sqrt(variance[j] + eps);
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t j = 0; j < c; ++j) {
      const std::size_t k = r * c + j;
      out[k] = gv[j] * (xv[k] - mu[j]) * inv_std[j] + bv[j];
    }
  return Tensor::from_op("batchnorm_lite_eval", x.shape(), std::move(out), {x, gamma, beta},
                         [x, gamma, mu = std::move(mu), inv_std = std::move(inv_std), m, c](std::span<const double> g,
                                                                                          InputGrads& grads) {
                           auto xv = x.values();
                           auto gv = gamma.values();
                           for (std::size_t r = 0; r < m; ++r)
                             for (std::size_t j = 0; j < c; ++j) {
                               const std::size_t k = r * c + j;
                               const double xhat = (xv[k] - mu[j]) * inv_std[j];
                               if (!grads[0].empty()) grads[0][k] += g[k] * gv[j] * inv_std[j];
                               if (!grads[1].empty()) grads[1][j] += g[k] * xhat;
                               if (!grads[2].empty()) grads[2][j] += g[k];
                             }
                         });
}

// ---------------------------------------------------------------------------
// Classification

Tensor cross_entropy(const Tensor& logits, std::span<const std::uint8_t> targets) {
  const std::size_t k = logits.shape().back();
  const std::size_t m = logits.numel() / k;
  if (targets.size() != m) {
    shape_error("cross_entropy", logits.shape(), "does not match " + std::to_string(targets.size()) + " targets");
  }
  auto lv = logits.values();
  std::vector<double> probs(logits.numel());
  double total = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    if (targets[r] >= k) throw ParameterError("cross_entropy: target class out of range");
    const double* row = lv.data() + r * k;
    const double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    const double log_z = std::log(z) + mx;
    total += log_z - row[targets[r]];
    for (std::size_t j = 0; j < k; ++j) probs[r * k + j] = std::exp(row[j] - log_z);
  }
  const double loss = total / static_cast<double>(m);
  std::vector<std::uint8_t> labels(targets.begin(), targets.end());
  return Tensor::from_op("cross_entropy", {1}, {loss}, {logits},
                         [probs = std::move(probs), labels = std::move(labels), m, k](std::span<const double> g,
                                                                                      InputGrads& grads) {
                           const double scale = g[0] / static_cast<double>(m);
                           for (std::size_t r = 0; r < m; ++r)
                             for (std::size_t j = 0; j < k; ++j) {
                               const double onehot = labels[r] == j ? 1.0 : 0.0;
                               grads[0][r * k + j] += scale * (probs[r * k + j] - onehot);
                             }
                         });
}

std::vector<std::uint8_t> argmax_last_axis(const Tensor& logits) {
  const std::size_t k = logits.shape().back();
  if (k > std::numeric_limits<std::uint8_t>::max()) throw ParameterError("argmax: too many classes");
  const std::size_t m = logits.numel() / k;
  auto lv = logits.values();
  std::vector<std::uint8_t> out(m);
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = lv.data() + r * k;
    out[r] = static_cast<std::uint8_t>(std::max_element(row, row + k) - row);
  }
  return out;
}

}  // namespace hicd
