#include "hicd/correlation.hpp"

#include <cmath>

#include "hicd/error.hpp"
#include "hicd/ops.hpp"

namespace hicd {

FeatureMap::FeatureMap(Tensor values) : values_(std::move(values)) {
  if (values_.rank() != 3) {
    throw DimensionError("feature map: expected [h, w, d], got " + shape_to_string(values_.shape()));
  }
}

Tensor FeatureMap::as_rows() const { return reshape(values_, {pixels(), depth()}); }

Tensor normalize_rows(const Tensor& m) {
  if (m.rank() != 2) throw DimensionError("normalize_rows: expected a matrix, got " + shape_to_string(m.shape()));
  const std::size_t n = m.dim(0), d = m.dim(1);
  auto mv = m.values();
  std::vector<double> norms(n), denom(n), out(m.numel());
  for (std::size_t i = 0; i < n; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < d; ++j) ss += mv[i * d + j] * mv[i * d + j];
    norms[i] = std::sqrt(ss);
    denom[i] = norms[i] < kNormEpsilon ? norms[i] + kNormEpsilon : norms[i];
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = mv[i * d + j] / denom[i];
  }
  return Tensor::from_op("normalize_rows", m.shape(), out, {m},
                         [y = out, norms, denom, n, d](std::span<const double> g, InputGrads& grads) {
                           for (std::size_t i = 0; i < n; ++i) {
                             const double* gi = g.data() + i * d;
                             double* dx = grads[0].data() + i * d;
                             if (norms[i] < kNormEpsilon) {
                               // Guarded rows: denominator treated as constant.
                               for (std::size_t j = 0; j < d; ++j) dx[j] += gi[j] / denom[i];
                               continue;
                             }
                             const double* yi = y.data() + i * d;
                             double dot = 0.0;
                             for (std::size_t j = 0; j < d; ++j) dot += yi[j] * gi[j];
                             for (std::size_t j = 0; j < d; ++j) dx[j] += (gi[j] - yi[j] * dot) / norms[i];
                           }
                         });
}

Tensor cor_self(const FeatureMap& f) {
  const Tensor n = normalize_rows(f.as_rows());
  return matmul(n, transpose2d(n));
}

Tensor cor_cross(const FeatureMap& f1, const FeatureMap& f2) {
  if (f1.tensor().shape() != f2.tensor().shape()) {
    throw DimensionError("cor_cross: incompatible shapes " + shape_to_string(f1.tensor().shape()) + " and " +
                         shape_to_string(f2.tensor().shape()));
  }
  return matmul(normalize_rows(f1.as_rows()), transpose2d(normalize_rows(f2.as_rows())));
}

Tensor cor_global(const FeatureMap& f, const Tensor& bank_rows) {
  if (bank_rows.rank() != 2 || bank_rows.dim(1) != f.depth()) {
    throw DimensionError("cor_global: bank rows " + shape_to_string(bank_rows.shape()) +
                         " do not match feature depth " + std::to_string(f.depth()));
  }
  const Tensor bank = normalize_rows(bank_rows.detach());
  return matmul(normalize_rows(f.as_rows()), transpose2d(bank));
}

}  // namespace hicd
