#pragma once

#include <cstddef>

#include "hicd/tensor.hpp"

namespace hicd {

/// Rows whose l2 norm falls below this are divided by (norm + kNormEpsilon).
inline constexpr double kNormEpsilon = 1e-12;

/// h x w x d semantic feature map backed by a rank-3 tensor.
class FeatureMap {
 public:
  explicit FeatureMap(Tensor values);

  std::size_t height() const { return values_.dim(0); }
  std::size_t width() const { return values_.dim(1); }
  std::size_t depth() const { return values_.dim(2); }
  std::size_t pixels() const { return height() * width(); }
  const Tensor& tensor() const { return values_; }

  /// Row-major (w fastest) hw x d view.
  Tensor as_rows() const;

 private:
  Tensor values_;
};

/// Divides every row of an n x d matrix by its l2 norm.
Tensor normalize_rows(const Tensor& m);

/// Pixel cosine similarities within one map: hw x hw.
Tensor cor_self(const FeatureMap& f);

/// Pixel cosine similarities between two equally shaped maps: hw x hw.
Tensor cor_cross(const FeatureMap& f1, const FeatureMap& f2);

/// Cosine similarities of each pixel against K sampled bank rows: hw x K.
/// The bank rows are treated as constants.
Tensor cor_global(const FeatureMap& f, const Tensor& bank_rows);

}  // namespace hicd
