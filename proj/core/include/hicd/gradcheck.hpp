#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "hicd/tensor.hpp"

namespace hicd {

struct GradcheckOptions {
  double step = 1e-5;
  double tol = 1e-4;
  /// Elements whose absolute error is below abs_floor * max(1, |f(x)|) pass
  /// regardless of relative error (both gradients numerically zero).
  double abs_floor = 1e-9;
  /// When the one-sided quotients disagree, they are recomputed at step / 10.
  /// If the gap keeps more than this fraction of its size the element sits on
  /// a kink and is excluded, not failed; otherwise the smaller step is used.
  double kink_threshold = 0.5;
  /// 0 checks every element; otherwise a seeded random subset per leaf.
  std::size_t max_elements_per_leaf = 0;
  std::uint64_t seed = 0;
};

struct GradcheckEntry {
  std::size_t leaf = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool excluded = false;
  bool passed = true;
};

struct GradcheckReport {
  bool passed = true;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t excluded = 0;
  std::size_t failed = 0;
  std::vector<GradcheckEntry> entries;
};

/// Compares reverse-mode gradients of a scalar function against central
/// differences. `leaves` are perturbed in place and restored afterwards.
GradcheckReport gradcheck(const std::function<Tensor()>& f, const std::vector<Tensor>& leaves,
                          const GradcheckOptions& options = {});

/// Single-input form: f is evaluated on fresh leaves built from x's values.
GradcheckReport gradcheck(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double step, double tol);

}  // namespace hicd
