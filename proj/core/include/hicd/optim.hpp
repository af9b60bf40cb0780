#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hicd/network.hpp"

namespace hicd {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// lr0 * (1 - step / total)^power; zero at and beyond `total`.
double poly_lr(std::size_t step, std::size_t total, double lr0, double power = 0.9);

/// Decoupled weight decay (p -= lr * wd * p) followed by the bias-corrected Adam step.
class AdamW {
 public:
  AdamW(std::vector<NamedTensor> params, AdamWConfig config = {});

  /// Applies one update from the gradients currently held by the parameters,
  /// then clears them. Parameters without a gradient are left untouched. Throws EvaluationError naming the first non-finite gradient.
  void step(double lr);

  std::uint64_t step_count() const { return t_; }
  const AdamWConfig& config() const { return config_; }
  const std::vector<double>& first_moment(std::size_t i) const { return m_[i]; }
  const std::vector<double>& second_moment(std::size_t i) const { return v_[i]; }

 private:
  std::vector<NamedTensor> params_;
  AdamWConfig config_;
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace hicd
