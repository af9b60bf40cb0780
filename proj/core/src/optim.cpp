#include "hicd/optim.hpp"

#include <cmath>

#include "hicd/error.hpp"

namespace hicd {

double poly_lr(std::size_t step, std::size_t total, double lr0, double power) {
  if (total == 0) throw ParameterError("poly_lr: total steps must be positive");
  if (step >= total) return 0.0;
  return lr0 * std::pow(1.0 - static_cast<double>(step) / static_cast<double>(total), power);
}

AdamW::AdamW(std::vector<NamedTensor> params, AdamWConfig config) : params_(std::move(params)), config_(config) {
  if (config_.beta1 < 0.0 || config_.beta1 >= 1.0 || config_.beta2 < 0.0 || config_.beta2 >= 1.0) {
    throw ParameterError("adamw: betas must lie in [0, 1)");
  }
  if (config_.eps <= 0.0 || config_.weight_decay < 0.0) throw ParameterError("adamw: eps > 0 and weight_decay >= 0");
  for (const auto& [name, p] : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void AdamW::step(double lr) {
  for (const auto& [name, p] : params_) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) {
      if (!std::isfinite(g)) throw EvaluationError("adamw: non-finite gradient in '" + name + "'");
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  const double decay = 1.0 - lr * config_.weight_decay;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].second;
    if (!p.has_grad()) continue;
    auto w = p.mutable_values();
    for (auto& x : w) x *= decay;
    auto g = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g[j];
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g[j] * g[j];
      w[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + config_.eps);
    }
    p.zero_grad();
  }
}

}  // namespace hicd
