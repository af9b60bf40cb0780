#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hicd/gradcheck.hpp"
#include "hicd/network.hpp"

namespace hicd {

struct NamedGradcheck {
  std::string name;
  GradcheckReport report;
};

/// Smallest network whose feature maps are 2 x 2 x 3 on an 8 x 8 input.
ModelConfig tiny_model_config();

/// Finite-difference checks of every distillation loss on random 2 x 2 x 3
/// features, plus the total loss through a tiny student network.
std::vector<NamedGradcheck> loss_gradchecks(std::uint64_t seed, double tol = 1e-4);

}  // namespace hicd
