#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tsen/matrix.hpp"

namespace tsen {

struct AdamConfig {
  double learning_rate = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moment accumulators, shaped like the parameters they
/// track. Empty until the first step.
struct AdamState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::size_t step = 0;
};

/// One bias-corrected Adam update, in place:
///   m <- b1 m + (1 - b1) g;  v <- b2 v + (1 - b2) g^2
///   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
/// Throws NumericError naming the parameter when a gradient is not finite.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state,
               const AdamConfig& config, std::span<const std::string> names = {});

}  // namespace tsen
