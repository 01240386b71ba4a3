#pragma once

#include <functional>
#include <span>
#include <vector>

#include "tsen/matrix.hpp"
#include "tsen/tape.hpp"

namespace tsen::ad {

/// Builds a scalar loss on `tape` from leaves bound to the parameters.
using ScalarFunction = std::function<Var(Tape& tape, std::span<const Var> params)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
};

/// Compares reverse-mode gradients against central differences at every
/// coordinate. The per-coordinate error is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradCheckResult grad_check_detailed(const ScalarFunction& f, std::span<const Matrix> params,
                                    double eps = 1e-5);

double grad_check(const ScalarFunction& f, std::span<const Matrix> params, double eps = 1e-5);

/// Evaluates f once and returns the analytic gradient per parameter.
std::vector<Matrix> gradient(const ScalarFunction& f, std::span<const Matrix> params);

}  // namespace tsen::ad
