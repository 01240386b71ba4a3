#include "tsen/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tsen/errors.hpp"

namespace tsen::ad {

namespace {

double evaluate(const ScalarFunction& f, std::span<const Matrix> params) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const Matrix& p : params) leaves.push_back(tape.leaf(p));
  const Matrix& loss = f(tape, leaves).value();
  if (loss.size() != 1) throw ContractError("grad_check: function is not scalar, got " + loss.shape_string());
  if (!std::isfinite(loss(0, 0))) throw NumericError("grad_check: function value is not finite");
  return loss(0, 0);
}

}  // namespace

std::vector<Matrix> gradient(const ScalarFunction& f, std::span<const Matrix> params) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const Matrix& p : params) leaves.push_back(tape.leaf(p));
  Var loss = f(tape, leaves);
  if (!std::isfinite(loss.value()(0, 0))) throw NumericError("gradient: function value is not finite");
  return tape.backward(loss);
}

GradCheckResult grad_check_detailed(const ScalarFunction& f, std::span<const Matrix> params, double eps) {
  if (!(eps > 0.0)) throw ContractError("grad_check: eps must be positive, got " + std::to_string(eps));
  const std::vector<Matrix> analytic = gradient(f, params);
  std::vector<Matrix> probe(params.begin(), params.end());
  GradCheckResult result;
  for (std::size_t p = 0; p < probe.size(); ++p) {
    auto coords = probe[p].data();
    for (std::size_t i = 0; i < coords.size(); ++i) {
      const double saved = coords[i];
      coords[i] = saved + eps;
      const double up = evaluate(f, probe);
      coords[i] = saved - eps;
      const double down = evaluate(f, probe);
      coords[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double exact = analytic[p].data()[i];
      const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
      const double err = std::abs(exact - numeric) / denom;
      if (err > result.max_relative_error) result = {err, p, i};
    }
  }
  return result;
}

double grad_check(const ScalarFunction& f, std::span<const Matrix> params, double eps) {
  return grad_check_detailed(f, params, eps).max_relative_error;
}

}  // namespace tsen::ad
