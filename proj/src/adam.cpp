#include "tsen/adam.hpp"

#include <cmath>

#include "tsen/errors.hpp"

namespace tsen {

void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state,
               const AdamConfig& config, std::span<const std::string> names) {
  if (params.size() != grads.size()) {
    throw ContractError("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                        std::to_string(params.size()) + " parameters");
  }
  if (!(config.learning_rate > 0.0)) throw ContractError("adam_step: learning rate must be positive");
  auto name_of = [&](std::size_t i) { return i < names.size() ? names[i] : "#" + std::to_string(i); };

  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!grads[i].same_shape(*params[i])) {
      throw ShapeError("adam_step: gradient " + grads[i].shape_string() + " for parameter " + name_of(i) + " " +
                       params[i]->shape_string());
    }
    if (!grads[i].all_finite()) throw NumericError("adam_step: non-finite gradient for parameter " + name_of(i));
  }
  if (state.step == 0) {
    state.first_moment.clear();
    state.second_moment.clear();
    for (const Matrix* p : params) {
      state.first_moment.emplace_back(p->rows(), p->cols());
      state.second_moment.emplace_back(p->rows(), p->cols());
    }
  } else if (state.first_moment.size() != params.size()) {
    throw ContractError("adam_step: optimizer state tracks a different parameter list");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(config.beta1, t);
  const double correct2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params[i]->data();
    auto g = grads[i].data();
    auto m = state.first_moment[i].data();
    auto v = state.second_moment[i].data();
    for (std::size_t k = 0; k < theta.size(); ++k) {
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
      const double m_hat = m[k] / correct1;
      const double v_hat = v[k] / correct2;
      theta[k] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

}  // namespace tsen
