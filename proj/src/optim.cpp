#include "divlab/error.hpp"
#include "divlab/netcore.hpp"

#include <cmath>
#include <string>

namespace divlab {

OptState make_opt_state(const OptSettings& settings, std::size_t parameter_count) {
  if (!(settings.learning_rate > 0.0)) throw ContractError("learning rate must be positive");
  OptState s;
  s.settings = settings;
  if (settings.method == OptMethod::adam) {
    s.first_moment.assign(parameter_count, 0.0);
    s.second_moment.assign(parameter_count, 0.0);
  }
  return s;
}

void step(OptState& state, std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size())
    throw ShapeError("optimizer: " + std::to_string(params.size()) + " params vs " +
                     std::to_string(grads.size()) + " grads");
  const OptSettings& cfg = state.settings;
  if (cfg.method == OptMethod::sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= cfg.learning_rate * grads[i];
    ++state.steps;
    return;
  }

  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size())
    throw ShapeError("optimizer: moment buffers do not match parameter count");
  ++state.steps;
  const double t = static_cast<double>(state.steps);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grads[i];
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double m_hat = m / c1;
    const double v_hat = v / c2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

}  // namespace divlab
