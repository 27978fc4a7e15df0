#include "sstl/adam.hpp"

#include <cmath>
#include <string>

#include "sstl/error.hpp"

namespace sstl::models {

void adam_update(std::span<double> params, std::span<const double> grads,
                 AdamState& state, double lr) {
  if (params.size() != grads.size())
    throw InvalidArgument("adam: gradient size " + std::to_string(grads.size()) +
                          " does not match parameter size " +
                          std::to_string(params.size()));
  if (state.m.empty() && state.v.empty() && state.t == 0) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw InvalidArgument("adam: state shape does not match parameters");
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (!std::isfinite(grads[i]))
      throw InvalidArgument("adam: non-finite gradient at index " + std::to_string(i));

  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

}  // namespace sstl::models
