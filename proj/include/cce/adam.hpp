#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "cce/error.hpp"
#include "cce/tensor.hpp"

namespace cce::num {

// Adam with bias correction. Moment slots are laid out in the order of the
// ParamMap handed to the first step and must keep that order afterwards.
template <typename S>
struct AdamState {
  S learning_rate = S(0.001);
  S beta1 = S(0.9);
  S beta2 = S(0.999);
  S epsilon = S(1e-8);
  long step_count = 0;
  std::vector<Tensor<S>> first_moment;
  std::vector<Tensor<S>> second_moment;
};

template <typename S>
void adam_step(const ParamMap<S>& params, AdamState<S>& state) {
  if (state.first_moment.empty()) {
    for (const auto& [name, p] : params) {
      (void)name;
      state.first_moment.emplace_back(p->value.shape());
      state.second_moment.emplace_back(p->value.shape());
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ArgumentError("adam_step: parameter count changed mid-run");
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const S bc1 = static_cast<S>(1.0 - std::pow(static_cast<double>(state.beta1), t));
  const S bc2 = static_cast<S>(1.0 - std::pow(static_cast<double>(state.beta2), t));

  for (std::size_t i = 0; i < params.size(); ++i) {
    Param<S>& p = *params[i].second;
    if (!p.grad.all_finite()) {
      throw NumericError("adam_step: non-finite gradient for parameter '" +
                         params[i].first + "'");
    }
    if (!p.grad.same_shape(p.value)) {
      throw DimensionError("adam_step: gradient shape " + p.grad.shape_str() +
                           " mismatches parameter '" + params[i].first + "' " +
                           p.value.shape_str());
    }
    Tensor<S>& m = state.first_moment[i];
    Tensor<S>& v = state.second_moment[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const S g = p.grad[k];
      m[k] = state.beta1 * m[k] + (S(1) - state.beta1) * g;
      v[k] = state.beta2 * v[k] + (S(1) - state.beta2) * g * g;
      const S m_hat = m[k] / bc1;
      const S v_hat = v[k] / bc2;
      p.value[k] -= state.learning_rate * m_hat /
                    (static_cast<S>(std::sqrt(static_cast<double>(v_hat))) +
                     state.epsilon);
    }
  }
}

template <typename S>
inline void zero_grads(const ParamMap<S>& params) {
  for (const auto& [name, p] : params) {
    (void)name;
    p->zero_grad();
  }
}

}  // namespace cce::num
