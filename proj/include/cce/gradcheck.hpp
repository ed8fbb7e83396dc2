#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <type_traits>

#include "cce/error.hpp"
#include "cce/tensor.hpp"

namespace cce::num {

template <typename S>
struct GradCheckReport {
  S max_rel_error = S(0);
  std::string worst_param;
  std::size_t worst_index = 0;
  S analytic = S(0);
  S numeric = S(0);
};

// Compares analytic gradients against central finite differences.
//
// `loss` must be a pure, deterministic function of the current parameter
// values. `compute_grads` zeroes the grads, runs the backward pass and leaves
// the analytic gradient of `loss` in each Param's .grad. Relative error per
// coordinate is |a-n| / max(|a|,|n|,1e-8); the maximum over all coordinates
// is reported. Run this with S = double; float lacks headroom for h ~ 1e-5.
template <typename S>
GradCheckReport<S> check_gradients(
    const std::type_identity_t<std::function<S()>>& loss,
    const std::function<void()>& compute_grads, const ParamMap<S>& params,
    S step_h) {
  compute_grads();
  std::vector<Tensor<S>> analytic;
  analytic.reserve(params.size());
  for (const auto& [name, p] : params) {
    (void)name;
    analytic.push_back(p->grad);
  }

  GradCheckReport<S> report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor<S>& value = params[pi].second->value;
    for (std::size_t k = 0; k < value.size(); ++k) {
      const S original = value[k];
      value[k] = original + step_h;
      const S plus = loss();
      value[k] = original - step_h;
      const S minus = loss();
      value[k] = original;
      if (!std::isfinite(static_cast<double>(plus)) ||
          !std::isfinite(static_cast<double>(minus))) {
        throw NumericError("check_gradients: non-finite loss at parameter '" +
                           params[pi].first + "'");
      }
      const S numeric = (plus - minus) / (S(2) * step_h);
      const S a = analytic[pi][k];
      const S denom = std::max({std::abs(a), std::abs(numeric), S(1e-8)});
      const S rel = std::abs(a - numeric) / denom;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = params[pi].first;
        report.worst_index = k;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace cce::num
