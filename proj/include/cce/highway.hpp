#pragma once

#include <cstddef>

#include "cce/ops.hpp"
#include "cce/tensor.hpp"

namespace cce::num {

// Gated mix y = t (.) g(x W_h + b_h) + (1 - t) (.) x with
// t = sigmoid(x W_t + b_t). Square by construction (d -> d).
template <typename S>
struct HighwayParams {
  Param<S> w_gate;    // [d, d]
  Param<S> b_gate;    // [d]
  Param<S> w_hidden;  // [d, d]
  Param<S> b_hidden;  // [d]

  HighwayParams() = default;
  explicit HighwayParams(std::size_t d)
      : w_gate({d, d}), b_gate({d}), w_hidden({d, d}), b_hidden({d}) {}

  std::size_t dim() const { return b_gate.value.size(); }

  void init(Rng& rng) {
    xavier_init(w_gate.value, rng);
    xavier_init(w_hidden.value, rng);
    b_gate.value.zero();
    b_hidden.value.zero();
  }
};

template <typename S>
struct HighwayCache {
  Tensor<S> x;       // [n, d]
  Tensor<S> gate;    // [n, d], post-sigmoid
  Tensor<S> hidden;  // [n, d], post-activation
};

template <typename S>
Tensor<S> highway(const Tensor<S>& x, const HighwayParams<S>& p,
                  Activation act = Activation::kTanh,
                  HighwayCache<S>* cache = nullptr) {
  if (x.ndim() != 2 || x.cols() != p.dim()) {
    throw DimensionError("highway: input " + x.shape_str() +
                         " incompatible with square transform of dim " +
                         std::to_string(p.dim()));
  }
  Tensor<S> gate = affine(x, p.w_gate.value, p.b_gate.value);
  Tensor<S> hidden = affine(x, p.w_hidden.value, p.b_hidden.value);
  for (std::size_t k = 0; k < gate.size(); ++k) gate[k] = sigmoid(gate[k]);
  for (std::size_t k = 0; k < hidden.size(); ++k)
    hidden[k] = activate(act, hidden[k]);

  Tensor<S> y(x.shape());
  for (std::size_t k = 0; k < y.size(); ++k) {
    y[k] = gate[k] * hidden[k] + (S(1) - gate[k]) * x[k];
  }
  if (cache) {
    cache->x = x;
    cache->gate = std::move(gate);
    cache->hidden = std::move(hidden);
  }
  return y;
}

template <typename S>
void highway_backward(HighwayParams<S>& p, Activation act,
                      const HighwayCache<S>& cache, const Tensor<S>& dy,
                      Tensor<S>* dx = nullptr) {
  const std::size_t n = cache.x.rows(), d = cache.x.cols();
  Tensor<S> dz_gate({n, d});
  Tensor<S> dz_hidden({n, d});
  for (std::size_t k = 0; k < dy.size(); ++k) {
    const S t = cache.gate[k];
    const S h = cache.hidden[k];
    const S dt = dy[k] * (h - cache.x[k]);
    dz_gate[k] = dt * t * (S(1) - t);
    dz_hidden[k] = dy[k] * t * activate_grad_from_output(act, h);
    if (dx) (*dx)[k] += dy[k] * (S(1) - t);
  }
  affine_backward(cache.x, p.w_gate.value, dz_gate, dx, &p.w_gate.grad,
                  &p.b_gate.grad);
  affine_backward(cache.x, p.w_hidden.value, dz_hidden, dx, &p.w_hidden.grad,
                  &p.b_hidden.grad);
}

}  // namespace cce::num
