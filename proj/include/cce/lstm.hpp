#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <type_traits>

#include "cce/ops.hpp"
#include "cce/rng.hpp"
#include "cce/tensor.hpp"

namespace cce::num {

enum class Direction { kForward, kBackward };

// Plain LSTM (no peepholes, uncoupled gates). The four gates are packed
// along the last axis in the order input, forget, candidate, output.
template <typename S>
struct LstmParams {
  Param<S> w_input;  // [input_dim, 4*hidden]
  Param<S> w_recur;  // [hidden, 4*hidden]
  Param<S> bias;     // [4*hidden]

  LstmParams() = default;
  LstmParams(std::size_t input_dim, std::size_t hidden)
      : w_input({input_dim, 4 * hidden}),
        w_recur({hidden, 4 * hidden}),
        bias({4 * hidden}) {}

  std::size_t input_dim() const { return w_input.value.rows(); }
  std::size_t hidden() const { return w_recur.value.rows(); }

  // Xavier-uniform matrices, zero biases except the forget gate at 1.
  void init(Rng& rng) {
    const std::size_t h = hidden();
    xavier_init(w_input.value, rng);
    xavier_init(w_recur.value, rng);
    bias.value.zero();
    for (std::size_t j = 0; j < h; ++j) bias.value[h + j] = S(1);
  }
};

template <typename S>
inline void xavier_init(Tensor<S>& w, Rng& rng) {
  const double fan_in = static_cast<double>(w.rows());
  const double fan_out = static_cast<double>(w.cols());
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  for (std::size_t k = 0; k < w.size(); ++k) {
    w[k] = static_cast<S>(rng.uniform(-a, a));
  }
}

// Activations saved by the forward pass, in processing order (already
// reversed for Direction::kBackward).
template <typename S>
struct LstmCache {
  Tensor<S> inputs;  // [T, d]
  Tensor<S> gates;   // [T, 4h], post-activation
  Tensor<S> cells;   // [T, h]
  Tensor<S> hidden;  // [T, h]
  Tensor<S> h0, c0;  // [h]
};

namespace detail {

template <typename S>
inline Tensor<S> reverse_rows(const Tensor<S>& x) {
  Tensor<S> out(x.shape());
  const std::size_t t = x.rows(), c = x.cols();
  for (std::size_t i = 0; i < t; ++i) {
    const S* src = x.row(i);
    S* dst = out.row(t - 1 - i);
    for (std::size_t j = 0; j < c; ++j) dst[j] = src[j];
  }
  return out;
}

// Recurrence over rows of `inputs` in storage order.
template <typename S>
inline Tensor<S> lstm_run(const Tensor<S>& inputs, const LstmParams<S>& p,
                          const Tensor<S>& h0, const Tensor<S>& c0,
                          LstmCache<S>* cache) {
  const std::size_t t_len = inputs.rows();
  const std::size_t h = p.hidden();
  Tensor<S> outputs({t_len, h});
  if (cache) {
    cache->inputs = inputs;
    cache->gates = Tensor<S>({t_len, 4 * h});
    cache->cells = Tensor<S>({t_len, h});
    cache->h0 = h0;
    cache->c0 = c0;
  }

  std::vector<S> h_prev(h0.values().begin(), h0.values().end());
  std::vector<S> c_prev(c0.values().begin(), c0.values().end());
  std::vector<S> z(4 * h);

  const Tensor<S>& wi = p.w_input.value;
  const Tensor<S>& wr = p.w_recur.value;
  const Tensor<S>& b = p.bias.value;

  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t j = 0; j < 4 * h; ++j) z[j] = b[j];
    const S* x = inputs.row(t);
    for (std::size_t k = 0; k < inputs.cols(); ++k) {
      const S xv = x[k];
      if (xv == S(0)) continue;
      const S* w = wi.row(k);
      for (std::size_t j = 0; j < 4 * h; ++j) z[j] += xv * w[j];
    }
    for (std::size_t k = 0; k < h; ++k) {
      const S hv = h_prev[k];
      if (hv == S(0)) continue;
      const S* w = wr.row(k);
      for (std::size_t j = 0; j < 4 * h; ++j) z[j] += hv * w[j];
    }
    S* out = outputs.row(t);
    S* gates = cache ? cache->gates.row(t) : nullptr;
    bool finite = true;
    for (std::size_t j = 0; j < h; ++j) {
      const S ig = sigmoid(z[j]);
      const S fg = sigmoid(z[h + j]);
      const S gg = std::tanh(z[2 * h + j]);
      const S og = sigmoid(z[3 * h + j]);
      const S c = fg * c_prev[j] + ig * gg;
      const S hv = og * std::tanh(c);
      if (gates) {
        gates[j] = ig;
        gates[h + j] = fg;
        gates[2 * h + j] = gg;
        gates[3 * h + j] = og;
      }
      if (cache) cache->cells(t, j) = c;
      c_prev[j] = c;
      h_prev[j] = hv;
      out[j] = hv;
      finite = finite && std::isfinite(static_cast<double>(hv)) &&
               std::isfinite(static_cast<double>(c));
    }
    if (!finite) {
      throw NumericError("lstm_sequence: non-finite state at step " +
                         std::to_string(t));
    }
  }
  if (cache) cache->hidden = outputs;
  return outputs;
}

}  // namespace detail

// Runs the recurrence over the input rows and returns hidden states aligned
// with the input order. Direction::kBackward processes the reversed input
// and re-reverses its output, so out.row(t) always corresponds to
// inputs.row(t). h0/c0 default to zeros.
template <typename S>
Tensor<S> lstm_sequence(const Tensor<S>& inputs, const LstmParams<S>& p,
                        Direction dir,
                        std::type_identity_t<const Tensor<S>*> h0 = nullptr,
                        std::type_identity_t<const Tensor<S>*> c0 = nullptr,
                        std::type_identity_t<LstmCache<S>*> cache = nullptr) {
  if (inputs.ndim() != 2 || inputs.cols() != p.input_dim()) {
    throw DimensionError("lstm_sequence: inputs " + inputs.shape_str() +
                         " incompatible with weights " +
                         p.w_input.value.shape_str());
  }
  const std::size_t h = p.hidden();
  Tensor<S> h_init = h0 ? *h0 : Tensor<S>({h});
  Tensor<S> c_init = c0 ? *c0 : Tensor<S>({h});
  if (h_init.size() != h || c_init.size() != h) {
    throw DimensionError("lstm_sequence: initial state size mismatch");
  }
  if (dir == Direction::kForward) {
    return detail::lstm_run(inputs, p, h_init, c_init, cache);
  }
  const Tensor<S> rev = detail::reverse_rows(inputs);
  Tensor<S> out = detail::lstm_run(rev, p, h_init, c_init, cache);
  return detail::reverse_rows(out);
}

// BPTT. d_outputs is aligned with the original input order; parameter
// gradients accumulate into p.*.grad and input gradients into *d_inputs
// (also input-ordered) when non-null.
template <typename S>
void lstm_backward(LstmParams<S>& p, Direction dir, const LstmCache<S>& cache,
                   const Tensor<S>& d_outputs, Tensor<S>* d_inputs = nullptr) {
  const std::size_t t_len = cache.inputs.rows();
  const std::size_t h = p.hidden();
  const std::size_t d = p.input_dim();
  const Tensor<S> d_out_proc = dir == Direction::kForward
                                   ? d_outputs
                                   : detail::reverse_rows(d_outputs);

  Tensor<S> dz_all({t_len, 4 * h});
  std::vector<S> dh(h, S(0)), dc(h, S(0));

  for (std::size_t t = t_len; t-- > 0;) {
    const S* gates = cache.gates.row(t);
    const S* d_out = d_out_proc.row(t);
    S* dz = dz_all.row(t);
    const S* c_prev_row = t > 0 ? cache.cells.row(t - 1) : cache.c0.data();
    for (std::size_t j = 0; j < h; ++j) {
      const S ig = gates[j], fg = gates[h + j], gg = gates[2 * h + j],
              og = gates[3 * h + j];
      const S c = cache.cells(t, j);
      const S tc = std::tanh(c);
      const S dhj = dh[j] + d_out[j];
      const S dcj = dc[j] + dhj * og * (S(1) - tc * tc);
      const S dog = dhj * tc;
      const S dig = dcj * gg;
      const S dfg = dcj * c_prev_row[j];
      const S dgg = dcj * ig;
      dz[j] = dig * ig * (S(1) - ig);
      dz[h + j] = dfg * fg * (S(1) - fg);
      dz[2 * h + j] = dgg * (S(1) - gg * gg);
      dz[3 * h + j] = dog * og * (S(1) - og);
      dc[j] = dcj * fg;
      dh[j] = S(0);
    }
    // dh_{t-1} += dz . w_recur^T
    const Tensor<S>& wr = p.w_recur.value;
    for (std::size_t k = 0; k < h; ++k) {
      const S* w = wr.row(k);
      S acc = S(0);
      for (std::size_t j = 0; j < 4 * h; ++j) acc += dz[j] * w[j];
      dh[k] = acc;
    }
  }

  // Batched weight gradients over all steps.
  matmul_tn_acc(cache.inputs, dz_all, p.w_input.grad);
  Tensor<S> h_prev_all({t_len, h});
  for (std::size_t t = 0; t < t_len; ++t) {
    const S* src = t == 0 ? cache.h0.data() : cache.hidden.row(t - 1);
    S* dst = h_prev_all.row(t);
    for (std::size_t j = 0; j < h; ++j) dst[j] = src[j];
  }
  matmul_tn_acc(h_prev_all, dz_all, p.w_recur.grad);
  for (std::size_t t = 0; t < t_len; ++t) {
    const S* dz = dz_all.row(t);
    for (std::size_t j = 0; j < 4 * h; ++j) p.bias.grad[j] += dz[j];
  }

  if (d_inputs) {
    Tensor<S> dx({t_len, d});
    matmul_nt_acc(dz_all, p.w_input.value, dx);
    if (dir == Direction::kBackward) dx = detail::reverse_rows(dx);
    for (std::size_t k = 0; k < dx.size(); ++k) (*d_inputs)[k] += dx[k];
  }
}

}  // namespace cce::num
