#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "cce/error.hpp"
#include "cce/rng.hpp"
#include "cce/tensor.hpp"

namespace cce::num {

enum class Activation { kTanh, kRelu };

template <typename S>
inline S sigmoid(S x) {
  // Stable in both tails.
  if (x >= S(0)) {
    return S(1) / (S(1) + std::exp(-x));
  }
  const S e = std::exp(x);
  return e / (S(1) + e);
}

template <typename S>
inline S activate(Activation act, S x) {
  return act == Activation::kTanh ? std::tanh(x) : std::max(S(0), x);
}

// Derivative expressed through the activation output y = act(x).
template <typename S>
inline S activate_grad_from_output(Activation act, S y) {
  return act == Activation::kTanh ? S(1) - y * y : (y > S(0) ? S(1) : S(0));
}

// c[n,m] += a[n,k] . b[k,m]
template <typename S>
inline void matmul_acc(const Tensor<S>& a, const Tensor<S>& b, Tensor<S>& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    const S* ai = a.row(i);
    S* ci = c.row(i);
    for (std::size_t p = 0; p < k; ++p) {
      const S aip = ai[p];
      if (aip == S(0)) continue;
      const S* bp = b.row(p);
      for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
    }
  }
}

// c[n,k] += a[n,m] . b[k,m]^T
template <typename S>
inline void matmul_nt_acc(const Tensor<S>& a, const Tensor<S>& b,
                          Tensor<S>& c) {
  const std::size_t n = a.rows(), m = a.cols(), k = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const S* ai = a.row(i);
    S* ci = c.row(i);
    for (std::size_t j = 0; j < k; ++j) {
      const S* bj = b.row(j);
      S acc = S(0);
      for (std::size_t p = 0; p < m; ++p) acc += ai[p] * bj[p];
      ci[j] += acc;
    }
  }
}

// c[k,m] += a[n,k]^T . b[n,m]
template <typename S>
inline void matmul_tn_acc(const Tensor<S>& a, const Tensor<S>& b,
                          Tensor<S>& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    const S* ai = a.row(i);
    const S* bi = b.row(i);
    for (std::size_t p = 0; p < k; ++p) {
      const S aip = ai[p];
      if (aip == S(0)) continue;
      S* cp = c.row(p);
      for (std::size_t j = 0; j < m; ++j) cp[j] += aip * bi[j];
    }
  }
}

// out[i,j] = sum_k x[i,k] w[k,j] + b[j]
template <typename S>
inline Tensor<S> affine(const Tensor<S>& x, const Tensor<S>& w,
                        const Tensor<S>& b) {
  if (x.ndim() != 2 || w.ndim() != 2 || x.cols() != w.rows() ||
      b.size() != w.cols()) {
    throw DimensionError("affine: incompatible shapes x" + x.shape_str() +
                         " w" + w.shape_str() + " b" + b.shape_str());
  }
  Tensor<S> out({x.rows(), w.cols()});
  for (std::size_t i = 0; i < out.rows(); ++i) {
    S* oi = out.row(i);
    for (std::size_t j = 0; j < out.cols(); ++j) oi[j] = b[j];
  }
  matmul_acc(x, w, out);
  return out;
}

// Accumulates gradients for y = affine(x, w, b) given dy. Any of the output
// slots may be null.
template <typename S>
inline void affine_backward(const Tensor<S>& x, const Tensor<S>& w,
                            const Tensor<S>& dy, Tensor<S>* dx, Tensor<S>* dw,
                            Tensor<S>* db) {
  if (dx) matmul_nt_acc(dy, w, *dx);
  if (dw) matmul_tn_acc(x, dy, *dw);
  if (db) {
    for (std::size_t i = 0; i < dy.rows(); ++i) {
      const S* di = dy.row(i);
      for (std::size_t j = 0; j < dy.cols(); ++j) (*db)[j] += di[j];
    }
  }
}

template <typename S>
inline void softmax_inplace(S* p, std::size_t k) {
  S mx = p[0];
  for (std::size_t i = 1; i < k; ++i) mx = std::max(mx, p[i]);
  S sum = S(0);
  for (std::size_t i = 0; i < k; ++i) {
    p[i] = std::exp(p[i] - mx);
    sum += p[i];
  }
  for (std::size_t i = 0; i < k; ++i) p[i] /= sum;
}

template <typename S>
inline Tensor<S> softmax(const Tensor<S>& logits) {
  if (logits.size() == 0) {
    throw ArgumentError("softmax: empty logits");
  }
  if (!logits.all_finite()) {
    throw NumericError("softmax: non-finite logits");
  }
  Tensor<S> out = logits;
  softmax_inplace(out.data(), out.size());
  return out;
}

template <typename S>
inline double log_sum_exp(const S* p, std::size_t k) {
  double mx = static_cast<double>(p[0]);
  for (std::size_t i = 1; i < k; ++i)
    mx = std::max(mx, static_cast<double>(p[i]));
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    sum += std::exp(static_cast<double>(p[i]) - mx);
  return mx + std::log(sum);
}

// Negative log-likelihood of `target` under softmax(logits); accumulates
// scale * (softmax - onehot) into dlogits when given.
template <typename S>
inline double softmax_xent(const S* logits, std::size_t k, std::size_t target,
                           S* dlogits = nullptr, S scale = S(1)) {
  const double lse = log_sum_exp(logits, k);
  const double nll = lse - static_cast<double>(logits[target]);
  if (dlogits) {
    for (std::size_t i = 0; i < k; ++i) {
      const S p =
          static_cast<S>(std::exp(static_cast<double>(logits[i]) - lse));
      dlogits[i] += scale * p;
    }
    dlogits[target] -= scale;
  }
  return nll;
}

enum class DropoutMode { kTrain, kEval };

// Inverted dropout: kept elements are scaled by 1/(1-rate) so evaluation is
// the identity. When `mask` is given it receives the per-element scale
// factors (0 or 1/(1-rate)) for the backward pass.
template <typename S>
inline Tensor<S> dropout(const Tensor<S>& x, double rate, Rng& rng,
                         DropoutMode mode, Tensor<S>* mask = nullptr) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ArgumentError("dropout: rate " + std::to_string(rate) +
                        " outside [0,1)");
  }
  if (mode == DropoutMode::kEval || rate == 0.0) {
    if (mask) {
      *mask = Tensor<S>(x.shape());
      mask->fill(S(1));
    }
    return x;
  }
  const S keep_scale = static_cast<S>(1.0 / (1.0 - rate));
  Tensor<S> out(x.shape());
  if (mask) *mask = Tensor<S>(x.shape());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const bool keep = rng.uniform() >= rate;
    const S m = keep ? keep_scale : S(0);
    out[k] = m * x[k];
    if (mask) (*mask)[k] = m;
  }
  return out;
}

}  // namespace cce::num
