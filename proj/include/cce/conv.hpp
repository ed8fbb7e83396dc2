#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cce/ops.hpp"
#include "cce/tensor.hpp"

namespace cce::num {

// One bank of width-w convolution filters over a character embedding matrix.
// Weights are laid out [width * embed_dim, count]: a window of `width`
// consecutive embedding rows is flattened row-major and multiplied in.
template <typename S>
struct ConvFilterBank {
  std::size_t width = 0;
  Param<S> weights;  // [width * embed_dim, count]
  Param<S> bias;     // [count]

  ConvFilterBank() = default;
  ConvFilterBank(std::size_t w, std::size_t embed_dim, std::size_t count)
      : width(w), weights({w * embed_dim, count}), bias({count}) {}

  std::size_t count() const { return bias.value.size(); }

  void init(Rng& rng) {
    xavier_init(weights.value, rng);
    bias.value.zero();
  }
};

template <typename S>
struct ConvCache {
  std::size_t input_rows = 0;   // unpadded L
  Tensor<S> padded;             // [max(L, max width), e]
  std::vector<std::size_t> argmax;  // winning window position per channel
  Tensor<S> max_pre;            // winning pre-activation per channel
};

template <typename S>
inline std::size_t conv_output_dim(const std::vector<ConvFilterBank<S>>& banks) {
  std::size_t n = 0;
  for (const auto& b : banks) n += b.count();
  return n;
}

// Max-over-time convolution: per channel, the best window response
// (window . W + b) followed by the activation; banks concatenate in
// declaration order. Inputs shorter than a filter width are padded with zero
// rows. Ties in the max go to the earliest position.
template <typename S>
Tensor<S> conv_max_over_time(const Tensor<S>& char_embeds,
                             const std::vector<ConvFilterBank<S>>& banks,
                             Activation act = Activation::kTanh,
                             ConvCache<S>* cache = nullptr) {
  if (char_embeds.ndim() != 2 || char_embeds.rows() == 0) {
    throw ArgumentError("conv_max_over_time: empty character sequence");
  }
  const std::size_t l = char_embeds.rows();
  const std::size_t e = char_embeds.cols();
  std::size_t max_width = 1;
  for (const auto& b : banks) max_width = std::max(max_width, b.width);

  const Tensor<S>* input = &char_embeds;
  Tensor<S> padded;
  if (l < max_width) {
    padded = Tensor<S>({max_width, e});
    for (std::size_t i = 0; i < l; ++i) {
      const S* src = char_embeds.row(i);
      S* dst = padded.row(i);
      for (std::size_t j = 0; j < e; ++j) dst[j] = src[j];
    }
    input = &padded;
  }
  const std::size_t lp = input->rows();

  Tensor<S> out({conv_output_dim(banks)});
  if (cache) {
    cache->input_rows = l;
    cache->padded = *input;
    cache->argmax.assign(out.size(), 0);
    cache->max_pre = Tensor<S>({out.size()});
  }

  std::size_t offset = 0;
  for (const auto& bank : banks) {
    const std::size_t w = bank.width, m = bank.count();
    const std::size_t window = w * e;
    if (bank.weights.value.rows() != window || bank.weights.value.cols() != m) {
      throw DimensionError("conv_max_over_time: bank weights " +
                           bank.weights.value.shape_str() +
                           " incompatible with width " + std::to_string(w) +
                           " and embed dim " + std::to_string(e));
    }
    std::vector<S> best(m);
    std::vector<std::size_t> best_pos(m, 0);
    for (std::size_t pos = 0; pos + w <= lp; ++pos) {
      const S* win = input->row(pos);  // w*e contiguous values
      for (std::size_t c = 0; c < m; ++c) {
        S z = bank.bias.value[c];
        for (std::size_t k = 0; k < window; ++k) {
          z += win[k] * bank.weights.value(k, c);
        }
        if (pos == 0 || z > best[c]) {
          best[c] = z;
          best_pos[c] = pos;
        }
      }
    }
    for (std::size_t c = 0; c < m; ++c) {
      out[offset + c] = activate(act, best[c]);
      if (cache) {
        cache->argmax[offset + c] = best_pos[c];
        cache->max_pre[offset + c] = best[c];
      }
    }
    offset += m;
  }
  return out;
}

// Routes gradients through the winning window of each channel. d_embeds, if
// non-null, must have the original (unpadded) shape; padding rows are
// constants and receive nothing.
template <typename S>
void conv_max_backward(std::vector<ConvFilterBank<S>>& banks, Activation act,
                       const ConvCache<S>& cache, const Tensor<S>& d_out,
                       Tensor<S>* d_embeds = nullptr) {
  const std::size_t e = cache.padded.cols();
  std::size_t offset = 0;
  for (auto& bank : banks) {
    const std::size_t w = bank.width, m = bank.count();
    const std::size_t window = w * e;
    for (std::size_t c = 0; c < m; ++c) {
      const S y = activate(act, cache.max_pre[offset + c]);
      const S dz = d_out[offset + c] * activate_grad_from_output(act, y);
      if (dz == S(0)) continue;
      const std::size_t pos = cache.argmax[offset + c];
      const S* win = cache.padded.row(pos);
      for (std::size_t k = 0; k < window; ++k) {
        bank.weights.grad(k, c) += dz * win[k];
        if (d_embeds) {
          const std::size_t r = pos + k / e;
          if (r < cache.input_rows) {
            (*d_embeds)(r, k % e) += dz * bank.weights.value(k, c);
          }
        }
      }
      bank.bias.grad[c] += dz;
    }
    offset += m;
  }
}

}  // namespace cce::num
