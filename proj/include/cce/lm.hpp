#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "cce/conv.hpp"
#include "cce/highway.hpp"
#include "cce/lstm.hpp"
#include "cce/ops.hpp"
#include "cce/tensor.hpp"
#include "cce/vocab.hpp"

namespace cce::lm {

// Character inventory: ids 0..255 are raw bytes, plus begin/end-of-token
// sentinels. Tokens are processed as byte sequences, so there is no
// out-of-inventory character.
constexpr std::size_t kCharBot = 256;
constexpr std::size_t kCharEot = 257;
constexpr std::size_t kNumChars = 258;

inline std::vector<std::size_t> token_char_ids(const std::string& token) {
  if (token.empty()) {
    throw ArgumentError("token_char_ids: empty token");
  }
  std::vector<std::size_t> ids;
  ids.reserve(token.size() + 2);
  ids.push_back(kCharBot);
  for (char c : token) {
    ids.push_back(static_cast<unsigned char>(c));
  }
  ids.push_back(kCharEot);
  return ids;
}

struct LmConfig {
  std::size_t char_embed_dim = 16;
  std::vector<std::size_t> filter_widths = {1, 2, 3, 4, 5, 6, 7};
  std::vector<std::size_t> filter_counts = {32, 32, 64, 128, 256, 512, 2014};
  std::size_t projection_dim = 512;
  std::size_t lstm_hidden = 4096;
  std::size_t lstm_layers = 2;
  std::size_t vocab_min_count = 5;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double learning_rate = 0.001;

  void validate() const {
    if (filter_widths.size() != filter_counts.size()) {
      throw ValidationError("lm config: filter_widths and filter_counts "
                            "must have equal length");
    }
    if (filter_widths.empty()) {
      throw ValidationError("lm config: at least one filter bank required");
    }
    for (std::size_t w : filter_widths) {
      if (w == 0) throw ValidationError("lm config: filter width must be > 0");
    }
    if (char_embed_dim == 0 || projection_dim == 0 || lstm_hidden == 0) {
      throw ValidationError("lm config: dimensions must be positive");
    }
    if (lstm_layers != 2) {
      throw ValidationError("lm config: lstm_layers must be 2 (the layer "
                            "stack has exactly three layers)");
    }
    if (vocab_min_count < 1) {
      throw ValidationError("lm config: vocab_min_count must be >= 1");
    }
    if (epochs == 0 || batch_size == 0) {
      throw ValidationError("lm config: epochs and batch_size must be >= 1");
    }
    if (!(learning_rate > 0)) {
      throw ValidationError("lm config: learning_rate must be > 0");
    }
  }

  std::size_t conv_output_dim() const {
    std::size_t n = 0;
    for (std::size_t c : filter_counts) n += c;
    return n;
  }
};

// Context-independent token representation: char embedding lookup,
// max-over-time convolutions, projection, highway.
template <typename S>
struct CharEncoderParams {
  num::Param<S> char_embedding;  // [kNumChars, char_embed_dim]
  std::vector<num::ConvFilterBank<S>> filters;
  num::Param<S> proj_w;  // [conv_output_dim, projection_dim]
  num::Param<S> proj_b;  // [projection_dim]
  num::HighwayParams<S> highway;

  CharEncoderParams() = default;
  explicit CharEncoderParams(const LmConfig& cfg)
      : char_embedding({kNumChars, cfg.char_embed_dim}),
        proj_w({cfg.conv_output_dim(), cfg.projection_dim}),
        proj_b({cfg.projection_dim}),
        highway(cfg.projection_dim) {
    for (std::size_t i = 0; i < cfg.filter_widths.size(); ++i) {
      filters.emplace_back(cfg.filter_widths[i], cfg.char_embed_dim,
                           cfg.filter_counts[i]);
    }
  }

  void init(num::Rng& rng) {
    for (std::size_t k = 0; k < char_embedding.value.size(); ++k) {
      char_embedding.value[k] = static_cast<S>(rng.uniform(-0.1, 0.1));
    }
    for (auto& f : filters) f.init(rng);
    num::xavier_init(proj_w.value, rng);
    proj_b.value.zero();
    highway.init(rng);
  }
};

// One direction of one bi-LSTM layer plus its projection back to the
// shared dimension and the highway that follows it.
template <typename S>
struct BilmLayerParams {
  num::LstmParams<S> lstm;   // input projection_dim (or previous output)
  num::Param<S> proj_w;      // [lstm_hidden, projection_dim]
  num::Param<S> proj_b;      // [projection_dim]
  num::HighwayParams<S> highway;

  BilmLayerParams() = default;
  BilmLayerParams(std::size_t input_dim, std::size_t hidden,
                  std::size_t projection)
      : lstm(input_dim, hidden),
        proj_w({hidden, projection}),
        proj_b({projection}),
        highway(projection) {}

  void init(num::Rng& rng) {
    lstm.init(rng);
    num::xavier_init(proj_w.value, rng);
    proj_b.value.zero();
    highway.init(rng);
  }
};

template <typename S>
struct BilmParams {
  CharEncoderParams<S> encoder;
  // layers[direction][layer]; direction 0 reads left-to-right.
  std::array<std::vector<BilmLayerParams<S>>, 2> layers;
  num::Param<S> softmax_w;  // [projection_dim, vocab]
  num::Param<S> softmax_b;  // [vocab]

  BilmParams() = default;
  BilmParams(const LmConfig& cfg, std::size_t vocab_size)
      : encoder(cfg),
        softmax_w({cfg.projection_dim, vocab_size}),
        softmax_b({vocab_size}) {
    for (auto& dir : layers) {
      dir.clear();
      for (std::size_t l = 0; l < cfg.lstm_layers; ++l) {
        dir.emplace_back(cfg.projection_dim, cfg.lstm_hidden,
                         cfg.projection_dim);
      }
    }
  }

  void init(num::Rng& rng) {
    encoder.init(rng);
    for (auto& dir : layers) {
      for (auto& layer : dir) layer.init(rng);
    }
    num::xavier_init(softmax_w.value, rng);
    softmax_b.value.zero();
  }

  // Fixed enumeration order shared by the optimizer, serialization and the
  // content hash.
  num::ParamMap<S> param_map() {
    num::ParamMap<S> map;
    map.emplace_back("encoder/char_embedding", &encoder.char_embedding);
    for (std::size_t i = 0; i < encoder.filters.size(); ++i) {
      const std::string base = "encoder/conv" + std::to_string(i);
      map.emplace_back(base + "/weights", &encoder.filters[i].weights);
      map.emplace_back(base + "/bias", &encoder.filters[i].bias);
    }
    map.emplace_back("encoder/proj_w", &encoder.proj_w);
    map.emplace_back("encoder/proj_b", &encoder.proj_b);
    map.emplace_back("encoder/highway/w_gate", &encoder.highway.w_gate);
    map.emplace_back("encoder/highway/b_gate", &encoder.highway.b_gate);
    map.emplace_back("encoder/highway/w_hidden", &encoder.highway.w_hidden);
    map.emplace_back("encoder/highway/b_hidden", &encoder.highway.b_hidden);
    for (std::size_t d = 0; d < 2; ++d) {
      for (std::size_t l = 0; l < layers[d].size(); ++l) {
        const std::string base = std::string("lstm/") +
                                 (d == 0 ? "fwd" : "bwd") + std::to_string(l);
        auto& layer = layers[d][l];
        map.emplace_back(base + "/w_input", &layer.lstm.w_input);
        map.emplace_back(base + "/w_recur", &layer.lstm.w_recur);
        map.emplace_back(base + "/bias", &layer.lstm.bias);
        map.emplace_back(base + "/proj_w", &layer.proj_w);
        map.emplace_back(base + "/proj_b", &layer.proj_b);
        map.emplace_back(base + "/highway/w_gate", &layer.highway.w_gate);
        map.emplace_back(base + "/highway/b_gate", &layer.highway.b_gate);
        map.emplace_back(base + "/highway/w_hidden", &layer.highway.w_hidden);
        map.emplace_back(base + "/highway/b_hidden", &layer.highway.b_hidden);
      }
    }
    map.emplace_back("softmax/w", &softmax_w);
    map.emplace_back("softmax/b", &softmax_b);
    return map;
  }

  template <typename T>
  BilmParams<T> cast() const {
    BilmParams<T> out;
    out.encoder.char_embedding = encoder.char_embedding.template cast<T>();
    for (const auto& f : encoder.filters) {
      num::ConvFilterBank<T> bank;
      bank.width = f.width;
      bank.weights = f.weights.template cast<T>();
      bank.bias = f.bias.template cast<T>();
      out.encoder.filters.push_back(std::move(bank));
    }
    out.encoder.proj_w = encoder.proj_w.template cast<T>();
    out.encoder.proj_b = encoder.proj_b.template cast<T>();
    out.encoder.highway.w_gate = encoder.highway.w_gate.template cast<T>();
    out.encoder.highway.b_gate = encoder.highway.b_gate.template cast<T>();
    out.encoder.highway.w_hidden = encoder.highway.w_hidden.template cast<T>();
    out.encoder.highway.b_hidden = encoder.highway.b_hidden.template cast<T>();
    for (std::size_t d = 0; d < 2; ++d) {
      for (const auto& layer : layers[d]) {
        BilmLayerParams<T> lt;
        lt.lstm.w_input = layer.lstm.w_input.template cast<T>();
        lt.lstm.w_recur = layer.lstm.w_recur.template cast<T>();
        lt.lstm.bias = layer.lstm.bias.template cast<T>();
        lt.proj_w = layer.proj_w.template cast<T>();
        lt.proj_b = layer.proj_b.template cast<T>();
        lt.highway.w_gate = layer.highway.w_gate.template cast<T>();
        lt.highway.b_gate = layer.highway.b_gate.template cast<T>();
        lt.highway.w_hidden = layer.highway.w_hidden.template cast<T>();
        lt.highway.b_hidden = layer.highway.b_hidden.template cast<T>();
        out.layers[d].push_back(std::move(lt));
      }
    }
    out.softmax_w = softmax_w.template cast<T>();
    out.softmax_b = softmax_b.template cast<T>();
    return out;
  }

  std::size_t projection_dim() const { return encoder.proj_b.value.size(); }
  std::size_t vocab_size() const { return softmax_b.value.size(); }
};

// Per-token layer stack: layer 0 is the duplicated context-independent
// representation [x_k, x_k]; layers 1 and 2 concatenate the forward and
// backward halves of the two recurrent layers. All three share the
// dimension 2 * projection_dim.
template <typename S>
struct LayerStack {
  std::array<num::Tensor<S>, 3> layers;

  std::size_t length() const { return layers[0].rows(); }
  std::size_t width() const { return layers[0].cols(); }
};

template <typename S>
struct CharEncoderCache {
  std::vector<std::vector<std::size_t>> char_ids;  // per token
  std::vector<num::Tensor<S>> embeds;              // per token [L, e]
  std::vector<num::ConvCache<S>> conv;             // per token
  num::Tensor<S> conv_out;                         // [T, conv_output_dim]
  num::HighwayCache<S> highway;
  num::Tensor<S> proj_out;                         // [T, projection_dim]
};

// Forward activations of one bi-LSTM layer (one direction).
template <typename S>
struct BilmLayerCache {
  num::LstmCache<S> lstm;
  num::Tensor<S> lstm_out;  // [P, hidden]
  num::HighwayCache<S> highway;
  num::Tensor<S> out;       // [P, projection_dim]
};

template <typename S>
struct BilmActivations {
  CharEncoderCache<S> encoder;
  num::Tensor<S> token_repr;  // [P, projection_dim] including boundaries
  std::array<std::array<BilmLayerCache<S>, 2>, 2> layer;  // [direction][layer]
};

// Context-independent embeddings for a token list (no boundary tokens).
template <typename S>
num::Tensor<S> embed_tokens_chars(const std::vector<std::string>& tokens,
                                  const CharEncoderParams<S>& params,
                                  CharEncoderCache<S>* cache = nullptr) {
  const std::size_t t_len = tokens.size();
  const std::size_t e = params.char_embedding.value.cols();
  const std::size_t conv_dim = num::conv_output_dim(params.filters);
  num::Tensor<S> conv_out({t_len, conv_dim});
  if (cache) {
    cache->char_ids.resize(t_len);
    cache->embeds.resize(t_len);
    cache->conv.resize(t_len);
  }
  for (std::size_t t = 0; t < t_len; ++t) {
    const auto ids = token_char_ids(tokens[t]);
    num::Tensor<S> embeds({ids.size(), e});
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const S* src = params.char_embedding.value.row(ids[i]);
      S* dst = embeds.row(i);
      for (std::size_t j = 0; j < e; ++j) dst[j] = src[j];
    }
    num::ConvCache<S> conv_cache;
    const num::Tensor<S> features = num::conv_max_over_time(
        embeds, params.filters, num::Activation::kTanh,
        cache ? &conv_cache : nullptr);
    S* dst = conv_out.row(t);
    for (std::size_t j = 0; j < conv_dim; ++j) dst[j] = features[j];
    if (cache) {
      cache->char_ids[t] = ids;
      cache->embeds[t] = std::move(embeds);
      cache->conv[t] = std::move(conv_cache);
    }
  }
  num::Tensor<S> projected =
      t_len > 0 ? num::affine(conv_out, params.proj_w.value, params.proj_b.value)
                : num::Tensor<S>({0, params.proj_b.value.size()});
  num::Tensor<S> out =
      t_len > 0 ? num::highway(projected, params.highway, num::Activation::kTanh,
                               cache ? &cache->highway : nullptr)
                : projected;
  if (cache) {
    cache->conv_out = std::move(conv_out);
    cache->proj_out = projected;
  }
  return out;
}

template <typename S>
void char_encoder_backward(CharEncoderParams<S>& params,
                           const CharEncoderCache<S>& cache,
                           const num::Tensor<S>& d_out) {
  if (d_out.rows() == 0) return;
  num::Tensor<S> d_proj(cache.proj_out.shape());
  num::highway_backward(params.highway, num::Activation::kTanh, cache.highway,
                        d_out, &d_proj);
  num::Tensor<S> d_conv(cache.conv_out.shape());
  num::affine_backward(cache.conv_out, params.proj_w.value, d_proj, &d_conv,
                       &params.proj_w.grad, &params.proj_b.grad);
  const std::size_t e = params.char_embedding.value.cols();
  for (std::size_t t = 0; t < cache.embeds.size(); ++t) {
    num::Tensor<S> d_row({d_conv.cols()});
    for (std::size_t j = 0; j < d_conv.cols(); ++j) d_row[j] = d_conv(t, j);
    num::Tensor<S> d_embeds(cache.embeds[t].shape());
    num::conv_max_backward(params.filters, num::Activation::kTanh,
                           cache.conv[t], d_row, &d_embeds);
    const auto& ids = cache.char_ids[t];
    for (std::size_t i = 0; i < ids.size(); ++i) {
      S* dst = params.char_embedding.grad.row(ids[i]);
      const S* src = d_embeds.row(i);
      for (std::size_t j = 0; j < e; ++j) dst[j] += src[j];
    }
  }
}

// Runs one direction of one recurrent layer: LSTM, projection, highway.
template <typename S>
num::Tensor<S> bilm_layer_forward(const num::Tensor<S>& inputs,
                                  const BilmLayerParams<S>& layer,
                                  num::Direction dir,
                                  BilmLayerCache<S>* cache = nullptr) {
  num::Tensor<S> lstm_out = num::lstm_sequence(
      inputs, layer.lstm, dir, nullptr, nullptr, cache ? &cache->lstm : nullptr);
  num::Tensor<S> projected =
      num::affine(lstm_out, layer.proj_w.value, layer.proj_b.value);
  num::Tensor<S> out = num::highway(projected, layer.highway,
                                    num::Activation::kTanh,
                                    cache ? &cache->highway : nullptr);
  if (cache) {
    cache->lstm_out = std::move(lstm_out);
    cache->out = out;
  }
  return out;
}

template <typename S>
void bilm_layer_backward(BilmLayerParams<S>& layer, num::Direction dir,
                         const BilmLayerCache<S>& cache,
                         const num::Tensor<S>& d_out,
                         num::Tensor<S>* d_inputs) {
  num::Tensor<S> d_proj({cache.lstm_out.rows(), layer.proj_b.value.size()});
  num::highway_backward(layer.highway, num::Activation::kTanh, cache.highway,
                        d_out, &d_proj);
  num::Tensor<S> d_lstm(cache.lstm_out.shape());
  num::affine_backward(cache.lstm_out, layer.proj_w.value, d_proj, &d_lstm,
                       &layer.proj_w.grad, &layer.proj_b.grad);
  num::lstm_backward(layer.lstm, dir, cache.lstm, d_lstm, d_inputs);
}

// Full bidirectional forward over a sentence. Boundary tokens are added
// internally and stripped from the returned stack; `acts`, when given,
// retains them (positions 0 and P-1) for the training backward pass.
template <typename S>
LayerStack<S> bilm_forward(const std::vector<std::string>& tokens,
                           const BilmParams<S>& params,
                           BilmActivations<S>* acts = nullptr) {
  const std::size_t proj = params.projection_dim();
  LayerStack<S> stack;
  for (auto& layer : stack.layers) {
    layer = num::Tensor<S>({tokens.size(), 2 * proj});
  }
  if (tokens.empty()) return stack;

  std::vector<std::string> padded;
  padded.reserve(tokens.size() + 2);
  padded.push_back(text::Vocabulary::kBosToken);
  padded.insert(padded.end(), tokens.begin(), tokens.end());
  padded.push_back(text::Vocabulary::kEosToken);

  BilmActivations<S> local;
  BilmActivations<S>* a = acts ? acts : &local;
  const num::Tensor<S> x =
      embed_tokens_chars(padded, params.encoder,
                         acts ? &a->encoder : nullptr);
  a->token_repr = x;

  std::array<std::array<num::Tensor<S>, 2>, 2> outs;  // [direction][layer]
  for (std::size_t d = 0; d < 2; ++d) {
    const num::Direction dir =
        d == 0 ? num::Direction::kForward : num::Direction::kBackward;
    const num::Tensor<S>* input = &x;
    for (std::size_t l = 0; l < params.layers[d].size(); ++l) {
      outs[d][l] = bilm_layer_forward(*input, params.layers[d][l], dir,
                                      acts ? &a->layer[d][l] : nullptr);
      input = &outs[d][l];
    }
  }

  // Strip boundaries: stack position k corresponds to padded position k+1.
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    S* h0 = stack.layers[0].row(k);
    const S* xk = x.row(k + 1);
    for (std::size_t j = 0; j < proj; ++j) {
      h0[j] = xk[j];
      h0[proj + j] = xk[j];
    }
    for (std::size_t l = 0; l < 2; ++l) {
      S* h = stack.layers[l + 1].row(k);
      const S* fwd = outs[0][l].row(k + 1);
      const S* bwd = outs[1][l].row(k + 1);
      for (std::size_t j = 0; j < proj; ++j) {
        h[j] = fwd[j];
        h[proj + j] = bwd[j];
      }
    }
  }
  return stack;
}

}  // namespace cce::lm
