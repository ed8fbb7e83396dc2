#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cce/adam.hpp"
#include "cce/conll_io.hpp"
#include "cce/crf.hpp"
#include "cce/lm_train.hpp"
#include "cce/spans.hpp"

namespace cce::ner {

// Learnable aggregation over the three language-model layers:
// y_k = gamma * sum_i softmax(s_logits)_i * h_k^i.
template <typename S>
struct ScalarMixParams {
  num::Param<S> s_logits;  // [3]
  num::Param<S> gamma;     // [1]

  ScalarMixParams() : s_logits({std::size_t(3)}), gamma({std::size_t(1)}) {
    gamma.value[0] = S(1);  // neutral start: uniform weights, unit scale
  }

  std::array<S, 3> weights() const {
    num::Tensor<S> w = s_logits.value;
    num::softmax_inplace(w.data(), w.size());
    return {w[0], w[1], w[2]};
  }
};

template <typename S>
struct ScalarMixCache {
  std::array<S, 3> weights{};
  num::Tensor<S> mix;  // [T, d], pre-gamma weighted sum
};

template <typename S>
num::Tensor<S> scalar_mix(const lm::LayerStack<S>& stack,
                          const ScalarMixParams<S>& params,
                          ScalarMixCache<S>* cache = nullptr) {
  for (const auto& layer : stack.layers) {
    if (!layer.same_shape(stack.layers[0])) {
      throw ArgumentError("scalar_mix: stack layers disagree on shape");
    }
  }
  const auto w = params.weights();
  const S gamma = params.gamma.value[0];
  num::Tensor<S> mix(stack.layers[0].shape());
  for (std::size_t i = 0; i < 3; ++i) {
    const num::Tensor<S>& h = stack.layers[i];
    for (std::size_t k = 0; k < mix.size(); ++k) mix[k] += w[i] * h[k];
  }
  num::Tensor<S> out(mix.shape());
  for (std::size_t k = 0; k < mix.size(); ++k) out[k] = gamma * mix[k];
  if (cache) {
    cache->weights = w;
    cache->mix = std::move(mix);
  }
  return out;
}

// Accumulates gradients for gamma and the mix logits. The stack is frozen
// upstream, so no gradient flows into it.
template <typename S>
void scalar_mix_backward(ScalarMixParams<S>& params,
                         const lm::LayerStack<S>& stack,
                         const ScalarMixCache<S>& cache,
                         const num::Tensor<S>& d_out) {
  const S gamma = params.gamma.value[0];
  S d_gamma = S(0);
  for (std::size_t k = 0; k < d_out.size(); ++k) {
    d_gamma += d_out[k] * cache.mix[k];
  }
  params.gamma.grad[0] += d_gamma;

  std::array<S, 3> d_w{};
  for (std::size_t i = 0; i < 3; ++i) {
    const num::Tensor<S>& h = stack.layers[i];
    S acc = S(0);
    for (std::size_t k = 0; k < d_out.size(); ++k) acc += d_out[k] * h[k];
    d_w[i] = gamma * acc;
  }
  // Softmax Jacobian: ds_i = w_i * (dw_i - sum_j w_j dw_j).
  S dot = S(0);
  for (std::size_t i = 0; i < 3; ++i) dot += cache.weights[i] * d_w[i];
  for (std::size_t i = 0; i < 3; ++i) {
    params.s_logits.grad[i] += cache.weights[i] * (d_w[i] - dot);
  }
}

struct NerConfig {
  std::size_t encoder_layers = 2;
  std::size_t encoder_hidden = 256;  // per direction
  double dropout_rate = 0.5;
  double learning_rate = 0.001;
  std::size_t batch_size = 32;
  std::size_t epochs = 200;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

  void validate() const {
    if (encoder_layers != 2) {
      throw ValidationError("ner config: encoder_layers must be 2");
    }
    if (encoder_hidden == 0) {
      throw ValidationError("ner config: encoder_hidden must be positive");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
      throw ValidationError("ner config: dropout_rate must be in [0,1)");
    }
    if (!(learning_rate > 0)) {
      throw ValidationError("ner config: learning_rate must be > 0");
    }
    if (batch_size == 0 || epochs == 0) {
      throw ValidationError("ner config: epochs and batch_size must be >= 1");
    }
    if (seeds.empty()) {
      throw ValidationError("ner config: seed list must be non-empty");
    }
  }
};

inline void to_json(nlohmann::json& j, const NerConfig& c) {
  j = nlohmann::json{{"encoder_layers", c.encoder_layers},
                     {"encoder_hidden", c.encoder_hidden},
                     {"dropout_rate", c.dropout_rate},
                     {"learning_rate", c.learning_rate},
                     {"batch_size", c.batch_size},
                     {"epochs", c.epochs},
                     {"seeds", c.seeds}};
}

inline NerConfig ner_config_from_json(const nlohmann::json& j,
                                      const std::string& context) {
  NerConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "encoder_layers") {
        c.encoder_layers = value.get<std::size_t>();
      } else if (key == "encoder_hidden") {
        c.encoder_hidden = value.get<std::size_t>();
      } else if (key == "dropout_rate") {
        c.dropout_rate = value.get<double>();
      } else if (key == "learning_rate") {
        c.learning_rate = value.get<double>();
      } else if (key == "batch_size") {
        c.batch_size = value.get<std::size_t>();
      } else if (key == "epochs") {
        c.epochs = value.get<std::size_t>();
      } else if (key == "seeds") {
        c.seeds = value.get<std::vector<std::uint64_t>>();
      } else {
        throw ValidationError(context + ": unknown key '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(context + ": bad value for '" + key + "': " +
                            e.what());
    }
  }
  c.validate();
  return c;
}

// Two bidirectional LSTM layers over the mixed features, an emission
// projection, and the CRF head.
template <typename S>
struct NerParams {
  ScalarMixParams<S> mix;
  std::vector<std::array<num::LstmParams<S>, 2>> encoder;  // [layer][dir]
  num::Param<S> emit_w;  // [2 * encoder_hidden, |tags|]
  num::Param<S> emit_b;  // [|tags|]
  crf::CrfParams<S> crf_params;

  NerParams() = default;

  NerParams(const NerConfig& cfg, std::size_t mix_dim,
            const crf::TagSet& tagset)
      : emit_w({2 * cfg.encoder_hidden, tagset.size()}),
        emit_b({tagset.size()}),
        crf_params(tagset) {
    std::size_t input = mix_dim;
    for (std::size_t l = 0; l < cfg.encoder_layers; ++l) {
      encoder.push_back({num::LstmParams<S>(input, cfg.encoder_hidden),
                         num::LstmParams<S>(input, cfg.encoder_hidden)});
      input = 2 * cfg.encoder_hidden;
    }
  }

  std::size_t mix_dim() const {
    return encoder.empty() ? 0 : encoder[0][0].input_dim();
  }

  void init(num::Rng& rng) {
    mix.s_logits.value.zero();
    mix.gamma.value[0] = S(1);
    for (auto& layer : encoder) {
      for (auto& dir : layer) dir.init(rng);
    }
    num::xavier_init(emit_w.value, rng);
    emit_b.value.zero();
    crf_params.transitions.value.zero();
    crf_params.start_scores.value.zero();
    crf_params.end_scores.value.zero();
  }

  num::ParamMap<S> param_map() {
    num::ParamMap<S> map;
    map.emplace_back("mix/s_logits", &mix.s_logits);
    map.emplace_back("mix/gamma", &mix.gamma);
    for (std::size_t l = 0; l < encoder.size(); ++l) {
      for (std::size_t d = 0; d < 2; ++d) {
        const std::string base = "encoder/" + std::to_string(l) + "/" +
                                 (d == 0 ? "fwd" : "bwd");
        map.emplace_back(base + "/w_input", &encoder[l][d].w_input);
        map.emplace_back(base + "/w_recur", &encoder[l][d].w_recur);
        map.emplace_back(base + "/bias", &encoder[l][d].bias);
      }
    }
    map.emplace_back("emit/w", &emit_w);
    map.emplace_back("emit/b", &emit_b);
    map.emplace_back("crf/transitions", &crf_params.transitions);
    map.emplace_back("crf/start_scores", &crf_params.start_scores);
    map.emplace_back("crf/end_scores", &crf_params.end_scores);
    return map;
  }

  template <typename T>
  NerParams<T> cast() const {
    NerParams<T> out;
    out.mix.s_logits = mix.s_logits.template cast<T>();
    out.mix.gamma = mix.gamma.template cast<T>();
    for (const auto& layer : encoder) {
      std::array<num::LstmParams<T>, 2> lt;
      for (std::size_t d = 0; d < 2; ++d) {
        lt[d].w_input = layer[d].w_input.template cast<T>();
        lt[d].w_recur = layer[d].w_recur.template cast<T>();
        lt[d].bias = layer[d].bias.template cast<T>();
      }
      out.encoder.push_back(std::move(lt));
    }
    out.emit_w = emit_w.template cast<T>();
    out.emit_b = emit_b.template cast<T>();
    out.crf_params = crf_params.template cast<T>();
    return out;
  }
};

template <typename S>
struct EncodeCache {
  lm::LayerStack<S> stack;
  ScalarMixCache<S> mix;
  num::Tensor<S> mix_out;
  std::vector<num::Tensor<S>> drop_mask;   // per dropout site
  std::vector<num::Tensor<S>> layer_in;    // post-dropout encoder inputs
  std::vector<std::array<num::LstmCache<S>, 2>> lstm;  // [layer][dir]
  std::vector<num::Tensor<S>> layer_concat;  // [T, 2H] pre-dropout
  num::Tensor<S> emit_in;  // post final dropout
};

// Emission scores from a frozen layer stack. Dropout is live only in kTrain
// mode; `rng` may be null in kEval mode.
template <typename S>
num::Tensor<S> encode_from_stack(const lm::LayerStack<S>& stack,
                                 NerParams<S>& params, const NerConfig& cfg,
                                 num::DropoutMode mode, num::Rng* rng,
                                 EncodeCache<S>* cache = nullptr) {
  const std::size_t t_len = stack.length();
  const double rate = cfg.dropout_rate;
  num::Rng fallback(0);
  num::Rng& r = rng ? *rng : fallback;
  if (mode == num::DropoutMode::kTrain && rate > 0.0 && rng == nullptr) {
    throw ArgumentError("encode: training mode requires an rng");
  }

  num::Tensor<S> mixed =
      scalar_mix(stack, params.mix, cache ? &cache->mix : nullptr);
  if (cache) {
    cache->stack = stack;
    cache->mix_out = mixed;
    cache->drop_mask.clear();
    cache->layer_in.clear();
    cache->lstm.resize(params.encoder.size());
    cache->layer_concat.clear();
  }

  num::Tensor<S> current = std::move(mixed);
  for (std::size_t l = 0; l <= params.encoder.size(); ++l) {
    num::Tensor<S> mask;
    current = num::dropout(current, rate, r, mode, cache ? &mask : nullptr);
    if (cache) cache->drop_mask.push_back(std::move(mask));
    if (l == params.encoder.size()) {
      if (cache) cache->emit_in = current;
      break;
    }
    if (cache) cache->layer_in.push_back(current);
    const std::size_t h = params.encoder[l][0].hidden();
    num::Tensor<S> concat({t_len, 2 * h});
    for (std::size_t d = 0; d < 2; ++d) {
      const num::Direction dir =
          d == 0 ? num::Direction::kForward : num::Direction::kBackward;
      num::Tensor<S> out = num::lstm_sequence(
          current, params.encoder[l][d], dir, nullptr, nullptr,
          cache ? &cache->lstm[l][d] : nullptr);
      for (std::size_t t = 0; t < t_len; ++t) {
        const S* src = out.row(t);
        S* dst = concat.row(t) + d * h;
        for (std::size_t j = 0; j < h; ++j) dst[j] = src[j];
      }
    }
    if (cache) cache->layer_concat.push_back(concat);
    current = std::move(concat);
  }
  return num::affine(current, params.emit_w.value, params.emit_b.value);
}

// Backpropagates d_emissions through the emission projection, the encoder
// stack and the scalar mix. The layer stack itself stays frozen.
template <typename S>
void encode_backward(NerParams<S>& params, const EncodeCache<S>& cache,
                     const num::Tensor<S>& d_emissions) {
  const std::size_t t_len = cache.emit_in.rows();
  num::Tensor<S> d_current(cache.emit_in.shape());
  num::affine_backward(cache.emit_in, params.emit_w.value, d_emissions,
                       &d_current, &params.emit_w.grad, &params.emit_b.grad);

  for (std::size_t l = params.encoder.size(); l-- > 0;) {
    // Undo the dropout that followed this layer's concat output.
    const num::Tensor<S>& mask = cache.drop_mask[l + 1];
    for (std::size_t k = 0; k < d_current.size(); ++k) d_current[k] *= mask[k];

    const std::size_t h = params.encoder[l][0].hidden();
    num::Tensor<S> d_input(cache.layer_in[l].shape());
    for (std::size_t d = 0; d < 2; ++d) {
      const num::Direction dir =
          d == 0 ? num::Direction::kForward : num::Direction::kBackward;
      num::Tensor<S> d_out({t_len, h});
      for (std::size_t t = 0; t < t_len; ++t) {
        const S* src = d_current.row(t) + d * h;
        S* dst = d_out.row(t);
        for (std::size_t j = 0; j < h; ++j) dst[j] = src[j];
      }
      num::lstm_backward(params.encoder[l][d], dir, cache.lstm[l][d], d_out,
                         &d_input);
    }
    d_current = std::move(d_input);
  }
  const num::Tensor<S>& mask0 = cache.drop_mask[0];
  for (std::size_t k = 0; k < d_current.size(); ++k) d_current[k] *= mask0[k];
  scalar_mix_backward(params.mix, cache.stack, cache.mix, d_current);
}

struct NerCheckpoint {
  int format_version = 1;
  NerConfig config;
  NerParams<float> params;
  std::string lm_path;
  std::string lm_hash;
  std::uint64_t seed = 0;
};

inline nlohmann::json ner_checkpoint_json(NerCheckpoint& ckpt) {
  nlohmann::json config;
  to_json(config, ckpt.config);
  config["mix_dim"] = ckpt.params.mix_dim();
  ckpt::ArrayRefs refs;
  for (auto& [name, param] : ckpt.params.param_map()) {
    refs.emplace_back(name, &param->value);
  }
  return nlohmann::json{{"format_version", ckpt.format_version},
                        {"kind", "ner"},
                        {"config", config},
                        {"lm_path", ckpt.lm_path},
                        {"lm_hash", ckpt.lm_hash},
                        {"seed", ckpt.seed},
                        {"arrays", ckpt::arrays_to_json(refs)}};
}

inline void save_ner_checkpoint(const std::string& path, NerCheckpoint& ckpt) {
  ckpt::write_json_file(path, ner_checkpoint_json(ckpt));
}

inline NerCheckpoint load_ner_checkpoint(const std::string& path) {
  const nlohmann::json j = ckpt::read_json_file(path);
  if (!j.contains("kind") || j.at("kind").get<std::string>() != "ner") {
    throw ParseError("'" + path + "' is not an ner checkpoint");
  }
  NerCheckpoint out;
  out.format_version = j.at("format_version").get<int>();
  if (out.format_version != 1) {
    throw ParseError("'" + path + "': unsupported format_version");
  }
  nlohmann::json config = j.at("config");
  if (!config.contains("mix_dim")) {
    throw ParseError("'" + path + "': checkpoint config lacks mix_dim");
  }
  const std::size_t mix_dim = config.at("mix_dim").get<std::size_t>();
  config.erase("mix_dim");
  out.config = ner_config_from_json(config, path);
  out.lm_path = j.at("lm_path").get<std::string>();
  out.lm_hash = j.at("lm_hash").get<std::string>();
  out.seed = j.at("seed").get<std::uint64_t>();
  out.params = NerParams<float>(out.config, mix_dim, crf::TagSet());
  ckpt::MutableArrayRefs refs;
  for (auto& [name, param] : out.params.param_map()) {
    refs.emplace_back(name, &param->value);
  }
  ckpt::arrays_from_json(j.at("arrays"), refs);
  return out;
}

// The frozen language model is part of the model identity.
inline void require_lm_match(const NerCheckpoint& ner,
                             lm::LmCheckpoint& lm_ckpt) {
  const std::string hash = lm::lm_content_hash(lm_ckpt.params);
  if (hash != ner.lm_hash) {
    throw IntegrityError("ner checkpoint was trained against lm " +
                         ner.lm_hash + " but the provided lm hashes to " +
                         hash);
  }
}

}  // namespace cce::ner
