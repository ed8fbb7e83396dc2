#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cce/adam.hpp"
#include "cce/checkpoint.hpp"
#include "cce/corpus_io.hpp"
#include "cce/lm.hpp"

namespace cce::lm {

inline void to_json(nlohmann::json& j, const LmConfig& c) {
  j = nlohmann::json{{"char_embed_dim", c.char_embed_dim},
                     {"filter_widths", c.filter_widths},
                     {"filter_counts", c.filter_counts},
                     {"projection_dim", c.projection_dim},
                     {"lstm_hidden", c.lstm_hidden},
                     {"lstm_layers", c.lstm_layers},
                     {"vocab_min_count", c.vocab_min_count},
                     {"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"learning_rate", c.learning_rate}};
}

// Strict parser: unknown keys are rejected, named in the error.
inline LmConfig lm_config_from_json(const nlohmann::json& j,
                                    const std::string& context) {
  LmConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "char_embed_dim") {
        c.char_embed_dim = value.get<std::size_t>();
      } else if (key == "filter_widths") {
        c.filter_widths = value.get<std::vector<std::size_t>>();
      } else if (key == "filter_counts") {
        c.filter_counts = value.get<std::vector<std::size_t>>();
      } else if (key == "projection_dim") {
        c.projection_dim = value.get<std::size_t>();
      } else if (key == "lstm_hidden") {
        c.lstm_hidden = value.get<std::size_t>();
      } else if (key == "lstm_layers") {
        c.lstm_layers = value.get<std::size_t>();
      } else if (key == "vocab_min_count") {
        c.vocab_min_count = value.get<std::size_t>();
      } else if (key == "epochs") {
        c.epochs = value.get<std::size_t>();
      } else if (key == "batch_size") {
        c.batch_size = value.get<std::size_t>();
      } else if (key == "learning_rate") {
        c.learning_rate = value.get<double>();
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

struct LmLoss {
  double forward_nll = 0.0;
  double backward_nll = 0.0;
  std::size_t predictions = 0;  // per direction
};

// Joint forward/backward language-model loss of one sentence: each direction
// predicts every real token from its own context (the boundary tokens
// condition but are not scored). When grad_scale is nonzero the scaled
// gradients accumulate into the parameter grads.
template <typename S>
LmLoss lm_sentence_loss(BilmParams<S>& params,
                        const std::vector<std::string>& tokens,
                        const std::vector<std::size_t>& target_ids,
                        S grad_scale) {
  LmLoss result;
  const std::size_t t_len = tokens.size();
  if (t_len == 0) return result;
  if (target_ids.size() != t_len) {
    throw ArgumentError("lm_sentence_loss: target count mismatch");
  }
  const std::size_t proj = params.projection_dim();
  const std::size_t vocab = params.vocab_size();
  const bool want_grads = grad_scale != S(0);

  BilmActivations<S> acts;
  bilm_forward(tokens, params, &acts);
  const num::Tensor<S>& fwd_top = acts.layer[0][1].out;  // [T+2, proj]
  const num::Tensor<S>& bwd_top = acts.layer[1][1].out;

  // Row t predicts real token t+1 (padded index), i.e. forward uses padded
  // positions 0..T-1 and backward uses padded positions 2..T+1.
  num::Tensor<S> fwd_in({t_len, proj}), bwd_in({t_len, proj});
  for (std::size_t k = 0; k < t_len; ++k) {
    const S* f = fwd_top.row(k);
    const S* b = bwd_top.row(k + 2);
    S* fi = fwd_in.row(k);
    S* bi = bwd_in.row(k);
    for (std::size_t j = 0; j < proj; ++j) {
      fi[j] = f[j];
      bi[j] = b[j];
    }
  }
  num::Tensor<S> fwd_logits =
      num::affine(fwd_in, params.softmax_w.value, params.softmax_b.value);
  num::Tensor<S> bwd_logits =
      num::affine(bwd_in, params.softmax_w.value, params.softmax_b.value);

  num::Tensor<S> d_fwd_logits, d_bwd_logits;
  if (want_grads) {
    d_fwd_logits = num::Tensor<S>({t_len, vocab});
    d_bwd_logits = num::Tensor<S>({t_len, vocab});
  }
  for (std::size_t k = 0; k < t_len; ++k) {
    const std::size_t target = target_ids[k];
    if (target >= vocab) {
      throw ArgumentError("lm_sentence_loss: target id out of vocabulary");
    }
    result.forward_nll += num::softmax_xent(
        fwd_logits.row(k), vocab, target,
        want_grads ? d_fwd_logits.row(k) : nullptr, grad_scale);
    result.backward_nll += num::softmax_xent(
        bwd_logits.row(k), vocab, target,
        want_grads ? d_bwd_logits.row(k) : nullptr, grad_scale);
  }
  result.predictions = t_len;
  if (!want_grads) return result;

  num::Tensor<S> d_fwd_in({t_len, proj}), d_bwd_in({t_len, proj});
  num::affine_backward(fwd_in, params.softmax_w.value, d_fwd_logits, &d_fwd_in,
                       &params.softmax_w.grad, &params.softmax_b.grad);
  num::affine_backward(bwd_in, params.softmax_w.value, d_bwd_logits, &d_bwd_in,
                       &params.softmax_w.grad, &params.softmax_b.grad);

  const std::size_t p_len = t_len + 2;
  num::Tensor<S> d_fwd_top({p_len, proj}), d_bwd_top({p_len, proj});
  for (std::size_t k = 0; k < t_len; ++k) {
    const S* dfi = d_fwd_in.row(k);
    const S* dbi = d_bwd_in.row(k);
    S* df = d_fwd_top.row(k);
    S* db = d_bwd_top.row(k + 2);
    for (std::size_t j = 0; j < proj; ++j) {
      df[j] += dfi[j];
      db[j] += dbi[j];
    }
  }

  num::Tensor<S> d_token_repr({p_len, proj});
  for (std::size_t d = 0; d < 2; ++d) {
    const num::Direction dir =
        d == 0 ? num::Direction::kForward : num::Direction::kBackward;
    const num::Tensor<S>& d_top = d == 0 ? d_fwd_top : d_bwd_top;
    num::Tensor<S> d_mid({p_len, proj});
    bilm_layer_backward(params.layers[d][1], dir, acts.layer[d][1], d_top,
                        &d_mid);
    bilm_layer_backward(params.layers[d][0], dir, acts.layer[d][0], d_mid,
                        &d_token_repr);
  }
  char_encoder_backward(params.encoder, acts.encoder, d_token_repr);
  return result;
}

struct PerplexityReport {
  std::size_t token_count = 0;
  double forward_nll = 0.0;   // nats, summed over tokens
  double backward_nll = 0.0;
  double perplexity = 1.0;    // exp((fwd + bwd) / (2 * token_count))
};

template <typename S>
PerplexityReport perplexity(BilmParams<S>& params,
                            const text::Vocabulary& vocab,
                            const text::Corpus& corpus) {
  PerplexityReport report;
  for (const auto& sentence : corpus) {
    const auto tokens = sentence.token_texts();
    std::vector<std::size_t> ids(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      ids[i] = vocab.lookup(tokens[i]);
    }
    const LmLoss loss = lm_sentence_loss(params, tokens, ids, S(0));
    report.forward_nll += loss.forward_nll;
    report.backward_nll += loss.backward_nll;
    report.token_count += loss.predictions;
  }
  if (report.token_count == 0) {
    throw ArgumentError("perplexity: empty corpus");
  }
  report.perplexity = std::exp((report.forward_nll + report.backward_nll) /
                               (2.0 * static_cast<double>(report.token_count)));
  return report;
}

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean per-token per-direction NLL, nats
  double test_perplexity = 0.0;
  double wall_seconds = 0.0;
};

inline nlohmann::json epoch_log_json(const EpochLog& e) {
  return nlohmann::json{{"epoch", e.epoch},
                        {"train_loss", e.train_loss},
                        {"test_perplexity", e.test_perplexity},
                        {"wall_seconds", e.wall_seconds}};
}

// Shuffle, then group sentences of similar length into fixed-size batches,
// then shuffle the batch order. Deterministic under the rng.
inline std::vector<std::vector<std::size_t>> make_batches(
    const std::vector<std::size_t>& lengths, std::size_t batch_size,
    num::Rng& rng) {
  std::vector<std::size_t> order(lengths.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::stable_sort(order.begin(), order.end(),
                   [&lengths](std::size_t a, std::size_t b) {
                     return lengths[a] < lengths[b];
                   });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t end = std::min(order.size(), i + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  rng.shuffle(batches);
  return batches;
}

struct LmCheckpoint {
  int format_version = 1;
  LmConfig config;
  text::Vocabulary vocab;
  BilmParams<float> params;
};

inline ckpt::ArrayRefs lm_array_refs(BilmParams<float>& params) {
  ckpt::ArrayRefs refs;
  for (auto& [name, param] : params.param_map()) {
    refs.emplace_back(name, &param->value);
  }
  return refs;
}

inline std::string lm_content_hash(BilmParams<float>& params) {
  return ckpt::content_hash(lm_array_refs(params));
}

inline nlohmann::json lm_checkpoint_json(LmCheckpoint& ckpt) {
  nlohmann::json config;
  to_json(config, ckpt.config);
  config["vocabulary"] = ckpt.vocab.tokens();
  return nlohmann::json{{"format_version", ckpt.format_version},
                        {"kind", "lm"},
                        {"config", config},
                        {"arrays", ckpt::arrays_to_json(lm_array_refs(ckpt.params))}};
}

inline void save_lm_checkpoint(const std::string& path, LmCheckpoint& ckpt) {
  ckpt::write_json_file(path, lm_checkpoint_json(ckpt));
}

inline LmCheckpoint load_lm_checkpoint(const std::string& path) {
  const nlohmann::json j = ckpt::read_json_file(path);
  if (!j.contains("kind") || j.at("kind").get<std::string>() != "lm") {
    throw ParseError("'" + path + "' is not an lm checkpoint");
  }
  LmCheckpoint out;
  out.format_version = j.at("format_version").get<int>();
  if (out.format_version != 1) {
    throw ParseError("'" + path + "': unsupported format_version");
  }
  nlohmann::json config = j.at("config");
  if (!config.contains("vocabulary")) {
    throw ParseError("'" + path + "': checkpoint config lacks vocabulary");
  }
  const auto vocab_tokens =
      config.at("vocabulary").get<std::vector<std::string>>();
  config.erase("vocabulary");
  out.config = lm_config_from_json(config, path);
  out.vocab = text::Vocabulary::from_tokens(vocab_tokens,
                                            out.config.vocab_min_count);
  out.params = BilmParams<float>(out.config, out.vocab.size());
  ckpt::MutableArrayRefs refs;
  for (auto& [name, param] : out.params.param_map()) {
    refs.emplace_back(name, &param->value);
  }
  ckpt::arrays_from_json(j.at("arrays"), refs);
  return out;
}

// Trains the bidirectional language model with Adam on the summed two-
// direction cross-entropy. The vocabulary is built from the training corpus.
// Per-epoch lines in the training-log format go to `log` when given; entry 0
// reports the untrained model.
inline LmCheckpoint train_lm(const text::Corpus& train_corpus,
                             const text::Corpus& test_corpus,
                             const LmConfig& config, num::Rng rng,
                             std::ostream* log = nullptr,
                             std::vector<EpochLog>* history = nullptr) {
  config.validate();
  if (train_corpus.empty()) {
    throw ArgumentError("train_lm: empty training corpus");
  }
  LmCheckpoint ckpt;
  ckpt.config = config;
  ckpt.vocab = text::Vocabulary::build(train_corpus, config.vocab_min_count);
  ckpt.params = BilmParams<float>(config, ckpt.vocab.size());
  ckpt.params.init(rng);

  std::vector<std::vector<std::string>> tokens(train_corpus.size());
  std::vector<std::vector<std::size_t>> targets(train_corpus.size());
  std::vector<std::size_t> lengths(train_corpus.size());
  for (std::size_t i = 0; i < train_corpus.size(); ++i) {
    tokens[i] = train_corpus[i].token_texts();
    targets[i].resize(tokens[i].size());
    for (std::size_t k = 0; k < tokens[i].size(); ++k) {
      targets[i][k] = ckpt.vocab.lookup(tokens[i][k]);
    }
    lengths[i] = tokens[i].size();
  }

  num::AdamState<float> adam;
  adam.learning_rate = static_cast<float>(config.learning_rate);
  auto params = ckpt.params.param_map();

  const auto emit = [&](const EpochLog& entry) {
    if (history) history->push_back(entry);
    if (log) *log << epoch_log_json(entry).dump() << '\n';
  };
  const auto test_ppl = [&]() {
    return test_corpus.empty()
               ? 0.0
               : perplexity(ckpt.params, ckpt.vocab, test_corpus).perplexity;
  };

  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&start]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  };
  emit({0, 0.0, test_ppl(), elapsed()});

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    double epoch_nll = 0.0;
    std::size_t epoch_preds = 0;
    for (const auto& batch : make_batches(lengths, config.batch_size, rng)) {
      std::size_t batch_preds = 0;
      for (std::size_t si : batch) batch_preds += lengths[si];
      if (batch_preds == 0) continue;
      num::zero_grads(params);
      const float scale = 1.0f / (2.0f * static_cast<float>(batch_preds));
      for (std::size_t si : batch) {
        const LmLoss loss =
            lm_sentence_loss(ckpt.params, tokens[si], targets[si], scale);
        epoch_nll += loss.forward_nll + loss.backward_nll;
        epoch_preds += loss.predictions;
      }
      num::adam_step(params, adam);
    }
    const double train_loss =
        epoch_preds > 0 ? epoch_nll / (2.0 * static_cast<double>(epoch_preds))
                        : 0.0;
    emit({epoch, train_loss, test_ppl(), elapsed()});
  }
  return ckpt;
}

}  // namespace cce::lm
