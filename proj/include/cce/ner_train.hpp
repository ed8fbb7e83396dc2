#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "cce/ner.hpp"

namespace cce::ner {

struct NerEpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean CRF NLL per sentence, nats
  double wall_seconds = 0.0;
};

inline nlohmann::json ner_epoch_log_json(const NerEpochLog& e) {
  return nlohmann::json{{"epoch", e.epoch},
                        {"train_loss", e.train_loss},
                        {"wall_seconds", e.wall_seconds}};
}

template <typename S>
inline void scale_grads(const num::ParamMap<S>& params, S scale) {
  for (const auto& [name, p] : params) {
    (void)name;
    for (std::size_t k = 0; k < p->grad.size(); ++k) p->grad[k] *= scale;
  }
}

// Precomputed frozen features for the labeled sentences.
inline std::vector<lm::LayerStack<float>> frozen_stacks(
    lm::LmCheckpoint& lm_ckpt,
    const std::vector<eval::TaggedSentence>& sentences) {
  std::vector<lm::LayerStack<float>> stacks;
  stacks.reserve(sentences.size());
  for (const auto& s : sentences) {
    stacks.push_back(lm::bilm_forward(s.tokens, lm_ckpt.params));
  }
  return stacks;
}

// Minimizes the CRF negative log-likelihood with Adam over the scalar mix,
// encoder, emission projection and CRF parameters. The language model is
// read once up front and never touched.
inline NerCheckpoint train_ner(const std::vector<eval::TaggedSentence>& data,
                               lm::LmCheckpoint& lm_ckpt,
                               const NerConfig& config, std::uint64_t seed,
                               const std::string& lm_path = "",
                               std::ostream* log = nullptr,
                               std::vector<NerEpochLog>* history = nullptr) {
  config.validate();
  if (data.empty()) {
    throw ArgumentError("train_ner: empty training data");
  }
  const crf::TagSet tagset;
  const crf::TransitionMask mask = crf::transition_mask(tagset);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].tokens.empty()) {
      throw ArgumentError("train_ner: sentence " + std::to_string(i) +
                          " (doc " + data[i].doc_id + ") is empty");
    }
    if (data[i].tokens.size() != data[i].tags.size()) {
      throw ArgumentError("train_ner: sentence " + std::to_string(i) +
                          " has mismatched tokens and tags");
    }
    if (!crf::bio_valid(mask, data[i].tags)) {
      throw ArgumentError("train_ner: sentence " + std::to_string(i) +
                          " (doc " + data[i].doc_id +
                          ") has gold tags violating the BIO constraints");
    }
  }

  NerCheckpoint ckpt;
  ckpt.config = config;
  ckpt.seed = seed;
  ckpt.lm_path = lm_path;
  ckpt.lm_hash = lm::lm_content_hash(lm_ckpt.params);
  ckpt.params = NerParams<float>(
      config, 2 * lm_ckpt.params.projection_dim(), tagset);
  num::Rng rng(seed);
  ckpt.params.init(rng);

  const std::vector<lm::LayerStack<float>> stacks =
      frozen_stacks(lm_ckpt, data);

  std::vector<std::size_t> lengths(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    lengths[i] = data[i].tokens.size();
  }

  num::AdamState<float> adam;
  adam.learning_rate = static_cast<float>(config.learning_rate);
  auto params = ckpt.params.param_map();

  const auto start = std::chrono::steady_clock::now();
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    double epoch_nll = 0.0;
    std::size_t epoch_sentences = 0;
    for (const auto& batch : lm::make_batches(lengths, config.batch_size, rng)) {
      num::zero_grads(params);
      for (std::size_t si : batch) {
        EncodeCache<float> cache;
        num::Tensor<float> emissions =
            encode_from_stack(stacks[si], ckpt.params, config,
                              num::DropoutMode::kTrain, &rng, &cache);
        num::Tensor<float> d_emissions(emissions.shape());
        const float nll = crf::nll_and_gradients(emissions, ckpt.params.crf_params,
                                                 data[si].tags, &d_emissions);
        encode_backward(ckpt.params, cache, d_emissions);
        epoch_nll += nll;
        epoch_sentences += 1;
      }
      scale_grads(params, 1.0f / static_cast<float>(batch.size()));
      num::adam_step(params, adam);
    }
    if (log || history) {
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
              .count();
      const NerEpochLog entry{epoch,
                              epoch_sentences > 0
                                  ? epoch_nll / static_cast<double>(epoch_sentences)
                                  : 0.0,
                              wall};
      if (history) history->push_back(entry);
      if (log) *log << ner_epoch_log_json(entry).dump() << '\n';
    }
  }
  return ckpt;
}

// Emission scores for one sentence under a checkpoint pair. The hash check
// runs first: the frozen language model is part of the model identity.
inline num::Tensor<float> encode(const std::vector<std::string>& tokens,
                                 lm::LmCheckpoint& lm_ckpt,
                                 NerCheckpoint& ner_ckpt,
                                 num::DropoutMode mode,
                                 num::Rng* rng = nullptr) {
  require_lm_match(ner_ckpt, lm_ckpt);
  const lm::LayerStack<float> stack = lm::bilm_forward(tokens, lm_ckpt.params);
  return encode_from_stack(stack, ner_ckpt.params, ner_ckpt.config, mode, rng);
}

// Constrained Viterbi decoding over frozen features; the output is BIO-valid
// by construction.
inline std::vector<std::vector<std::size_t>> predict(
    NerCheckpoint& ner_ckpt, lm::LmCheckpoint& lm_ckpt,
    const std::vector<std::vector<std::string>>& sentences) {
  require_lm_match(ner_ckpt, lm_ckpt);
  std::vector<std::vector<std::size_t>> out;
  out.reserve(sentences.size());
  for (const auto& tokens : sentences) {
    if (tokens.empty()) {
      out.emplace_back();
      continue;
    }
    const lm::LayerStack<float> stack = lm::bilm_forward(tokens, lm_ckpt.params);
    num::Tensor<float> emissions = encode_from_stack(
        stack, ner_ckpt.params, ner_ckpt.config, num::DropoutMode::kEval,
        nullptr);
    out.push_back(crf::viterbi_decode(emissions, ner_ckpt.params.crf_params).first);
  }
  return out;
}

// Per-token modal tag across models; ties break toward the lower tag index
// (O first). The result may be BIO-invalid and is repaired by the caller.
inline std::vector<std::size_t> majority_vote_tags(
    const std::vector<std::vector<std::size_t>>& model_tags,
    std::size_t num_tags) {
  if (model_tags.empty()) {
    throw ArgumentError("majority_vote_tags: no votes");
  }
  const std::size_t t_len = model_tags[0].size();
  std::vector<std::size_t> out(t_len);
  std::vector<std::size_t> counts(num_tags);
  for (std::size_t t = 0; t < t_len; ++t) {
    std::fill(counts.begin(), counts.end(), 0);
    for (const auto& tags : model_tags) {
      if (tags.size() != t_len) {
        throw ArgumentError("majority_vote_tags: ragged vote matrix");
      }
      counts.at(tags[t]) += 1;
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < num_tags; ++i) {
      if (counts[i] > counts[best]) best = i;
    }
    out[t] = best;
  }
  return out;
}

// Per-token majority vote across models; ties break toward the lower tag
// index. Voting can produce invalid BIO sequences even from valid inputs,
// so outputs are repaired afterwards.
inline std::vector<std::vector<std::size_t>> ensemble_predict(
    std::vector<NerCheckpoint*> checkpoints, lm::LmCheckpoint& lm_ckpt,
    const std::vector<std::vector<std::string>>& sentences) {
  if (checkpoints.empty()) {
    throw ArgumentError("ensemble_predict: no checkpoints");
  }
  for (const auto* c : checkpoints) {
    if (c->lm_hash != checkpoints[0]->lm_hash) {
      throw ArgumentError(
          "ensemble_predict: checkpoints reference different language models");
    }
  }
  const crf::TagSet tagset;
  std::vector<std::vector<std::vector<std::size_t>>> votes;
  votes.reserve(checkpoints.size());
  for (auto* c : checkpoints) {
    votes.push_back(predict(*c, lm_ckpt, sentences));
  }
  std::vector<std::vector<std::size_t>> out;
  out.reserve(sentences.size());
  std::vector<std::vector<std::size_t>> per_model(checkpoints.size());
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    for (std::size_t m = 0; m < votes.size(); ++m) {
      per_model[m] = votes[m][s];
    }
    out.push_back(eval::repair_bio(
        majority_vote_tags(per_model, tagset.size()), tagset));
  }
  return out;
}

}  // namespace cce::ner
