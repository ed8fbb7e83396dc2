#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <type_traits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cce/ops.hpp"
#include "cce/tensor.hpp"

namespace cce::crf {

// Fixed BIO tag inventory over the three concept classes. The order is part
// of the external contract: serialization, Viterbi tie-breaking and ensemble
// vote tie-breaking all follow it.
class TagSet {
 public:
  static constexpr std::size_t kOutside = 0;

  TagSet()
      : tags_{"O", "B-problem", "I-problem", "B-treatment", "I-treatment",
              "B-test", "I-test"},
        classes_{"problem", "treatment", "test"} {}

  std::size_t size() const { return tags_.size(); }
  std::size_t num_classes() const { return classes_.size(); }
  const std::vector<std::string>& tags() const { return tags_; }
  const std::vector<std::string>& classes() const { return classes_; }
  const std::string& tag(std::size_t id) const { return tags_.at(id); }
  const std::string& class_name(std::size_t cls) const {
    return classes_.at(cls);
  }

  std::optional<std::size_t> find(const std::string& tag) const {
    for (std::size_t i = 0; i < tags_.size(); ++i) {
      if (tags_[i] == tag) return i;
    }
    return std::nullopt;
  }

  std::optional<std::size_t> find_class(const std::string& name) const {
    for (std::size_t i = 0; i < classes_.size(); ++i) {
      if (classes_[i] == name) return i;
    }
    return std::nullopt;
  }

  bool is_begin(std::size_t id) const { return id != kOutside && id % 2 == 1; }
  bool is_inside(std::size_t id) const { return id != kOutside && id % 2 == 0; }
  std::size_t class_of(std::size_t id) const {
    if (id == kOutside || id >= tags_.size()) {
      throw ArgumentError("TagSet: tag id " + std::to_string(id) +
                          " has no class");
    }
    return (id - 1) / 2;
  }
  std::size_t begin_tag(std::size_t cls) const { return 1 + 2 * cls; }
  std::size_t inside_tag(std::size_t cls) const { return 2 + 2 * cls; }

 private:
  std::vector<std::string> tags_;
  std::vector<std::string> classes_;
};

// Permitted transitions. Forbidden entries behave as score kMaskedScore in
// every algorithm; the corresponding parameters never enter the computation
// and therefore receive zero gradient.
struct TransitionMask {
  std::size_t n = 0;
  std::vector<std::uint8_t> allowed;        // [n*n], row-major from->to
  std::vector<std::uint8_t> start_allowed;  // [n]
  std::vector<std::uint8_t> end_allowed;    // [n]

  explicit TransitionMask(std::size_t tags = 0)
      : n(tags),
        allowed(tags * tags, 1),
        start_allowed(tags, 1),
        end_allowed(tags, 1) {}

  bool at(std::size_t from, std::size_t to) const {
    return allowed[from * n + to] != 0;
  }
  std::size_t row_permit_count(std::size_t from) const {
    std::size_t c = 0;
    for (std::size_t j = 0; j < n; ++j) c += at(from, j) ? 1 : 0;
    return c;
  }
};

// BIO validity: I-X may only continue a span of the same class X; any tag
// may follow O or start a new span with B-X; every tag may end a sequence.
inline TransitionMask transition_mask(const TagSet& tagset) {
  const std::size_t n = tagset.size();
  TransitionMask mask(n);
  for (std::size_t to = 0; to < n; ++to) {
    if (!tagset.is_inside(to)) continue;
    const std::size_t cls = tagset.class_of(to);
    mask.start_allowed[to] = 0;
    for (std::size_t from = 0; from < n; ++from) {
      const bool compatible = from != TagSet::kOutside &&
                              tagset.class_of(from) == cls;
      if (!compatible) mask.allowed[from * n + to] = 0;
    }
  }
  return mask;
}

template <typename S>
struct CrfParams {
  static constexpr S kMaskedScore = S(-10000);

  num::Param<S> transitions;   // [n, n], score of tag_i -> tag_j
  num::Param<S> start_scores;  // [n]
  num::Param<S> end_scores;    // [n]
  TransitionMask mask;

  CrfParams() = default;

  // Unconstrained over `n` tags.
  explicit CrfParams(std::size_t n)
      : transitions({n, n}), start_scores({n}), end_scores({n}), mask(n) {}

  // BIO-constrained over the fixed tagset. Zero-initialized scores.
  explicit CrfParams(const TagSet& tagset) : CrfParams(tagset.size()) {
    mask = transition_mask(tagset);
  }

  std::size_t num_tags() const { return start_scores.value.size(); }

  S eff_transition(std::size_t from, std::size_t to) const {
    return mask.at(from, to) ? transitions.value(from, to) : kMaskedScore;
  }
  S eff_start(std::size_t tag) const {
    return mask.start_allowed[tag] ? start_scores.value[tag] : kMaskedScore;
  }
  S eff_end(std::size_t tag) const {
    return mask.end_allowed[tag] ? end_scores.value[tag] : kMaskedScore;
  }

  template <typename T>
  CrfParams<T> cast() const {
    CrfParams<T> out(num_tags());
    out.transitions = transitions.template cast<T>();
    out.start_scores = start_scores.template cast<T>();
    out.end_scores = end_scores.template cast<T>();
    out.mask = mask;
    return out;
  }
};

template <typename S>
inline void check_instance(const num::Tensor<S>& emissions,
                           const CrfParams<S>& params) {
  if (emissions.ndim() != 2 || emissions.cols() != params.num_tags()) {
    throw DimensionError("crf: emissions " + emissions.shape_str() +
                         " incompatible with " +
                         std::to_string(params.num_tags()) + " tags");
  }
  if (emissions.rows() == 0) {
    throw ArgumentError("crf: empty sequence");
  }
}

template <typename S>
inline void check_tags(const CrfParams<S>& params,
                       const std::vector<std::size_t>& tags, std::size_t t_len) {
  if (tags.size() != t_len) {
    throw ArgumentError("crf: tag sequence length " +
                        std::to_string(tags.size()) + " != " +
                        std::to_string(t_len));
  }
  for (std::size_t y : tags) {
    if (y >= params.num_tags()) {
      throw ArgumentError("crf: tag index " + std::to_string(y) +
                          " out of range");
    }
  }
}

// start[y1] + sum_t emissions[t, y_t] + sum_t transitions[y_t, y_{t+1}]
// + end[y_T], with masked entries at kMaskedScore.
template <typename S>
S score_path(const num::Tensor<S>& emissions, const CrfParams<S>& params,
             const std::vector<std::size_t>& tags) {
  check_instance(emissions, params);
  check_tags(params, tags, emissions.rows());
  S score = params.eff_start(tags[0]);
  for (std::size_t t = 0; t < tags.size(); ++t) {
    score += emissions(t, tags[t]);
    if (t + 1 < tags.size()) score += params.eff_transition(tags[t], tags[t + 1]);
  }
  score += params.eff_end(tags.back());
  return score;
}

// log sum over all tag paths of exp(score_path), by the forward recursion in
// log space.
template <typename S>
S log_partition(const num::Tensor<S>& emissions, const CrfParams<S>& params) {
  check_instance(emissions, params);
  const std::size_t t_len = emissions.rows();
  const std::size_t n = params.num_tags();
  std::vector<double> alpha(n), next(n), work(n);
  for (std::size_t j = 0; j < n; ++j) {
    alpha[j] = static_cast<double>(params.eff_start(j)) +
               static_cast<double>(emissions(0, j));
  }
  for (std::size_t t = 1; t < t_len; ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        work[i] = alpha[i] + static_cast<double>(params.eff_transition(i, j));
      }
      next[j] = num::log_sum_exp(work.data(), n) +
                static_cast<double>(emissions(t, j));
    }
    alpha.swap(next);
  }
  for (std::size_t j = 0; j < n; ++j) {
    work[j] = alpha[j] + static_cast<double>(params.eff_end(j));
  }
  return static_cast<S>(num::log_sum_exp(work.data(), n));
}

// Highest-scoring path. Ties break toward the lower tag index at each
// backtracking step; the returned score is score_path of the returned tags.
template <typename S>
std::pair<std::vector<std::size_t>, S> viterbi_decode(
    const num::Tensor<S>& emissions, const CrfParams<S>& params) {
  check_instance(emissions, params);
  const std::size_t t_len = emissions.rows();
  const std::size_t n = params.num_tags();
  std::vector<double> delta(n), next(n);
  std::vector<std::size_t> back((t_len > 0 ? t_len - 1 : 0) * n);

  for (std::size_t j = 0; j < n; ++j) {
    delta[j] = static_cast<double>(params.eff_start(j)) +
               static_cast<double>(emissions(0, j));
  }
  for (std::size_t t = 1; t < t_len; ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      double best = -std::numeric_limits<double>::infinity();
      std::size_t best_i = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double s =
            delta[i] + static_cast<double>(params.eff_transition(i, j));
        if (s > best) {
          best = s;
          best_i = i;
        }
      }
      next[j] = best + static_cast<double>(emissions(t, j));
      back[(t - 1) * n + j] = best_i;
    }
    delta.swap(next);
  }

  double best = -std::numeric_limits<double>::infinity();
  std::size_t best_last = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double s = delta[j] + static_cast<double>(params.eff_end(j));
    if (s > best) {
      best = s;
      best_last = j;
    }
  }

  std::vector<std::size_t> path(t_len);
  path[t_len - 1] = best_last;
  for (std::size_t t = t_len - 1; t-- > 0;) {
    path[t] = back[t * n + path[t + 1]];
  }
  return {path, score_path(emissions, params, path)};
}

inline bool bio_valid(const TransitionMask& mask,
                      const std::vector<std::size_t>& tags) {
  if (tags.empty()) return true;
  if (!mask.start_allowed[tags[0]]) return false;
  for (std::size_t t = 0; t + 1 < tags.size(); ++t) {
    if (!mask.at(tags[t], tags[t + 1])) return false;
  }
  return mask.end_allowed[tags.back()] != 0;
}

// Negative log-likelihood log_partition - score_path(gold), with gradients
// from forward-backward marginals minus gold indicator counts. Emission
// gradients accumulate into *d_emissions (same shape as emissions) and
// parameter gradients into params.*.grad. Masked entries stay at gradient
// zero: the masked score is a constant, not the parameter.
template <typename S>
S nll_and_gradients(const num::Tensor<S>& emissions, CrfParams<S>& params,
                    const std::vector<std::size_t>& gold,
                    std::type_identity_t<num::Tensor<S>*> d_emissions) {
  check_instance(emissions, params);
  check_tags(params, gold, emissions.rows());
  const std::size_t t_len = emissions.rows();
  const std::size_t n = params.num_tags();

  if (!params.mask.start_allowed[gold[0]] ||
      !params.mask.end_allowed[gold.back()]) {
    throw ArgumentError("crf: gold path violates the transition mask");
  }
  for (std::size_t t = 0; t + 1 < t_len; ++t) {
    if (!params.mask.at(gold[t], gold[t + 1])) {
      throw ArgumentError("crf: gold path violates the transition mask at "
                          "position " + std::to_string(t));
    }
  }

  // Forward and backward log messages.
  std::vector<double> alpha(t_len * n), beta(t_len * n), work(n);
  for (std::size_t j = 0; j < n; ++j) {
    alpha[j] = static_cast<double>(params.eff_start(j)) +
               static_cast<double>(emissions(0, j));
  }
  for (std::size_t t = 1; t < t_len; ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        work[i] = alpha[(t - 1) * n + i] +
                  static_cast<double>(params.eff_transition(i, j));
      }
      alpha[t * n + j] = num::log_sum_exp(work.data(), n) +
                         static_cast<double>(emissions(t, j));
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    beta[(t_len - 1) * n + j] = static_cast<double>(params.eff_end(j));
  }
  for (std::size_t t = t_len - 1; t-- > 0;) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        work[j] = static_cast<double>(params.eff_transition(i, j)) +
                  static_cast<double>(emissions(t + 1, j)) +
                  beta[(t + 1) * n + j];
      }
      beta[t * n + i] = num::log_sum_exp(work.data(), n);
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    work[j] = alpha[(t_len - 1) * n + j] +
              static_cast<double>(params.eff_end(j));
  }
  const double log_z = num::log_sum_exp(work.data(), n);

  // Unary marginals -> emission, start and end gradients.
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      const double m = std::exp(alpha[t * n + j] + beta[t * n + j] - log_z);
      const double indicator = gold[t] == j ? 1.0 : 0.0;
      const S g = static_cast<S>(m - indicator);
      if (d_emissions) (*d_emissions)(t, j) += g;
      if (t == 0 && params.mask.start_allowed[j]) {
        params.start_scores.grad[j] += g;
      }
      if (t == t_len - 1 && params.mask.end_allowed[j]) {
        params.end_scores.grad[j] += g;
      }
    }
  }
  // Pairwise marginals -> transition gradients.
  for (std::size_t t = 0; t + 1 < t_len; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (!params.mask.at(i, j)) continue;
        const double m =
            std::exp(alpha[t * n + i] +
                     static_cast<double>(params.eff_transition(i, j)) +
                     static_cast<double>(emissions(t + 1, j)) +
                     beta[(t + 1) * n + j] - log_z);
        const double indicator =
            (gold[t] == i && gold[t + 1] == j) ? 1.0 : 0.0;
        params.transitions.grad(i, j) += static_cast<S>(m - indicator);
      }
    }
  }

  const S gold_score = score_path(emissions, params, gold);
  return static_cast<S>(log_z) - gold_score;
}

}  // namespace cce::crf
