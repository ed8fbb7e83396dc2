#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cce/conll_io.hpp"
#include "cce/rng.hpp"

namespace cce::synth {

// Stand-in for the restricted clinical datasets: templated sentences with
// slot-filled entity mentions and synthetic filler words. Every generated
// sentence carries gold spans consistent with its tags.
struct SyntheticSpec {
  int format_version = 1;
  std::size_t sentence_count = 0;
  std::uint64_t seed = 0;
  std::size_t filler_vocab_size = 120;
  bool shuffle_tokens = false;  // destroys word order; tags become all-O
  std::size_t sentences_per_doc = 10;
  // class name -> entity surface forms (multi-token forms space-separated)
  std::map<std::string, std::vector<std::string>> lexicons;
  // space-separated tokens; {class} draws an entity, {w} a filler word
  std::vector<std::string> templates;

  void validate() const;

  static SyntheticSpec from_json(const nlohmann::json& j,
                                 const std::string& context);
  nlohmann::json to_json() const;
  static SyntheticSpec load(const std::string& path);

  // A ready-made clinical-flavored spec used by the test suites.
  static SyntheticSpec example(std::size_t sentence_count, std::uint64_t seed);
};

struct SyntheticData {
  std::vector<eval::TaggedSentence> sentences;
  std::vector<eval::Span> gold;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Writes corpus.txt, tags.conll and spans.tsv under `dir`.
void write_synthetic(const std::string& dir, const SyntheticData& data);

}  // namespace cce::synth
