#include "cce/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>

#include "cce/checkpoint.hpp"
#include "cce/corpus_io.hpp"
#include "cce/error.hpp"

namespace cce::synth {

void SyntheticSpec::validate() const {
  if (sentence_count == 0) {
    throw ArgumentError("synthetic spec: sentence_count must be >= 1");
  }
  if (templates.empty()) {
    throw ArgumentError("synthetic spec: at least one template required");
  }
  if (sentences_per_doc == 0) {
    throw ArgumentError("synthetic spec: sentences_per_doc must be >= 1");
  }
  const crf::TagSet tagset;
  for (const auto& [name, entries] : lexicons) {
    if (!tagset.find_class(name)) {
      throw ArgumentError("synthetic spec: unknown class '" + name + "'");
    }
    if (entries.empty()) {
      throw ArgumentError("synthetic spec: empty lexicon for class '" + name +
                          "'");
    }
  }
  for (const auto& tmpl : templates) {
    std::size_t pos = 0;
    while ((pos = tmpl.find('{', pos)) != std::string::npos) {
      const std::size_t close = tmpl.find('}', pos);
      if (close == std::string::npos) {
        throw ArgumentError("synthetic spec: unterminated slot in template '" +
                            tmpl + "'");
      }
      const std::string slot = tmpl.substr(pos + 1, close - pos - 1);
      if (slot != "w" && !lexicons.count(slot)) {
        throw ArgumentError("synthetic spec: template slot '{" + slot +
                            "}' has no lexicon");
      }
      if (slot == "w" && filler_vocab_size == 0) {
        throw ArgumentError(
            "synthetic spec: {w} slot requires filler_vocab_size > 0");
      }
      pos = close + 1;
    }
  }
}

SyntheticSpec SyntheticSpec::from_json(const nlohmann::json& j,
                                       const std::string& context) {
  SyntheticSpec spec;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "format_version") {
        spec.format_version = value.get<int>();
      } else if (key == "sentence_count") {
        spec.sentence_count = value.get<std::size_t>();
      } else if (key == "seed") {
        spec.seed = value.get<std::uint64_t>();
      } else if (key == "filler_vocab_size") {
        spec.filler_vocab_size = value.get<std::size_t>();
      } else if (key == "shuffle_tokens") {
        spec.shuffle_tokens = value.get<bool>();
      } else if (key == "sentences_per_doc") {
        spec.sentences_per_doc = value.get<std::size_t>();
      } else if (key == "lexicons") {
        spec.lexicons =
            value.get<std::map<std::string, std::vector<std::string>>>();
      } else if (key == "templates") {
        spec.templates = value.get<std::vector<std::string>>();
      } else {
        throw ValidationError(context + ": unknown key '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(context + ": bad value for '" + key + "': " +
                            e.what());
    }
  }
  if (spec.format_version != 1) {
    throw ValidationError(context + ": unsupported format_version");
  }
  spec.validate();
  return spec;
}

nlohmann::json SyntheticSpec::to_json() const {
  return nlohmann::json{{"format_version", format_version},
                        {"sentence_count", sentence_count},
                        {"seed", seed},
                        {"filler_vocab_size", filler_vocab_size},
                        {"shuffle_tokens", shuffle_tokens},
                        {"sentences_per_doc", sentences_per_doc},
                        {"lexicons", lexicons},
                        {"templates", templates}};
}

SyntheticSpec SyntheticSpec::load(const std::string& path) {
  return from_json(ckpt::read_json_file(path), path);
}

SyntheticSpec SyntheticSpec::example(std::size_t sentence_count,
                                     std::uint64_t seed) {
  SyntheticSpec spec;
  spec.sentence_count = sentence_count;
  spec.seed = seed;
  spec.filler_vocab_size = 160;
  spec.lexicons["problem"] = {
      "hypertension",  "diabetes",     "chest pain",   "pneumonia",
      "acute asthma",  "migraine",     "anemia",       "renal failure",
      "sepsis",        "atrial fibrillation"};
  spec.lexicons["treatment"] = {
      "aspirin",        "metformin",  "insulin therapy", "lisinopril",
      "ibuprofen",      "physical therapy", "warfarin",  "amoxicillin",
      "oxygen support", "atorvastatin"};
  spec.lexicons["test"] = {
      "blood culture", "mri",        "chest x-ray", "ecg",
      "glucose test",  "biopsy",     "lipid panel", "ultrasound",
      "colonoscopy",   "urine analysis"};
  spec.templates = {
      "the patient reports {problem} since the last visit",
      "patient denies {problem} and {problem}",
      "started {treatment} for {problem}",
      "ordered {test} to rule out {problem}",
      "{test} was within normal limits",
      "continue {treatment} as needed",
      "history of {problem} managed with {treatment}",
      "plan : {test} and {test} tomorrow",
      "no adverse reaction to {treatment}",
      "{test} confirmed {problem}",
      "adjust {treatment} {treatment} regimen",
      "discussed {w} {w} with the family",
      "follow up in {w} weeks",
      "patient states {w} {w} {w} clearly",
      "stable on {treatment}",
      "will schedule {test} next week"};
  return spec;
}

namespace {

std::vector<std::string> split_spaces(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    while (pos < s.size() && s[pos] == ' ') ++pos;
    if (pos >= s.size()) break;
    std::size_t end = s.find(' ', pos);
    if (end == std::string::npos) end = s.size();
    out.push_back(s.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

std::string filler_word(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "f%03zu", index);
  return buf;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const crf::TagSet tagset;
  num::Rng rng(spec.seed);
  SyntheticData data;

  for (std::size_t n = 0; n < spec.sentence_count; ++n) {
    const std::string& tmpl =
        spec.templates[rng.below(spec.templates.size())];
    eval::TaggedSentence sentence;
    // Same file-order naming the corpus reader synthesizes, so spans from
    // tags.conll and from predictions over corpus.txt share document keys.
    sentence.doc_id = "doc" + std::to_string(n / spec.sentences_per_doc);
    sentence.index = n % spec.sentences_per_doc;

    for (const auto& piece : split_spaces(tmpl)) {
      if (piece.size() >= 2 && piece.front() == '{' && piece.back() == '}') {
        const std::string slot = piece.substr(1, piece.size() - 2);
        if (slot == "w") {
          sentence.tokens.push_back(
              filler_word(rng.below(spec.filler_vocab_size)));
          sentence.tags.push_back(crf::TagSet::kOutside);
          continue;
        }
        const auto& lexicon = spec.lexicons.at(slot);
        const std::size_t cls = *tagset.find_class(slot);
        const auto entity_tokens =
            split_spaces(lexicon[rng.below(lexicon.size())]);
        for (std::size_t i = 0; i < entity_tokens.size(); ++i) {
          sentence.tokens.push_back(entity_tokens[i]);
          sentence.tags.push_back(i == 0 ? tagset.begin_tag(cls)
                                         : tagset.inside_tag(cls));
        }
        continue;
      }
      sentence.tokens.push_back(piece);
      sentence.tags.push_back(crf::TagSet::kOutside);
    }
    data.sentences.push_back(std::move(sentence));
  }

  if (spec.shuffle_tokens) {
    std::vector<std::string> all_tokens;
    for (const auto& s : data.sentences) {
      all_tokens.insert(all_tokens.end(), s.tokens.begin(), s.tokens.end());
    }
    rng.shuffle(all_tokens);
    std::size_t pos = 0;
    for (auto& s : data.sentences) {
      for (std::size_t t = 0; t < s.tokens.size(); ++t) {
        s.tokens[t] = all_tokens[pos++];
        s.tags[t] = crf::TagSet::kOutside;
      }
    }
  }

  data.gold = eval::spans_from_tagged(data.sentences, tagset);
  return data;
}

void write_synthetic(const std::string& dir, const SyntheticData& data) {
  std::filesystem::create_directories(dir);
  const crf::TagSet tagset;

  text::Corpus corpus;
  for (const auto& s : data.sentences) {
    text::Sentence sentence;
    sentence.doc_id = s.doc_id;
    sentence.index = s.index;
    std::size_t offset = 0;
    for (const auto& token : s.tokens) {
      sentence.tokens.push_back({token, offset, offset + token.size()});
      offset += token.size() + 1;
    }
    corpus.push_back(std::move(sentence));
  }
  text::write_corpus(dir + "/corpus.txt", corpus);
  eval::write_conll(dir + "/tags.conll", data.sentences, tagset);
  eval::write_standoff(dir + "/spans.tsv", data.gold, tagset);
}

}  // namespace cce::synth
