#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "cce/text.hpp"

namespace cce::text {

// Closed token inventory with three leading specials. Out-of-vocabulary
// tokens resolve to the unknown id at lookup time.
class Vocabulary {
 public:
  static constexpr std::size_t kBos = 0;
  static constexpr std::size_t kEos = 1;
  static constexpr std::size_t kUnk = 2;
  static constexpr const char* kBosToken = "<S>";
  static constexpr const char* kEosToken = "</S>";
  static constexpr const char* kUnkToken = "<UNK>";

  Vocabulary();  // specials only

  // Tokens occurring at least `min_count` times, ordered by descending count
  // then lexicographically.
  static Vocabulary build(const Corpus& corpus, std::size_t min_count);

  static Vocabulary from_tokens(const std::vector<std::string>& id_to_token,
                                std::size_t min_count = 1);

  std::size_t size() const { return id_to_token_.size(); }
  std::size_t min_count() const { return min_count_; }
  std::size_t lookup(const std::string& token) const;
  const std::string& token(std::size_t id) const { return id_to_token_.at(id); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  bool operator==(const Vocabulary& other) const {
    return id_to_token_ == other.id_to_token_;
  }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, std::size_t> token_to_id_;
  std::size_t min_count_ = 1;
};

}  // namespace cce::text
