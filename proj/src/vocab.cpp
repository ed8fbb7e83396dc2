#include "cce/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "cce/error.hpp"

namespace cce::text {

Vocabulary::Vocabulary() {
  id_to_token_ = {kBosToken, kEosToken, kUnkToken};
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    token_to_id_[id_to_token_[i]] = i;
  }
}

Vocabulary Vocabulary::build(const Corpus& corpus, std::size_t min_count) {
  if (min_count < 1) {
    throw ArgumentError("Vocabulary::build: min_count must be >= 1");
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& sentence : corpus) {
    for (const auto& token : sentence.tokens) {
      counts[token.text] += 1;
    }
  }
  std::vector<std::pair<std::string, std::size_t>> qualifying;
  for (const auto& [token, count] : counts) {
    if (count >= min_count) qualifying.emplace_back(token, count);
  }
  std::sort(qualifying.begin(), qualifying.end(),
            [](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second > b.second;
              return a.first < b.first;
            });
  Vocabulary vocab;
  vocab.min_count_ = min_count;
  for (const auto& [token, count] : qualifying) {
    (void)count;
    vocab.token_to_id_[token] = vocab.id_to_token_.size();
    vocab.id_to_token_.push_back(token);
  }
  return vocab;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& id_to_token,
                                   std::size_t min_count) {
  if (id_to_token.size() < 3 || id_to_token[0] != kBosToken ||
      id_to_token[1] != kEosToken || id_to_token[2] != kUnkToken) {
    throw ValidationError(
        "Vocabulary: token list must begin with the three specials");
  }
  Vocabulary vocab;
  vocab.min_count_ = min_count;
  vocab.id_to_token_ = id_to_token;
  vocab.token_to_id_.clear();
  for (std::size_t i = 0; i < id_to_token.size(); ++i) {
    if (!vocab.token_to_id_.emplace(id_to_token[i], i).second) {
      throw ValidationError("Vocabulary: duplicate token '" + id_to_token[i] +
                            "'");
    }
  }
  return vocab;
}

std::size_t Vocabulary::lookup(const std::string& token) const {
  const auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ValidationError("Vocabulary::save: cannot open '" + path + "'");
  }
  for (const auto& token : id_to_token_) {
    out << token << '\n';
  }
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("Vocabulary::load: cannot open '" + path + "'");
  }
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return from_tokens(tokens);
}

}  // namespace cce::text
