#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "cce/error.hpp"
#include "cce/rng.hpp"

namespace cce::text {

struct Token {
  std::string text;
  std::size_t char_start = 0;  // byte offsets into the source sentence
  std::size_t char_end = 0;
};

struct Sentence {
  std::string doc_id;
  std::size_t index = 0;  // position within the document
  std::vector<Token> tokens;

  std::vector<std::string> token_texts() const {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(t.text);
    return out;
  }
};

using Corpus = std::vector<Sentence>;

enum class DocSource { kWiki, kClinicalNote, kSynthetic };

struct Document {
  std::string id;
  std::string text;
  DocSource source = DocSource::kClinicalNote;
};

struct WikiSection {
  std::string heading;
  std::string body;
};

struct WikiPage {
  std::string title;
  std::vector<WikiSection> sections;
};

struct SentenceSpan {
  std::string text;  // trimmed; equals the input bytes [char_start, char_end)
  std::size_t char_start = 0;
  std::size_t char_end = 0;
};

struct CorpusStats {
  std::size_t documents = 0;
  std::size_t sentences = 0;
  std::size_t tokens = 0;
  double average_sentence_length = 0.0;  // tokens / sentences, 0 when empty
};

// Rule-based sentence boundary detection:
//   - a blank line is always a boundary,
//   - [.?!] followed by whitespace and an uppercase letter or digit splits,
//     unless the run ending at the period is a known abbreviation
//     (Dr. Mr. Mrs. Ms. Pt. e.g. i.e. etc. vs. Fig.),
//   - ':' followed by whitespace or end of line ends a header sentence when
//     at most 5 tokens have accumulated since the last boundary.
// Returned segments are trimmed, non-empty, and separated only by
// whitespace, so joining them with the skipped gaps reconstructs the input.
std::vector<SentenceSpan> segment_sentences(const std::string& text);

// Rule tokenizer: splits punctuation from words while keeping decimal
// numbers (3.5), digit fractions (120/80) and hyphenated alphanumerics
// (x-ray) whole. Bytes >= 0x80 count as word characters so multi-byte UTF-8
// stays intact. Offsets cover every non-whitespace byte exactly once.
std::vector<Token> tokenize(const std::string& sentence);

// Replaces [** ... **] placeholders: name categories become "John Doe",
// dates "2010-01-01", bare numbers "0", hospitals and locations
// "General Hospital"; anything else keeps its inner text. An unterminated
// placeholder passes through unchanged and is reported to `log`.
std::string normalize_deid(const std::string& text, std::ostream* log = nullptr);

// Keeps pages whose normalized title (ASCII case-fold, whitespace collapse)
// equals a normalized term, drops the excluded reference-style sections, and
// removes every page of any term matching more than one page.
std::vector<Document> filter_wiki(const std::vector<WikiPage>& pages,
                                  const std::vector<std::string>& terms);

CorpusStats corpus_stats(const Corpus& corpus);

// Disjoint, exhaustive partition with |train| = round(fraction * N),
// deterministic under the rng seed. Each side preserves input order.
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus,
                                       double train_fraction, num::Rng& rng);

// Shared helpers.
std::string normalize_title(const std::string& s);
bool is_blank(const std::string& s);

}  // namespace cce::text
