#pragma once

#include <string>
#include <vector>

#include "cce/spans.hpp"
#include "cce/text.hpp"

namespace cce::eval {

struct TaggedSentence {
  std::string doc_id;
  std::size_t index = 0;
  std::vector<std::string> tokens;
  std::vector<std::size_t> tags;
};

// CoNLL-style tag file: one `token<TAB>tag` per line, a blank line between
// sentences, and a `-DOC- <id>` line starting each document. Files without
// -DOC- lines fall into an implicit document "doc0".
std::vector<TaggedSentence> read_conll(const std::string& path,
                                       const crf::TagSet& tagset);
void write_conll(const std::string& path,
                 const std::vector<TaggedSentence>& sentences,
                 const crf::TagSet& tagset);

// Standoff span file: doc_id, sentence_index, start_token, end_token, class
// name, tab-separated, one span per line.
std::vector<Span> read_standoff(const std::string& path,
                                const crf::TagSet& tagset);
void write_standoff(const std::string& path, const std::vector<Span>& spans,
                    const crf::TagSet& tagset);

// Converts tagged sentences to global spans (bio_to_spans per sentence,
// which applies the stray-inside repair).
std::vector<Span> spans_from_tagged(const std::vector<TaggedSentence>& sentences,
                                    const crf::TagSet& tagset);

// Reads either file format, sniffing the first meaningful line.
std::vector<Span> read_spans_any(const std::string& path,
                                 const crf::TagSet& tagset);

// Corpus-format helpers for prediction input/output.
std::vector<TaggedSentence> untagged_from_corpus(const text::Corpus& corpus);

}  // namespace cce::eval
