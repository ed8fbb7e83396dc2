#pragma once

#include <string>
#include <vector>

#include "cce/text.hpp"

namespace cce::text {

// Sentence corpus file: one tokenized sentence per line, tokens separated by
// single spaces, a blank line between documents. Document ids are synthesized
// as doc0, doc1, ... in file order.
Corpus read_corpus(const std::string& path);
void write_corpus(const std::string& path, const Corpus& corpus);

// One term per line; blank lines ignored.
std::vector<std::string> read_terms(const std::string& path);

// One JSON object per line: {"title": str, "sections": [[heading, body], ...]}.
std::vector<WikiPage> read_pages_jsonl(const std::string& path);

// Runs segmentation and tokenization over a document's text.
Corpus sentences_from_document(const Document& doc);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace cce::text
