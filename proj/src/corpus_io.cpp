#include "cce/corpus_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cce/error.hpp"

namespace cce::text {

namespace {

Sentence sentence_from_line(const std::string& line, const std::string& doc_id,
                            std::size_t index) {
  Sentence s;
  s.doc_id = doc_id;
  s.index = index;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && line[pos] == ' ') ++pos;
    if (pos >= line.size()) break;
    std::size_t end = line.find(' ', pos);
    if (end == std::string::npos) end = line.size();
    s.tokens.push_back({line.substr(pos, end - pos), pos, end});
    pos = end;
  }
  return s;
}

}  // namespace

Corpus read_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("read_corpus: cannot open '" + path + "'");
  }
  Corpus corpus;
  std::string line;
  std::size_t doc = 0, index = 0;
  bool doc_has_sentences = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) {
      if (doc_has_sentences) {
        ++doc;
        index = 0;
        doc_has_sentences = false;
      }
      continue;
    }
    corpus.push_back(
        sentence_from_line(line, "doc" + std::to_string(doc), index));
    ++index;
    doc_has_sentences = true;
  }
  return corpus;
}

void write_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ValidationError("write_corpus: cannot open '" + path + "'");
  }
  const std::string* prev_doc = nullptr;
  for (const auto& sentence : corpus) {
    if (prev_doc && *prev_doc != sentence.doc_id) out << '\n';
    for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
      if (i) out << ' ';
      out << sentence.tokens[i].text;
    }
    out << '\n';
    prev_doc = &sentence.doc_id;
  }
}

std::vector<std::string> read_terms(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("read_terms: cannot open '" + path + "'");
  }
  std::vector<std::string> terms;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!is_blank(line)) terms.push_back(line);
  }
  return terms;
}

std::vector<WikiPage> read_pages_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("read_pages_jsonl: cannot open '" + path + "'");
  }
  std::vector<WikiPage> pages;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("read_pages_jsonl: line " + std::to_string(line_no) +
                       ": " + e.what());
    }
    if (!j.is_object() || !j.contains("title") || !j.contains("sections")) {
      throw ParseError("read_pages_jsonl: line " + std::to_string(line_no) +
                       ": expected {\"title\", \"sections\"}");
    }
    WikiPage page;
    page.title = j.at("title").get<std::string>();
    for (const auto& section : j.at("sections")) {
      if (!section.is_array() || section.size() != 2) {
        throw ParseError("read_pages_jsonl: line " + std::to_string(line_no) +
                         ": each section must be [heading, body]");
      }
      page.sections.push_back({section.at(0).get<std::string>(),
                               section.at(1).get<std::string>()});
    }
    pages.push_back(std::move(page));
  }
  return pages;
}

Corpus sentences_from_document(const Document& doc) {
  Corpus out;
  std::size_t index = 0;
  for (const auto& span : segment_sentences(doc.text)) {
    Sentence s;
    s.doc_id = doc.id;
    s.index = index;
    s.tokens = tokenize(span.text);
    if (s.tokens.empty()) continue;
    out.push_back(std::move(s));
    ++index;
  }
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("read_text_file: cannot open '" + path + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ValidationError("write_text_file: cannot open '" + path + "'");
  }
  out << content;
}

}  // namespace cce::text
