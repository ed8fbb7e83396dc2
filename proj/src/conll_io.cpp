#include "cce/conll_io.hpp"

#include <fstream>
#include <sstream>

#include "cce/error.hpp"

namespace cce::eval {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t tab = line.find('\t', pos);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(pos));
      break;
    }
    fields.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
  return fields;
}

std::size_t parse_size(const std::string& s, const std::string& path,
                       std::size_t line_no) {
  try {
    std::size_t consumed = 0;
    const unsigned long long v = std::stoull(s, &consumed);
    if (consumed != s.size()) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ParseError(path + ": line " + std::to_string(line_no) +
                     ": expected a non-negative integer, got '" + s + "'");
  }
}

}  // namespace

std::vector<TaggedSentence> read_conll(const std::string& path,
                                       const crf::TagSet& tagset) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("read_conll: cannot open '" + path + "'");
  }
  std::vector<TaggedSentence> out;
  TaggedSentence current;
  current.doc_id = "doc0";
  std::size_t sentence_index = 0;
  std::string line;
  std::size_t line_no = 0;

  const auto flush = [&]() {
    if (current.tokens.empty()) return;
    current.index = sentence_index++;
    out.push_back(current);
    current.tokens.clear();
    current.tags.clear();
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::is_blank(line)) {
      flush();
      continue;
    }
    if (line.rfind("-DOC-", 0) == 0) {
      flush();
      std::string id = line.substr(5);
      std::size_t a = 0;
      while (a < id.size() && (id[a] == ' ' || id[a] == '\t')) ++a;
      id = id.substr(a);
      if (id.empty()) {
        throw ParseError(path + ": line " + std::to_string(line_no) +
                         ": -DOC- line without an id");
      }
      current.doc_id = id;
      sentence_index = 0;
      continue;
    }
    const auto fields = split_tabs(line);
    if (fields.size() != 2 || fields[0].empty()) {
      throw ParseError(path + ": line " + std::to_string(line_no) +
                       ": expected 'token<TAB>tag'");
    }
    const auto tag = tagset.find(fields[1]);
    if (!tag) {
      throw ParseError(path + ": line " + std::to_string(line_no) +
                       ": unknown tag '" + fields[1] + "'");
    }
    current.tokens.push_back(fields[0]);
    current.tags.push_back(*tag);
  }
  flush();
  return out;
}

void write_conll(const std::string& path,
                 const std::vector<TaggedSentence>& sentences,
                 const crf::TagSet& tagset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ValidationError("write_conll: cannot open '" + path + "'");
  }
  const std::string* doc = nullptr;
  bool first = true;
  for (const auto& s : sentences) {
    if (!doc || *doc != s.doc_id) {
      if (!first) out << '\n';
      out << "-DOC- " << s.doc_id << '\n';
    } else if (!first) {
      out << '\n';
    }
    if (s.tokens.size() != s.tags.size()) {
      throw ArgumentError("write_conll: token/tag length mismatch");
    }
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      out << s.tokens[i] << '\t' << tagset.tag(s.tags[i]) << '\n';
    }
    doc = &s.doc_id;
    first = false;
  }
}

std::vector<Span> read_standoff(const std::string& path,
                                const crf::TagSet& tagset) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("read_standoff: cannot open '" + path + "'");
  }
  std::vector<Span> spans;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::is_blank(line)) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 5) {
      throw ParseError(path + ": line " + std::to_string(line_no) +
                       ": expected 5 tab-separated fields");
    }
    Span span;
    span.doc_id = fields[0];
    span.sentence_index = parse_size(fields[1], path, line_no);
    span.start_token = parse_size(fields[2], path, line_no);
    span.end_token = parse_size(fields[3], path, line_no);
    const auto cls = tagset.find_class(fields[4]);
    if (!cls) {
      throw ParseError(path + ": line " + std::to_string(line_no) +
                       ": unknown class '" + fields[4] + "'");
    }
    span.cls = *cls;
    if (span.start_token > span.end_token) {
      throw ParseError(path + ": line " + std::to_string(line_no) +
                       ": start_token > end_token");
    }
    spans.push_back(std::move(span));
  }
  return spans;
}

void write_standoff(const std::string& path, const std::vector<Span>& spans,
                    const crf::TagSet& tagset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ValidationError("write_standoff: cannot open '" + path + "'");
  }
  for (const auto& s : spans) {
    out << s.doc_id << '\t' << s.sentence_index << '\t' << s.start_token
        << '\t' << s.end_token << '\t' << tagset.class_name(s.cls) << '\n';
  }
}

std::vector<Span> spans_from_tagged(const std::vector<TaggedSentence>& sentences,
                                    const crf::TagSet& tagset) {
  std::vector<Span> out;
  for (const auto& s : sentences) {
    for (const auto& local : bio_to_spans(s.tags, tagset)) {
      out.push_back(
          {s.doc_id, s.index, local.start_token, local.end_token, local.cls});
    }
  }
  return out;
}

std::vector<Span> read_spans_any(const std::string& path,
                                 const crf::TagSet& tagset) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("read_spans_any: cannot open '" + path + "'");
  }
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::is_blank(line)) continue;
    if (line.rfind("-DOC-", 0) == 0 || split_tabs(line).size() == 2) {
      return spans_from_tagged(read_conll(path, tagset), tagset);
    }
    return read_standoff(path, tagset);
  }
  return {};
}

std::vector<TaggedSentence> untagged_from_corpus(const text::Corpus& corpus) {
  std::vector<TaggedSentence> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) {
    TaggedSentence ts;
    ts.doc_id = s.doc_id;
    ts.index = s.index;
    ts.tokens = s.token_texts();
    out.push_back(std::move(ts));
  }
  return out;
}

}  // namespace cce::eval
