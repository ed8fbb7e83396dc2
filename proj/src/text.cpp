#include "cce/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <set>

namespace cce::text {

namespace {

bool is_space_byte(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

bool is_word_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) != 0 || u >= 0x80;
}

bool is_digit_byte(char c) {
  return std::isdigit(static_cast<unsigned char>(c)) != 0;
}

bool is_upper_or_digit(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isupper(u) != 0 || std::isdigit(u) != 0;
}

const std::set<std::string>& abbreviations() {
  static const std::set<std::string> kAbbrev = {
      "Dr.", "Mr.", "Mrs.", "Ms.", "Pt.", "e.g.", "i.e.", "etc.", "vs.",
      "Fig."};
  return kAbbrev;
}

// Maximal run of non-whitespace bytes ending at (and including) position i.
std::string run_ending_at(const std::string& text, std::size_t i) {
  std::size_t start = i;
  while (start > 0 && !is_space_byte(text[start - 1])) --start;
  return text.substr(start, i - start + 1);
}

std::size_t count_tokens(const std::string& s) {
  std::size_t n = 0;
  bool in_token = false;
  for (char c : s) {
    if (is_space_byte(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++n;
    }
  }
  return n;
}

void emit_segment(const std::string& text, std::size_t start, std::size_t end,
                  std::vector<SentenceSpan>& out) {
  while (start < end && is_space_byte(text[start])) ++start;
  while (end > start && is_space_byte(text[end - 1])) --end;
  if (start >= end) return;
  out.push_back({text.substr(start, end - start), start, end});
}

std::string to_lower_ascii(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

bool contains_word(const std::string& haystack_lower, const char* needle) {
  return haystack_lower.find(needle) != std::string::npos;
}

bool looks_like_date(const std::string& s) {
  // e.g. 2145-3-2, 3/2145, 2145-03
  std::size_t i = 0;
  auto digits = [&](std::size_t lo, std::size_t hi) {
    std::size_t n = 0;
    while (i < s.size() && is_digit_byte(s[i])) {
      ++i;
      ++n;
    }
    return n >= lo && n <= hi;
  };
  if (!digits(1, 4)) return false;
  if (i == s.size()) return false;
  if (s[i] != '-' && s[i] != '/') return false;
  ++i;
  if (!digits(1, 2)) return false;
  if (i == s.size()) return true;
  if (s[i] != '-' && s[i] != '/') return false;
  ++i;
  if (!digits(1, 4)) return false;
  return i == s.size();
}

bool all_digits(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), is_digit_byte);
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && is_space_byte(s[a])) ++a;
  while (b > a && is_space_byte(s[b - 1])) --b;
  return s.substr(a, b - a);
}

std::string deid_replacement(const std::string& inner_raw) {
  const std::string inner = trim(inner_raw);
  const std::string lower = to_lower_ascii(inner);
  if (contains_word(lower, "name")) return "John Doe";
  if (contains_word(lower, "hospital") || contains_word(lower, "location") ||
      contains_word(lower, "address") || contains_word(lower, "clinic")) {
    return "General Hospital";
  }
  if (contains_word(lower, "date") || contains_word(lower, "year") ||
      contains_word(lower, "month") || looks_like_date(inner)) {
    return "2010-01-01";
  }
  if (all_digits(inner) || contains_word(lower, "number") ||
      contains_word(lower, "numeric") || contains_word(lower, "phone") ||
      contains_word(lower, "pager") || contains_word(lower, "mrn") ||
      contains_word(lower, "telephone")) {
    return "0";
  }
  return inner;
}

}  // namespace

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), is_space_byte);
}

std::vector<SentenceSpan> segment_sentences(const std::string& text) {
  std::vector<SentenceSpan> out;
  std::size_t seg_start = 0;
  const std::size_t n = text.size();

  for (std::size_t i = 0; i < n; ++i) {
    const char c = text[i];

    // Blank line: a newline followed only by spaces/tabs up to another
    // newline. Always a boundary.
    if (c == '\n') {
      std::size_t j = i + 1;
      while (j < n && (text[j] == ' ' || text[j] == '\t' || text[j] == '\r')) {
        ++j;
      }
      if (j < n && text[j] == '\n') {
        emit_segment(text, seg_start, i, out);
        seg_start = j + 1;
        i = j;
        continue;
      }
    }

    if (c == '.' || c == '?' || c == '!') {
      // End of a sentence when followed by whitespace and an upper/digit
      // start, unless the run ending here is a listed abbreviation.
      std::size_t j = i + 1;
      while (j < i + 1 || (j < n && (text[j] == '.' || text[j] == '?' ||
                                     text[j] == '!'))) {
        ++j;  // absorb runs like "?!" or "..."
      }
      if (j < n && is_space_byte(text[j])) {
        std::size_t k = j;
        while (k < n && is_space_byte(text[k])) ++k;
        if (k < n && is_upper_or_digit(text[k])) {
          if (c != '.' || !abbreviations().count(run_ending_at(text, i))) {
            emit_segment(text, seg_start, j, out);
            seg_start = k;
            i = k - 1;
            continue;
          }
        }
      } else if (j >= n) {
        emit_segment(text, seg_start, n, out);
        seg_start = n;
        break;
      }
      i = j - 1;
      continue;
    }

    // Header rule: short segment closed by ':' at a whitespace edge.
    if (c == ':' && (i + 1 == n || is_space_byte(text[i + 1]))) {
      const std::string so_far = text.substr(seg_start, i - seg_start);
      if (count_tokens(so_far) <= 5) {
        emit_segment(text, seg_start, i + 1, out);
        seg_start = i + 1;
      }
    }
  }
  emit_segment(text, seg_start, n, out);
  return out;
}

std::vector<Token> tokenize(const std::string& sentence) {
  std::vector<Token> out;
  const std::size_t n = sentence.size();
  std::size_t i = 0;
  while (i < n) {
    if (is_space_byte(sentence[i])) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (is_word_byte(sentence[i])) {
      while (i < n && is_word_byte(sentence[i])) ++i;
      // Join rules: '.'/'/' glue digits (decimals, 120/80); '-' glues
      // alphanumerics (x-ray, 10-mg).
      while (i < n && i + 1 < n) {
        const char sep = sentence[i];
        const char prev = sentence[i - 1];
        const char next = sentence[i + 1];
        const bool digit_join = (sep == '.' || sep == '/') &&
                                is_digit_byte(prev) && is_digit_byte(next);
        const bool hyphen_join =
            sep == '-' && is_word_byte(prev) && is_word_byte(next);
        if (!digit_join && !hyphen_join) break;
        ++i;
        while (i < n && is_word_byte(sentence[i])) ++i;
      }
    } else {
      ++i;  // single punctuation byte
    }
    out.push_back({sentence.substr(start, i - start), start, i});
  }
  return out;
}

std::string normalize_deid(const std::string& text, std::ostream* log) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    if (i + 1 < n && text[i] == '[' && text[i + 1] == '*' && i + 2 < n &&
        text[i + 2] == '*') {
      const std::size_t close = text.find("**]", i + 3);
      if (close == std::string::npos) {
        if (log) {
          *log << "normalize_deid: unterminated placeholder at byte " << i
               << "\n";
        }
        out.append(text, i, n - i);
        break;
      }
      out += deid_replacement(text.substr(i + 3, close - (i + 3)));
      i = close + 3;
      continue;
    }
    out += text[i];
    ++i;
  }
  return out;
}

std::string normalize_title(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space_byte(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::vector<Document> filter_wiki(const std::vector<WikiPage>& pages,
                                  const std::vector<std::string>& terms) {
  if (terms.empty()) {
    throw ArgumentError("filter_wiki: empty term list");
  }
  static const std::array<const char*, 4> kExcludedSections = {
      "see also", "references", "further reading", "external links"};

  std::set<std::string> term_set;
  for (const auto& t : terms) {
    const std::string norm = normalize_title(t);
    if (!norm.empty()) term_set.insert(norm);
  }

  // A term matching more than one page disqualifies all of its matches.
  std::vector<std::size_t> match_count_by_page(pages.size(), 0);
  std::map<std::string, std::vector<std::size_t>> pages_by_term;
  for (std::size_t p = 0; p < pages.size(); ++p) {
    const std::string norm = normalize_title(pages[p].title);
    if (term_set.count(norm)) pages_by_term[norm].push_back(p);
  }

  std::vector<Document> out;
  for (const auto& [term, matched] : pages_by_term) {
    (void)term;
    if (matched.size() != 1) continue;
    match_count_by_page[matched[0]] += 1;
  }
  for (std::size_t p = 0; p < pages.size(); ++p) {
    if (match_count_by_page[p] == 0) continue;
    const WikiPage& page = pages[p];
    std::string body;
    for (const auto& section : page.sections) {
      const std::string head = normalize_title(section.heading);
      if (std::find(kExcludedSections.begin(), kExcludedSections.end(), head) !=
          kExcludedSections.end()) {
        continue;
      }
      if (section.body.empty()) continue;
      if (!body.empty()) body += "\n\n";
      body += section.body;
    }
    out.push_back({page.title, std::move(body), DocSource::kWiki});
  }
  return out;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats stats;
  std::set<std::string> docs;
  for (const auto& s : corpus) {
    docs.insert(s.doc_id);
    stats.sentences += 1;
    stats.tokens += s.tokens.size();
  }
  stats.documents = docs.size();
  stats.average_sentence_length =
      stats.sentences > 0
          ? static_cast<double>(stats.tokens) / static_cast<double>(stats.sentences)
          : 0.0;
  return stats;
}

std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus,
                                       double train_fraction, num::Rng& rng) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ArgumentError("split_corpus: train_fraction must be in (0,1)");
  }
  const std::size_t n = corpus.size();
  const std::size_t k = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<bool> in_train(n, false);
  for (std::size_t i = 0; i < k && i < n; ++i) in_train[order[i]] = true;
  Corpus train, test;
  for (std::size_t i = 0; i < n; ++i) {
    (in_train[i] ? train : test).push_back(corpus[i]);
  }
  return {train, test};
}

}  // namespace cce::text
