#pragma once

#include <cstddef>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "cce/crf.hpp"

namespace cce::eval {

// Exact concept mention; the unit of evaluation. Token bounds are inclusive
// and 0-based within the sentence.
struct Span {
  std::string doc_id;
  std::size_t sentence_index = 0;
  std::size_t start_token = 0;
  std::size_t end_token = 0;
  std::size_t cls = 0;  // index into TagSet::classes()

  auto key() const {
    return std::tie(doc_id, sentence_index, start_token, end_token, cls);
  }
  bool operator==(const Span& other) const { return key() == other.key(); }
  bool operator<(const Span& other) const { return key() < other.key(); }
};

// Span within a single sentence.
struct LocalSpan {
  std::size_t start_token = 0;
  std::size_t end_token = 0;
  std::size_t cls = 0;

  bool operator==(const LocalSpan& other) const {
    return start_token == other.start_token && end_token == other.end_token &&
           cls == other.cls;
  }
  bool operator<(const LocalSpan& other) const {
    return std::tie(start_token, end_token, cls) <
           std::tie(other.start_token, other.end_token, other.cls);
  }
};

// Maximal B-X (I-X)* runs become spans. Repair rule: an I-X with no open
// span of class X acts as B-X (the usual CoNLL reading of stray insides).
std::vector<LocalSpan> bio_to_spans(const std::vector<std::size_t>& tags,
                                    const crf::TagSet& tagset);

// Exact inverse of bio_to_spans on its output. Spans must be in bounds and
// non-overlapping.
std::vector<std::size_t> spans_to_bio(const std::vector<LocalSpan>& spans,
                                      std::size_t sentence_length,
                                      const crf::TagSet& tagset);

// spans_to_bio(bio_to_spans(tags)): canonical BIO-valid form of a sequence.
std::vector<std::size_t> repair_bio(const std::vector<std::size_t>& tags,
                                    const crf::TagSet& tagset);

struct ClassCounts {
  std::size_t true_positives = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;

  double precision() const {
    return predicted == 0
               ? 0.0
               : static_cast<double>(true_positives) / static_cast<double>(predicted);
  }
  double recall() const {
    return gold == 0 ? 0.0
                     : static_cast<double>(true_positives) / static_cast<double>(gold);
  }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
};

struct EvalReport {
  std::vector<ClassCounts> per_class;  // indexed like TagSet::classes()
  ClassCounts overall;                 // micro-average (summed counts)
};

// Exact match: a prediction is a true positive iff an identical
// (doc, sentence, start, end, class) gold span exists. Duplicates within
// either side are an error.
EvalReport evaluate_spans(const std::vector<Span>& gold,
                          const std::vector<Span>& predicted,
                          const crf::TagSet& tagset);

// Fixed-width table with per-class rows and an overall row, percentages to
// two decimals.
std::string format_report_text(const EvalReport& report,
                               const crf::TagSet& tagset);

// JSON mirror carrying raw counts alongside the ratios.
nlohmann::json report_to_json(const EvalReport& report,
                              const crf::TagSet& tagset);

}  // namespace cce::eval
