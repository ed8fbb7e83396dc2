#include "cce/spans.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "cce/error.hpp"

namespace cce::eval {

std::vector<LocalSpan> bio_to_spans(const std::vector<std::size_t>& tags,
                                    const crf::TagSet& tagset) {
  std::vector<LocalSpan> spans;
  bool open = false;
  LocalSpan current;
  const auto close = [&](std::size_t end) {
    if (open) {
      current.end_token = end;
      spans.push_back(current);
      open = false;
    }
  };
  for (std::size_t t = 0; t < tags.size(); ++t) {
    const std::size_t tag = tags[t];
    if (tag >= tagset.size()) {
      throw ArgumentError("bio_to_spans: tag id " + std::to_string(tag) +
                          " out of range");
    }
    if (tag == crf::TagSet::kOutside) {
      close(t - 1);
      continue;
    }
    const std::size_t cls = tagset.class_of(tag);
    if (tagset.is_begin(tag) || !open || current.cls != cls) {
      close(t - 1);
      current = {t, t, cls};
      open = true;
    }
    // else: I-X continuing the open span of the same class
  }
  close(tags.empty() ? 0 : tags.size() - 1);
  return spans;
}

std::vector<std::size_t> spans_to_bio(const std::vector<LocalSpan>& spans,
                                      std::size_t sentence_length,
                                      const crf::TagSet& tagset) {
  std::vector<std::size_t> tags(sentence_length, crf::TagSet::kOutside);
  std::vector<bool> used(sentence_length, false);
  for (const auto& span : spans) {
    if (span.start_token > span.end_token || span.end_token >= sentence_length) {
      throw ArgumentError("spans_to_bio: span out of bounds");
    }
    if (span.cls >= tagset.num_classes()) {
      throw ArgumentError("spans_to_bio: class index out of range");
    }
    for (std::size_t t = span.start_token; t <= span.end_token; ++t) {
      if (used[t]) {
        throw ArgumentError("spans_to_bio: overlapping spans at token " +
                            std::to_string(t));
      }
      used[t] = true;
      tags[t] = t == span.start_token ? tagset.begin_tag(span.cls)
                                      : tagset.inside_tag(span.cls);
    }
  }
  return tags;
}

std::vector<std::size_t> repair_bio(const std::vector<std::size_t>& tags,
                                    const crf::TagSet& tagset) {
  return spans_to_bio(bio_to_spans(tags, tagset), tags.size(), tagset);
}

EvalReport evaluate_spans(const std::vector<Span>& gold,
                          const std::vector<Span>& predicted,
                          const crf::TagSet& tagset) {
  const auto as_set = [](const std::vector<Span>& spans, const char* side) {
    std::set<Span> out;
    for (const auto& s : spans) {
      if (!out.insert(s).second) {
        throw ArgumentError(std::string("evaluate_spans: duplicate span in ") +
                            side);
      }
    }
    return out;
  };
  const std::set<Span> gold_set = as_set(gold, "gold");
  const std::set<Span> pred_set = as_set(predicted, "predictions");

  EvalReport report;
  report.per_class.resize(tagset.num_classes());
  for (const auto& s : gold_set) {
    if (s.cls >= tagset.num_classes()) {
      throw ArgumentError("evaluate_spans: class index out of range");
    }
    report.per_class[s.cls].gold += 1;
  }
  for (const auto& s : pred_set) {
    if (s.cls >= tagset.num_classes()) {
      throw ArgumentError("evaluate_spans: class index out of range");
    }
    report.per_class[s.cls].predicted += 1;
    if (gold_set.count(s)) report.per_class[s.cls].true_positives += 1;
  }
  for (const auto& c : report.per_class) {
    report.overall.true_positives += c.true_positives;
    report.overall.predicted += c.predicted;
    report.overall.gold += c.gold;
  }
  return report;
}

namespace {

std::string row(const std::string& label, const ClassCounts& c) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-12s %9.2f %9.2f %9.2f %8zu %8zu %8zu\n",
                label.c_str(), 100.0 * c.precision(), 100.0 * c.recall(),
                100.0 * c.f1(), c.gold, c.predicted, c.true_positives);
  return buf;
}

}  // namespace

std::string format_report_text(const EvalReport& report,
                               const crf::TagSet& tagset) {
  std::string out;
  char head[160];
  std::snprintf(head, sizeof(head), "%-12s %9s %9s %9s %8s %8s %8s\n", "class",
                "precision", "recall", "f1", "gold", "pred", "tp");
  out += head;
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    out += row(tagset.class_name(c), report.per_class[c]);
  }
  out += row("overall", report.overall);
  return out;
}

namespace {

nlohmann::json counts_json(const ClassCounts& c) {
  return nlohmann::json{{"true_positives", c.true_positives},
                        {"predicted", c.predicted},
                        {"gold", c.gold},
                        {"precision", c.precision()},
                        {"recall", c.recall()},
                        {"f1", c.f1()}};
}

}  // namespace

nlohmann::json report_to_json(const EvalReport& report,
                              const crf::TagSet& tagset) {
  nlohmann::json classes = nlohmann::json::object();
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    classes[tagset.class_name(c)] = counts_json(report.per_class[c]);
  }
  return nlohmann::json{{"format_version", 1},
                        {"classes", classes},
                        {"overall", counts_json(report.overall)}};
}

}  // namespace cce::eval
