// Acceptance suite: one binary, one pass/fail line per criterion, nonzero
// exit when anything fails. Everything runs on synthetic data at desk scale.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "cce/conll_io.hpp"
#include "cce/corpus_io.hpp"
#include "cce/crf.hpp"
#include "cce/lm_train.hpp"
#include "cce/ner_train.hpp"
#include "cce/spans.hpp"
#include "cce/synthetic.hpp"
#include "crf_bruteforce.hpp"
#include "gradcheck_suites.hpp"

using namespace cce;
namespace fs = std::filesystem;

namespace {

struct Check {
  int id;
  std::string name;
  std::function<void(std::string&)> run;  // throws or appends detail
};

text::Corpus corpus_from_tagged(const std::vector<eval::TaggedSentence>& s) {
  text::Corpus out;
  for (const auto& ts : s) {
    text::Sentence sentence;
    sentence.doc_id = ts.doc_id;
    sentence.index = ts.index;
    std::size_t offset = 0;
    for (const auto& token : ts.tokens) {
      sentence.tokens.push_back({token, offset, offset + token.size()});
      offset += token.size() + 1;
    }
    out.push_back(std::move(sentence));
  }
  return out;
}

lm::LmConfig toy_lm_config() {
  lm::LmConfig cfg;
  cfg.char_embed_dim = 8;
  cfg.filter_widths = {1, 2, 3};
  cfg.filter_counts = {8, 8, 16};
  cfg.projection_dim = 16;
  cfg.lstm_hidden = 32;
  cfg.vocab_min_count = 1;
  cfg.epochs = 5;
  cfg.batch_size = 32;
  cfg.learning_rate = 0.003;
  return cfg;
}

ner::NerConfig toy_ner_config() {
  ner::NerConfig cfg;
  cfg.encoder_hidden = 32;
  cfg.dropout_rate = 0.5;
  cfg.learning_rate = 0.01;
  cfg.batch_size = 32;
  cfg.epochs = 20;
  return cfg;
}

fs::path work_dir() {
  const auto dir = fs::temp_directory_path() / "cce_acceptance";
  fs::create_directories(dir);
  return dir;
}

void require(bool condition, const std::string& message) {
  if (!condition) throw std::runtime_error(message);
}

// ---- criterion 1 -----------------------------------------------------------

void crf_oracle_suite(std::string& detail) {
  num::Rng rng(20260810);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(6);
    const std::size_t t_len = 1 + rng.below(6);
    crf::CrfParams<double> params(n);
    for (auto& v : params.transitions.value.values()) v = rng.uniform(-2, 2);
    for (auto& v : params.start_scores.value.values()) v = rng.uniform(-2, 2);
    for (auto& v : params.end_scores.value.values()) v = rng.uniform(-2, 2);
    num::Tensor<double> emissions({t_len, n});
    for (auto& v : emissions.values()) v = rng.uniform(-2, 2);

    const auto brute = cce_test::crf_brute_force(emissions, params);
    const double gap =
        std::abs(crf::log_partition(emissions, params) - brute.log_z);
    worst = std::max(worst, gap);
    require(gap <= 1e-8, "log_partition differs from enumeration by " +
                             std::to_string(gap));
    const auto [path, score] = crf::viterbi_decode(emissions, params);
    (void)score;
    require(path == brute.best_path,
            "viterbi disagrees with brute-force argmax on trial " +
                std::to_string(trial));
  }
  detail = "200 instances, max |logZ - enumeration| = " + std::to_string(worst);
}

// ---- criterion 2 -----------------------------------------------------------

void gradient_suite(std::string& detail) {
  double worst = 0.0;
  const auto track = [&worst](double err, const char* what) {
    worst = std::max(worst, err);
    require(err < 1e-4, std::string(what) + " gradient error " +
                            std::to_string(err));
  };
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    track(cce_test::affine_gradcheck(seed), "affine");
    track(cce_test::lstm_gradcheck(seed, num::Direction::kForward), "lstm fwd");
    track(cce_test::lstm_gradcheck(seed, num::Direction::kBackward),
          "lstm bwd");
    track(cce_test::conv_gradcheck(seed), "char-cnn");
    track(cce_test::highway_gradcheck(seed), "highway");
    track(cce_test::softmax_xent_gradcheck(seed), "softmax xent");
    track(cce_test::scalar_mix_gradcheck(seed), "scalar mix");
    track(cce_test::crf_nll_gradcheck(seed, 4, false), "crf nll");
    track(cce_test::crf_nll_gradcheck(seed, 5, true), "crf nll (masked)");
  }
  detail = "20 instances per layer, max relative error = " +
           std::to_string(worst);
}

// ---- criterion 3 -----------------------------------------------------------

void scalar_mix_contract(std::string& detail) {
  num::Rng rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    ner::ScalarMixParams<double> mix;
    for (auto& v : mix.s_logits.value.values()) v = rng.uniform(-3, 3);
    const auto w = mix.weights();
    require(std::abs(w[0] + w[1] + w[2] - 1.0) <= 1e-12,
            "mix weights do not sum to 1");
  }

  lm::LayerStack<double> stack;
  for (std::size_t i = 0; i < 3; ++i) {
    stack.layers[i] = num::Tensor<double>({1, 2});
    stack.layers[i].fill(static_cast<double>(i + 1));
  }
  ner::ScalarMixParams<double> uniform;
  const auto mean = ner::scalar_mix(stack, uniform);
  require(std::abs(mean(0, 0) - 2.0) <= 1e-10 &&
              std::abs(mean(0, 1) - 2.0) <= 1e-10,
          "uniform logits do not average the layers");

  ner::ScalarMixParams<double> zero_scale;
  zero_scale.gamma.value[0] = 0.0;
  for (auto& v : zero_scale.s_logits.value.values()) v = rng.uniform(-3, 3);
  const auto zeros = ner::scalar_mix(stack, zero_scale);
  for (std::size_t k = 0; k < zeros.size(); ++k) {
    require(zeros[k] == 0.0, "gamma = 0 must zero the output");
  }
  detail = "weights normalized, layer mean and zero-scale reproduced";
}

// ---- criterion 4 -----------------------------------------------------------

void lm_sanity(std::string& detail) {
  // zeroed output layer -> uniform predictions -> perplexity |V|
  const auto small =
      synth::generate_synthetic(synth::SyntheticSpec::example(120, 71));
  const auto small_corpus = corpus_from_tagged(small.sentences);
  const auto vocab = text::Vocabulary::build(small_corpus, 1);
  lm::BilmParams<float> uniform(toy_lm_config(), vocab.size());
  num::Rng init_rng(7);
  uniform.init(init_rng);
  uniform.softmax_w.value.zero();
  uniform.softmax_b.value.zero();
  const auto uniform_report = lm::perplexity(uniform, vocab, small_corpus);
  const double v = static_cast<double>(vocab.size());
  require(std::abs(uniform_report.perplexity - v) / v <= 0.001,
          "uniform-model perplexity " +
              std::to_string(uniform_report.perplexity) + " != |V| = " +
              std::to_string(v));

  // directional information flow on the untrained toy model
  const std::vector<std::string> base{"ordered", "mri", "to", "rule", "out"};
  std::vector<std::string> perturbed = base;
  perturbed[3] = "sepsis";
  const auto s1 = lm::bilm_forward(base, uniform);
  const auto s2 = lm::bilm_forward(perturbed, uniform);
  const std::size_t proj = uniform.projection_dim();
  for (std::size_t layer : {1, 2}) {
    for (std::size_t k = 0; k < 3; ++k) {  // positions before the change
      for (std::size_t j = 0; j < proj; ++j) {
        require(s1.layers[layer](k, j) == s2.layers[layer](k, j),
                "forward half changed at an earlier position");
      }
    }
    for (std::size_t j = 0; j < proj; ++j) {  // backward half afterwards
      require(s1.layers[layer](4, proj + j) == s2.layers[layer](4, proj + j),
              "backward half changed at a later position");
    }
  }

  // toy training strictly reduces held-out perplexity
  const auto data =
      synth::generate_synthetic(synth::SyntheticSpec::example(1000, 81));
  const auto corpus = corpus_from_tagged(data.sentences);
  num::Rng split_rng(5);
  const auto [train, test] = text::split_corpus(corpus, 0.9, split_rng);
  std::vector<lm::EpochLog> history;
  lm::train_lm(train, test, toy_lm_config(), num::Rng(17), nullptr, &history);
  const double untrained = history.front().test_perplexity;
  const double trained = history.back().test_perplexity;
  require(trained < untrained,
          "training did not reduce held-out perplexity (" +
              std::to_string(untrained) + " -> " + std::to_string(trained) +
              ")");
  std::ostringstream os;
  os << "uniform ppl = " << uniform_report.perplexity << " (|V| = " << v
     << "), held-out ppl " << untrained << " -> " << trained;
  detail = os.str();
}

// ---- criterion 5 -----------------------------------------------------------

void domain_specificity(std::string& detail) {
  auto structured_spec = synth::SyntheticSpec::example(1500, 91);
  auto shuffled_spec = structured_spec;
  shuffled_spec.shuffle_tokens = true;

  const auto structured =
      corpus_from_tagged(synth::generate_synthetic(structured_spec).sentences);
  const auto shuffled =
      corpus_from_tagged(synth::generate_synthetic(shuffled_spec).sentences);
  const auto heldout = corpus_from_tagged(
      synth::generate_synthetic(synth::SyntheticSpec::example(300, 97))
          .sentences);

  auto cfg = toy_lm_config();
  cfg.epochs = 8;
  auto domain_model = lm::train_lm(structured, {}, cfg, num::Rng(3));
  auto shuffled_model = lm::train_lm(shuffled, {}, cfg, num::Rng(3));

  const double domain_ppl =
      lm::perplexity(domain_model.params, domain_model.vocab, heldout)
          .perplexity;
  const double shuffled_ppl =
      lm::perplexity(shuffled_model.params, shuffled_model.vocab, heldout)
          .perplexity;
  std::ostringstream os;
  os << "in-domain ppl = " << domain_ppl << ", order-destroyed ppl = "
     << shuffled_ppl << " (ratio " << domain_ppl / shuffled_ppl << ")";
  detail = os.str();
  require(domain_ppl <= 0.5 * shuffled_ppl,
          "in-domain model is not at least 2x better: " + detail);
}

// ---- criterion 6 -----------------------------------------------------------

void metric_oracle(std::string& detail) {
  const crf::TagSet tagset;
  const std::vector<eval::Span> gold = {{"d", 0, 0, 1, 0},
                                        {"d", 0, 3, 3, 2},
                                        {"d", 0, 5, 6, 1},
                                        {"d", 0, 8, 8, 0}};
  const std::vector<eval::Span> pred = {{"d", 0, 0, 1, 0},
                                        {"d", 0, 3, 3, 0},
                                        {"d", 0, 5, 6, 1}};
  const auto report = eval::evaluate_spans(gold, pred, tagset);
  const auto& o = report.overall;
  // exact rational identities: P = 2/3, R = 1/2, F1 = 2tp/(pred+gold) = 4/7
  require(o.true_positives == 2 && o.predicted == 3 && o.gold == 4,
          "raw counts are wrong");
  require(3 * o.true_positives == 2 * o.predicted, "precision != 2/3");
  require(2 * o.true_positives == o.gold, "recall != 1/2");
  require(7 * 2 * o.true_positives == 4 * (o.predicted + o.gold),
          "f1 != 4/7");
  require(std::abs(o.precision() - 2.0 / 3.0) <= 1e-9, "float precision off");
  require(std::abs(o.recall() - 0.5) <= 1e-9, "float recall off");
  require(std::abs(o.f1() - 4.0 / 7.0) <= 1e-9, "float f1 off");

  num::Rng rng(61);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t length = 1 + rng.below(14);
    std::vector<eval::LocalSpan> spans;
    std::size_t t = 0;
    while (t < length) {
      if (rng.uniform() < 0.4) {
        const std::size_t max_len = std::min<std::size_t>(length - t, 4);
        const std::size_t span_len = 1 + rng.below(max_len);
        spans.push_back({t, t + span_len - 1, rng.below(3)});
        t += span_len;
      } else {
        ++t;
      }
    }
    const auto tags = eval::spans_to_bio(spans, length, tagset);
    require(eval::bio_to_spans(tags, tagset) == spans,
            "bio round trip broke on trial " + std::to_string(trial));
  }
  detail = "hand-counted example exact; 1000 round trips identical";
}

// ---- criteria 7 and 8 ------------------------------------------------------

struct E2eOutcome {
  std::vector<double> f1;
  std::string detail;
};

void end_to_end(std::string& detail) {
  const auto dir = work_dir();
  const crf::TagSet tagset;

  const auto train_data =
      synth::generate_synthetic(synth::SyntheticSpec::example(1800, 101));
  const auto heldout_data =
      synth::generate_synthetic(synth::SyntheticSpec::example(200, 103));
  const auto train_corpus = corpus_from_tagged(train_data.sentences);

  auto lm_ckpt =
      lm::train_lm(train_corpus, {}, toy_lm_config(), num::Rng(2024));

  const auto ner_cfg = toy_ner_config();
  std::vector<ner::NerCheckpoint> models;
  std::vector<double> scores;
  std::vector<std::vector<std::string>> heldout_tokens;
  for (const auto& s : heldout_data.sentences) {
    heldout_tokens.push_back(s.tokens);
  }

  for (std::uint64_t seed : {11u, 22u, 33u}) {
    models.push_back(
        ner::train_ner(train_data.sentences, lm_ckpt, ner_cfg, seed));
    auto& model = models.back();
    const auto decoded = ner::predict(model, lm_ckpt, heldout_tokens);
    std::vector<eval::TaggedSentence> predicted = heldout_data.sentences;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      predicted[i].tags = decoded[i];
    }
    const auto report = eval::evaluate_spans(
        heldout_data.gold, eval::spans_from_tagged(predicted, tagset), tagset);
    scores.push_back(report.overall.f1());
    require(report.overall.f1() >= 0.90,
            "seed " + std::to_string(seed) + " reached only F1 = " +
                std::to_string(report.overall.f1()));
  }

  // ensemble determinism: repeated invocations byte-identical
  std::vector<ner::NerCheckpoint*> refs;
  for (auto& m : models) refs.push_back(&m);
  const auto vote1 = ner::ensemble_predict(refs, lm_ckpt, heldout_tokens);
  const auto vote2 = ner::ensemble_predict(refs, lm_ckpt, heldout_tokens);
  require(vote1 == vote2, "ensemble votes differ between invocations");

  std::vector<eval::TaggedSentence> ensembled = heldout_data.sentences;
  std::vector<eval::TaggedSentence> ensembled2 = heldout_data.sentences;
  for (std::size_t i = 0; i < ensembled.size(); ++i) {
    ensembled[i].tags = vote1[i];
    ensembled2[i].tags = vote2[i];
  }
  const auto out1 = (dir / "ensemble1.conll").string();
  const auto out2 = (dir / "ensemble2.conll").string();
  eval::write_conll(out1, ensembled, tagset);
  eval::write_conll(out2, ensembled2, tagset);
  require(text::read_text_file(out1) == text::read_text_file(out2),
          "ensemble output files differ");

  const auto ensemble_report = eval::evaluate_spans(
      heldout_data.gold, eval::spans_from_tagged(ensembled, tagset), tagset);

  // report schema: header columns plus one row per class and an overall row
  const std::string table = eval::format_report_text(ensemble_report, tagset);
  std::istringstream lines(table);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  require(rows.size() == 5, "report must have header + 3 classes + overall");
  require(rows[0].find("precision") != std::string::npos &&
              rows[0].find("recall") != std::string::npos &&
              rows[0].find("f1") != std::string::npos,
          "report header lacks the metric columns");
  for (const char* cls : {"problem", "treatment", "test", "overall"}) {
    require(table.find(cls) != std::string::npos,
            std::string("report lacks a row for ") + cls);
  }
  char formatted[32];
  std::snprintf(formatted, sizeof(formatted), "%.2f",
                100.0 * ensemble_report.overall.f1());
  require(table.find(formatted) != std::string::npos,
          "report does not render percentages to two decimals");

  std::ostringstream os;
  os << "single-run F1 = [" << scores[0] << ", " << scores[1] << ", "
     << scores[2] << "], ensemble F1 = " << ensemble_report.overall.f1();
  detail = os.str();
}

void determinism_contracts(std::string& detail) {
  const auto data =
      synth::generate_synthetic(synth::SyntheticSpec::example(150, 111));
  const auto corpus = corpus_from_tagged(data.sentences);

  lm::LmConfig lm_cfg = toy_lm_config();
  lm_cfg.epochs = 2;
  auto lm_a = lm::train_lm(corpus, {}, lm_cfg, num::Rng(5));
  auto lm_b = lm::train_lm(corpus, {}, lm_cfg, num::Rng(5));
  require(lm::lm_checkpoint_json(lm_a).dump() ==
              lm::lm_checkpoint_json(lm_b).dump(),
          "lm training is not bit-deterministic under a fixed seed");

  ner::NerConfig ner_cfg = toy_ner_config();
  ner_cfg.epochs = 3;
  const std::string before = lm::lm_content_hash(lm_a.params);
  const std::string lm_bytes_before = lm::lm_checkpoint_json(lm_a).dump();
  auto ner_a = ner::train_ner(data.sentences, lm_a, ner_cfg, 9);
  const std::string lm_bytes_after = lm::lm_checkpoint_json(lm_a).dump();
  require(lm_bytes_before == lm_bytes_after,
          "lm arrays changed across ner training");
  require(lm::lm_content_hash(lm_a.params) == before,
          "lm content hash changed across ner training");

  auto ner_b = ner::train_ner(data.sentences, lm_a, ner_cfg, 9);
  require(ner::ner_checkpoint_json(ner_a).dump() ==
              ner::ner_checkpoint_json(ner_b).dump(),
          "ner training is not bit-deterministic under a fixed seed");
  detail = "lm frozen through ner training; both trainers bit-deterministic";
}

// ---- criterion 9 -----------------------------------------------------------

void constrained_decoding(std::string& detail) {
  const crf::TagSet tagset;
  const auto mask = crf::transition_mask(tagset);
  const std::vector<std::size_t> expected{4, 5, 5, 5, 5, 5, 5};
  std::size_t total = 0;
  for (std::size_t row = 0; row < tagset.size(); ++row) {
    require(mask.row_permit_count(row) == expected[row],
            "row " + std::to_string(row) + " permits " +
                std::to_string(mask.row_permit_count(row)) +
                " transitions, expected " + std::to_string(expected[row]));
    total += mask.row_permit_count(row);
  }
  require(total == 34, "rule table totals " + std::to_string(total));

  num::Rng rng(121);
  for (int trial = 0; trial < 1000; ++trial) {
    crf::CrfParams<float> params(tagset);
    for (auto& v : params.transitions.value.values()) {
      v = static_cast<float>(rng.uniform(-3, 3));
    }
    const std::size_t t_len = 1 + rng.below(10);
    num::Tensor<float> emissions({t_len, tagset.size()});
    for (auto& v : emissions.values()) {
      v = static_cast<float>(rng.uniform(-6, 6));
    }
    const auto [path, score] = crf::viterbi_decode(emissions, params);
    (void)score;
    require(crf::bio_valid(mask, path),
            "decoded an invalid sequence on trial " + std::to_string(trial));
  }
  detail = "row permits [4,5,5,5,5,5,5] (34 total); 1000/1000 decodes valid";
}

}  // namespace

int main() {
  const std::vector<Check> checks = {
      {1, "crf oracle suite (log-partition and viterbi vs enumeration)",
       crf_oracle_suite},
      {2, "gradient suite (all layers, double precision)", gradient_suite},
      {3, "scalar-mix contract", scalar_mix_contract},
      {4, "lm sanity (uniform perplexity, directionality, toy training)",
       lm_sanity},
      {5, "domain-specificity direction check", domain_specificity},
      {6, "metric oracle (hand counts, bio round trips)", metric_oracle},
      {7, "end-to-end synthetic rehearsal (3 seeds + ensemble)", end_to_end},
      {8, "frozen-lm and determinism contracts", determinism_contracts},
      {9, "constrained decoding validity", constrained_decoding},
  };

  int failures = 0;
  for (const auto& check : checks) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    std::string error;
    try {
      check.run(detail);
    } catch (const std::exception& e) {
      ok = false;
      error = e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::printf("[%s] criterion %d: %s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL",
                check.id, check.name.c_str(), seconds,
                detail.empty() && error.empty() ? "" : " -- ",
                ok ? detail.c_str() : error.c_str());
    std::fflush(stdout);
    failures += ok ? 0 : 1;
  }
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
  }
  return failures == 0 ? 0 : 1;
}
