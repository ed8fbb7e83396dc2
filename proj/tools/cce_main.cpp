// Command-line entry point for the clinical concept extraction toolkit:
// corpus construction, language-model training and evaluation, NER training,
// prediction, ensembling, span evaluation, and synthetic data generation.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cce/config.hpp"
#include "cce/corpus_io.hpp"
#include "cce/lm_train.hpp"
#include "cce/ner_train.hpp"
#include "cce/synthetic.hpp"
#include "cce/vocab.hpp"

namespace {

using cce::cli::Config;

void require_file(const std::string& path, const std::string& flag) {
  if (!std::filesystem::exists(path)) {
    throw cce::ValidationError(flag + ": file '" + path + "' does not exist");
  }
}

struct Args {
  std::string config_path;
  std::string pages, terms, in, out, out_dir;
  std::string train_path, test_path, data, gold, pred, json_out;
  std::string lm_path, checkpoint, corpus, spec;
  std::vector<std::string> checkpoints;
  std::uint64_t seed = 0;
  std::size_t min_count = 5;
};

Config load_config_checked(const std::string& path) {
  require_file(path, "--config");
  return Config::load(path, &std::cerr);
}

int run_build_wiki(const Args& a) {
  require_file(a.pages, "--pages");
  require_file(a.terms, "--terms");
  const auto pages = cce::text::read_pages_jsonl(a.pages);
  const auto terms = cce::text::read_terms(a.terms);
  const auto docs = cce::text::filter_wiki(pages, terms);
  cce::text::Corpus corpus;
  for (const auto& doc : docs) {
    const auto sentences = cce::text::sentences_from_document(doc);
    corpus.insert(corpus.end(), sentences.begin(), sentences.end());
  }
  cce::text::write_corpus(a.out, corpus);
  const auto stats = cce::text::corpus_stats(corpus);
  std::cerr << "build-wiki: kept " << docs.size() << " pages, "
            << stats.sentences << " sentences, " << stats.tokens
            << " tokens\n";
  return 0;
}

int run_normalize_notes(const Args& a) {
  require_file(a.in, "--in");
  const std::string raw = cce::text::read_text_file(a.in);
  cce::text::write_text_file(a.out, cce::text::normalize_deid(raw, &std::cerr));
  return 0;
}

int run_segment(const Args& a) {
  require_file(a.in, "--in");
  cce::text::Document doc{"doc0", cce::text::read_text_file(a.in),
                          cce::text::DocSource::kClinicalNote};
  cce::text::write_corpus(a.out, cce::text::sentences_from_document(doc));
  return 0;
}

int run_vocab_build(const Args& a) {
  require_file(a.in, "--in");
  const auto corpus = cce::text::read_corpus(a.in);
  const auto vocab = cce::text::Vocabulary::build(corpus, a.min_count);
  vocab.save(a.out);
  std::cerr << "vocab: " << vocab.size() << " entries (min count "
            << a.min_count << ")\n";
  return 0;
}

int run_lm_train(const Args& a) {
  const Config config = load_config_checked(a.config_path);
  require_file(a.train_path, "--train");
  require_file(a.test_path, "--test");
  const auto train_corpus = cce::text::read_corpus(a.train_path);
  const auto test_corpus = cce::text::read_corpus(a.test_path);
  std::ofstream log(a.out + ".log.jsonl");
  std::ostream* log_stream = log ? &log : nullptr;
  auto ckpt = cce::lm::train_lm(train_corpus, test_corpus, config.lm,
                                cce::num::Rng(a.seed), log_stream);
  cce::lm::save_lm_checkpoint(a.out, ckpt);
  std::cerr << "lm train: wrote " << a.out << " (hash "
            << cce::lm::lm_content_hash(ckpt.params) << ")\n";
  return 0;
}

int run_lm_perplexity(const Args& a) {
  require_file(a.checkpoint, "--checkpoint");
  require_file(a.corpus, "--corpus");
  auto ckpt = cce::lm::load_lm_checkpoint(a.checkpoint);
  const auto corpus = cce::text::read_corpus(a.corpus);
  const auto report = cce::lm::perplexity(ckpt.params, ckpt.vocab, corpus);
  const nlohmann::json j{{"token_count", report.token_count},
                         {"forward_nll", report.forward_nll},
                         {"backward_nll", report.backward_nll},
                         {"perplexity", report.perplexity}};
  std::cout << j.dump() << '\n';
  return 0;
}

int run_ner_train(const Args& a) {
  const Config config = load_config_checked(a.config_path);
  require_file(a.lm_path, "--lm");
  require_file(a.data, "--data");
  auto lm_ckpt = cce::lm::load_lm_checkpoint(a.lm_path);
  const cce::crf::TagSet tagset;
  auto data = cce::eval::read_conll(a.data, tagset);
  // External files may carry stray insides; canonicalize before training.
  for (auto& sentence : data) {
    sentence.tags = cce::eval::repair_bio(sentence.tags, tagset);
  }
  std::ofstream log(a.out + ".log.jsonl");
  std::ostream* log_stream = log ? &log : nullptr;
  auto ckpt = cce::ner::train_ner(data, lm_ckpt, config.ner, a.seed, a.lm_path,
                                  log_stream);
  cce::ner::save_ner_checkpoint(a.out, ckpt);
  std::cerr << "ner train: wrote " << a.out << " (seed " << a.seed << ")\n";
  return 0;
}

int run_ner_predict(const Args& a) {
  require_file(a.lm_path, "--lm");
  for (const auto& c : a.checkpoints) require_file(c, "--checkpoint");
  require_file(a.in, "--in");
  auto lm_ckpt = cce::lm::load_lm_checkpoint(a.lm_path);
  std::vector<cce::ner::NerCheckpoint> models;
  models.reserve(a.checkpoints.size());
  for (const auto& path : a.checkpoints) {
    models.push_back(cce::ner::load_ner_checkpoint(path));
    cce::ner::require_lm_match(models.back(), lm_ckpt);
  }
  const auto corpus = cce::text::read_corpus(a.in);
  auto tagged = cce::eval::untagged_from_corpus(corpus);
  std::vector<std::vector<std::string>> sentences;
  sentences.reserve(tagged.size());
  for (const auto& s : tagged) sentences.push_back(s.tokens);

  std::vector<std::vector<std::size_t>> tags;
  if (models.size() == 1) {
    tags = cce::ner::predict(models[0], lm_ckpt, sentences);
  } else {
    std::vector<cce::ner::NerCheckpoint*> refs;
    for (auto& m : models) refs.push_back(&m);
    tags = cce::ner::ensemble_predict(refs, lm_ckpt, sentences);
  }
  for (std::size_t i = 0; i < tagged.size(); ++i) {
    tagged[i].tags = tags[i];
  }
  cce::eval::write_conll(a.out, tagged, cce::crf::TagSet());
  return 0;
}

int run_ner_evaluate(const Args& a) {
  require_file(a.gold, "--gold");
  require_file(a.pred, "--pred");
  const cce::crf::TagSet tagset;
  const auto gold = cce::eval::read_spans_any(a.gold, tagset);
  const auto pred = cce::eval::read_spans_any(a.pred, tagset);
  const auto report = cce::eval::evaluate_spans(gold, pred, tagset);
  std::cout << cce::eval::format_report_text(report, tagset);
  if (!a.json_out.empty()) {
    cce::ckpt::write_json_file(a.json_out,
                               cce::eval::report_to_json(report, tagset));
  }
  return 0;
}

int run_synth_generate(const Args& a) {
  require_file(a.spec, "--spec");
  const auto spec = cce::synth::SyntheticSpec::load(a.spec);
  const auto data = cce::synth::generate_synthetic(spec);
  cce::synth::write_synthetic(a.out_dir, data);
  std::cerr << "synth: wrote " << data.sentences.size() << " sentences, "
            << data.gold.size() << " gold spans to " << a.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clinical concept extraction toolkit"};
  app.require_subcommand(1);
  Args a;
  int (*action)(const Args&) = nullptr;

  auto* corpus = app.add_subcommand("corpus", "corpus construction");
  corpus->require_subcommand(1);
  auto* build_wiki =
      corpus->add_subcommand("build-wiki", "filter pages by ontology terms");
  build_wiki->add_option("--pages", a.pages, "pages .jsonl")->required();
  build_wiki->add_option("--terms", a.terms, "term list")->required();
  build_wiki->add_option("--out", a.out, "output corpus")->required();
  build_wiki->callback([&] { action = run_build_wiki; });

  auto* normalize = corpus->add_subcommand(
      "normalize-notes", "replace de-identification placeholders");
  normalize->add_option("--in", a.in, "input text")->required();
  normalize->add_option("--out", a.out, "output text")->required();
  normalize->callback([&] { action = run_normalize_notes; });

  auto* segment =
      corpus->add_subcommand("segment", "segment and tokenize raw text");
  segment->add_option("--in", a.in, "input text")->required();
  segment->add_option("--out", a.out, "output corpus")->required();
  segment->callback([&] { action = run_segment; });

  auto* vocab = app.add_subcommand("vocab", "vocabulary construction");
  vocab->require_subcommand(1);
  auto* vocab_build = vocab->add_subcommand("build", "count and threshold");
  vocab_build->add_option("--in", a.in, "corpus file")->required();
  vocab_build->add_option("--min-count", a.min_count, "occurrence threshold")
      ->required();
  vocab_build->add_option("--out", a.out, "vocabulary file")->required();
  vocab_build->callback([&] { action = run_vocab_build; });

  auto* lm = app.add_subcommand("lm", "bidirectional language model");
  lm->require_subcommand(1);
  auto* lm_train = lm->add_subcommand("train", "train on a corpus");
  lm_train->add_option("--config", a.config_path, "config json")->required();
  lm_train->add_option("--train", a.train_path, "training corpus")->required();
  lm_train->add_option("--test", a.test_path, "test corpus")->required();
  lm_train->add_option("--seed", a.seed, "random seed")->required();
  lm_train->add_option("--out", a.out, "checkpoint path")->required();
  lm_train->callback([&] { action = run_lm_train; });

  auto* lm_ppl = lm->add_subcommand("perplexity", "evaluate a checkpoint");
  lm_ppl->add_option("--checkpoint", a.checkpoint, "lm checkpoint")->required();
  lm_ppl->add_option("--corpus", a.corpus, "evaluation corpus")->required();
  lm_ppl->callback([&] { action = run_lm_perplexity; });

  auto* ner = app.add_subcommand("ner", "concept extraction");
  ner->require_subcommand(1);
  auto* ner_train = ner->add_subcommand("train", "train a tagger");
  ner_train->add_option("--config", a.config_path, "config json")->required();
  ner_train->add_option("--lm", a.lm_path, "frozen lm checkpoint")->required();
  ner_train->add_option("--data", a.data, "labeled conll file")->required();
  ner_train->add_option("--seed", a.seed, "random seed")->required();
  ner_train->add_option("--out", a.out, "checkpoint path")->required();
  ner_train->callback([&] { action = run_ner_train; });

  auto* ner_predict = ner->add_subcommand("predict", "tag sentences");
  ner_predict->add_option("--lm", a.lm_path, "lm checkpoint")->required();
  ner_predict
      ->add_option("--checkpoint", a.checkpoints,
                   "ner checkpoint (repeat for an ensemble vote)")
      ->required();
  ner_predict->add_option("--in", a.in, "corpus file")->required();
  ner_predict->add_option("--out", a.out, "conll output")->required();
  ner_predict->callback([&] { action = run_ner_predict; });

  auto* ner_eval = ner->add_subcommand("evaluate", "exact-span scoring");
  ner_eval->add_option("--gold", a.gold, "gold conll or standoff file")
      ->required();
  ner_eval->add_option("--pred", a.pred, "predicted conll or standoff file")
      ->required();
  ner_eval->add_option("--json", a.json_out, "also write a json report");
  ner_eval->callback([&] { action = run_ner_evaluate; });

  auto* synth = app.add_subcommand("synth", "synthetic data");
  synth->require_subcommand(1);
  auto* synth_gen = synth->add_subcommand("generate", "templated sentences");
  synth_gen->add_option("--spec", a.spec, "spec json")->required();
  synth_gen->add_option("--out-dir", a.out_dir, "output directory")->required();
  synth_gen->callback([&] { action = run_synth_generate; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    return action ? action(a) : 1;
  } catch (const cce::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 2;
  } catch (const cce::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
