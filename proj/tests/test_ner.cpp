#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "cce/corpus_io.hpp"
#include "cce/gradcheck.hpp"
#include "cce/ner_train.hpp"
#include "cce/synthetic.hpp"
#include "gradcheck_suites.hpp"

using namespace cce;
using namespace cce::ner;

namespace {

lm::LmConfig tiny_lm_config() {
  lm::LmConfig cfg;
  cfg.char_embed_dim = 4;
  cfg.filter_widths = {1, 2};
  cfg.filter_counts = {4, 4};
  cfg.projection_dim = 5;
  cfg.lstm_hidden = 4;
  cfg.vocab_min_count = 1;
  cfg.epochs = 1;
  return cfg;
}

NerConfig tiny_ner_config() {
  NerConfig cfg;
  cfg.encoder_hidden = 6;
  cfg.dropout_rate = 0.2;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  return cfg;
}

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

lm::LmCheckpoint tiny_lm(const std::vector<eval::TaggedSentence>& data) {
  return lm::train_lm(corpus_from_tagged(data), {}, tiny_lm_config(),
                      num::Rng(123));
}

}  // namespace

TEST_CASE("scalar mix: uniform mean, zero gamma, hand-computed weights") {
  lm::LayerStack<double> stack;
  for (std::size_t i = 0; i < 3; ++i) {
    stack.layers[i] = num::Tensor<double>({1, 2});
    stack.layers[i].fill(static_cast<double>(i + 1));  // (1,1),(2,2),(3,3)
  }
  ScalarMixParams<double> mix;

  auto y = scalar_mix(stack, mix);
  CHECK(y(0, 0) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(y(0, 1) == doctest::Approx(2.0).epsilon(1e-10));

  mix.gamma.value[0] = 0.0;
  y = scalar_mix(stack, mix);
  CHECK(y(0, 0) == 0.0);
  CHECK(y(0, 1) == 0.0);

  mix.gamma.value[0] = 2.0;
  mix.s_logits.value = num::Tensor<double>({3}, {std::log(2.0), 0.0, 0.0});
  y = scalar_mix(stack, mix);
  CHECK(y(0, 0) == doctest::Approx(3.5).epsilon(1e-10));

  const auto w = mix.weights();
  CHECK(w[0] + w[1] + w[2] == doctest::Approx(1.0).epsilon(1e-12));

  // shift invariance of the logits
  for (auto& v : mix.s_logits.value.values()) v += 11.0;
  const auto y2 = scalar_mix(stack, mix);
  CHECK(y2(0, 0) == doctest::Approx(y(0, 0)).epsilon(1e-10));
}

TEST_CASE("scalar mix gradient check") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    CHECK(cce_test::scalar_mix_gradcheck(seed) < 1e-4);
  }
}

TEST_CASE("encode: shapes and eval-mode determinism") {
  const auto data = synth::generate_synthetic(synth::SyntheticSpec::example(24, 3));
  auto lm_ckpt = tiny_lm(data.sentences);
  const NerConfig cfg = tiny_ner_config();
  const crf::TagSet tagset;
  NerParams<float> params(cfg, 2 * lm_ckpt.params.projection_dim(), tagset);
  num::Rng rng(5);
  params.init(rng);

  const auto stack = lm::bilm_forward(data.sentences[0].tokens, lm_ckpt.params);
  auto e1 = encode_from_stack(stack, params, cfg, num::DropoutMode::kEval, nullptr);
  auto e2 = encode_from_stack(stack, params, cfg, num::DropoutMode::kEval, nullptr);
  CHECK(e1.rows() == data.sentences[0].tokens.size());
  CHECK(e1.cols() == 7);
  CHECK(e1 == e2);

  // train mode requires an rng when dropout is active
  CHECK_THROWS_AS(
      encode_from_stack(stack, params, cfg, num::DropoutMode::kTrain, nullptr),
      ArgumentError);
}

TEST_CASE("full ner loss gradient check, including mix and crf") {
  // double-precision clone of the whole encode + crf path, dropout active
  // with a frozen mask via rng reseeding
  const auto data = synth::generate_synthetic(synth::SyntheticSpec::example(6, 8));
  auto lm_ckpt = tiny_lm(data.sentences);
  auto lm_double = lm_ckpt.params.cast<double>();

  NerConfig cfg = tiny_ner_config();
  cfg.encoder_hidden = 3;
  cfg.dropout_rate = 0.25;
  const crf::TagSet tagset;
  NerParams<double> params(cfg, 2 * lm_double.projection_dim(), tagset);
  num::Rng init_rng(21);
  params.init(init_rng);
  // move transitions off zero so their gradients are exercised
  for (auto& v : params.crf_params.transitions.value.values()) {
    v = init_rng.uniform(-0.5, 0.5);
  }

  const auto& sentence = data.sentences[0];
  const auto stack = lm::bilm_forward(sentence.tokens, lm_double);

  auto param_map = params.param_map();
  const cce_test::LinearProbe probe(param_map, 55);
  const auto loss = [&]() {
    num::Rng drop_rng(777);
    EncodeCache<double> cache;
    auto emissions = encode_from_stack(stack, params, cfg,
                                       num::DropoutMode::kTrain, &drop_rng,
                                       &cache);
    crf::CrfParams<double> frozen = params.crf_params;  // value copy
    return crf::nll_and_gradients(emissions, frozen, sentence.tags, nullptr) +
           probe.term(param_map);
  };
  const auto grads = [&]() {
    num::zero_grads(param_map);
    num::Rng drop_rng(777);
    EncodeCache<double> cache;
    auto emissions = encode_from_stack(stack, params, cfg,
                                       num::DropoutMode::kTrain, &drop_rng,
                                       &cache);
    num::Tensor<double> d_emissions(emissions.shape());
    crf::nll_and_gradients(emissions, params.crf_params, sentence.tags,
                           &d_emissions);
    encode_backward(params, cache, d_emissions);
    probe.add_grads(param_map);
  };
  const auto report = num::check_gradients<double>(loss, grads, param_map, 1e-5);
  CAPTURE(report.worst_param);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("training freezes the lm, is deterministic, and learns the toy task") {
  const auto data = synth::generate_synthetic(synth::SyntheticSpec::example(160, 17));
  auto lm_ckpt = tiny_lm(data.sentences);
  const std::string lm_hash_before = lm::lm_content_hash(lm_ckpt.params);

  NerConfig cfg = tiny_ner_config();
  cfg.epochs = 30;
  cfg.dropout_rate = 0.2;
  cfg.learning_rate = 0.03;
  cfg.encoder_hidden = 16;

  auto a = train_ner(data.sentences, lm_ckpt, cfg, 1, "lm.json");
  CHECK(lm::lm_content_hash(lm_ckpt.params) == lm_hash_before);
  CHECK(a.lm_hash == lm_hash_before);

  auto b = train_ner(data.sentences, lm_ckpt, cfg, 1, "lm.json");
  CHECK(ner_checkpoint_json(a).dump() == ner_checkpoint_json(b).dump());
  auto c = train_ner(data.sentences, lm_ckpt, cfg, 2, "lm.json");
  CHECK(ner_checkpoint_json(a).dump() != ner_checkpoint_json(c).dump());

  // memorization at toy scale: training sentences decode to their gold tags
  std::vector<std::vector<std::string>> sentences;
  for (std::size_t i = 0; i < 12; ++i) {
    sentences.push_back(data.sentences[i].tokens);
  }
  const auto decoded = predict(a, lm_ckpt, sentences);
  std::size_t agree = 0, total = 0;
  for (std::size_t i = 0; i < decoded.size(); ++i) {
    for (std::size_t t = 0; t < decoded[i].size(); ++t) {
      agree += decoded[i][t] == data.sentences[i].tags[t] ? 1 : 0;
      ++total;
    }
  }
  CHECK(static_cast<double>(agree) / static_cast<double>(total) > 0.95);

  CHECK_THROWS_AS(train_ner({}, lm_ckpt, cfg, 1), ArgumentError);

  // invalid gold tags are rejected with the sentence named
  auto broken = data.sentences;
  broken[3].tags[0] = crf::TagSet().inside_tag(1);  // starts with I-treatment
  try {
    train_ner(broken, lm_ckpt, cfg, 1);
    FAIL("expected ArgumentError");
  } catch (const ArgumentError& e) {
    CHECK(std::string(e.what()).find("sentence 3") != std::string::npos);
  }
}

TEST_CASE("predict: alignment, validity, empty input") {
  const auto data = synth::generate_synthetic(synth::SyntheticSpec::example(40, 23));
  auto lm_ckpt = tiny_lm(data.sentences);
  NerConfig cfg = tiny_ner_config();
  cfg.epochs = 1;
  auto model = train_ner(data.sentences, lm_ckpt, cfg, 3);

  CHECK(predict(model, lm_ckpt, {}).empty());

  std::vector<std::vector<std::string>> sentences;
  for (std::size_t i = 0; i < 8; ++i) sentences.push_back(data.sentences[i].tokens);
  const auto tags = predict(model, lm_ckpt, sentences);
  const auto mask = crf::transition_mask(crf::TagSet());
  REQUIRE(tags.size() == sentences.size());
  for (std::size_t i = 0; i < tags.size(); ++i) {
    CHECK(tags[i].size() == sentences[i].size());
    CHECK(crf::bio_valid(mask, tags[i]));
  }

  // wrong lm is an integrity error
  auto other_lm = lm::train_lm(corpus_from_tagged(data.sentences), {},
                               tiny_lm_config(), num::Rng(999));
  CHECK_THROWS_AS(predict(model, other_lm, sentences), IntegrityError);

  // validity also holds for untrained checkpoints with arbitrary transitions
  const crf::TagSet tagset;
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    NerCheckpoint random_model;
    random_model.config = cfg;
    random_model.lm_hash = lm::lm_content_hash(lm_ckpt.params);
    random_model.params = NerParams<float>(
        cfg, 2 * lm_ckpt.params.projection_dim(), tagset);
    num::Rng rng(seed);
    random_model.params.init(rng);
    for (auto& v : random_model.params.crf_params.transitions.value.values()) {
      v = static_cast<float>(rng.uniform(-3, 3));
    }
    const auto decoded = predict(random_model, lm_ckpt, sentences);
    for (const auto& seq : decoded) {
      CHECK(crf::bio_valid(mask, seq));
    }
  }
}

TEST_CASE("majority vote tables: strict majority, ties, post-vote repair") {
  const crf::TagSet tagset;
  const std::size_t b_problem = tagset.begin_tag(0);
  const std::size_t i_problem = tagset.inside_tag(0);
  const std::size_t b_test = tagset.begin_tag(2);

  // strict majority wins
  CHECK(majority_vote_tags({{b_problem}, {b_problem}, {0}}, tagset.size()) ==
        std::vector<std::size_t>{b_problem});
  // two-model tie: the earlier tag in the tagset order wins (O first)
  CHECK(majority_vote_tags({{0}, {b_test}}, tagset.size()) ==
        std::vector<std::size_t>{0});
  CHECK(majority_vote_tags({{b_test}, {i_problem}}, tagset.size()) ==
        std::vector<std::size_t>{i_problem});  // I-problem precedes B-test

  // voting can break BIO validity; the repair rule restores it
  const std::vector<std::vector<std::size_t>> votes = {
      {b_problem, i_problem}, {0, i_problem}, {0, 0}};
  const auto voted = majority_vote_tags(votes, tagset.size());
  CHECK(voted == std::vector<std::size_t>{0, i_problem});
  CHECK(eval::repair_bio(voted, tagset) ==
        std::vector<std::size_t>{0, b_problem});

  CHECK_THROWS_AS(majority_vote_tags({}, tagset.size()), ArgumentError);
}

TEST_CASE("encode pairs checkpoints by hash and matches recomposition") {
  const auto data = synth::generate_synthetic(synth::SyntheticSpec::example(30, 41));
  auto lm_ckpt = tiny_lm(data.sentences);
  NerConfig cfg = tiny_ner_config();
  cfg.epochs = 1;
  auto model = train_ner(data.sentences, lm_ckpt, cfg, 6, "lm.json");

  const std::vector<std::string> tokens = data.sentences[0].tokens;
  auto emissions = encode(tokens, lm_ckpt, model, num::DropoutMode::kEval);
  CHECK(emissions.rows() == tokens.size());
  CHECK(emissions.cols() == 7);

  // independent recomposition from the primitive layers
  const auto stack = lm::bilm_forward(tokens, lm_ckpt.params);
  auto current = scalar_mix(stack, model.params.mix);
  for (std::size_t l = 0; l < model.params.encoder.size(); ++l) {
    const std::size_t h = model.params.encoder[l][0].hidden();
    num::Tensor<float> concat({tokens.size(), 2 * h});
    for (std::size_t d = 0; d < 2; ++d) {
      const auto dir =
          d == 0 ? num::Direction::kForward : num::Direction::kBackward;
      const auto out = num::lstm_sequence(current, model.params.encoder[l][d], dir);
      for (std::size_t t = 0; t < tokens.size(); ++t) {
        for (std::size_t j = 0; j < h; ++j) concat(t, d * h + j) = out(t, j);
      }
    }
    current = std::move(concat);
  }
  const auto expected = num::affine(current, model.params.emit_w.value,
                                    model.params.emit_b.value);
  REQUIRE(expected.same_shape(emissions));
  for (std::size_t k = 0; k < expected.size(); ++k) {
    CHECK(emissions[k] == doctest::Approx(expected[k]).epsilon(1e-5));
  }

  // a different lm fails the integrity check inside encode
  auto other_lm = lm::train_lm(corpus_from_tagged(data.sentences), {},
                               tiny_lm_config(), num::Rng(77));
  CHECK_THROWS_AS(encode(tokens, other_lm, model, num::DropoutMode::kEval),
                  IntegrityError);
}

TEST_CASE("ensemble: majority vote, tie rule, permutation invariance") {
  const auto data = synth::generate_synthetic(synth::SyntheticSpec::example(60, 29));
  auto lm_ckpt = tiny_lm(data.sentences);
  NerConfig cfg = tiny_ner_config();
  cfg.epochs = 4;
  cfg.learning_rate = 0.01;

  auto m1 = train_ner(data.sentences, lm_ckpt, cfg, 1);
  auto m2 = train_ner(data.sentences, lm_ckpt, cfg, 2);
  auto m3 = train_ner(data.sentences, lm_ckpt, cfg, 3);

  std::vector<std::vector<std::string>> sentences;
  for (std::size_t i = 0; i < 10; ++i) sentences.push_back(data.sentences[i].tokens);

  // single checkpoint ensemble equals predict
  const auto single = ensemble_predict({&m1}, lm_ckpt, sentences);
  CHECK(single == predict(m1, lm_ckpt, sentences));

  // permutation invariance of the member order
  const auto abc = ensemble_predict({&m1, &m2, &m3}, lm_ckpt, sentences);
  const auto cab = ensemble_predict({&m3, &m1, &m2}, lm_ckpt, sentences);
  CHECK(abc == cab);

  const auto mask = crf::transition_mask(crf::TagSet());
  for (const auto& tags : abc) CHECK(crf::bio_valid(mask, tags));

  // mixed lm references are rejected
  auto other_lm = lm::train_lm(corpus_from_tagged(data.sentences), {},
                               tiny_lm_config(), num::Rng(31));
  auto foreign = train_ner(data.sentences, other_lm, cfg, 4);
  CHECK_THROWS_AS(ensemble_predict({&m1, &foreign}, lm_ckpt, sentences),
                  ArgumentError);
  CHECK_THROWS_AS(ensemble_predict({}, lm_ckpt, sentences), ArgumentError);
}

TEST_CASE("ner checkpoint round trip and hash pairing") {
  const auto data = synth::generate_synthetic(synth::SyntheticSpec::example(20, 37));
  auto lm_ckpt = tiny_lm(data.sentences);
  NerConfig cfg = tiny_ner_config();
  cfg.epochs = 1;
  auto model = train_ner(data.sentences, lm_ckpt, cfg, 5, "toy_lm.json");

  const auto dir = std::filesystem::temp_directory_path() / "cce_ner_tests";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "ner.ckpt.json").string();
  save_ner_checkpoint(path, model);
  auto loaded = load_ner_checkpoint(path);
  CHECK(loaded.seed == 5);
  CHECK(loaded.lm_path == "toy_lm.json");
  CHECK(loaded.lm_hash == model.lm_hash);

  const std::string path2 = (dir / "ner2.ckpt.json").string();
  save_ner_checkpoint(path2, loaded);
  CHECK(text::read_text_file(path) == text::read_text_file(path2));

  CHECK_NOTHROW(require_lm_match(loaded, lm_ckpt));
}
