#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "rrl/crf.hpp"
#include "rrl/encoder.hpp"
#include "rrl/evaluation.hpp"
#include "rrl/trainer.hpp"

using namespace rrl;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  auto dir = fs::temp_directory_path() / "rrl_trainer_tests";
  fs::create_directories(dir);
  return dir / name;
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.seed = 11;
  cfg.epochs = 2;
  cfg.learning_rates = {1e-2};
  cfg.batch_docs = 2;
  cfg.hasher.hash_buckets = 256;
  cfg.hasher.embed_dim = 8;
  cfg.encoder.h_tok = 4;
  cfg.encoder.attn_dim = 4;
  cfg.encoder.h_sent = 4;
  cfg.encoder.dropout = 0.0;
  return cfg;
}

Corpus tiny_corpus(std::uint64_t seed, int docs = 8, int labels = 3) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.n_docs = docs;
  cfg.n_labels = labels;
  cfg.mean_sentences = 5;
  cfg.mean_tokens = 5;
  return generate_synthetic(cfg);
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("train config: json round trip and validation") {
  TrainConfig cfg = tiny_config();
  cfg.methods.discourse = true;
  cfg.methods.memory_bank = true;
  std::string text = cfg.to_json_text();
  TrainConfig back = TrainConfig::from_json_text(text);
  CHECK(back.seed == cfg.seed);
  CHECK(back.methods.discourse);
  CHECK(back.methods.memory_bank);
  CHECK(back.digest() == cfg.digest());

  CHECK_THROWS_AS(TrainConfig::from_json_text("{\"nope\": 1}"), Error);
  CHECK_THROWS_AS(TrainConfig::from_json_text("not json"), Error);
  // multi_proto demands at least two prototypes per label
  CHECK_THROWS_AS(TrainConfig::from_json_text(
                      R"({"methods":{"multi_proto":true},"prototypes_per_label":1})"),
                  Error);
  // both prototype modes at once
  CHECK_THROWS_AS(TrainConfig::from_json_text(
                      R"({"methods":{"single_proto":true,"multi_proto":true}})"),
                  Error);
  // memory bank without a contrastive method
  CHECK_THROWS_AS(TrainConfig::from_json_text(
                      R"({"methods":{"memory_bank":true}})"),
                  Error);
}

TEST_CASE("adam: a zero-gradient step changes nothing") {
  Parameter p{"p", Tensor::from_vector({1.0, -2.0, 3.0}), true};
  std::vector<Parameter*> params{&p};
  AdamOptimizer adam(0.1);
  std::vector<Tensor> zero_grads{Tensor({3})};
  adam.step(params, zero_grads);
  CHECK(p.value == Tensor::from_vector({1.0, -2.0, 3.0}));

  std::vector<Tensor> grads{Tensor::from_vector({1.0, 0.0, 0.0})};
  adam.step(params, grads);
  CHECK(p.value.at(0) != 1.0);
  CHECK(p.value.at(1) == -2.0);
}

TEST_CASE("total_loss: zero aux weights reduce to the mean CRF NLL exactly") {
  Corpus corpus = tiny_corpus(31);
  TrainConfig cfg = tiny_config();
  cfg.methods.contrastive = true;
  cfg.methods.single_proto = true;
  cfg.w_cont = 0.0;
  cfg.w_pcv = 0.0;
  cfg.w_scv = 0.0;
  cfg.w_div = 0.0;
  Model model(corpus.label_set, cfg.hasher, cfg.encoder, cfg.seed,
              cfg.model_prototypes());

  std::vector<const Document*> batch{&corpus.documents[0],
                                     &corpus.documents[1]};
  Tape tape;
  BatchLoss loss = total_loss(tape, model, batch, cfg, nullptr, nullptr, false);

  double nll_mean = 0.0;
  for (const Document* doc : batch) {
    Tensor reps = encode_document_values(model, *doc);
    const Tensor& proj = model.crf_emission().value;
    Tensor emissions({reps.rows(), model.num_labels()});
    for (std::size_t i = 0; i < reps.rows(); ++i)
      for (std::size_t p = 0; p < reps.cols(); ++p)
        for (std::size_t j = 0; j < model.num_labels(); ++j)
          emissions.at2(i, j) += reps.at2(i, p) * proj.at2(p, j);
    std::vector<int> gold;
    for (const auto& s : doc->sentences) gold.push_back(s.label_id);
    nll_mean += crf_nll(emissions, crf_scores(model), gold);
  }
  nll_mean /= 2.0;
  CHECK(tape.value(loss.total).scalar_value() ==
        doctest::Approx(nll_mean).epsilon(1e-12));
}

TEST_CASE("total_loss: discourse equals plain contrastive when betas are 1") {
  // Two single-sentence documents: every pair is cross-document with anchor
  // document length 1, so beta = 1 throughout.
  Corpus corpus = tiny_corpus(37, 4, 2);
  for (auto& d : corpus.documents) d.sentences.resize(1);

  auto loss_with = [&](bool discourse) {
    TrainConfig cfg = tiny_config();
    cfg.methods.contrastive = !discourse;
    cfg.methods.discourse = discourse;
    Model model(corpus.label_set, cfg.hasher, cfg.encoder, cfg.seed, 0);
    std::vector<const Document*> batch{&corpus.documents[0],
                                       &corpus.documents[1],
                                       &corpus.documents[2]};
    Tape tape;
    BatchLoss loss =
        total_loss(tape, model, batch, cfg, nullptr, nullptr, false);
    return tape.value(loss.total).scalar_value();
  };
  CHECK(loss_with(false) == loss_with(true));
}

TEST_CASE("total_loss: finite on the first batch for every method combo") {
  Corpus corpus = tiny_corpus(41, 6, 3);
  struct Combo {
    const char* name;
    TrainMethods methods;
  };
  std::vector<Combo> combos{
      {"baseline", {}},
      {"contrastive", {.contrastive = true}},
      {"discourse", {.discourse = true}},
      {"contrastive+bank", {.contrastive = true, .memory_bank = true}},
      {"single_proto", {.single_proto = true}},
      {"multi_proto", {.multi_proto = true}},
      {"discourse+multi", {.discourse = true, .multi_proto = true}},
  };
  for (const auto& combo : combos) {
    CAPTURE(combo.name);
    TrainConfig cfg = tiny_config();
    cfg.methods = combo.methods;
    cfg.prototypes_per_label = 2;
    Model model(corpus.label_set, cfg.hasher, cfg.encoder, cfg.seed,
                cfg.model_prototypes());
    MemoryBank bank(model.num_labels(), cfg.bank_capacity);
    bank.enqueue(0, std::vector<double>(model.rep_dim(), 0.3));
    std::vector<const Document*> batch{&corpus.documents[0],
                                       &corpus.documents[1]};
    Tape tape;
    RandomStream rng(5);
    BatchLoss loss = total_loss(tape, model, batch, cfg,
                                cfg.methods.memory_bank ? &bank : nullptr,
                                &rng, true);
    CHECK(std::isfinite(tape.value(loss.total).scalar_value()));
    tape.backward(loss.total);  // gradients must come out finite too
    for (Parameter* p : model.parameters())
      CHECK(tape.grad_or_zero(tape.param(*p)).all_finite());
  }
}

TEST_CASE("train: epochs=0 returns the initialized checkpoint") {
  Corpus corpus = tiny_corpus(43);
  auto [tr, va, te] = split_corpus(corpus, 0.75, 0.25, 0.0, 1);
  TrainConfig cfg = tiny_config();
  cfg.epochs = 0;
  TrainResult result = train(tr, va, cfg);
  REQUIRE(result.runs.size() == 1);
  CHECK(result.runs[0].history.empty());
  CHECK(result.best_epoch == -1);

  Model fresh(tr.label_set, cfg.hasher, cfg.encoder, cfg.seed, 0);
  auto got = result.model->parameters();
  auto expect = fresh.parameters();
  for (std::size_t i = 0; i < got.size(); ++i)
    CHECK(got[i]->value == expect[i]->value);
}

TEST_CASE("train: two runs with one seed are identical") {
  Corpus corpus = tiny_corpus(47, 10, 3);
  auto [tr, va, te] = split_corpus(corpus, 0.8, 0.2, 0.0, 2);
  TrainConfig cfg = tiny_config();
  cfg.epochs = 3;
  cfg.methods.discourse = true;
  cfg.methods.memory_bank = true;
  cfg.bank_capacity = 8;

  TrainResult a = train(tr, va, cfg);
  TrainResult b = train(tr, va, cfg);
  CHECK(a.history_json() == b.history_json());
  auto pa = a.model->parameters();
  auto pb = b.model->parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i)
    CHECK(pa[i]->value == pb[i]->value);

  // History is recorded per epoch, in order.
  for (std::size_t i = 0; i < a.runs[0].history.size(); ++i)
    CHECK(a.runs[0].history[i].epoch == static_cast<int>(i));
}

TEST_CASE("train: separable synthetic data is learnable") {
  SynthConfig synth;
  synth.seed = 53;
  synth.n_docs = 24;
  synth.n_labels = 3;
  synth.mean_sentences = 6;
  synth.mean_tokens = 6;
  synth.vocab_per_label = 12;
  synth.shared_vocab = 0;  // disjoint vocabularies: decidable from tokens
  Corpus corpus = generate_synthetic(synth);
  auto [tr, va, te] = split_corpus(corpus, 0.75, 0.25, 0.0, 3);

  TrainConfig cfg = tiny_config();
  cfg.epochs = 10;
  cfg.learning_rates = {3e-2};
  TrainResult result = train(tr, va, cfg);
  double best = 0.0;
  for (const auto& e : result.runs[0].history)
    best = std::max(best, e.val_micro_f1);
  CHECK(best >= 0.9);
}

TEST_CASE("checkpoints: bitwise round trip and tamper detection") {
  Corpus corpus = tiny_corpus(59);
  TrainConfig cfg = tiny_config();
  Model model(corpus.label_set, cfg.hasher, cfg.encoder, 99, 2);

  auto p = temp_file("model.ckpt");
  save_checkpoint(model, p.string(), cfg.digest());
  auto loaded = load_checkpoint(p.string());
  CHECK(loaded->labels() == model.labels());
  CHECK(loaded->prototypes_per_label() == 2);
  auto pa = model.parameters();
  auto pb = loaded->parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->name == pb[i]->name);
    CHECK(pa[i]->value == pb[i]->value);
  }

  // Saving the loaded model reproduces the file byte for byte.
  auto p2 = temp_file("model2.ckpt");
  save_checkpoint(*loaded, p2.string(), cfg.digest());
  CHECK(file_bytes(p) == file_bytes(p2));

  // Version tamper: byte 8 holds the little-endian version word.
  std::string bytes = file_bytes(p);
  bytes[8] = 42;
  auto tampered = temp_file("tampered.ckpt");
  std::ofstream(tampered, std::ios::binary) << bytes;
  try {
    load_checkpoint(tampered.string());
    FAIL("expected version error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }

  std::ofstream(temp_file("truncated.ckpt"), std::ios::binary)
      << bytes.substr(0, 100);
  CHECK_THROWS_AS(load_checkpoint(temp_file("truncated.ckpt").string()), Error);
}
