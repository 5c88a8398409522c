#include "rrl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "rrl/crf.hpp"
#include "rrl/encoder.hpp"
#include "rrl/evaluation.hpp"
#include "rrl/serialize.hpp"

namespace rrl {

using nlohmann::json;

// ------------------------------------------------------------- config ----

void TrainConfig::validate() const {
  require(epochs >= 0, "train config: epochs >= 0 required");
  require(!learning_rates.empty(), "train config: no learning rates");
  for (double lr : learning_rates)
    require(lr > 0.0, "train config: learning rates must be positive");
  require(batch_docs >= 1, "train config: batch_docs >= 1 required");
  require(w_cont >= 0 && w_pcv >= 0 && w_scv >= 0 && w_div >= 0,
          "train config: loss weights must be non-negative");
  require(!(methods.single_proto && methods.multi_proto),
          "train config: single_proto and multi_proto are mutually exclusive");
  if (methods.multi_proto)
    require(prototypes_per_label >= 2,
            "train config: multi_proto requires at least 2 prototypes per label");
  if (methods.memory_bank)
    require(contrastive_active(),
            "train config: memory_bank requires a contrastive method");
  require(bank_capacity >= 1, "train config: bank capacity >= 1 required");
  require(theta >= -1.0 && theta <= 1.0, "train config: theta in [-1,1]");
}

int TrainConfig::model_prototypes() const {
  if (methods.single_proto) return 1;
  if (methods.multi_proto) return prototypes_per_label;
  return 0;
}

namespace {

void check_known_keys(const json& obj, std::initializer_list<const char*> keys,
                      const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : keys)
      if (it.key() == k) known = true;
    require(known, "train config: unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
void maybe(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj[key].get<T>();
}

}  // namespace

TrainConfig TrainConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(std::string("train config: malformed JSON (") + e.what() + ")");
  }
  TrainConfig cfg;
  check_known_keys(j,
                   {"seed", "epochs", "learning_rates", "batch_docs",
                    "methods", "weights", "bank_capacity",
                    "prototypes_per_label", "theta", "orientation",
                    "log_ratio", "attract_nearest", "hasher", "encoder"},
                   "top level");
  maybe(j, "seed", cfg.seed);
  maybe(j, "epochs", cfg.epochs);
  maybe(j, "learning_rates", cfg.learning_rates);
  maybe(j, "batch_docs", cfg.batch_docs);
  if (j.contains("methods")) {
    const json& m = j["methods"];
    check_known_keys(m,
                     {"contrastive", "discourse", "memory_bank",
                      "single_proto", "multi_proto"},
                     "methods");
    maybe(m, "contrastive", cfg.methods.contrastive);
    maybe(m, "discourse", cfg.methods.discourse);
    maybe(m, "memory_bank", cfg.methods.memory_bank);
    maybe(m, "single_proto", cfg.methods.single_proto);
    maybe(m, "multi_proto", cfg.methods.multi_proto);
  }
  if (j.contains("weights")) {
    const json& w = j["weights"];
    check_known_keys(w, {"contrastive", "pcv", "scv", "diversity"}, "weights");
    maybe(w, "contrastive", cfg.w_cont);
    maybe(w, "pcv", cfg.w_pcv);
    maybe(w, "scv", cfg.w_scv);
    maybe(w, "diversity", cfg.w_div);
  }
  maybe(j, "bank_capacity", cfg.bank_capacity);
  maybe(j, "prototypes_per_label", cfg.prototypes_per_label);
  maybe(j, "theta", cfg.theta);
  if (j.contains("orientation")) {
    std::string o = j["orientation"].get<std::string>();
    require(o == "similarity" || o == "verbatim",
            "train config: orientation must be 'similarity' or 'verbatim'");
    cfg.orientation = o == "similarity" ? PairOrientation::similarity
                                        : PairOrientation::verbatim;
  }
  maybe(j, "log_ratio", cfg.log_ratio);
  maybe(j, "attract_nearest", cfg.attract_nearest);
  if (j.contains("hasher")) {
    const json& h = j["hasher"];
    check_known_keys(h, {"hash_buckets", "hash_seed", "embed_dim", "max_tokens"},
                     "hasher");
    maybe(h, "hash_buckets", cfg.hasher.hash_buckets);
    maybe(h, "hash_seed", cfg.hasher.hash_seed);
    maybe(h, "embed_dim", cfg.hasher.embed_dim);
    maybe(h, "max_tokens", cfg.hasher.max_tokens);
  }
  if (j.contains("encoder")) {
    const json& e = j["encoder"];
    check_known_keys(e, {"h_tok", "attn_dim", "h_sent", "dropout", "pool_source"},
                     "encoder");
    maybe(e, "h_tok", cfg.encoder.h_tok);
    maybe(e, "attn_dim", cfg.encoder.attn_dim);
    maybe(e, "h_sent", cfg.encoder.h_sent);
    maybe(e, "dropout", cfg.encoder.dropout);
    if (e.contains("pool_source")) {
      std::string p = e["pool_source"].get<std::string>();
      require(p == "transformed" || p == "lstm_state",
              "train config: pool_source must be 'transformed' or 'lstm_state'");
      cfg.encoder.pool_source = p == "transformed" ? PoolSource::transformed
                                                   : PoolSource::lstm_state;
    }
  }
  cfg.validate();
  return cfg;
}

std::string TrainConfig::to_json_text() const {
  json j = {
      {"seed", seed},
      {"epochs", epochs},
      {"learning_rates", learning_rates},
      {"batch_docs", batch_docs},
      {"methods",
       {{"contrastive", methods.contrastive},
        {"discourse", methods.discourse},
        {"memory_bank", methods.memory_bank},
        {"single_proto", methods.single_proto},
        {"multi_proto", methods.multi_proto}}},
      {"weights",
       {{"contrastive", w_cont}, {"pcv", w_pcv}, {"scv", w_scv},
        {"diversity", w_div}}},
      {"bank_capacity", bank_capacity},
      {"prototypes_per_label", prototypes_per_label},
      {"theta", theta},
      {"orientation",
       orientation == PairOrientation::similarity ? "similarity" : "verbatim"},
      {"log_ratio", log_ratio},
      {"attract_nearest", attract_nearest},
      {"hasher",
       {{"hash_buckets", hasher.hash_buckets},
        {"hash_seed", hasher.hash_seed},
        {"embed_dim", hasher.embed_dim},
        {"max_tokens", hasher.max_tokens}}},
      {"encoder",
       {{"h_tok", encoder.h_tok},
        {"attn_dim", encoder.attn_dim},
        {"h_sent", encoder.h_sent},
        {"dropout", encoder.dropout},
        {"pool_source", encoder.pool_source == PoolSource::transformed
                            ? "transformed"
                            : "lstm_state"}}}};
  return j.dump(2);
}

std::uint64_t TrainConfig::digest() const { return fnv1a64(to_json_text()); }

// --------------------------------------------------------------- loss ----

BatchLoss total_loss(Tape& tape, Model& model,
                     std::span<const Document* const> batch,
                     const TrainConfig& cfg, const MemoryBank* bank,
                     RandomStream* dropout_rng, bool training) {
  require(!batch.empty(), "total_loss: empty batch");

  BatchLoss out;
  BatchContext ctx;
  std::vector<ProtoBatchItem> proto_batch;
  std::vector<Tape::NodeId> nll_terms;

  EncodeOptions enc_opt;
  enc_opt.training = training;
  enc_opt.dropout_rng = dropout_rng;

  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Document& doc = *batch[b];
    Tape::NodeId reps = encode_document(tape, model, doc, enc_opt);
    Tape::NodeId emissions = crf_emissions_node(tape, model, reps);
    std::vector<int> gold;
    for (const auto& s : doc.sentences) gold.push_back(s.label_id);
    nll_terms.push_back(crf_nll_node(tape, model, emissions, gold));

    int m = static_cast<int>(doc.sentences.size());
    for (int i = 0; i < m; ++i) {
      Tape::NodeId rep = tape.row(reps, static_cast<std::size_t>(i));
      int label = doc.sentences[i].label_id;
      out.reps.emplace_back(rep, label);
      ctx.items.push_back(ContrastiveItem{rep, label, static_cast<int>(b), i,
                                          m, false});
      proto_batch.push_back(ProtoBatchItem{rep, label});
    }
  }
  ctx.batch_size = ctx.items.size();

  Tape::NodeId loss = tape.mean(tape.stack(nll_terms));

  if (cfg.contrastive_active() && cfg.w_cont != 0.0) {
    if (bank != nullptr) {
      for (std::size_t label = 0; label < model.num_labels(); ++label) {
        for (const auto& stored : bank->queue(static_cast<int>(label))) {
          ContrastiveItem item;
          item.rep = tape.constant(Tensor::from_vector(stored));
          item.label = static_cast<int>(label);
          item.doc_index = -1;
          item.position = 0;
          item.doc_length = 1;
          item.from_bank = true;
          ctx.items.push_back(item);
        }
      }
    }
    ContrastiveConfig ccfg;
    ccfg.pair.orientation = cfg.orientation;
    ccfg.log_ratio = cfg.log_ratio;
    Tape::NodeId cont = cfg.methods.discourse
                            ? discourse_supcon_loss(tape, ctx, ccfg)
                            : supcon_loss(tape, ctx, ccfg);
    loss = tape.add(loss, tape.scale(cont, cfg.w_cont));
  }

  ProtoLossConfig pcfg;
  pcfg.theta = cfg.theta;
  pcfg.pair.orientation = cfg.orientation;
  pcfg.attract_nearest = cfg.attract_nearest;
  if (cfg.methods.single_proto) {
    if (cfg.w_pcv != 0.0)
      loss = tape.add(loss,
                      tape.scale(pcv_loss(tape, model, proto_batch, pcfg),
                                 cfg.w_pcv));
    if (cfg.w_scv != 0.0)
      loss = tape.add(loss,
                      tape.scale(scv_loss(tape, model, proto_batch, pcfg),
                                 cfg.w_scv));
  }
  if (cfg.methods.multi_proto) {
    if (cfg.w_scv != 0.0)
      loss = tape.add(
          loss, tape.scale(multi_scv_loss(tape, model, proto_batch, pcfg),
                           cfg.w_scv));
    if (cfg.w_div != 0.0)
      loss = tape.add(loss, tape.scale(diversity_loss(tape, model, pcfg.theta),
                                       cfg.w_div));
  }

  out.total = loss;
  return out;
}

// --------------------------------------------------------------- adam ----

AdamOptimizer::AdamOptimizer(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::step(std::span<Parameter* const> params,
                         const std::vector<Tensor>& grads) {
  require(params.size() == grads.size(), "adam: gradient list mismatch");
  if (!initialized_) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (Parameter* p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
    initialized_ = true;
  }
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (!p.trainable) continue;
    const Tensor& g = grads[i];
    require(g.same_shape(p.value), "adam: gradient shape mismatch for " + p.name);
    for (std::size_t c = 0; c < p.value.size(); ++c) {
      double gc = g.at(c);
      m_[i].at(c) = beta1_ * m_[i].at(c) + (1.0 - beta1_) * gc;
      v_[i].at(c) = beta2_ * v_[i].at(c) + (1.0 - beta2_) * gc * gc;
      double mhat = m_[i].at(c) / bc1;
      double vhat = v_[i].at(c) / bc2;
      p.value.at(c) -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

// -------------------------------------------------------------- train ----

namespace {

std::vector<Tensor> snapshot_values(Model& model) {
  std::vector<Tensor> values;
  for (Parameter* p : model.parameters()) values.push_back(p->value);
  return values;
}

void restore_values(Model& model, const std::vector<Tensor>& values) {
  auto params = model.parameters();
  require(params.size() == values.size(), "restore: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

}  // namespace

TrainResult train(const Corpus& train_corpus, const Corpus& val_corpus,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  require(!train_corpus.documents.empty(), "train: empty training corpus");
  require(!val_corpus.documents.empty(), "train: empty validation corpus");
  require(train_corpus.label_set == val_corpus.label_set,
          "train: train/val label sets differ");

  TrainResult result;
  std::vector<Tensor> best_values;
  double best_macro = -1.0;
  bool have_best = false;

  for (double lr : cfg.learning_rates) {
    Model model(train_corpus.label_set, cfg.hasher, cfg.encoder, cfg.seed,
                cfg.model_prototypes());
    auto params = model.parameters();
    AdamOptimizer adam(lr);
    MemoryBank bank(model.num_labels(), cfg.bank_capacity);
    RandomStream shuffle_rng(splitmix64(cfg.seed ^ 0x9e3779b97f4a7c15ULL));
    RandomStream dropout_rng(splitmix64(cfg.seed ^ 0x7f4a7c159e3779b9ULL));

    LrRun run;
    run.lr = lr;
    std::vector<Tensor> run_best_values = snapshot_values(model);
    double run_best_macro = -1.0;
    int run_best_epoch = -1;

    std::vector<std::size_t> order(train_corpus.documents.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      shuffle_rng.shuffle(order);
      double loss_sum = 0.0;
      std::size_t steps = 0;
      for (std::size_t begin = 0; begin < order.size();
           begin += static_cast<std::size_t>(cfg.batch_docs)) {
        std::size_t end = std::min(order.size(),
                                   begin + static_cast<std::size_t>(cfg.batch_docs));
        std::vector<const Document*> batch;
        for (std::size_t i = begin; i < end; ++i)
          batch.push_back(&train_corpus.documents[order[i]]);

        Tape tape;
        BatchLoss batch_loss = total_loss(
            tape, model, batch, cfg, cfg.methods.memory_bank ? &bank : nullptr,
            &dropout_rng, true);
        double loss_value = tape.value(batch_loss.total).scalar_value();
        if (!std::isfinite(loss_value))
          fail("train: non-finite loss at lr " + std::to_string(lr) +
               ", epoch " + std::to_string(epoch) + ", step " +
               std::to_string(steps));
        tape.backward(batch_loss.total);

        std::vector<Tensor> grads;
        grads.reserve(params.size());
        for (Parameter* p : params)
          grads.push_back(tape.grad_or_zero(tape.param(*p)));
        adam.step(params, grads);

        if (cfg.methods.memory_bank) {
          for (const auto& [node, label] : batch_loss.reps) {
            const Tensor& v = tape.value(node);
            bank.enqueue(label,
                         std::vector<double>(v.data(), v.data() + v.size()));
          }
        }
        loss_sum += loss_value;
        ++steps;
      }

      EvalReport val_report = evaluate_corpus(model, val_corpus);
      EpochStats stats;
      stats.epoch = epoch;
      stats.train_loss = steps > 0 ? loss_sum / static_cast<double>(steps) : 0.0;
      stats.val_macro_f1 = val_report.macro_f1;
      stats.val_micro_f1 = val_report.micro_f1;
      run.history.push_back(stats);
      if (on_epoch) on_epoch(lr, stats);

      if (stats.val_macro_f1 > run_best_macro) {
        run_best_macro = stats.val_macro_f1;
        run_best_epoch = epoch;
        run_best_values = snapshot_values(model);
      }
    }

    run.best_epoch = run_best_epoch;
    run.best_val_macro_f1 = std::max(run_best_macro, 0.0);
    result.runs.push_back(run);

    if (!have_best || run_best_macro > best_macro) {
      have_best = true;
      best_macro = run_best_macro;
      best_values = std::move(run_best_values);
      result.best_lr = lr;
      result.best_epoch = run_best_epoch;
    }
  }

  result.model = std::make_unique<Model>(train_corpus.label_set, cfg.hasher,
                                         cfg.encoder, cfg.seed,
                                         cfg.model_prototypes());
  restore_values(*result.model, best_values);
  return result;
}

std::string TrainResult::history_json() const {
  json runs_json = json::array();
  for (const auto& run : runs) {
    json epochs = json::array();
    for (const auto& e : run.history)
      epochs.push_back({{"epoch", e.epoch},
                        {"train_loss", e.train_loss},
                        {"val_macro_f1", e.val_macro_f1},
                        {"val_micro_f1", e.val_micro_f1}});
    runs_json.push_back({{"lr", run.lr},
                         {"epochs", epochs},
                         {"best_epoch", run.best_epoch},
                         {"best_val_macro_f1", run.best_val_macro_f1}});
  }
  json out = {{"runs", runs_json},
              {"best", {{"lr", best_lr}, {"epoch", best_epoch}}}};
  return out.dump(2);
}

std::vector<MethodGradCheck> gradient_check_all_methods(std::uint64_t seed,
                                                        double eps) {
  SynthConfig synth;
  synth.seed = seed;
  synth.n_docs = 2;
  synth.n_labels = 3;
  synth.mean_sentences = 3;
  synth.mean_tokens = 4;
  synth.vocab_per_label = 5;
  synth.shared_vocab = 3;
  Corpus corpus = generate_synthetic(synth);
  std::vector<const Document*> batch;
  for (const auto& d : corpus.documents) batch.push_back(&d);

  TrainConfig base;
  base.seed = seed;
  base.hasher.hash_buckets = 31;
  base.hasher.embed_dim = 4;
  base.encoder.h_tok = 3;
  base.encoder.attn_dim = 3;
  base.encoder.h_sent = 3;
  base.encoder.dropout = 0.0;  // the check needs a deterministic loss
  base.prototypes_per_label = 2;

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
      {"multi_proto+diversity", {.multi_proto = true}},
  };

  std::vector<MethodGradCheck> results;
  for (const auto& combo : combos) {
    TrainConfig cfg = base;
    cfg.methods = combo.methods;
    Model model(corpus.label_set, cfg.hasher, cfg.encoder, cfg.seed,
                cfg.model_prototypes());
    auto params = model.parameters();

    MemoryBank bank(model.num_labels(), 4);
    if (cfg.methods.memory_bank) {
      // Freeze a deterministic bank before the check.
      Tape warmup;
      BatchLoss warm = total_loss(warmup, model, batch, cfg, nullptr, nullptr,
                                  false);
      for (const auto& [node, label] : warm.reps) {
        const Tensor& v = warmup.value(node);
        bank.enqueue(label, std::vector<double>(v.data(), v.data() + v.size()));
      }
    }

    auto f = [&](std::map<std::string, Tensor>* grads) {
      Tape tape;
      BatchLoss loss = total_loss(tape, model, batch, cfg,
                                  cfg.methods.memory_bank ? &bank : nullptr,
                                  nullptr, false);
      if (grads) {
        tape.backward(loss.total);
        for (Parameter* p : params)
          (*grads)[p->name] = tape.grad_or_zero(tape.param(*p));
      }
      return tape.value(loss.total).scalar_value();
    };
    results.push_back({combo.name, finite_difference_check(f, params, eps)});
  }
  return results;
}

// --------------------------------------------------------- checkpoints ----

namespace {
constexpr char kCkptMagic[9] = "RRLCKPT1";
constexpr std::uint32_t kCkptVersion = 1;
}  // namespace

void save_checkpoint(Model& model, const std::string& path,
                     std::uint64_t train_config_digest) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "checkpoint: cannot write " + path);
  io::put_bytes(out, kCkptMagic, 8);
  io::put_le<std::uint32_t>(out, kCkptVersion);

  char digest_hex[32];
  std::snprintf(digest_hex, sizeof(digest_hex), "%016llx",
                static_cast<unsigned long long>(train_config_digest));
  json config = {
      {"labels", model.labels().names()},
      {"prototypes_per_label", model.prototypes_per_label()},
      {"train_config_digest", digest_hex},
      {"hasher",
       {{"hash_buckets", model.hasher().hash_buckets},
        {"hash_seed", model.hasher().hash_seed},
        {"embed_dim", model.hasher().embed_dim},
        {"max_tokens", model.hasher().max_tokens}}},
      {"encoder",
       {{"h_tok", model.encoder().h_tok},
        {"attn_dim", model.encoder().attn_dim},
        {"h_sent", model.encoder().h_sent},
        {"dropout", model.encoder().dropout},
        {"pool_source",
         model.encoder().pool_source == PoolSource::transformed
             ? "transformed"
             : "lstm_state"}}}};
  io::put_string(out, config.dump());

  auto params = model.parameters();
  io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (Parameter* p : params) {
    io::put_string(out, p->name);
    io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.rank()));
    for (std::size_t d : p->value.shape())
      io::put_le<std::uint64_t>(out, d);
    for (std::size_t i = 0; i < p->value.size(); ++i)
      io::put_le<double>(out, p->value.at(i));
  }
  require(out.good(), "checkpoint: write failed for " + path);
}

std::unique_ptr<Model> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "checkpoint: cannot open " + path);
  io::check_magic(in, kCkptMagic, "checkpoint");
  std::uint32_t version = io::get_le<std::uint32_t>(in);
  require(version == kCkptVersion,
          "checkpoint: unsupported format version " + std::to_string(version));

  json config;
  try {
    config = json::parse(io::get_string(in));
  } catch (const json::exception& e) {
    fail(std::string("checkpoint: malformed config block (") + e.what() + ")");
  }
  HasherConfig hasher;
  hasher.hash_buckets = config["hasher"]["hash_buckets"].get<std::uint64_t>();
  hasher.hash_seed = config["hasher"]["hash_seed"].get<std::uint64_t>();
  hasher.embed_dim = config["hasher"]["embed_dim"].get<std::size_t>();
  hasher.max_tokens = config["hasher"]["max_tokens"].get<std::size_t>();
  EncoderConfig encoder;
  encoder.h_tok = config["encoder"]["h_tok"].get<std::size_t>();
  encoder.attn_dim = config["encoder"]["attn_dim"].get<std::size_t>();
  encoder.h_sent = config["encoder"]["h_sent"].get<std::size_t>();
  encoder.dropout = config["encoder"]["dropout"].get<double>();
  encoder.pool_source =
      config["encoder"]["pool_source"].get<std::string>() == "transformed"
          ? PoolSource::transformed
          : PoolSource::lstm_state;
  LabelSet labels(config["labels"].get<std::vector<std::string>>());
  int protos = config["prototypes_per_label"].get<int>();

  auto model = std::make_unique<Model>(labels, hasher, encoder, 0, protos);

  std::uint32_t n_tensors = io::get_le<std::uint32_t>(in);
  auto params = model->parameters();
  require(n_tensors == params.size(),
          "checkpoint: tensor count mismatch (file " +
              std::to_string(n_tensors) + ", model " +
              std::to_string(params.size()) + ")");
  std::vector<bool> filled(params.size(), false);
  for (std::uint32_t t = 0; t < n_tensors; ++t) {
    std::string name = io::get_string(in);
    Parameter* p = model->find(name);
    require(p != nullptr, "checkpoint: unknown tensor name '" + name + "'");
    std::uint32_t rank = io::get_le<std::uint32_t>(in);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape)
      d = static_cast<std::size_t>(io::get_le<std::uint64_t>(in));
    require(shape == p->value.shape(),
            "checkpoint: shape mismatch for tensor '" + name + "'");
    for (std::size_t i = 0; i < p->value.size(); ++i)
      p->value.at(i) = io::get_le<double>(in);
    for (std::size_t i = 0; i < params.size(); ++i)
      if (params[i] == p) filled[i] = true;
  }
  for (std::size_t i = 0; i < params.size(); ++i)
    require(filled[i], "checkpoint: missing tensor '" + params[i]->name + "'");
  return model;
}

}  // namespace rrl
