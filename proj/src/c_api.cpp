#include "rrl.h"

#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include <json.hpp>

#include "rrl/corpus.hpp"
#include "rrl/datastore.hpp"
#include "rrl/evaluation.hpp"
#include "rrl/trainer.hpp"

using nlohmann::json;

struct rrl_corpus {
  rrl::Corpus value;
};
struct rrl_model {
  std::unique_ptr<rrl::Model> value;
};
struct rrl_datastore {
  rrl::Datastore value;
};

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

int fail_invalid(const std::string& msg) {
  set_error(msg);
  return RRL_ERR_INVALID_ARGUMENT;
}

// Runs the body, mapping exceptions onto status codes.
template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return RRL_OK;
  } catch (const rrl::Error& e) {
    set_error(e.what());
    return RRL_ERR_DATA;
  } catch (const std::exception& e) {
    set_error(std::string("internal error: ") + e.what());
    return RRL_ERR_INTERNAL;
  }
}

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

rrl::Model& model_of(const rrl_model* m) {
  // The C API treats models as logically const; decoding never mutates
  // parameter values.
  return *const_cast<rrl_model*>(m)->value;
}

rrl::SynthConfig parse_synth_config(const char* config_json) {
  rrl::SynthConfig cfg;
  if (config_json == nullptr || *config_json == '\0') return cfg;
  json j;
  try {
    j = json::parse(config_json);
  } catch (const json::exception& e) {
    rrl::fail(std::string("synthetic config: malformed JSON (") + e.what() + ")");
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    if (key == "seed") cfg.seed = it->get<std::uint64_t>();
    else if (key == "n_docs") cfg.n_docs = it->get<int>();
    else if (key == "n_labels") cfg.n_labels = it->get<int>();
    else if (key == "zipf_exponent") cfg.zipf_exponent = it->get<double>();
    else if (key == "mean_sentences") cfg.mean_sentences = it->get<int>();
    else if (key == "mean_tokens") cfg.mean_tokens = it->get<int>();
    else if (key == "vocab_per_label") cfg.vocab_per_label = it->get<int>();
    else if (key == "shared_vocab") cfg.shared_vocab = it->get<int>();
    else if (key == "transition_stickiness")
      cfg.transition_stickiness = it->get<double>();
    else
      rrl::fail("synthetic config: unknown key '" + key + "'");
  }
  return cfg;
}

}  // namespace

extern "C" {

const char* rrl_version(void) { return "0.1.0"; }

const char* rrl_last_error(void) { return g_last_error.c_str(); }

void rrl_string_free(char* s) { delete[] s; }

// ---------------------------------------------------------------- corpus --

int rrl_corpus_load(const char* jsonl_path, const char* labels_path,
                    rrl_corpus** out) {
  if (!jsonl_path || !labels_path || !out)
    return fail_invalid("rrl_corpus_load: null argument");
  return guarded([&] {
    rrl::LabelSet labels = rrl::LabelSet::load(labels_path);
    auto corpus = std::make_unique<rrl_corpus>();
    corpus->value = rrl::load_corpus(jsonl_path, labels);
    *out = corpus.release();
  });
}

int rrl_corpus_generate(const char* config_json, rrl_corpus** out) {
  if (!out) return fail_invalid("rrl_corpus_generate: null output");
  return guarded([&] {
    auto corpus = std::make_unique<rrl_corpus>();
    corpus->value = rrl::generate_synthetic(parse_synth_config(config_json));
    *out = corpus.release();
  });
}

int rrl_corpus_save(const rrl_corpus* corpus, const char* jsonl_path) {
  if (!corpus || !jsonl_path) return fail_invalid("rrl_corpus_save: null argument");
  return guarded([&] { rrl::write_corpus(corpus->value, jsonl_path); });
}

int rrl_corpus_save_labels(const rrl_corpus* corpus, const char* labels_path) {
  if (!corpus || !labels_path)
    return fail_invalid("rrl_corpus_save_labels: null argument");
  return guarded([&] { corpus->value.label_set.save(labels_path); });
}

int rrl_corpus_split(const rrl_corpus* corpus, double train_frac,
                     double val_frac, double test_frac, uint64_t seed,
                     rrl_corpus** train_out, rrl_corpus** val_out,
                     rrl_corpus** test_out) {
  if (!corpus || !train_out || !val_out || !test_out)
    return fail_invalid("rrl_corpus_split: null argument");
  return guarded([&] {
    auto [tr, va, te] = rrl::split_corpus(corpus->value, train_frac, val_frac,
                                          test_frac, seed);
    *train_out = new rrl_corpus{std::move(tr)};
    *val_out = new rrl_corpus{std::move(va)};
    *test_out = new rrl_corpus{std::move(te)};
  });
}

int rrl_corpus_stats(const rrl_corpus* corpus, char** json_out) {
  if (!corpus || !json_out) return fail_invalid("rrl_corpus_stats: null argument");
  return guarded([&] {
    const rrl::Corpus& c = corpus->value;
    json dist = json::object();
    if (c.sentence_count() > 0) {
      auto probs = rrl::label_distribution(c);
      for (std::size_t j = 0; j < probs.size(); ++j)
        dist[c.label_set.name(j)] = probs[j];
    }
    json j = {{"name", c.name},
              {"documents", c.documents.size()},
              {"sentences", c.sentence_count()},
              {"labels", c.label_set.names()},
              {"label_distribution", dist}};
    *json_out = copy_string(j.dump(2));
  });
}

void rrl_corpus_free(rrl_corpus* corpus) { delete corpus; }

// -------------------------------------------------------------- training --

int rrl_train(const rrl_corpus* train, const rrl_corpus* val,
              const char* train_config_json, rrl_epoch_fn on_epoch, void* user,
              rrl_model** model_out, char** history_json_out) {
  if (!train || !val || !model_out)
    return fail_invalid("rrl_train: null argument");
  return guarded([&] {
    rrl::TrainConfig cfg =
        (train_config_json == nullptr || *train_config_json == '\0')
            ? rrl::TrainConfig{}
            : rrl::TrainConfig::from_json_text(train_config_json);
    rrl::EpochCallback cb;
    if (on_epoch) {
      cb = [on_epoch, user](double lr, const rrl::EpochStats& e) {
        on_epoch(lr, e.epoch, e.train_loss, e.val_macro_f1, e.val_micro_f1,
                 user);
      };
    }
    rrl::TrainResult result = rrl::train(train->value, val->value, cfg, cb);
    if (history_json_out) *history_json_out = copy_string(result.history_json());
    *model_out = new rrl_model{std::move(result.model)};
  });
}

int rrl_model_save(const rrl_model* model, const char* path) {
  if (!model || !path) return fail_invalid("rrl_model_save: null argument");
  return guarded([&] { rrl::save_checkpoint(model_of(model), path); });
}

int rrl_model_load(const char* path, rrl_model** out) {
  if (!path || !out) return fail_invalid("rrl_model_load: null argument");
  return guarded([&] {
    *out = new rrl_model{rrl::load_checkpoint(path)};
  });
}

void rrl_model_free(rrl_model* model) { delete model; }

int rrl_gradient_check(const char* options_json, char** report_json_out) {
  if (!report_json_out)
    return fail_invalid("rrl_gradient_check: null output");
  return guarded([&] {
    std::uint64_t seed = 5;
    double eps = 1e-4;
    if (options_json != nullptr && *options_json != '\0') {
      json j = json::parse(options_json);
      if (j.contains("seed")) seed = j["seed"].get<std::uint64_t>();
      if (j.contains("eps")) eps = j["eps"].get<double>();
    }
    auto checks = rrl::gradient_check_all_methods(seed, eps);
    json combos = json::array();
    double worst = 0.0;
    for (const auto& c : checks) {
      combos.push_back({{"name", c.name},
                        {"max_rel_err", c.report.max_rel_err},
                        {"worst_param", c.report.worst_param}});
      worst = std::max(worst, c.report.max_rel_err);
    }
    json out = {{"combos", combos}, {"max_rel_err", worst}};
    *report_json_out = copy_string(out.dump(2));
  });
}

// ------------------------------------------------------------- datastore --

int rrl_datastore_build(const rrl_model* model, const rrl_corpus* train,
                        int kind, uint32_t clusters_per_label, uint64_t seed,
                        double tau, rrl_datastore** out) {
  if (!model || !train || !out)
    return fail_invalid("rrl_datastore_build: null argument");
  if (kind != RRL_STORE_KNN && kind != RRL_STORE_SINGLE_PROTO &&
      kind != RRL_STORE_MULTI_PROTO)
    return fail_invalid("rrl_datastore_build: unknown kind");
  return guarded([&] {
    rrl::Datastore knn = rrl::build_datastore(model_of(model), train->value, tau);
    if (kind == RRL_STORE_KNN) {
      *out = new rrl_datastore{std::move(knn)};
    } else if (kind == RRL_STORE_SINGLE_PROTO) {
      *out = new rrl_datastore{rrl::class_mean_prototypes(knn)};
    } else {
      rrl::require(clusters_per_label >= 1,
                   "rrl_datastore_build: clusters_per_label >= 1 required");
      *out = new rrl_datastore{
          rrl::multi_prototypes(knn, clusters_per_label, seed)};
    }
  });
}

int rrl_datastore_save(const rrl_datastore* store, const char* path) {
  if (!store || !path) return fail_invalid("rrl_datastore_save: null argument");
  return guarded([&] { store->value.save(path); });
}

int rrl_datastore_load(const char* path, rrl_datastore** out) {
  if (!path || !out) return fail_invalid("rrl_datastore_load: null argument");
  return guarded([&] {
    *out = new rrl_datastore{rrl::Datastore::load(path)};
  });
}

void rrl_datastore_free(rrl_datastore* store) { delete store; }

// ------------------------------------------------- inference, evaluation --

int rrl_infer(const rrl_model* model, const rrl_datastore* store,
              double lambda, uint32_t k, double tau, int baseline_dist,
              const rrl_corpus* docs, char** predictions_jsonl_out) {
  if (!model || !docs || !predictions_jsonl_out)
    return fail_invalid("rrl_infer: null argument");
  if (baseline_dist != RRL_BASELINE_CRF_MARGINALS &&
      baseline_dist != RRL_BASELINE_EMISSION_SOFTMAX)
    return fail_invalid("rrl_infer: unknown baseline_dist");
  return guarded([&] {
    rrl::Model& m = model_of(model);
    rrl::require(docs->value.label_set == m.labels(),
                 "rrl_infer: corpus label set does not match the checkpoint's");
    std::string out;
    for (const auto& doc : docs->value.documents) {
      std::vector<int> pred;
      if (store == nullptr) {
        pred = rrl::predict_document(m, doc);
      } else {
        rrl::DecodeOptions opts;
        opts.lambda = lambda;
        opts.k = k;
        opts.tau = tau;
        opts.baseline = baseline_dist == RRL_BASELINE_CRF_MARGINALS
                            ? rrl::BaselineDist::crf_marginals
                            : rrl::BaselineDist::emission_softmax;
        pred = rrl::decode_interpolated(m, doc, store->value, opts);
      }
      json labels = json::array();
      for (int p : pred) labels.push_back(m.labels().name(p));
      json line = {{"doc_id", doc.doc_id}, {"labels", labels}};
      out += line.dump();
      out += "\n";
    }
    *predictions_jsonl_out = copy_string(out);
  });
}

int rrl_evaluate(const rrl_model* model, const rrl_corpus* test,
                 const rrl_datastore* store, double lambda, uint32_t k,
                 double tau, int baseline_dist, char** report_json_out,
                 char** report_text_out) {
  if (!model || !test) return fail_invalid("rrl_evaluate: null argument");
  if (baseline_dist != RRL_BASELINE_CRF_MARGINALS &&
      baseline_dist != RRL_BASELINE_EMISSION_SOFTMAX)
    return fail_invalid("rrl_evaluate: unknown baseline_dist");
  return guarded([&] {
    rrl::Model& m = model_of(model);
    rrl::EvalReport report;
    if (store == nullptr) {
      report = rrl::evaluate_corpus(m, test->value);
    } else {
      rrl::DecodeOptions opts;
      opts.lambda = lambda;
      opts.k = k;
      opts.tau = tau;
      opts.baseline = baseline_dist == RRL_BASELINE_CRF_MARGINALS
                          ? rrl::BaselineDist::crf_marginals
                          : rrl::BaselineDist::emission_softmax;
      report = rrl::evaluate_interpolated(m, test->value, store->value, opts);
    }
    if (report_json_out)
      *report_json_out = copy_string(report.to_json(m.labels()));
    if (report_text_out)
      *report_text_out = copy_string(report.to_text(m.labels()));
  });
}

int rrl_grid_search(const rrl_model* model, const rrl_datastore* store,
                    const rrl_corpus* val, int baseline_dist, char** csv_out,
                    char** best_json_out) {
  if (!model || !store || !val)
    return fail_invalid("rrl_grid_search: null argument");
  if (baseline_dist != RRL_BASELINE_CRF_MARGINALS &&
      baseline_dist != RRL_BASELINE_EMISSION_SOFTMAX)
    return fail_invalid("rrl_grid_search: unknown baseline_dist");
  return guarded([&] {
    rrl::GridResult grid = rrl::grid_search_interpolation(
        model_of(model), store->value, val->value,
        baseline_dist == RRL_BASELINE_CRF_MARGINALS
            ? rrl::BaselineDist::crf_marginals
            : rrl::BaselineDist::emission_softmax);
    if (csv_out) *csv_out = copy_string(grid.csv());
    if (best_json_out) {
      json best = {{"lambda", grid.best.lambda},
                   {"k", grid.best.k},
                   {"macro_f1", grid.best.macro_f1},
                   {"micro_f1", grid.best.micro_f1}};
      *best_json_out = copy_string(best.dump(2));
    }
  });
}

int rrl_random_baseline(const rrl_corpus* train, const rrl_corpus* test,
                        uint32_t runs, uint64_t seed, char** report_json_out) {
  if (!train || !test || !report_json_out)
    return fail_invalid("rrl_random_baseline: null argument");
  return guarded([&] {
    rrl::require(train->value.label_set == test->value.label_set,
                 "rrl_random_baseline: label sets differ");
    auto dist = rrl::label_distribution(train->value);
    rrl::EvalReport report = rrl::random_baseline(
        dist, test->value, static_cast<int>(runs), seed);
    *report_json_out = copy_string(report.to_json(test->value.label_set));
  });
}

int rrl_export_embeddings(const rrl_model* model, const rrl_corpus* docs,
                          const char* tsv_path) {
  if (!model || !docs || !tsv_path)
    return fail_invalid("rrl_export_embeddings: null argument");
  return guarded([&] {
    std::string tsv = rrl::embeddings_tsv(model_of(model), docs->value);
    std::ofstream out(tsv_path, std::ios::binary);
    rrl::require(out.good(), std::string("cannot write ") + tsv_path);
    out << tsv;
    rrl::require(out.good(), std::string("write failed for ") + tsv_path);
  });
}

}  // extern "C"
