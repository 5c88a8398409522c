#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "rrl.h"

extern "C" int capi_c_smoke(void);

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path temp_file(const std::string& name) {
  auto dir = fs::temp_directory_path() / "rrl_capi_tests";
  fs::create_directories(dir);
  return dir / name;
}

struct Str {
  char* s = nullptr;
  ~Str() { rrl_string_free(s); }
  std::string str() const { return s ? std::string(s) : std::string(); }
};

const char* kTinyTrainConfig = R"({
  "epochs": 2,
  "learning_rates": [0.01],
  "hasher": {"hash_buckets": 128, "embed_dim": 8},
  "encoder": {"h_tok": 3, "attn_dim": 3, "h_sent": 3, "dropout": 0.0}
})";

}  // namespace

TEST_CASE("the header works from plain C") { CHECK(capi_c_smoke() == 0); }

TEST_CASE("full pipeline through the C API") {
  rrl_corpus* corpus = nullptr;
  REQUIRE(rrl_corpus_generate(
              R"({"seed": 9, "n_docs": 12, "n_labels": 3, "mean_sentences": 5})",
              &corpus) == RRL_OK);

  Str stats;
  REQUIRE(rrl_corpus_stats(corpus, &stats.s) == RRL_OK);
  json stats_json = json::parse(stats.str());
  CHECK(stats_json["documents"] == 12);
  CHECK(stats_json["labels"].size() == 3);

  rrl_corpus *tr = nullptr, *va = nullptr, *te = nullptr;
  REQUIRE(rrl_corpus_split(corpus, 0.75, 0.25, 0.0, 4, &tr, &va, &te) == RRL_OK);

  rrl_model* model = nullptr;
  Str history;
  REQUIRE(rrl_train(tr, va, kTinyTrainConfig, nullptr, nullptr, &model,
                    &history.s) == RRL_OK);
  json history_json = json::parse(history.str());
  CHECK(history_json["runs"].size() == 1);
  CHECK(history_json["runs"][0]["epochs"].size() == 2);

  auto ckpt = temp_file("model.bin");
  REQUIRE(rrl_model_save(model, ckpt.string().c_str()) == RRL_OK);
  rrl_model* loaded = nullptr;
  REQUIRE(rrl_model_load(ckpt.string().c_str(), &loaded) == RRL_OK);

  rrl_datastore* store = nullptr;
  REQUIRE(rrl_datastore_build(loaded, tr, RRL_STORE_KNN, 0, 0, 1.0, &store) ==
          RRL_OK);
  auto store_path = temp_file("store.bin");
  REQUIRE(rrl_datastore_save(store, store_path.string().c_str()) == RRL_OK);
  rrl_datastore* store2 = nullptr;
  REQUIRE(rrl_datastore_load(store_path.string().c_str(), &store2) == RRL_OK);

  rrl_datastore* multi = nullptr;
  REQUIRE(rrl_datastore_build(loaded, tr, RRL_STORE_MULTI_PROTO, 2, 7, 1.0,
                              &multi) == RRL_OK);

  Str predictions;
  REQUIRE(rrl_infer(loaded, store2, 0.5, 4, 0.0, RRL_BASELINE_CRF_MARGINALS,
                    va, &predictions.s) == RRL_OK);
  std::string first_line = predictions.str().substr(
      0, predictions.str().find('\n'));
  json line = json::parse(first_line);
  CHECK(line.contains("doc_id"));
  CHECK(line.contains("labels"));

  Str report_json, report_text;
  REQUIRE(rrl_evaluate(loaded, va, nullptr, 1.0, 0, 0.0,
                       RRL_BASELINE_CRF_MARGINALS, &report_json.s,
                       &report_text.s) == RRL_OK);
  json report = json::parse(report_json.str());
  CHECK(report.contains("macro_f1"));
  CHECK(report_text.str().find("macro-F1") != std::string::npos);

  Str csv, best;
  REQUIRE(rrl_grid_search(loaded, store2, va, RRL_BASELINE_CRF_MARGINALS,
                          &csv.s, &best.s) == RRL_OK);
  CHECK(csv.str().rfind("lambda,k,", 0) == 0);
  CHECK(json::parse(best.str()).contains("lambda"));

  Str random_report;
  REQUIRE(rrl_random_baseline(tr, va, 3, 11, &random_report.s) == RRL_OK);
  CHECK(json::parse(random_report.str()).contains("macro_f1"));

  auto tsv = temp_file("emb.tsv");
  REQUIRE(rrl_export_embeddings(loaded, va, tsv.string().c_str()) == RRL_OK);
  std::ifstream in(tsv);
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("doc_id\tposition\tgold_label\te0", 0) == 0);

  rrl_datastore_free(multi);
  rrl_datastore_free(store2);
  rrl_datastore_free(store);
  rrl_model_free(loaded);
  rrl_model_free(model);
  rrl_corpus_free(tr);
  rrl_corpus_free(va);
  rrl_corpus_free(te);
  rrl_corpus_free(corpus);
}

TEST_CASE("error paths return codes and messages") {
  rrl_corpus* corpus = nullptr;
  CHECK(rrl_corpus_load("/nonexistent/file.jsonl", "/nonexistent/labels.txt",
                        &corpus) == RRL_ERR_DATA);
  CHECK(std::string(rrl_last_error()).find("label") != std::string::npos);

  CHECK(rrl_corpus_generate(R"({"nope": 1})", &corpus) == RRL_ERR_DATA);
  CHECK(rrl_corpus_generate(R"({"n_labels": 1})", &corpus) == RRL_ERR_DATA);

  rrl_model* model = nullptr;
  CHECK(rrl_model_load("/nonexistent/model.bin", &model) == RRL_ERR_DATA);

  CHECK(rrl_corpus_generate(nullptr, nullptr) == RRL_ERR_INVALID_ARGUMENT);

  // Label-set mismatch between artifacts is refused.
  rrl_corpus* a = nullptr;
  rrl_corpus* b = nullptr;
  REQUIRE(rrl_corpus_generate(R"({"seed": 1, "n_docs": 4, "n_labels": 3})",
                              &a) == RRL_OK);
  REQUIRE(rrl_corpus_generate(R"({"seed": 2, "n_docs": 4, "n_labels": 4})",
                              &b) == RRL_OK);
  Str rep;
  CHECK(rrl_random_baseline(a, b, 2, 1, &rep.s) == RRL_ERR_DATA);
  rrl_corpus_free(a);
  rrl_corpus_free(b);
}

TEST_CASE("gradient check runs through the C API") {
  Str report;
  REQUIRE(rrl_gradient_check(R"({"seed": 5})", &report.s) == RRL_OK);
  json j = json::parse(report.str());
  CHECK(j["combos"].size() == 6);
  CHECK(j["max_rel_err"].get<double>() <= 1e-4);
}
