// Command-line front end. Links only the C API (rrl.h); every subcommand
// writes its outputs plus a run manifest sufficient to reproduce the run.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rrl.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ------------------------------------------------------------ plumbing ----

[[noreturn]] void die(const std::string& msg, int code = 2) {
  std::cerr << "error: " << msg << "\n";
  std::exit(code);
}

void check(int rc) {
  if (rc != RRL_OK) die(rrl_last_error());
}

struct CorpusHandle {
  rrl_corpus* h = nullptr;
  ~CorpusHandle() { rrl_corpus_free(h); }
};
struct ModelHandle {
  rrl_model* h = nullptr;
  ~ModelHandle() { rrl_model_free(h); }
};
struct StoreHandle {
  rrl_datastore* h = nullptr;
  ~StoreHandle() { rrl_datastore_free(h); }
};
struct CString {
  char* s = nullptr;
  ~CString() { rrl_string_free(s); }
  std::string str() const { return s ? std::string(s) : std::string(); }
};

std::uint64_t fnv1a_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) die("cannot hash missing file: " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (n < static_cast<std::streamsize>(sizeof(buf))) break;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) die("cannot write " + path.string());
  out << content;
  if (!out.good()) die("write failed for " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) die("cannot read " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Every command emits one of these next to its outputs.
class RunManifest {
 public:
  RunManifest(const std::string& command, int argc, char** argv)
      : start_(std::chrono::steady_clock::now()) {
    j_["command"] = command;
    json args = json::array();
    for (int i = 0; i < argc; ++i) args.push_back(argv[i]);
    j_["argv"] = args;
    std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ",
                  std::gmtime(&now));
    j_["wall_clock_utc"] = stamp;
    j_["inputs"] = json::object();
    j_["outputs"] = json::object();
    j_["seeds"] = json::object();
  }

  void set_config(const json& config) { j_["config"] = config; }
  void set_seed(const std::string& name, std::uint64_t value) {
    j_["seeds"][name] = value;
  }
  void add_input(const std::string& name, const fs::path& path) {
    j_["inputs"][name] = {{"path", path.string()},
                          {"fnv1a64", hex64(fnv1a_file(path))}};
  }
  void add_output(const std::string& name, const fs::path& path) {
    j_["outputs"][name] = {{"path", path.string()},
                           {"fnv1a64", hex64(fnv1a_file(path))}};
  }
  void write(const fs::path& path) {
    auto elapsed = std::chrono::steady_clock::now() - start_;
    j_["duration_seconds"] =
        std::chrono::duration<double>(elapsed).count();
    write_file(path, j_.dump(2) + "\n");
  }

 private:
  json j_;
  std::chrono::steady_clock::time_point start_;
};

std::uint64_t env_or(std::uint64_t fallback) {
  const char* env = std::getenv("RR_SEED");
  if (env != nullptr && *env != '\0')
    return std::strtoull(env, nullptr, 10);
  return fallback;
}

json parse_json_file(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    die("config " + path.string() + ": " + e.what(), 1);
  }
}

CorpusHandle load_corpus_cli(const std::string& jsonl, const std::string& labels) {
  CorpusHandle c;
  check(rrl_corpus_load(jsonl.c_str(), labels.c_str(), &c.h));
  return c;
}

int parse_store_kind(const std::string& kind) {
  if (kind == "knn") return RRL_STORE_KNN;
  if (kind == "single") return RRL_STORE_SINGLE_PROTO;
  if (kind == "multi") return RRL_STORE_MULTI_PROTO;
  die("unknown datastore kind '" + kind + "' (knn|single|multi)", 1);
}

int parse_baseline(const std::string& name) {
  if (name == "crf_marginals") return RRL_BASELINE_CRF_MARGINALS;
  if (name == "emission_softmax") return RRL_BASELINE_EMISSION_SOFTMAX;
  die("unknown baseline distribution '" + name + "'", 1);
}

// The full training configuration with library defaults spelled out; a
// config file (JSON merge patch) and then explicit flags override it.
json default_train_config() {
  return {
      {"seed", 17},
      {"epochs", 40},
      {"learning_rates", {1e-5, 3e-5, 5e-5, 1e-4, 3e-4}},
      {"batch_docs", 2},
      {"methods",
       {{"contrastive", false},
        {"discourse", false},
        {"memory_bank", false},
        {"single_proto", false},
        {"multi_proto", false}}},
      {"weights",
       {{"contrastive", 1.0}, {"pcv", 1.0}, {"scv", 1.0}, {"diversity", 1.0}}},
      {"bank_capacity", 128},
      {"prototypes_per_label", 4},
      {"theta", 0.3},
      {"orientation", "similarity"},
      {"log_ratio", false},
      {"attract_nearest", true},
      {"hasher",
       {{"hash_buckets", 65536},
        {"hash_seed", 1469598103},
        {"embed_dim", 64},
        {"max_tokens", 128}}},
      {"encoder",
       {{"h_tok", 32},
        {"attn_dim", 32},
        {"h_sent", 32},
        {"dropout", 0.5},
        {"pool_source", "transformed"}}}};
}

void epoch_printer(double lr, int epoch, double train_loss, double val_macro,
                   double val_micro, void*) {
  std::fprintf(stderr,
               "lr %-8g epoch %3d  loss %10.5f  val macro-F1 %.4f  micro-F1 "
               "%.4f\n",
               lr, epoch, train_loss, val_macro, val_micro);
}

// ---------------------------------------------------------- subcommands ----

struct GenArgs {
  std::string out, labels_out, config;
  std::uint64_t seed = 1;
  bool seed_given = false;
  int docs = -1, n_labels = -1, mean_sentences = -1, mean_tokens = -1;
  int vocab_per_label = -1, shared_vocab = -1;
  double zipf = -1.0, stickiness = -1.0;
};

int run_gen(const GenArgs& a, int argc, char** argv) {
  RunManifest manifest("gen", argc, argv);
  json cfg = json::object();
  if (!a.config.empty()) {
    cfg.merge_patch(parse_json_file(a.config));
    manifest.add_input("config", a.config);
  }
  std::uint64_t seed = a.seed_given ? a.seed
                                    : env_or(cfg.value("seed", a.seed));
  cfg["seed"] = seed;
  if (a.docs >= 0) cfg["n_docs"] = a.docs;
  if (a.n_labels >= 0) cfg["n_labels"] = a.n_labels;
  if (a.zipf >= 0) cfg["zipf_exponent"] = a.zipf;
  if (a.mean_sentences >= 0) cfg["mean_sentences"] = a.mean_sentences;
  if (a.mean_tokens >= 0) cfg["mean_tokens"] = a.mean_tokens;
  if (a.vocab_per_label >= 0) cfg["vocab_per_label"] = a.vocab_per_label;
  if (a.shared_vocab >= 0) cfg["shared_vocab"] = a.shared_vocab;
  if (a.stickiness >= 0) cfg["transition_stickiness"] = a.stickiness;

  CorpusHandle corpus;
  check(rrl_corpus_generate(cfg.dump().c_str(), &corpus.h));
  check(rrl_corpus_save(corpus.h, a.out.c_str()));
  check(rrl_corpus_save_labels(corpus.h, a.labels_out.c_str()));

  CString stats;
  check(rrl_corpus_stats(corpus.h, &stats.s));
  std::cout << stats.str() << "\n";

  manifest.set_config(cfg);
  manifest.set_seed("generator", seed);
  manifest.add_output("corpus", a.out);
  manifest.add_output("labels", a.labels_out);
  manifest.write(a.out + ".manifest.json");
  return 0;
}

struct SplitArgs {
  std::string in, labels, out_dir;
  double train_frac = 0.8, val_frac = 0.1, test_frac = 0.1;
  std::uint64_t seed = 13;
  bool seed_given = false;
};

int run_split(const SplitArgs& a, int argc, char** argv) {
  RunManifest manifest("split", argc, argv);
  std::uint64_t seed = a.seed_given ? a.seed : env_or(a.seed);
  CorpusHandle corpus = load_corpus_cli(a.in, a.labels);
  CorpusHandle tr, va, te;
  check(rrl_corpus_split(corpus.h, a.train_frac, a.val_frac, a.test_frac, seed,
                         &tr.h, &va.h, &te.h));
  fs::create_directories(a.out_dir);
  fs::path dir(a.out_dir);
  check(rrl_corpus_save(tr.h, (dir / "train.jsonl").string().c_str()));
  check(rrl_corpus_save(va.h, (dir / "val.jsonl").string().c_str()));
  check(rrl_corpus_save(te.h, (dir / "test.jsonl").string().c_str()));

  manifest.set_config({{"train_frac", a.train_frac},
                       {"val_frac", a.val_frac},
                       {"test_frac", a.test_frac}});
  manifest.set_seed("split", seed);
  manifest.add_input("corpus", a.in);
  manifest.add_input("labels", a.labels);
  manifest.add_output("train", dir / "train.jsonl");
  manifest.add_output("val", dir / "val.jsonl");
  manifest.add_output("test", dir / "test.jsonl");
  manifest.write(dir / "manifest.json");
  return 0;
}

struct TrainArgs {
  std::string train, val, labels, out_dir, config;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int epochs = -1, batch_docs = -1, bank_capacity = -1, prototypes = -1;
  std::vector<double> lrs;
  std::vector<std::string> methods;
  double w_cont = -1, w_pcv = -1, w_scv = -1, w_div = -1, theta = -10;
  std::string orientation, pool_source;
  double dropout = -1;
  int embed_dim = -1, h_tok = -1, attn_dim = -1, h_sent = -1;
  long long hash_buckets = -1, max_tokens = -1;
  bool quiet = false;
};

int run_train(const TrainArgs& a, int argc, char** argv) {
  RunManifest manifest("train", argc, argv);
  json cfg = default_train_config();
  if (!a.config.empty()) {
    cfg.merge_patch(parse_json_file(a.config));
    manifest.add_input("config", a.config);
  }
  std::uint64_t seed =
      a.seed_given ? a.seed : env_or(cfg["seed"].get<std::uint64_t>());
  cfg["seed"] = seed;
  if (a.epochs >= 0) cfg["epochs"] = a.epochs;
  if (!a.lrs.empty()) cfg["learning_rates"] = a.lrs;
  if (a.batch_docs >= 0) cfg["batch_docs"] = a.batch_docs;
  if (!a.methods.empty()) {
    for (auto& [key, value] : cfg["methods"].items()) value = false;
    for (const auto& m : a.methods) {
      if (!cfg["methods"].contains(m))
        die("unknown method '" + m + "'", 1);
      cfg["methods"][m] = true;
    }
  }
  if (a.w_cont >= 0) cfg["weights"]["contrastive"] = a.w_cont;
  if (a.w_pcv >= 0) cfg["weights"]["pcv"] = a.w_pcv;
  if (a.w_scv >= 0) cfg["weights"]["scv"] = a.w_scv;
  if (a.w_div >= 0) cfg["weights"]["diversity"] = a.w_div;
  if (a.bank_capacity >= 0) cfg["bank_capacity"] = a.bank_capacity;
  if (a.prototypes >= 0) cfg["prototypes_per_label"] = a.prototypes;
  if (a.theta > -2) cfg["theta"] = a.theta;
  if (!a.orientation.empty()) cfg["orientation"] = a.orientation;
  if (a.dropout >= 0) cfg["encoder"]["dropout"] = a.dropout;
  if (a.embed_dim >= 0) cfg["hasher"]["embed_dim"] = a.embed_dim;
  if (a.hash_buckets >= 0) cfg["hasher"]["hash_buckets"] = a.hash_buckets;
  if (a.max_tokens >= 0) cfg["hasher"]["max_tokens"] = a.max_tokens;
  if (a.h_tok >= 0) cfg["encoder"]["h_tok"] = a.h_tok;
  if (a.attn_dim >= 0) cfg["encoder"]["attn_dim"] = a.attn_dim;
  if (a.h_sent >= 0) cfg["encoder"]["h_sent"] = a.h_sent;
  if (!a.pool_source.empty()) cfg["encoder"]["pool_source"] = a.pool_source;

  CorpusHandle train_corpus = load_corpus_cli(a.train, a.labels);
  CorpusHandle val_corpus = load_corpus_cli(a.val, a.labels);

  ModelHandle model;
  CString history;
  check(rrl_train(train_corpus.h, val_corpus.h, cfg.dump().c_str(),
                  a.quiet ? nullptr : epoch_printer, nullptr, &model.h,
                  &history.s));

  fs::create_directories(a.out_dir);
  fs::path dir(a.out_dir);
  check(rrl_model_save(model.h, (dir / "checkpoint.bin").string().c_str()));
  write_file(dir / "history.json", history.str() + "\n");

  manifest.set_config(cfg);
  manifest.set_seed("train", seed);
  manifest.add_input("train", a.train);
  manifest.add_input("val", a.val);
  manifest.add_input("labels", a.labels);
  manifest.add_output("checkpoint", dir / "checkpoint.bin");
  manifest.add_output("history", dir / "history.json");
  manifest.write(dir / "manifest.json");
  return 0;
}

struct EvalArgs {
  std::string ckpt, in, labels, out_dir, store;
  double lambda = 1.0, tau = 0.0;
  unsigned k = 8;
  std::string baseline = "crf_marginals";
};

int run_eval(const EvalArgs& a, int argc, char** argv) {
  RunManifest manifest("eval", argc, argv);
  ModelHandle model;
  check(rrl_model_load(a.ckpt.c_str(), &model.h));
  CorpusHandle corpus = load_corpus_cli(a.in, a.labels);
  StoreHandle store;
  if (!a.store.empty()) check(rrl_datastore_load(a.store.c_str(), &store.h));

  CString report_json, report_text;
  check(rrl_evaluate(model.h, corpus.h, store.h, a.lambda, a.k, a.tau,
                     parse_baseline(a.baseline), &report_json.s,
                     &report_text.s));
  fs::create_directories(a.out_dir);
  fs::path dir(a.out_dir);
  write_file(dir / "report.json", report_json.str() + "\n");
  write_file(dir / "report.txt", report_text.str());
  std::cout << report_text.str();

  manifest.set_config({{"lambda", a.lambda},
                       {"k", a.k},
                       {"tau", a.tau},
                       {"baseline_dist", a.baseline},
                       {"interpolated", !a.store.empty()}});
  manifest.add_input("checkpoint", a.ckpt);
  manifest.add_input("corpus", a.in);
  manifest.add_input("labels", a.labels);
  if (!a.store.empty()) manifest.add_input("datastore", a.store);
  manifest.add_output("report_json", dir / "report.json");
  manifest.add_output("report_text", dir / "report.txt");
  manifest.write(dir / "manifest.json");
  return 0;
}

struct StoreArgs {
  std::string ckpt, train, labels, out, kind = "knn";
  unsigned clusters = 4;
  std::uint64_t seed = 29;
  bool seed_given = false;
  double tau = 1.0;
};

int run_store_build(const StoreArgs& a, int argc, char** argv) {
  RunManifest manifest("datastore-build", argc, argv);
  std::uint64_t seed = a.seed_given ? a.seed : env_or(a.seed);
  ModelHandle model;
  check(rrl_model_load(a.ckpt.c_str(), &model.h));
  CorpusHandle corpus = load_corpus_cli(a.train, a.labels);
  StoreHandle store;
  check(rrl_datastore_build(model.h, corpus.h, parse_store_kind(a.kind),
                            a.clusters, seed, a.tau, &store.h));
  if (fs::path(a.out).has_parent_path())
    fs::create_directories(fs::path(a.out).parent_path());
  check(rrl_datastore_save(store.h, a.out.c_str()));

  manifest.set_config({{"kind", a.kind},
                       {"clusters_per_label", a.clusters},
                       {"tau", a.tau}});
  manifest.set_seed("kmeans", seed);
  manifest.add_input("checkpoint", a.ckpt);
  manifest.add_input("train", a.train);
  manifest.add_input("labels", a.labels);
  manifest.add_output("datastore", a.out);
  manifest.write(a.out + ".manifest.json");
  return 0;
}

struct InferArgs {
  std::string ckpt, in, labels, out, store;
  double lambda = 1.0, tau = 0.0;
  unsigned k = 8;
  std::string baseline = "crf_marginals";
};

int run_infer(const InferArgs& a, int argc, char** argv) {
  RunManifest manifest("infer", argc, argv);
  ModelHandle model;
  check(rrl_model_load(a.ckpt.c_str(), &model.h));
  CorpusHandle corpus = load_corpus_cli(a.in, a.labels);
  StoreHandle store;
  if (!a.store.empty()) check(rrl_datastore_load(a.store.c_str(), &store.h));

  CString predictions;
  check(rrl_infer(model.h, store.h, a.lambda, a.k, a.tau,
                  parse_baseline(a.baseline), corpus.h, &predictions.s));
  write_file(a.out, predictions.str());

  manifest.set_config({{"lambda", a.lambda},
                       {"k", a.k},
                       {"tau", a.tau},
                       {"baseline_dist", a.baseline},
                       {"interpolated", !a.store.empty()}});
  manifest.add_input("checkpoint", a.ckpt);
  manifest.add_input("corpus", a.in);
  manifest.add_input("labels", a.labels);
  if (!a.store.empty()) manifest.add_input("datastore", a.store);
  manifest.add_output("predictions", a.out);
  manifest.write(a.out + ".manifest.json");
  return 0;
}

struct GridArgs {
  std::string ckpt, store, val, labels, out_dir;
  std::string baseline = "crf_marginals";
};

int run_grid(const GridArgs& a, int argc, char** argv) {
  RunManifest manifest("grid", argc, argv);
  ModelHandle model;
  check(rrl_model_load(a.ckpt.c_str(), &model.h));
  StoreHandle store;
  check(rrl_datastore_load(a.store.c_str(), &store.h));
  CorpusHandle val = load_corpus_cli(a.val, a.labels);

  CString csv, best;
  check(rrl_grid_search(model.h, store.h, val.h, parse_baseline(a.baseline),
                        &csv.s, &best.s));
  fs::create_directories(a.out_dir);
  fs::path dir(a.out_dir);
  write_file(dir / "grid.csv", csv.str());
  write_file(dir / "grid_best.json", best.str() + "\n");
  std::cout << "best cell: " << best.str() << "\n";

  manifest.set_config({{"baseline_dist", a.baseline}});
  manifest.add_input("checkpoint", a.ckpt);
  manifest.add_input("datastore", a.store);
  manifest.add_input("val", a.val);
  manifest.add_input("labels", a.labels);
  manifest.add_output("grid_csv", dir / "grid.csv");
  manifest.add_output("grid_best", dir / "grid_best.json");
  manifest.write(dir / "manifest.json");
  return 0;
}

struct XdomainArgs {
  std::string ckpt, target, train, labels, out_dir;
  unsigned runs = 10;
  std::uint64_t seed = 101;
  bool seed_given = false;
};

int run_xdomain(const XdomainArgs& a, int argc, char** argv) {
  RunManifest manifest("xdomain", argc, argv);
  std::uint64_t seed = a.seed_given ? a.seed : env_or(a.seed);
  ModelHandle model;
  check(rrl_model_load(a.ckpt.c_str(), &model.h));
  CorpusHandle target = load_corpus_cli(a.target, a.labels);
  CorpusHandle train = load_corpus_cli(a.train, a.labels);

  CString model_report;
  check(rrl_evaluate(model.h, target.h, nullptr, 1.0, 0, 0.0,
                     RRL_BASELINE_CRF_MARGINALS, &model_report.s, nullptr));
  CString random_report;
  check(rrl_random_baseline(train.h, target.h, a.runs, seed, &random_report.s));

  json model_json = json::parse(model_report.str());
  json random_json = json::parse(random_report.str());
  json out = {{"model", model_json},
              {"random_baseline", random_json},
              {"runs", a.runs},
              {"macro_f1_delta", model_json["macro_f1"].get<double>() -
                                     random_json["macro_f1"].get<double>()}};
  fs::create_directories(a.out_dir);
  fs::path dir(a.out_dir);
  write_file(dir / "xdomain.json", out.dump(2) + "\n");
  std::printf("target macro-F1 %.4f vs random %.4f (delta %+.4f)\n",
              model_json["macro_f1"].get<double>(),
              random_json["macro_f1"].get<double>(),
              out["macro_f1_delta"].get<double>());

  manifest.set_config({{"runs", a.runs}});
  manifest.set_seed("random_baseline", seed);
  manifest.add_input("checkpoint", a.ckpt);
  manifest.add_input("target", a.target);
  manifest.add_input("train", a.train);
  manifest.add_input("labels", a.labels);
  manifest.add_output("report", dir / "xdomain.json");
  manifest.write(dir / "manifest.json");
  return 0;
}

struct ExportArgs {
  std::string ckpt, in, labels, out;
};

int run_export(const ExportArgs& a, int argc, char** argv) {
  RunManifest manifest("export-embeddings", argc, argv);
  ModelHandle model;
  check(rrl_model_load(a.ckpt.c_str(), &model.h));
  CorpusHandle corpus = load_corpus_cli(a.in, a.labels);
  if (fs::path(a.out).has_parent_path())
    fs::create_directories(fs::path(a.out).parent_path());
  check(rrl_export_embeddings(model.h, corpus.h, a.out.c_str()));

  manifest.add_input("checkpoint", a.ckpt);
  manifest.add_input("corpus", a.in);
  manifest.add_input("labels", a.labels);
  manifest.add_output("embeddings", a.out);
  manifest.write(a.out + ".manifest.json");
  return 0;
}

struct GradcheckArgs {
  std::string out;
  std::uint64_t seed = 5;
  bool seed_given = false;
  double eps = 1e-4;
};

int run_gradcheck(const GradcheckArgs& a, int argc, char** argv) {
  RunManifest manifest("gradcheck", argc, argv);
  std::uint64_t seed = a.seed_given ? a.seed : env_or(a.seed);
  json opts = {{"seed", seed}, {"eps", a.eps}};
  CString report;
  check(rrl_gradient_check(opts.dump().c_str(), &report.s));
  write_file(a.out, report.str() + "\n");
  std::cout << report.str() << "\n";

  manifest.set_config(opts);
  manifest.set_seed("gradcheck", seed);
  manifest.add_output("report", a.out);
  manifest.write(a.out + ".manifest.json");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neighborhood-augmented rhetorical role labeling"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic corpus");
  gen_cmd->add_option("--out", gen.out, "output corpus JSONL")->required();
  gen_cmd->add_option("--labels-out", gen.labels_out, "output label file")
      ->required();
  gen_cmd->add_option("--config", gen.config, "synthetic config JSON file");
  auto* gen_seed = gen_cmd->add_option("--seed", gen.seed, "generator seed");
  gen_cmd->add_option("--docs", gen.docs, "number of documents");
  gen_cmd->add_option("--n-labels", gen.n_labels, "number of labels");
  gen_cmd->add_option("--zipf", gen.zipf, "zipf exponent of the label prior");
  gen_cmd->add_option("--mean-sentences", gen.mean_sentences,
                      "mean sentences per document");
  gen_cmd->add_option("--mean-tokens", gen.mean_tokens,
                      "mean tokens per sentence");
  gen_cmd->add_option("--vocab-per-label", gen.vocab_per_label,
                      "private vocabulary size per label");
  gen_cmd->add_option("--shared-vocab", gen.shared_vocab,
                      "shared vocabulary size");
  gen_cmd->add_option("--stickiness", gen.stickiness,
                      "probability of repeating the previous label");

  SplitArgs split;
  auto* split_cmd =
      app.add_subcommand("split", "document-level train/val/test split");
  split_cmd->add_option("--in", split.in, "corpus JSONL")->required();
  split_cmd->add_option("--labels", split.labels, "label file")->required();
  split_cmd->add_option("--out-dir", split.out_dir, "output directory")
      ->required();
  split_cmd->add_option("--train-frac", split.train_frac, "train fraction");
  split_cmd->add_option("--val-frac", split.val_frac, "validation fraction");
  split_cmd->add_option("--test-frac", split.test_frac, "test fraction");
  auto* split_seed = split_cmd->add_option("--seed", split.seed, "shuffle seed");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train a labeler");
  train_cmd->add_option("--train", train.train, "training corpus JSONL")
      ->required();
  train_cmd->add_option("--val", train.val, "validation corpus JSONL")
      ->required();
  train_cmd->add_option("--labels", train.labels, "label file")->required();
  train_cmd->add_option("--out-dir", train.out_dir, "output directory")
      ->required();
  train_cmd->add_option("--config", train.config, "train config JSON file");
  auto* train_seed = train_cmd->add_option("--seed", train.seed, "training seed");
  train_cmd->add_option("--epochs", train.epochs, "epochs per learning rate");
  train_cmd->add_option("--lr", train.lrs, "learning rate (repeat to sweep)");
  train_cmd->add_option("--batch-docs", train.batch_docs, "documents per batch");
  train_cmd->add_option(
      "--method", train.methods,
      "enable a method: contrastive|discourse|memory_bank|single_proto|multi_proto");
  train_cmd->add_option("--w-cont", train.w_cont, "contrastive loss weight");
  train_cmd->add_option("--w-pcv", train.w_pcv, "prototype-centric weight");
  train_cmd->add_option("--w-scv", train.w_scv, "sample-centric weight");
  train_cmd->add_option("--w-div", train.w_div, "diversity weight");
  train_cmd->add_option("--bank-capacity", train.bank_capacity,
                        "memory bank capacity per label");
  train_cmd->add_option("--prototypes", train.prototypes,
                        "prototypes per label (multi_proto)");
  train_cmd->add_option("--theta", train.theta, "diversity threshold");
  train_cmd->add_option("--orientation", train.orientation,
                        "pair score orientation: similarity|verbatim");
  train_cmd->add_option("--dropout", train.dropout, "dropout rate");
  train_cmd->add_option("--embed-dim", train.embed_dim, "embedding width");
  train_cmd->add_option("--hash-buckets", train.hash_buckets, "hash buckets");
  train_cmd->add_option("--max-tokens", train.max_tokens,
                        "sentence truncation cap");
  train_cmd->add_option("--h-tok", train.h_tok, "token LSTM units/direction");
  train_cmd->add_option("--attn-dim", train.attn_dim, "attention width");
  train_cmd->add_option("--h-sent", train.h_sent,
                        "sentence LSTM units/direction");
  train_cmd->add_option("--pool-source", train.pool_source,
                        "attention pool source: transformed|lstm_state");
  train_cmd->add_flag("--quiet", train.quiet, "suppress epoch progress");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--ckpt", eval.ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--in", eval.in, "test corpus JSONL")->required();
  eval_cmd->add_option("--labels", eval.labels, "label file")->required();
  eval_cmd->add_option("--out-dir", eval.out_dir, "output directory")
      ->required();
  eval_cmd->add_option("--store", eval.store, "datastore for interpolation");
  eval_cmd->add_option("--lambda", eval.lambda, "interpolation coefficient");
  eval_cmd->add_option("--k", eval.k, "neighbors");
  eval_cmd->add_option("--tau", eval.tau, "temperature (0 = store default)");
  eval_cmd->add_option("--baseline-dist", eval.baseline,
                       "crf_marginals|emission_softmax");

  StoreArgs store;
  auto* store_cmd =
      app.add_subcommand("datastore-build", "build an inference datastore");
  store_cmd->add_option("--ckpt", store.ckpt, "checkpoint file")->required();
  store_cmd->add_option("--train", store.train, "training corpus JSONL")
      ->required();
  store_cmd->add_option("--labels", store.labels, "label file")->required();
  store_cmd->add_option("--out", store.out, "output datastore file")
      ->required();
  store_cmd->add_option("--kind", store.kind, "knn|single|multi");
  store_cmd->add_option("--clusters", store.clusters,
                        "clusters per label (multi)");
  auto* store_seed = store_cmd->add_option("--seed", store.seed, "k-means seed");
  store_cmd->add_option("--tau", store.tau, "softmax temperature");

  InferArgs infer;
  auto* infer_cmd = app.add_subcommand("infer", "predict labels");
  infer_cmd->add_option("--ckpt", infer.ckpt, "checkpoint file")->required();
  infer_cmd->add_option("--in", infer.in, "input corpus JSONL")->required();
  infer_cmd->add_option("--labels", infer.labels, "label file")->required();
  infer_cmd->add_option("--out", infer.out, "predictions JSONL")->required();
  infer_cmd->add_option("--store", infer.store, "datastore for interpolation");
  infer_cmd->add_option("--lambda", infer.lambda, "interpolation coefficient");
  infer_cmd->add_option("--k", infer.k, "neighbors");
  infer_cmd->add_option("--tau", infer.tau, "temperature (0 = store default)");
  infer_cmd->add_option("--baseline-dist", infer.baseline,
                        "crf_marginals|emission_softmax");

  GridArgs grid;
  auto* grid_cmd =
      app.add_subcommand("grid", "grid-search lambda and k on validation");
  grid_cmd->add_option("--ckpt", grid.ckpt, "checkpoint file")->required();
  grid_cmd->add_option("--store", grid.store, "datastore file")->required();
  grid_cmd->add_option("--val", grid.val, "validation corpus JSONL")
      ->required();
  grid_cmd->add_option("--labels", grid.labels, "label file")->required();
  grid_cmd->add_option("--out-dir", grid.out_dir, "output directory")
      ->required();
  grid_cmd->add_option("--baseline-dist", grid.baseline,
                       "crf_marginals|emission_softmax");

  XdomainArgs xdomain;
  auto* xd_cmd = app.add_subcommand(
      "xdomain", "zero-shot evaluation on a target domain vs random");
  xd_cmd->add_option("--ckpt", xdomain.ckpt, "checkpoint file")->required();
  xd_cmd->add_option("--target", xdomain.target, "target corpus JSONL")
      ->required();
  xd_cmd->add_option("--train", xdomain.train,
                     "source training corpus (for the random baseline)")
      ->required();
  xd_cmd->add_option("--labels", xdomain.labels, "label file")->required();
  xd_cmd->add_option("--out-dir", xdomain.out_dir, "output directory")
      ->required();
  xd_cmd->add_option("--runs", xdomain.runs, "random baseline runs");
  auto* xd_seed = xd_cmd->add_option("--seed", xdomain.seed, "baseline seed");

  ExportArgs exp;
  auto* exp_cmd = app.add_subcommand("export-embeddings",
                                     "dump contextualized representations");
  exp_cmd->add_option("--ckpt", exp.ckpt, "checkpoint file")->required();
  exp_cmd->add_option("--in", exp.in, "corpus JSONL")->required();
  exp_cmd->add_option("--labels", exp.labels, "label file")->required();
  exp_cmd->add_option("--out", exp.out, "output TSV")->required();

  GradcheckArgs gradcheck;
  auto* gc_cmd = app.add_subcommand(
      "gradcheck", "finite-difference check of every method's gradients");
  gc_cmd->add_option("--out", gradcheck.out, "report JSON path")->required();
  auto* gc_seed = gc_cmd->add_option("--seed", gradcheck.seed, "toy data seed");
  gc_cmd->add_option("--eps", gradcheck.eps, "finite-difference step");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  gen.seed_given = gen_seed->count() > 0;
  split.seed_given = split_seed->count() > 0;
  train.seed_given = train_seed->count() > 0;
  store.seed_given = store_seed->count() > 0;
  xdomain.seed_given = xd_seed->count() > 0;
  gradcheck.seed_given = gc_seed->count() > 0;

  if (gen_cmd->parsed()) return run_gen(gen, argc, argv);
  if (split_cmd->parsed()) return run_split(split, argc, argv);
  if (train_cmd->parsed()) return run_train(train, argc, argv);
  if (eval_cmd->parsed()) return run_eval(eval, argc, argv);
  if (store_cmd->parsed()) return run_store_build(store, argc, argv);
  if (infer_cmd->parsed()) return run_infer(infer, argc, argv);
  if (grid_cmd->parsed()) return run_grid(grid, argc, argv);
  if (xd_cmd->parsed()) return run_xdomain(xdomain, argc, argv);
  if (exp_cmd->parsed()) return run_export(exp, argc, argv);
  if (gc_cmd->parsed()) return run_gradcheck(gradcheck, argc, argv);
  return 1;
}
