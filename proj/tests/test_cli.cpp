// End-to-end CLI runs through a subprocess. The binary path arrives in
// RRL_CLI_PATH (set by the test harness).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cli_path() {
  const char* p = std::getenv("RRL_CLI_PATH");
  REQUIRE_MESSAGE(p != nullptr, "RRL_CLI_PATH must point at the CLI binary");
  return p;
}

fs::path work_dir() {
  auto dir = fs::temp_directory_path() / "rrl_cli_tests";
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args) {
  std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("gen, split, train, datastore, eval, infer, grid, xdomain, export") {
  fs::path dir = work_dir() / "pipeline";
  fs::remove_all(dir);
  fs::create_directories(dir);

  fs::path corpus = dir / "corpus.jsonl";
  fs::path labels = dir / "labels.txt";
  CHECK(run("gen --out " + q(corpus) + " --labels-out " + q(labels) +
            " --seed 5 --docs 14 --n-labels 3 --mean-sentences 5") == 0);
  CHECK(fs::exists(corpus));
  CHECK(fs::exists(labels));
  CHECK(fs::exists(dir / "corpus.jsonl.manifest.json"));

  json manifest = json::parse(file_bytes(dir / "corpus.jsonl.manifest.json"));
  CHECK(manifest["command"] == "gen");
  CHECK(manifest["outputs"].contains("corpus"));

  fs::path splits = dir / "splits";
  CHECK(run("split --in " + q(corpus) + " --labels " + q(labels) +
            " --out-dir " + q(splits) +
            " --train-frac 0.7 --val-frac 0.3 --test-frac 0 --seed 3") == 0);
  CHECK(fs::exists(splits / "train.jsonl"));
  CHECK(fs::exists(splits / "val.jsonl"));

  fs::path run_dir = dir / "run";
  std::string train_flags =
      " --epochs 2 --lr 0.01 --quiet --hash-buckets 128 --embed-dim 8"
      " --h-tok 3 --attn-dim 3 --h-sent 3 --dropout 0 --seed 11";
  CHECK(run("train --train " + q(splits / "train.jsonl") + " --val " +
            q(splits / "val.jsonl") + " --labels " + q(labels) +
            " --out-dir " + q(run_dir) + train_flags) == 0);
  CHECK(fs::exists(run_dir / "checkpoint.bin"));
  CHECK(fs::exists(run_dir / "history.json"));
  CHECK(fs::exists(run_dir / "manifest.json"));

  json train_manifest = json::parse(file_bytes(run_dir / "manifest.json"));
  CHECK(train_manifest["config"]["epochs"] == 2);
  CHECK(train_manifest["config"]["encoder"]["dropout"] == 0.0);

  fs::path store = dir / "store.bin";
  CHECK(run("datastore-build --ckpt " + q(run_dir / "checkpoint.bin") +
            " --train " + q(splits / "train.jsonl") + " --labels " +
            q(labels) + " --out " + q(store) + " --kind knn --tau 1.0") == 0);
  CHECK(fs::exists(store));

  fs::path eval_dir = dir / "eval";
  CHECK(run("eval --ckpt " + q(run_dir / "checkpoint.bin") + " --in " +
            q(splits / "val.jsonl") + " --labels " + q(labels) +
            " --out-dir " + q(eval_dir)) == 0);
  CHECK(fs::exists(eval_dir / "report.json"));
  CHECK(json::parse(file_bytes(eval_dir / "report.json")).contains("macro_f1"));

  fs::path pred = dir / "pred.jsonl";
  CHECK(run("infer --ckpt " + q(run_dir / "checkpoint.bin") + " --in " +
            q(splits / "val.jsonl") + " --labels " + q(labels) + " --store " +
            q(store) + " --lambda 0.5 --k 4 --out " + q(pred)) == 0);
  json first = json::parse(file_bytes(pred).substr(
      0, file_bytes(pred).find('\n')));
  CHECK(first.contains("labels"));

  fs::path grid_dir = dir / "grid";
  CHECK(run("grid --ckpt " + q(run_dir / "checkpoint.bin") + " --store " +
            q(store) + " --val " + q(splits / "val.jsonl") + " --labels " +
            q(labels) + " --out-dir " + q(grid_dir)) == 0);
  std::string csv = file_bytes(grid_dir / "grid.csv");
  CHECK(csv.rfind("lambda,k,", 0) == 0);
  // 11 lambdas x 6 k values + header
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 67);

  fs::path xdomain_dir = dir / "xdomain";
  CHECK(run("xdomain --ckpt " + q(run_dir / "checkpoint.bin") + " --target " +
            q(splits / "val.jsonl") + " --train " + q(splits / "train.jsonl") +
            " --labels " + q(labels) + " --out-dir " + q(xdomain_dir) +
            " --runs 3 --seed 7") == 0);
  json xd = json::parse(file_bytes(xdomain_dir / "xdomain.json"));
  CHECK(xd.contains("macro_f1_delta"));

  fs::path emb = dir / "emb.tsv";
  CHECK(run("export-embeddings --ckpt " + q(run_dir / "checkpoint.bin") +
            " --in " + q(splits / "val.jsonl") + " --labels " + q(labels) +
            " --out " + q(emb)) == 0);
  std::string tsv = file_bytes(emb);
  CHECK(tsv.rfind("doc_id\t", 0) == 0);
}

TEST_CASE("identical seeds give byte-identical outputs") {
  fs::path dir = work_dir() / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);

  for (const char* tag : {"a", "b"}) {
    fs::path sub = dir / tag;
    fs::create_directories(sub);
    CHECK(run("gen --out " + q(sub / "c.jsonl") + " --labels-out " +
              q(sub / "l.txt") + " --seed 21 --docs 10 --n-labels 3") == 0);
    CHECK(run("split --in " + q(sub / "c.jsonl") + " --labels " +
              q(sub / "l.txt") + " --out-dir " + q(sub) +
              " --train-frac 0.8 --val-frac 0.2 --test-frac 0 --seed 2") == 0);
    CHECK(run("train --train " + q(sub / "train.jsonl") + " --val " +
              q(sub / "val.jsonl") + " --labels " + q(sub / "l.txt") +
              " --out-dir " + q(sub / "run") +
              " --epochs 2 --lr 0.01 --quiet --hash-buckets 64 --embed-dim 6"
              " --h-tok 2 --attn-dim 2 --h-sent 2 --dropout 0.2 --seed 9") ==
          0);
  }
  CHECK(file_bytes(dir / "a/c.jsonl") == file_bytes(dir / "b/c.jsonl"));
  CHECK(file_bytes(dir / "a/run/checkpoint.bin") ==
        file_bytes(dir / "b/run/checkpoint.bin"));
  CHECK(file_bytes(dir / "a/run/history.json") ==
        file_bytes(dir / "b/run/history.json"));
}

TEST_CASE("exit codes: usage 1, data errors 2") {
  CHECK(run("not-a-command") == 1);
  CHECK(run("gen") == 1);  // missing required flags
  CHECK(run("eval --ckpt /missing.bin --in /missing.jsonl --labels /missing.txt"
            " --out-dir /tmp/rrl_cli_tests/err") == 2);
}

TEST_CASE("RR_SEED overrides the default seed only") {
  fs::path dir = work_dir() / "env_seed";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::string base = cli_path() + " gen --labels-out " + q(dir / "l.txt") +
                     " --docs 4 --n-labels 2";
  // Environment seed applies when --seed is absent.
  CHECK(std::system(("RR_SEED=77 " + base + " --out " + q(dir / "env.jsonl") +
                     " >/dev/null 2>&1").c_str()) == 0);
  CHECK(std::system((base + " --out " + q(dir / "flag.jsonl") +
                     " --seed 77 >/dev/null 2>&1").c_str()) == 0);
  CHECK(file_bytes(dir / "env.jsonl") == file_bytes(dir / "flag.jsonl"));
  // An explicit flag wins over the environment.
  CHECK(std::system(("RR_SEED=1 " + base + " --out " + q(dir / "both.jsonl") +
                     " --seed 77 >/dev/null 2>&1").c_str()) == 0);
  CHECK(file_bytes(dir / "both.jsonl") == file_bytes(dir / "flag.jsonl"));
}
