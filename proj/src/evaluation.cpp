#include "rrl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "rrl/crf.hpp"
#include "rrl/encoder.hpp"
#include "rrl/random.hpp"

namespace rrl {

using nlohmann::json;

EvalReport score(const std::vector<std::vector<int>>& gold,
                 const std::vector<std::vector<int>>& pred, std::size_t k) {
  require(gold.size() == pred.size(), "score: document count mismatch");
  EvalReport r;
  r.confusion.assign(k, std::vector<double>(k, 0.0));
  for (std::size_t d = 0; d < gold.size(); ++d) {
    require(gold[d].size() == pred[d].size(),
            "score: sequence length mismatch in document " + std::to_string(d));
    for (std::size_t i = 0; i < gold[d].size(); ++i) {
      int g = gold[d][i], p = pred[d][i];
      require(g >= 0 && static_cast<std::size_t>(g) < k &&
                  p >= 0 && static_cast<std::size_t>(p) < k,
              "score: label id out of range");
      r.confusion[g][p] += 1.0;
    }
  }

  r.precision.assign(k, 0.0);
  r.recall.assign(k, 0.0);
  r.f1.assign(k, 0.0);
  r.support.assign(k, 0.0);
  double correct = 0.0, total = 0.0;
  double macro_sum = 0.0;
  std::size_t macro_count = 0;
  for (std::size_t label = 0; label < k; ++label) {
    double tp = r.confusion[label][label];
    double gold_count = 0.0, pred_count = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      gold_count += r.confusion[label][j];
      pred_count += r.confusion[j][label];
    }
    r.support[label] = gold_count;
    correct += tp;
    total += gold_count;
    r.precision[label] = pred_count > 0 ? tp / pred_count : 0.0;
    r.recall[label] = gold_count > 0 ? tp / gold_count : 0.0;
    double pr = r.precision[label] + r.recall[label];
    r.f1[label] = pr > 0 ? 2.0 * r.precision[label] * r.recall[label] / pr : 0.0;
    if (gold_count > 0 || pred_count > 0) {
      macro_sum += r.f1[label];
      ++macro_count;
    }
  }
  r.macro_f1 = macro_count > 0 ? macro_sum / static_cast<double>(macro_count) : 0.0;
  r.micro_f1 = total > 0 ? correct / total : 0.0;
  return r;
}

std::vector<int> predict_document(Model& model, const Document& doc) {
  Tensor reps = encode_document_values(model, doc);
  std::size_t m = reps.rows(), k = model.num_labels();
  const Tensor& proj = model.crf_emission().value;
  Tensor emissions({m, k});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < reps.cols(); ++p) {
      double x = reps.at2(i, p);
      for (std::size_t j = 0; j < k; ++j)
        emissions.at2(i, j) += x * proj.at2(p, j);
    }
  return crf_viterbi(emissions, crf_scores(model));
}

namespace {

void check_labels(Model& model, const Corpus& corpus, const char* what) {
  if (model.labels() == corpus.label_set) return;
  std::string ours, theirs;
  for (const auto& n : model.labels().names()) ours += n + " ";
  for (const auto& n : corpus.label_set.names()) theirs += n + " ";
  fail(std::string(what) + ": label set mismatch (checkpoint: [" + ours +
       "] corpus: [" + theirs + "])");
}

std::vector<std::vector<int>> gold_of(const Corpus& corpus) {
  std::vector<std::vector<int>> gold;
  for (const auto& doc : corpus.documents) {
    std::vector<int> seq;
    for (const auto& s : doc.sentences) seq.push_back(s.label_id);
    gold.push_back(std::move(seq));
  }
  return gold;
}

}  // namespace

EvalReport evaluate_corpus(Model& model, const Corpus& corpus) {
  check_labels(model, corpus, "evaluate");
  std::vector<std::vector<int>> pred;
  for (const auto& doc : corpus.documents)
    pred.push_back(predict_document(model, doc));
  return score(gold_of(corpus), pred, model.num_labels());
}

EvalReport evaluate_interpolated(Model& model, const Corpus& corpus,
                                 const Datastore& store,
                                 const DecodeOptions& opts) {
  check_labels(model, corpus, "evaluate");
  std::vector<std::vector<int>> pred;
  for (const auto& doc : corpus.documents)
    pred.push_back(decode_interpolated(model, doc, store, opts));
  return score(gold_of(corpus), pred, model.num_labels());
}

EvalReport random_baseline(const std::vector<double>& train_distribution,
                           const Corpus& test, int runs, std::uint64_t seed) {
  require(runs >= 1, "random_baseline: runs >= 1 required");
  std::size_t k = train_distribution.size();
  require(k == test.label_set.size(),
          "random_baseline: distribution size mismatch");
  double sum = 0.0;
  for (double p : train_distribution) {
    require(p >= 0.0, "random_baseline: negative probability");
    sum += p;
  }
  require(std::abs(sum - 1.0) <= 1e-6,
          "random_baseline: distribution does not sum to 1");

  RandomStream rng(seed);
  auto gold = gold_of(test);
  EvalReport mean;
  for (int run = 0; run < runs; ++run) {
    std::vector<std::vector<int>> pred(gold.size());
    for (std::size_t d = 0; d < gold.size(); ++d) {
      pred[d].resize(gold[d].size());
      for (auto& p : pred[d]) {
        double u = rng.uniform01();
        double acc = 0.0;
        int pick = static_cast<int>(k) - 1;
        for (std::size_t j = 0; j < k; ++j) {
          acc += train_distribution[j];
          if (u < acc) {
            pick = static_cast<int>(j);
            break;
          }
        }
        p = pick;
      }
    }
    EvalReport r = score(gold, pred, k);
    if (run == 0) {
      mean = r;
    } else {
      for (std::size_t j = 0; j < k; ++j) {
        mean.precision[j] += r.precision[j];
        mean.recall[j] += r.recall[j];
        mean.f1[j] += r.f1[j];
        for (std::size_t c = 0; c < k; ++c)
          mean.confusion[j][c] += r.confusion[j][c];
      }
      mean.macro_f1 += r.macro_f1;
      mean.micro_f1 += r.micro_f1;
    }
  }
  double inv = 1.0 / static_cast<double>(runs);
  for (std::size_t j = 0; j < k; ++j) {
    mean.precision[j] *= inv;
    mean.recall[j] *= inv;
    mean.f1[j] *= inv;
    for (std::size_t c = 0; c < k; ++c) mean.confusion[j][c] *= inv;
  }
  mean.macro_f1 *= inv;
  mean.micro_f1 *= inv;
  return mean;
}

GridResult grid_search_interpolation(Model& model, const Datastore& store,
                                     const Corpus& val, BaselineDist baseline) {
  check_labels(model, val, "grid search");
  require(store.label_names() == model.labels().names(),
          "grid search: datastore label set mismatch");
  std::size_t k_labels = model.num_labels();

  std::vector<double> lambdas;
  for (int i = 0; i <= 10; ++i) lambdas.push_back(static_cast<double>(i) / 10.0);
  std::vector<std::size_t> ks;
  if (store.kind() == StoreKind::knn) {
    for (std::size_t k = 8; k <= 256; k *= 2) ks.push_back(k);
  } else {
    ks.push_back(0);  // every prototype participates; no retrieval knob
  }

  // Precompute the per-sentence baseline rows and neighbor distributions so
  // each grid cell only re-mixes them. Identical to decode_interpolated by
  // construction: the k-prefix of a sorted neighbor list is knn_query(k).
  std::size_t max_k = ks.back() == 0 ? store.count() : ks.back();
  struct SentenceInfo {
    std::vector<double> base;
    std::vector<std::vector<double>> nn_per_k;  // aligned with ks
  };
  std::vector<SentenceInfo> sentences;
  std::vector<std::vector<int>> gold = gold_of(val);

  for (const auto& doc : val.documents) {
    Tensor reps = encode_document_values(model, doc);
    std::size_t m = reps.rows();
    const Tensor& proj = model.crf_emission().value;
    Tensor emissions({m, k_labels});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < reps.cols(); ++p) {
        double x = reps.at2(i, p);
        for (std::size_t j = 0; j < k_labels; ++j)
          emissions.at2(i, j) += x * proj.at2(p, j);
      }
    Tensor base;
    if (baseline == BaselineDist::crf_marginals) {
      base = crf_marginals(emissions, crf_scores(model));
    } else {
      base = Tensor({m, k_labels});
      for (std::size_t i = 0; i < m; ++i) {
        double mx = emissions.at2(i, 0);
        for (std::size_t j = 1; j < k_labels; ++j)
          mx = std::max(mx, emissions.at2(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < k_labels; ++j) {
          base.at2(i, j) = std::exp(emissions.at2(i, j) - mx);
          z += base.at2(i, j);
        }
        for (std::size_t j = 0; j < k_labels; ++j) base.at2(i, j) /= z;
      }
    }
    for (std::size_t i = 0; i < m; ++i) {
      SentenceInfo info;
      info.base.resize(k_labels);
      for (std::size_t j = 0; j < k_labels; ++j) info.base[j] = base.at2(i, j);
      std::vector<double> query(store.dim());
      for (std::size_t j = 0; j < store.dim(); ++j) query[j] = reps.at2(i, j);
      auto neighbors = knn_query(store, query, max_k);
      for (std::size_t kk : ks) {
        std::size_t take = kk == 0 ? neighbors.size()
                                   : std::min(kk, neighbors.size());
        info.nn_per_k.push_back(knn_distribution(
            std::span(neighbors.data(), take), store.tau(), k_labels));
      }
      sentences.push_back(std::move(info));
    }
  }

  GridResult result;
  bool first = true;
  for (double lambda : lambdas) {
    for (std::size_t ki = 0; ki < ks.size(); ++ki) {
      std::vector<std::vector<int>> pred(gold.size());
      std::size_t cursor = 0;
      for (std::size_t d = 0; d < gold.size(); ++d) {
        pred[d].resize(gold[d].size());
        for (std::size_t i = 0; i < gold[d].size(); ++i) {
          const SentenceInfo& info = sentences[cursor++];
          auto mixed = interpolate(info.base, info.nn_per_k[ki], lambda);
          std::size_t best = 0;
          for (std::size_t j = 1; j < k_labels; ++j)
            if (mixed[j] > mixed[best]) best = j;
          pred[d][i] = static_cast<int>(best);
        }
      }
      EvalReport r = score(gold, pred, k_labels);
      GridCell cell{lambda, ks[ki], r.macro_f1, r.micro_f1};
      result.cells.push_back(cell);
      bool better =
          first || cell.macro_f1 > result.best.macro_f1 ||
          (cell.macro_f1 == result.best.macro_f1 &&
           (cell.lambda > result.best.lambda ||
            (cell.lambda == result.best.lambda && cell.k < result.best.k)));
      if (better) {
        result.best = cell;
        first = false;
      }
    }
  }
  return result;
}

EvalReport cross_domain_eval(Model& model, const Corpus& target) {
  check_labels(model, target, "cross-domain evaluation");
  return evaluate_corpus(model, target);
}

std::string embeddings_tsv(Model& model, const Corpus& corpus) {
  check_labels(model, corpus, "export embeddings");
  std::ostringstream os;
  os << "doc_id\tposition\tgold_label";
  for (std::size_t j = 0; j < model.rep_dim(); ++j) os << "\te" << j;
  os << "\n";
  char buf[64];
  for (const auto& doc : corpus.documents) {
    Tensor reps = encode_document_values(model, doc);
    for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
      os << doc.doc_id << "\t" << i << "\t"
         << corpus.label_set.name(doc.sentences[i].label_id);
      for (std::size_t j = 0; j < model.rep_dim(); ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", reps.at2(i, j));
        os << "\t" << buf;
      }
      os << "\n";
    }
  }
  return os.str();
}

std::string GridResult::csv() const {
  std::ostringstream os;
  os << "lambda,k,macro_f1,micro_f1\n";
  char buf[128];
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof(buf), "%.1f,%zu,%.17g,%.17g\n", c.lambda, c.k,
                  c.macro_f1, c.micro_f1);
    os << buf;
  }
  return os.str();
}

std::string EvalReport::to_json(const LabelSet& labels) const {
  json per_label = json::array();
  for (std::size_t j = 0; j < labels.size(); ++j)
    per_label.push_back({{"label", labels.name(j)},
                         {"precision", precision[j]},
                         {"recall", recall[j]},
                         {"f1", f1[j]},
                         {"support", support[j]}});
  json out = {{"macro_f1", macro_f1},
              {"micro_f1", micro_f1},
              {"per_label", per_label},
              {"confusion", confusion}};
  return out.dump(2);
}

std::string EvalReport::to_text(const LabelSet& labels) const {
  std::ostringstream os;
  std::size_t width = 5;
  for (const auto& n : labels.names()) width = std::max(width, n.size());
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s %9s %9s %9s %9s\n",
                static_cast<int>(width), "label", "prec", "recall", "f1",
                "support");
  os << buf;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    std::snprintf(buf, sizeof(buf), "%-*s %9.4f %9.4f %9.4f %9.0f\n",
                  static_cast<int>(width), labels.name(j).c_str(),
                  precision[j], recall[j], f1[j], support[j]);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "\nmacro-F1 %.4f\nmicro-F1 %.4f\n", macro_f1,
                micro_f1);
  os << buf;
  return os.str();
}

}  // namespace rrl
