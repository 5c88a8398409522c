#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rrl/corpus.hpp"
#include "rrl/datastore.hpp"
#include "rrl/model.hpp"

namespace rrl {

struct EvalReport {
  std::vector<double> precision;  // per label
  std::vector<double> recall;
  std::vector<double> f1;
  std::vector<double> support;                  // gold sentence counts
  std::vector<std::vector<double>> confusion;   // gold x predicted
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;

  std::string to_json(const LabelSet& labels) const;
  std::string to_text(const LabelSet& labels) const;  // aligned table
};

// Per-label P/R/F1 with F1 = 0 when P+R = 0. Macro-F1 averages labels that
// appear in gold or in the predictions; labels absent from both are left
// out. Micro-F1 equals accuracy in this single-label setting.
EvalReport score(const std::vector<std::vector<int>>& gold,
                 const std::vector<std::vector<int>>& pred, std::size_t k);

// Viterbi decoding of one document.
std::vector<int> predict_document(Model& model, const Document& doc);

// Standard whole-corpus evaluation; the corpus label set must equal the
// model's exactly.
EvalReport evaluate_corpus(Model& model, const Corpus& corpus);

EvalReport evaluate_interpolated(Model& model, const Corpus& corpus,
                                 const Datastore& store,
                                 const DecodeOptions& opts);

// Labels sampled from the training distribution; metrics averaged over runs.
EvalReport random_baseline(const std::vector<double>& train_distribution,
                           const Corpus& test, int runs, std::uint64_t seed);

struct GridCell {
  double lambda = 0.0;
  std::size_t k = 0;  // 0 for prototype stores (all prototypes participate)
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
};

struct GridResult {
  std::vector<GridCell> cells;
  GridCell best;
  std::string csv() const;
};

// Sweep lambda in {0.0 .. 1.0 by 0.1} and k over powers of two 8..256 (knn
// stores only). Best cell by macro-F1; ties prefer larger lambda, then
// smaller k.
GridResult grid_search_interpolation(Model& model, const Datastore& store,
                                     const Corpus& val,
                                     BaselineDist baseline = BaselineDist::crf_marginals);

// Zero-shot evaluation on a target corpus; label sets must match exactly
// (same strings, same order) or this raises.
EvalReport cross_domain_eval(Model& model, const Corpus& target);

// TSV of contextualized representations: doc_id, position, gold_label, then
// the rep_dim values. One row per sentence, plus a header.
std::string embeddings_tsv(Model& model, const Corpus& corpus);

}  // namespace rrl
