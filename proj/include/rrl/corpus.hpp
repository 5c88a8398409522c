#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "rrl/error.hpp"

namespace rrl {

// Ordered set of label strings; ids follow declaration order.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> labels);

  static LabelSet load(const std::string& path);  // one label per line
  void save(const std::string& path) const;

  std::size_t size() const { return labels_.size(); }
  const std::string& name(std::size_t id) const { return labels_.at(id); }
  const std::vector<std::string>& names() const { return labels_; }
  int id_of(const std::string& label) const;  // -1 when unknown

  friend bool operator==(const LabelSet& a, const LabelSet& b) {
    return a.labels_ == b.labels_;
  }

 private:
  std::vector<std::string> labels_;
  std::map<std::string, int> index_;
};

struct Sentence {
  std::string text;
  std::vector<std::string> tokens;  // derived via tokenize()
  int label_id = 0;
};

struct Document {
  std::string doc_id;
  std::vector<Sentence> sentences;
};

struct Corpus {
  LabelSet label_set;
  std::vector<Document> documents;
  std::string name;

  std::size_t sentence_count() const;
};

struct SynthConfig {
  std::uint64_t seed = 1;
  int n_docs = 10;
  int n_labels = 4;
  double zipf_exponent = 1.0;     // label imbalance of fresh draws
  int mean_sentences = 8;
  int mean_tokens = 8;
  int vocab_per_label = 20;
  int shared_vocab = 40;
  double transition_stickiness = 0.5;
};

// Lowercase, split on Unicode whitespace, then split leading/trailing
// ASCII punctuation into separate tokens.
std::vector<std::string> tokenize(const std::string& text);

Corpus load_corpus(const std::string& path, const LabelSet& labels);
void write_corpus(const Corpus& corpus, const std::string& path);

// Document-level split; never divides a document. Deterministic per seed.
std::tuple<Corpus, Corpus, Corpus> split_corpus(
    const Corpus& corpus, double train_frac, double val_frac, double test_frac,
    std::uint64_t seed);

// Sentence-count label proportions over the full label set.
std::vector<double> label_distribution(const Corpus& corpus);

// Normalized 1/r^s prior over ranks 1..k (label id 0 is rank 1).
std::vector<double> zipf_probabilities(int k, double exponent);

Corpus generate_synthetic(const SynthConfig& cfg);

}  // namespace rrl
