#pragma once

#include <deque>
#include <span>
#include <vector>

#include "rrl/error.hpp"
#include "rrl/tensor.hpp"

namespace rrl {

// Orientation of the pairwise score d(a,b) = sigmoid(+-cos(a,b)).
// `verbatim` is sigmoid(-cos)-like (decreases with similarity); `similarity`
// flips the sign so the score grows as vectors align, which matches the
// attract/repel geometry the losses are meant to produce.
enum class PairOrientation { verbatim, similarity };

struct PairScoreConfig {
  PairOrientation orientation = PairOrientation::similarity;
};

struct ContrastiveConfig {
  PairScoreConfig pair;
  // Ablation: -log of each positive ratio, normalized per anchor, instead of
  // the raw ratio sum.
  bool log_ratio = false;
};

// Plain-value score in (0,1); both vectors must be nonzero.
double pair_score_value(std::span<const double> a, std::span<const double> b,
                        const PairScoreConfig& cfg);

// Tape version over already l2-normalized vector nodes.
Tape::NodeId pair_score_node(Tape& tape, Tape::NodeId a_normalized,
                             Tape::NodeId b_normalized,
                             const PairScoreConfig& cfg);

// Positional penalty: 1/|i-j| inside a document; cross-document pairs (bank
// entries included) count as maximally distant, 1/anchor_doc_len.
double discourse_weight(std::size_t i, std::size_t j, bool same_doc,
                        std::size_t anchor_doc_len);

// Per-label FIFO queues of detached representations from earlier steps.
class MemoryBank {
 public:
  MemoryBank(std::size_t num_labels, std::size_t capacity_per_label);

  void enqueue(int label, std::vector<double> rep);
  const std::deque<std::vector<double>>& queue(int label) const;
  std::size_t capacity_per_label() const { return capacity_; }
  std::size_t total_size() const;

 private:
  std::vector<std::deque<std::vector<double>>> queues_;
  std::size_t capacity_;
};

struct ContrastiveItem {
  Tape::NodeId rep;    // raw (unnormalized) representation node
  int label = 0;
  int doc_index = -1;  // -1 marks bank entries
  int position = 0;    // sentence index within its document
  int doc_length = 1;
  bool from_bank = false;
};

// Representations taking part in one loss evaluation. batch_size is N, the
// number of in-batch sentences; bank entries are appended after them and act
// only as positives/negatives, never as anchors.
struct BatchContext {
  std::vector<ContrastiveItem> items;
  std::size_t batch_size = 0;
};

Tape::NodeId supcon_loss(Tape& tape, const BatchContext& ctx,
                         const ContrastiveConfig& cfg);

Tape::NodeId discourse_supcon_loss(Tape& tape, const BatchContext& ctx,
                                   const ContrastiveConfig& cfg);

}  // namespace rrl
