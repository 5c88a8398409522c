#include "rrl/contrastive.hpp"

#include <cmath>
#include <iostream>
#include <map>

namespace rrl {

double pair_score_value(std::span<const double> a, std::span<const double> b,
                        const PairScoreConfig& cfg) {
  require(a.size() == b.size(), "pair_score: length mismatch");
  double na = 0.0, nb = 0.0, ab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i] * a[i];
    nb += b[i] * b[i];
    ab += a[i] * b[i];
  }
  require(na > 0.0 && nb > 0.0, "pair_score: zero vector");
  double cos = ab / (std::sqrt(na) * std::sqrt(nb));
  double x = cfg.orientation == PairOrientation::similarity ? cos : -cos;
  return 1.0 / (1.0 + std::exp(-x));
}

Tape::NodeId pair_score_node(Tape& tape, Tape::NodeId a_normalized,
                             Tape::NodeId b_normalized,
                             const PairScoreConfig& cfg) {
  Tape::NodeId cos = tape.dot(a_normalized, b_normalized);
  if (cfg.orientation == PairOrientation::verbatim) cos = tape.neg(cos);
  return tape.sigmoid(cos);
}

double discourse_weight(std::size_t i, std::size_t j, bool same_doc,
                        std::size_t anchor_doc_len) {
  if (same_doc) {
    require(i != j, "discourse_weight: same-document pair needs i != j");
    return 1.0 / static_cast<double>(i > j ? i - j : j - i);
  }
  require(anchor_doc_len >= 1, "discourse_weight: anchor document length");
  return 1.0 / static_cast<double>(anchor_doc_len);
}

MemoryBank::MemoryBank(std::size_t num_labels, std::size_t capacity_per_label)
    : queues_(num_labels), capacity_(capacity_per_label) {
  require(capacity_per_label >= 1, "memory bank: capacity >= 1 required");
}

void MemoryBank::enqueue(int label, std::vector<double> rep) {
  require(label >= 0 && static_cast<std::size_t>(label) < queues_.size(),
          "memory bank: label out of range");
  auto& q = queues_[label];
  q.push_back(std::move(rep));
  if (q.size() > capacity_) q.pop_front();
}

const std::deque<std::vector<double>>& MemoryBank::queue(int label) const {
  require(label >= 0 && static_cast<std::size_t>(label) < queues_.size(),
          "memory bank: label out of range");
  return queues_[label];
}

std::size_t MemoryBank::total_size() const {
  std::size_t n = 0;
  for (const auto& q : queues_) n += q.size();
  return n;
}

namespace {

// Shared body of the plain and discourse-aware losses. With every beta equal
// to 1 the discourse variant reduces to the plain one exactly.
Tape::NodeId contrastive_loss_impl(Tape& tape, const BatchContext& ctx,
                                   const ContrastiveConfig& cfg,
                                   bool discourse) {
  std::size_t n_batch = ctx.batch_size;
  require(n_batch <= ctx.items.size(),
          "contrastive: batch_size exceeds item count");
  if (n_batch < 2) {
    std::cerr << "warning: contrastive loss needs at least two in-batch "
                 "sentences; returning 0\n";
    return tape.constant(Tensor::scalar(0.0));
  }

  std::vector<Tape::NodeId> normalized(ctx.items.size());
  for (std::size_t i = 0; i < ctx.items.size(); ++i)
    normalized[i] = tape.l2_normalize(ctx.items[i].rep);

  // d is symmetric; cache per unordered pair.
  std::map<std::pair<std::size_t, std::size_t>, Tape::NodeId> score_cache;
  auto pair_d = [&](std::size_t i, std::size_t j) {
    auto key = std::minmax(i, j);
    auto it = score_cache.find(key);
    if (it != score_cache.end()) return it->second;
    Tape::NodeId d =
        pair_score_node(tape, normalized[key.first], normalized[key.second],
                        cfg.pair);
    score_cache.emplace(key, d);
    return d;
  };

  auto beta = [&](std::size_t i, std::size_t j) {
    if (!discourse) return 1.0;
    const ContrastiveItem& a = ctx.items[i];
    const ContrastiveItem& b = ctx.items[j];
    bool same_doc =
        !a.from_bank && !b.from_bank && a.doc_index == b.doc_index;
    return discourse_weight(a.position, b.position, same_doc,
                            static_cast<std::size_t>(a.doc_length));
  };

  std::vector<Tape::NodeId> ratio_terms;      // verbatim formula
  std::vector<Tape::NodeId> anchor_log_terms; // log_ratio ablation
  for (std::size_t i = 0; i < n_batch; ++i) {
    std::vector<Tape::NodeId> den_terms;
    std::vector<std::pair<Tape::NodeId, double>> positives;  // (d, beta)
    for (std::size_t j = 0; j < ctx.items.size(); ++j) {
      if (j == i) continue;
      bool same = ctx.items[i].label == ctx.items[j].label;
      double b = beta(i, j);
      Tape::NodeId d = pair_d(i, j);
      double den_coeff = same ? 1.0 - b : 1.0;
      den_terms.push_back(tape.exp(tape.scale(d, den_coeff)));
      if (same) positives.emplace_back(d, b);
    }
    if (positives.empty()) continue;
    Tape::NodeId den = tape.sum(tape.stack(den_terms));
    std::vector<Tape::NodeId> anchor_ratios;
    for (auto& [d, b] : positives) {
      Tape::NodeId num = tape.exp(tape.scale(d, b));
      anchor_ratios.push_back(tape.div(num, den));
    }
    if (!cfg.log_ratio) {
      for (auto r : anchor_ratios) ratio_terms.push_back(r);
    } else {
      Tape::NodeId s = tape.constant(Tensor::scalar(0.0));
      for (auto r : anchor_ratios) s = tape.add(s, tape.neg(tape.log(r)));
      anchor_log_terms.push_back(
          tape.scale(s, 1.0 / static_cast<double>(anchor_ratios.size())));
    }
  }

  if (!cfg.log_ratio) {
    if (ratio_terms.empty()) return tape.constant(Tensor::scalar(0.0));
    double norm = -1.0 / (static_cast<double>(n_batch) *
                          static_cast<double>(n_batch));
    return tape.scale(tape.sum(tape.stack(ratio_terms)), norm);
  }
  if (anchor_log_terms.empty()) return tape.constant(Tensor::scalar(0.0));
  return tape.scale(tape.sum(tape.stack(anchor_log_terms)),
                    1.0 / static_cast<double>(n_batch));
}

}  // namespace

Tape::NodeId supcon_loss(Tape& tape, const BatchContext& ctx,
                         const ContrastiveConfig& cfg) {
  return contrastive_loss_impl(tape, ctx, cfg, false);
}

Tape::NodeId discourse_supcon_loss(Tape& tape, const BatchContext& ctx,
                                   const ContrastiveConfig& cfg) {
  return contrastive_loss_impl(tape, ctx, cfg, true);
}

}  // namespace rrl
