#pragma once

#include <span>
#include <vector>

#include "rrl/contrastive.hpp"
#include "rrl/model.hpp"
#include "rrl/tensor.hpp"

namespace rrl {

struct ProtoLossConfig {
  double theta = 0.3;  // similarity threshold of the diversity hinge
  PairScoreConfig pair;
  // Attract the nearest own-label prototype. When false, the literal
  // farthest-prototype penalty is used instead (ablation only).
  bool attract_nearest = true;
};

struct ProtoBatchItem {
  Tape::NodeId rep;
  int label = 0;
};

// (K*M, dim) rows, label k owns rows [k*M, (k+1)*M); seeded Gaussian with
// std 1/sqrt(dim).
Tensor init_prototypes(std::size_t num_labels, std::size_t per_label,
                       std::size_t dim, std::uint64_t seed);

// Prototype-centric view: pull same-label samples toward each present
// label's prototype, push the rest away. Requires M = 1.
Tape::NodeId pcv_loss(Tape& tape, Model& model,
                      std::span<const ProtoBatchItem> batch,
                      const ProtoLossConfig& cfg);

// Sample-centric view (M = 1): attract each sample to its own prototype,
// repel it from every other label's prototype.
Tape::NodeId scv_loss(Tape& tape, Model& model,
                      std::span<const ProtoBatchItem> batch,
                      const ProtoLossConfig& cfg);

// Hinge on pairwise dots of l2-normalized same-label prototypes; zero when
// M = 1.
Tape::NodeId diversity_loss(Tape& tape, Model& model, double theta);

// Sample-centric view for M >= 1 prototypes per label.
Tape::NodeId multi_scv_loss(Tape& tape, Model& model,
                            std::span<const ProtoBatchItem> batch,
                            const ProtoLossConfig& cfg);

}  // namespace rrl
