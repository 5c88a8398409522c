#include "rrl/prototypical.hpp"

#include <array>
#include <cmath>

#include "rrl/random.hpp"

namespace rrl {

Tensor init_prototypes(std::size_t num_labels, std::size_t per_label,
                       std::size_t dim, std::uint64_t seed) {
  require(num_labels >= 1 && per_label >= 1 && dim >= 1,
          "init_prototypes: positive dims required");
  Tensor t({num_labels * per_label, dim});
  RandomStream rng(seed);
  double std = 1.0 / std::sqrt(static_cast<double>(dim));
  for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = std * rng.gaussian();
  return t;
}

namespace {

struct ProtoNodes {
  Tape::NodeId raw;                        // (K*M, dim) parameter
  std::vector<Tape::NodeId> normalized;    // per row
  std::size_t per_label;
  std::size_t num_labels;
};

ProtoNodes prototype_nodes(Tape& tape, Model& model) {
  Parameter* p = model.prototypes();
  require(p != nullptr, "prototype loss: model has no prototypes");
  ProtoNodes nodes;
  nodes.raw = tape.param(*p);
  nodes.per_label = static_cast<std::size_t>(model.prototypes_per_label());
  nodes.num_labels = model.num_labels();
  std::size_t rows = p->value.rows();
  nodes.normalized.resize(rows);
  for (std::size_t r = 0; r < rows; ++r)
    nodes.normalized[r] = tape.l2_normalize(tape.row(nodes.raw, r));
  return nodes;
}

Tape::NodeId one_minus(Tape& tape, Tape::NodeId x) {
  return tape.add(tape.neg(x), tape.constant(Tensor::scalar(1.0)));
}

Tape::NodeId relu(Tape& tape, Tape::NodeId x) {
  std::array parts{tape.constant(Tensor::scalar(0.0)), x};
  return tape.max_with_index(tape.stack(parts), nullptr);
}

}  // namespace

Tape::NodeId pcv_loss(Tape& tape, Model& model,
                      std::span<const ProtoBatchItem> batch,
                      const ProtoLossConfig& cfg) {
  require(!batch.empty(), "pcv_loss: empty batch");
  require(model.prototypes_per_label() == 1,
          "pcv_loss: defined for a single prototype per label");
  ProtoNodes protos = prototype_nodes(tape, model);

  std::vector<Tape::NodeId> sample_norm(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    sample_norm[i] = tape.l2_normalize(batch[i].rep);

  double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<Tape::NodeId> label_losses;
  for (std::size_t label = 0; label < protos.num_labels; ++label) {
    bool present = false;
    for (const auto& item : batch)
      if (static_cast<std::size_t>(item.label) == label) present = true;
    if (!present) continue;

    Tape::NodeId z = protos.normalized[label];
    std::vector<Tape::NodeId> terms;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      Tape::NodeId d = pair_score_node(tape, z, sample_norm[i], cfg.pair);
      if (static_cast<std::size_t>(batch[i].label) == label)
        terms.push_back(tape.log(d));
      else
        terms.push_back(tape.log(one_minus(tape, d)));
    }
    label_losses.push_back(
        tape.scale(tape.sum(tape.stack(terms)), -inv_n));
  }
  return tape.sum(tape.stack(label_losses));
}

Tape::NodeId scv_loss(Tape& tape, Model& model,
                      std::span<const ProtoBatchItem> batch,
                      const ProtoLossConfig& cfg) {
  require(!batch.empty(), "scv_loss: empty batch");
  require(model.num_labels() >= 2, "scv_loss: needs at least two labels");
  require(model.prototypes_per_label() == 1,
          "scv_loss: defined for a single prototype per label");
  ProtoNodes protos = prototype_nodes(tape, model);

  double inv_k = 1.0 / static_cast<double>(protos.num_labels);
  std::vector<Tape::NodeId> sample_losses;
  for (const auto& item : batch) {
    Tape::NodeId c = tape.l2_normalize(item.rep);
    std::vector<Tape::NodeId> terms;
    for (std::size_t label = 0; label < protos.num_labels; ++label) {
      Tape::NodeId d = pair_score_node(tape, protos.normalized[label], c,
                                       cfg.pair);
      if (label == static_cast<std::size_t>(item.label))
        terms.push_back(tape.log(d));
      else
        terms.push_back(tape.log(one_minus(tape, d)));
    }
    sample_losses.push_back(tape.scale(tape.sum(tape.stack(terms)), -inv_k));
  }
  return tape.mean(tape.stack(sample_losses));
}

Tape::NodeId diversity_loss(Tape& tape, Model& model, double theta) {
  require(theta >= -1.0 && theta <= 1.0, "diversity_loss: theta in [-1,1]");
  if (model.prototypes_per_label() <= 1)
    return tape.constant(Tensor::scalar(0.0));
  ProtoNodes protos = prototype_nodes(tape, model);
  std::size_t m = protos.per_label;

  std::vector<Tape::NodeId> hinges;
  Tape::NodeId theta_node = tape.constant(Tensor::scalar(theta));
  for (std::size_t label = 0; label < protos.num_labels; ++label)
    for (std::size_t q = 0; q < m; ++q)
      for (std::size_t r = q + 1; r < m; ++r) {
        Tape::NodeId dot = tape.dot(protos.normalized[label * m + q],
                                    protos.normalized[label * m + r]);
        hinges.push_back(relu(tape, tape.add(dot, tape.neg(theta_node))));
      }
  return tape.sum(tape.stack(hinges));
}

Tape::NodeId multi_scv_loss(Tape& tape, Model& model,
                            std::span<const ProtoBatchItem> batch,
                            const ProtoLossConfig& cfg) {
  require(!batch.empty(), "multi_scv_loss: empty batch");
  require(model.num_labels() >= 2, "multi_scv_loss: needs at least two labels");
  ProtoNodes protos = prototype_nodes(tape, model);
  std::size_t m = protos.per_label;
  std::size_t k = protos.num_labels;
  double repulsion_norm =
      1.0 / (static_cast<double>(k - 1) * static_cast<double>(m));

  std::vector<Tape::NodeId> sample_losses;
  for (const auto& item : batch) {
    Tape::NodeId c = tape.l2_normalize(item.rep);
    std::size_t own = static_cast<std::size_t>(item.label);

    std::vector<Tape::NodeId> own_scores;
    for (std::size_t q = 0; q < m; ++q)
      own_scores.push_back(
          pair_score_node(tape, protos.normalized[own * m + q], c, cfg.pair));
    Tape::NodeId attraction;
    if (cfg.attract_nearest) {
      attraction = tape.neg(
          tape.log(tape.max_with_index(tape.stack(own_scores), nullptr)));
    } else {
      // Literal reading: penalty of the farthest own prototype.
      std::vector<Tape::NodeId> neg_logs;
      for (auto d : own_scores) neg_logs.push_back(tape.neg(tape.log(d)));
      attraction = tape.max_with_index(tape.stack(neg_logs), nullptr);
    }

    std::vector<Tape::NodeId> repulsion_terms;
    for (std::size_t label = 0; label < k; ++label) {
      if (label == own) continue;
      for (std::size_t q = 0; q < m; ++q) {
        Tape::NodeId d = pair_score_node(
            tape, protos.normalized[label * m + q], c, cfg.pair);
        repulsion_terms.push_back(tape.log(one_minus(tape, d)));
      }
    }
    Tape::NodeId repulsion = tape.scale(
        tape.sum(tape.stack(repulsion_terms)), -repulsion_norm);
    sample_losses.push_back(tape.add(attraction, repulsion));
  }
  return tape.mean(tape.stack(sample_losses));
}

}  // namespace rrl
