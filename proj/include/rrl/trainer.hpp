#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rrl/contrastive.hpp"
#include "rrl/corpus.hpp"
#include "rrl/model.hpp"
#include "rrl/prototypical.hpp"
#include "rrl/random.hpp"

namespace rrl {

struct TrainMethods {
  bool contrastive = false;
  bool discourse = false;     // discourse-aware variant of the contrastive loss
  bool memory_bank = false;
  bool single_proto = false;  // pcv + scv with one prototype per label
  bool multi_proto = false;   // multi-prototype scv + diversity
};

struct TrainConfig {
  std::uint64_t seed = 17;
  int epochs = 40;
  std::vector<double> learning_rates{1e-5, 3e-5, 5e-5, 1e-4, 3e-4};
  int batch_docs = 2;
  TrainMethods methods;
  double w_cont = 1.0;
  double w_pcv = 1.0;
  double w_scv = 1.0;
  double w_div = 1.0;
  std::size_t bank_capacity = 128;  // per label
  int prototypes_per_label = 4;     // M for multi_proto
  double theta = 0.3;
  PairOrientation orientation = PairOrientation::similarity;
  bool log_ratio = false;
  bool attract_nearest = true;
  HasherConfig hasher;
  EncoderConfig encoder;

  void validate() const;
  bool contrastive_active() const {
    return methods.contrastive || methods.discourse;
  }
  int model_prototypes() const;  // prototypes handed to the model, 0 if none

  static TrainConfig from_json_text(const std::string& text);
  std::string to_json_text() const;
  std::uint64_t digest() const;  // hash of the resolved config
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_macro_f1 = 0.0;
  double val_micro_f1 = 0.0;
};

struct LrRun {
  double lr = 0.0;
  std::vector<EpochStats> history;
  int best_epoch = -1;
  double best_val_macro_f1 = 0.0;
};

struct TrainResult {
  std::unique_ptr<Model> model;  // best checkpoint across the sweep
  std::vector<LrRun> runs;
  double best_lr = 0.0;
  int best_epoch = -1;
  std::string history_json() const;
};

using EpochCallback = std::function<void(double lr, const EpochStats&)>;

// Batch loss: mean CRF NLL over the batch documents plus the enabled
// auxiliary losses. Representation nodes come back so the caller can detach
// values into the memory bank after the step.
struct BatchLoss {
  Tape::NodeId total;
  std::vector<std::pair<Tape::NodeId, int>> reps;  // (node, label)
};

BatchLoss total_loss(Tape& tape, Model& model,
                     std::span<const Document* const> batch,
                     const TrainConfig& cfg, const MemoryBank* bank,
                     RandomStream* dropout_rng, bool training);

// Adam with per-parameter moments. A zero-gradient step is a no-op.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8);
  void step(std::span<Parameter* const> params,
            const std::vector<Tensor>& grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
  std::vector<Tensor> m_, v_;
  bool initialized_ = false;
};

// Full training: per learning rate, seeded document shuffles, one Adam step
// per batch, bank updates after each step, checkpoint selection by
// validation macro-F1 (ties keep the earlier epoch, then the earlier rate).
TrainResult train(const Corpus& train_corpus, const Corpus& val_corpus,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

void save_checkpoint(Model& model, const std::string& path,
                     std::uint64_t train_config_digest = 0);
std::unique_ptr<Model> load_checkpoint(const std::string& path);

// Central-difference verification of the full training loss on a toy model
// (4-dim embeddings, 3-unit LSTMs, 3 labels, 2 prototypes per label) for
// every method combination. The step is wider than the per-primitive checks
// use: some full-model coordinates carry ~1e-7 gradients, and at eps 1e-5
// the f64 noise floor of the difference quotient would drown them.
struct MethodGradCheck {
  std::string name;
  GradCheckReport report;
};
std::vector<MethodGradCheck> gradient_check_all_methods(std::uint64_t seed = 5,
                                                        double eps = 1e-4);

}  // namespace rrl
