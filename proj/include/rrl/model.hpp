#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <string_view>
#include <vector>

#include "rrl/corpus.hpp"
#include "rrl/featurizer.hpp"
#include "rrl/tensor.hpp"

namespace rrl {

enum class PoolSource {
  transformed,  // pool the tanh-transformed attention vectors
  lstm_state,   // pool the raw Bi-LSTM states
};

struct EncoderConfig {
  std::size_t h_tok = 32;    // per direction
  std::size_t attn_dim = 32;
  std::size_t h_sent = 32;   // per direction
  double dropout = 0.5;      // applied to pooled sentence vectors, train only
  PoolSource pool_source = PoolSource::transformed;
};

struct LstmParams {
  Parameter* w_x;  // (4h, in), gate order i f g o
  Parameter* w_h;  // (4h, h)
  Parameter* b;    // (4h), forget gate bias starts at +1
};

// Owns every trainable parameter of the labeler: hashed embedding table,
// token/sentence Bi-LSTMs, attention pooling, CRF scores, and optionally a
// bank of trainable prototypes (M per label).
class Model {
 public:
  Model(LabelSet labels, HasherConfig hasher, EncoderConfig encoder,
        std::uint64_t seed, int prototypes_per_label = 0);
  Model(const Model&) = delete;  // raw pointers into store_
  Model& operator=(const Model&) = delete;

  const LabelSet& labels() const { return labels_; }
  const HasherConfig& hasher() const { return hasher_; }
  const EncoderConfig& encoder() const { return encoder_; }
  int prototypes_per_label() const { return proto_per_label_; }

  std::size_t pool_dim() const;  // sentence-LSTM input width
  std::size_t rep_dim() const { return 2 * encoder_.h_sent; }
  std::size_t num_labels() const { return labels_.size(); }

  Parameter& embedding() { return *embedding_; }
  LstmParams& token_fwd() { return token_fwd_; }
  LstmParams& token_bwd() { return token_bwd_; }
  LstmParams& sent_fwd() { return sent_fwd_; }
  LstmParams& sent_bwd() { return sent_bwd_; }
  Parameter& attn_w() { return *attn_w_; }
  Parameter& attn_b() { return *attn_b_; }
  Parameter& attn_u() { return *attn_u_; }
  Parameter& crf_emission() { return *crf_emission_; }
  Parameter& crf_transitions() { return *crf_transitions_; }
  Parameter& crf_start() { return *crf_start_; }
  Parameter& crf_end() { return *crf_end_; }
  Parameter* prototypes() { return prototypes_; }  // null when disabled
  int prototype_label(std::size_t proto_row) const;

  std::vector<Parameter*> parameters();  // stable registration order
  Parameter* find(std::string_view name);

  // Hash over parameter bytes; identifies a checkpoint in datastore files.
  std::uint64_t parameter_hash() const;

 private:
  Parameter& add(std::string name, Tensor init, std::uint64_t seed,
                 double gaussian_std);
  LstmParams add_lstm(const std::string& prefix, std::size_t input_dim,
                      std::size_t hidden, std::uint64_t seed);

  LabelSet labels_;
  HasherConfig hasher_;
  EncoderConfig encoder_;
  int proto_per_label_ = 0;

  std::deque<Parameter> store_;  // stable addresses
  Parameter* embedding_ = nullptr;
  LstmParams token_fwd_{}, token_bwd_{}, sent_fwd_{}, sent_bwd_{};
  Parameter* attn_w_ = nullptr;
  Parameter* attn_b_ = nullptr;
  Parameter* attn_u_ = nullptr;
  Parameter* crf_emission_ = nullptr;
  Parameter* crf_transitions_ = nullptr;
  Parameter* crf_start_ = nullptr;
  Parameter* crf_end_ = nullptr;
  Parameter* prototypes_ = nullptr;
};

}  // namespace rrl
