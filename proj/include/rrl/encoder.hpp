#pragma once

#include <vector>

#include "rrl/model.hpp"
#include "rrl/random.hpp"
#include "rrl/tensor.hpp"

namespace rrl {

struct EncodeOptions {
  bool training = false;
  RandomStream* dropout_rng = nullptr;  // required when training with dropout
};

// One LSTM direction over the rows of x (n, in) -> hidden state per
// position, returned in input order.
std::vector<Tape::NodeId> lstm_run(Tape& tape, const LstmParams& params,
                                   Tape::NodeId x, bool reverse);

// (n, embed_dim) token embeddings -> (n, 2*h_tok) concatenated states.
Tape::NodeId token_bilstm(Tape& tape, Model& model, Tape::NodeId embeddings);

// Attention pooling over token states -> sentence vector. The pooled sum
// runs over the tanh-transformed vectors by default; PoolSource::lstm_state
// pools the raw states instead. alpha_out, when given, receives the softmax
// attention weights node.
Tape::NodeId attention_pool(Tape& tape, Model& model, Tape::NodeId states,
                            Tape::NodeId* alpha_out = nullptr);

// (m, pool_dim) sentence vectors -> (m, 2*h_sent) contextualized vectors.
Tape::NodeId sentence_bilstm(Tape& tape, Model& model, Tape::NodeId pooled);

// Full pipeline: featurize, token Bi-LSTM, attention pooling, dropout
// (training only), sentence Bi-LSTM. Output (m, 2*h_sent).
Tape::NodeId encode_document(Tape& tape, Model& model, const Document& doc,
                             const EncodeOptions& opt = {});

// Eval-mode convenience: contextualized representations as plain values.
Tensor encode_document_values(Model& model, const Document& doc);

}  // namespace rrl
