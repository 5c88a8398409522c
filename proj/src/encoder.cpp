#include "rrl/encoder.hpp"

namespace rrl {

std::vector<Tape::NodeId> lstm_run(Tape& tape, const LstmParams& params,
                                   Tape::NodeId x, bool reverse) {
  std::size_t n = tape.value(x).rows();
  std::size_t h = params.w_h->value.cols();
  Tape::NodeId wx = tape.param(*params.w_x);
  Tape::NodeId wh = tape.param(*params.w_h);
  Tape::NodeId b = tape.param(*params.b);
  Tape::NodeId h_prev = tape.constant(Tensor({h}));
  Tape::NodeId c_prev = tape.constant(Tensor({h}));

  std::vector<Tape::NodeId> out(n);
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t pos = reverse ? n - 1 - step : step;
    Tape::NodeId xt = tape.row(x, pos);
    Tape::NodeId z =
        tape.add(tape.add(tape.matmul(wx, xt), tape.matmul(wh, h_prev)), b);
    Tape::NodeId gate_i = tape.sigmoid(tape.slice(z, 0, h));
    Tape::NodeId gate_f = tape.sigmoid(tape.slice(z, h, h));
    Tape::NodeId cand = tape.tanh(tape.slice(z, 2 * h, h));
    Tape::NodeId gate_o = tape.sigmoid(tape.slice(z, 3 * h, h));
    Tape::NodeId c =
        tape.add(tape.mul(gate_f, c_prev), tape.mul(gate_i, cand));
    Tape::NodeId hidden = tape.mul(gate_o, tape.tanh(c));
    h_prev = hidden;
    c_prev = c;
    out[pos] = hidden;
  }
  return out;
}

Tape::NodeId token_bilstm(Tape& tape, Model& model, Tape::NodeId embeddings) {
  auto fwd = lstm_run(tape, model.token_fwd(), embeddings, false);
  auto bwd = lstm_run(tape, model.token_bwd(), embeddings, true);
  std::vector<Tape::NodeId> rows(fwd.size());
  for (std::size_t i = 0; i < fwd.size(); ++i)
    rows[i] = tape.concat(fwd[i], bwd[i]);
  return tape.stack(rows);
}

Tape::NodeId attention_pool(Tape& tape, Model& model, Tape::NodeId states,
                            Tape::NodeId* alpha_out) {
  Tape::NodeId transformed = tape.tanh(tape.add(
      tape.matmul(states, tape.param(model.attn_w())),
      tape.param(model.attn_b())));                                  // (n, a)
  Tape::NodeId scores = tape.matmul(transformed, tape.param(model.attn_u()));
  Tape::NodeId alpha = tape.softmax(scores);
  if (alpha_out) *alpha_out = alpha;
  Tape::NodeId source =
      model.encoder().pool_source == PoolSource::transformed ? transformed
                                                             : states;
  return tape.matmul(tape.transpose(source), alpha);
}

Tape::NodeId sentence_bilstm(Tape& tape, Model& model, Tape::NodeId pooled) {
  auto fwd = lstm_run(tape, model.sent_fwd(), pooled, false);
  auto bwd = lstm_run(tape, model.sent_bwd(), pooled, true);
  std::vector<Tape::NodeId> rows(fwd.size());
  for (std::size_t i = 0; i < fwd.size(); ++i)
    rows[i] = tape.concat(fwd[i], bwd[i]);
  return tape.stack(rows);
}

Tape::NodeId encode_document(Tape& tape, Model& model, const Document& doc,
                             const EncodeOptions& opt) {
  require(!doc.sentences.empty(), "encode: document has no sentences");
  Tape::NodeId table = tape.param(model.embedding());
  std::vector<Tape::NodeId> pooled;
  pooled.reserve(doc.sentences.size());
  for (const auto& sentence : doc.sentences) {
    auto ids = token_ids(sentence.tokens, model.hasher());
    Tape::NodeId z = tape.gather_rows(table, ids);
    Tape::NodeId states = token_bilstm(tape, model, z);
    pooled.push_back(attention_pool(tape, model, states));
  }
  Tape::NodeId stacked = tape.stack(pooled);

  double p = model.encoder().dropout;
  if (opt.training && p > 0.0) {
    require(opt.dropout_rng != nullptr,
            "encode: training with dropout needs a random stream");
    Tensor mask(tape.value(stacked).shape());
    double keep = 1.0 - p;
    for (std::size_t i = 0; i < mask.size(); ++i)
      mask.at(i) = opt.dropout_rng->uniform01() < keep ? 1.0 / keep : 0.0;
    stacked = tape.mul(stacked, tape.constant(std::move(mask)));
  }
  return sentence_bilstm(tape, model, stacked);
}

Tensor encode_document_values(Model& model, const Document& doc) {
  Tape tape;
  return tape.value(encode_document(tape, model, doc));
}

}  // namespace rrl
