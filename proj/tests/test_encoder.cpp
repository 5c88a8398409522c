#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "rrl/encoder.hpp"

using namespace rrl;

namespace {

Model toy_model(std::uint64_t seed = 5, PoolSource pool = PoolSource::transformed) {
  HasherConfig h;
  h.hash_buckets = 31;
  h.embed_dim = 4;
  EncoderConfig e;
  e.h_tok = 3;
  e.attn_dim = 3;
  e.h_sent = 3;
  e.dropout = 0.0;
  e.pool_source = pool;
  return Model(LabelSet({"A", "B", "C"}), h, e, seed);
}

Document make_doc(std::vector<std::string> texts) {
  Document d;
  d.doc_id = "doc";
  for (auto& t : texts) {
    Sentence s;
    s.text = t;
    s.tokens = tokenize(s.text);
    s.label_id = 0;
    d.sentences.push_back(std::move(s));
  }
  return d;
}

void zero_all(Model& m) {
  for (Parameter* p : m.parameters())
    for (std::size_t i = 0; i < p->value.size(); ++i) p->value.at(i) = 0.0;
}

Tensor random_matrix(RandomStream& rng, std::size_t r, std::size_t c) {
  Tensor t({r, c});
  for (std::size_t i = 0; i < t.size(); ++i)
    t.at(i) = rng.uniform01() * 2.0 - 1.0;
  return t;
}

}  // namespace

TEST_CASE("lstm: zero weights and biases give zero hidden states") {
  Model m = toy_model();
  zero_all(m);
  Tape tape;
  RandomStream rng(3);
  auto x = tape.constant(random_matrix(rng, 5, 4));
  auto states = lstm_run(tape, m.token_fwd(), x, false);
  for (auto s : states)
    for (std::size_t i = 0; i < tape.value(s).size(); ++i)
      CHECK(tape.value(s).at(i) == 0.0);
}

TEST_CASE("lstm: backward direction equals forward over the reversed input") {
  Model m = toy_model(11);
  RandomStream rng(7);
  Tensor x = random_matrix(rng, 6, 4);
  Tensor x_rev({6, 4});
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 4; ++j) x_rev.at2(i, j) = x.at2(5 - i, j);

  Tape t1, t2;
  auto bwd = lstm_run(t1, m.token_fwd(), t1.constant(x), true);
  auto fwd_on_rev = lstm_run(t2, m.token_fwd(), t2.constant(x_rev), false);
  for (std::size_t i = 0; i < 6; ++i) {
    const Tensor& a = t1.value(bwd[i]);
    const Tensor& b = t2.value(fwd_on_rev[5 - i]);
    for (std::size_t j = 0; j < a.size(); ++j)
      CHECK(a.at(j) == doctest::Approx(b.at(j)).epsilon(1e-12));
  }
}

TEST_CASE("token_bilstm with tied directions: reversal swaps channels") {
  Model m = toy_model(13);
  // Tie backward parameters to the forward ones.
  m.token_bwd().w_x->value = m.token_fwd().w_x->value;
  m.token_bwd().w_h->value = m.token_fwd().w_h->value;
  m.token_bwd().b->value = m.token_fwd().b->value;

  RandomStream rng(17);
  Tensor x = random_matrix(rng, 4, 4);
  Tensor x_rev({4, 4});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) x_rev.at2(i, j) = x.at2(3 - i, j);

  Tape t1, t2;
  Tensor h = t1.value(token_bilstm(t1, m, t1.constant(x)));
  Tensor h_rev = t2.value(token_bilstm(t2, m, t2.constant(x_rev)));
  std::size_t half = 3;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < half; ++j) {
      CHECK(h.at2(i, j) ==
            doctest::Approx(h_rev.at2(3 - i, half + j)).epsilon(1e-12));
      CHECK(h.at2(i, half + j) ==
            doctest::Approx(h_rev.at2(3 - i, j)).epsilon(1e-12));
    }
}

TEST_CASE("attention: singleton is certain, twins split evenly, rows sum to 1") {
  Model m = toy_model(19);
  RandomStream rng(23);

  Tape t1;
  Tensor one = random_matrix(rng, 1, 6);
  Tape::NodeId alpha1;
  auto pooled = attention_pool(t1, m, t1.constant(one), &alpha1);
  CHECK(t1.value(alpha1).at(0) == doctest::Approx(1.0).epsilon(1e-12));
  // With a single token the pooled vector equals the transformed vector.
  Tape t1b;
  auto u = t1b.tanh(t1b.add(t1b.matmul(t1b.constant(one), t1b.param(m.attn_w())),
                            t1b.param(m.attn_b())));
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(t1.value(pooled).at(j) ==
          doctest::Approx(t1b.value(u).at2(0, j)).epsilon(1e-12));

  Tape t2;
  Tensor twins({2, 6});
  for (std::size_t j = 0; j < 6; ++j) {
    double v = rng.uniform01();
    twins.at2(0, j) = v;
    twins.at2(1, j) = v;
  }
  Tape::NodeId alpha2;
  attention_pool(t2, m, t2.constant(twins), &alpha2);
  CHECK(t2.value(alpha2).at(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(t2.value(alpha2).at(1) == doctest::Approx(0.5).epsilon(1e-12));

  for (int n = 1; n <= 16; n += 3) {
    Tape t3;
    Tape::NodeId alpha;
    attention_pool(t3, m, t3.constant(random_matrix(rng, n, 6)), &alpha);
    double s = 0.0;
    for (std::size_t i = 0; i < t3.value(alpha).size(); ++i)
      s += t3.value(alpha).at(i);
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("encode_document: shapes, determinism, dropout-zero equivalence") {
  Model m = toy_model(29);
  Document doc = make_doc({"alpha beta", "gamma delta epsilon", "zeta"});

  Tensor c1 = encode_document_values(m, doc);
  Tensor c2 = encode_document_values(m, doc);
  CHECK(c1.rows() == 3);
  CHECK(c1.cols() == 6);
  CHECK(c1 == c2);

  // Training with dropout 0 matches eval exactly.
  Tape tape;
  RandomStream rng(1);
  EncodeOptions opt;
  opt.training = true;
  opt.dropout_rng = &rng;
  Tensor c3 = tape.value(encode_document(tape, m, doc, opt));
  CHECK(c1 == c3);
}

TEST_CASE("encode_document: sentence context reaches the last sentence") {
  Model m = toy_model(31);
  Document doc = make_doc({"one two", "three four", "final sentence"});
  Document permuted = make_doc({"three four", "one two", "final sentence"});
  Tensor a = encode_document_values(m, doc);
  Tensor b = encode_document_values(m, permuted);
  double diff = 0.0;
  for (std::size_t j = 0; j < a.cols(); ++j)
    diff += std::abs(a.at2(2, j) - b.at2(2, j));
  CHECK(diff > 1e-8);
}

TEST_CASE("encoder-only gradients match finite differences") {
  for (PoolSource pool : {PoolSource::transformed, PoolSource::lstm_state}) {
    Model m = toy_model(37, pool);
    Document doc = make_doc({"alpha beta gamma", "delta epsilon", "zeta eta"});
    auto params = m.parameters();
    RandomStream weight_rng(41);
    Tensor w({3, m.rep_dim()});
    for (std::size_t i = 0; i < w.size(); ++i)
      w.at(i) = weight_rng.uniform01() - 0.5;

    auto f = [&](std::map<std::string, Tensor>* grads) {
      Tape tape;
      auto c = encode_document(tape, m, doc);
      auto loss = tape.sum(tape.mul(c, tape.constant(w)));
      if (grads) {
        tape.backward(loss);
        for (Parameter* p : params)
          (*grads)[p->name] = tape.grad_or_zero(tape.param(*p));
      }
      return tape.value(loss).scalar_value();
    };
    auto report = rrl::finite_difference_check(f, params);
    CHECK(report.max_rel_err <= 1e-4);
  }
}
