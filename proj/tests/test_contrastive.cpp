#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rrl/contrastive.hpp"
#include "rrl/random.hpp"

using namespace rrl;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

ContrastiveItem item(Tape& tape, std::vector<double> v, int label,
                     int doc_index, int position, int doc_length,
                     bool from_bank = false) {
  ContrastiveItem it;
  it.rep = tape.constant(Tensor::from_vector(std::move(v)));
  it.label = label;
  it.doc_index = doc_index;
  it.position = position;
  it.doc_length = doc_length;
  it.from_bank = from_bank;
  return it;
}

}  // namespace

TEST_CASE("pair_score: sigmoid of the (oriented) cosine") {
  std::vector<double> e1{1, 0}, e2{0, 1};
  PairScoreConfig verbatim{PairOrientation::verbatim};
  PairScoreConfig similarity{PairOrientation::similarity};

  CHECK(pair_score_value(e1, e2, verbatim) == doctest::Approx(0.5));
  CHECK(pair_score_value(e1, e2, similarity) == doctest::Approx(0.5));
  CHECK(pair_score_value(e1, e1, verbatim) ==
        doctest::Approx(1.0 / (1.0 + std::exp(1.0))).epsilon(1e-12));
  CHECK(pair_score_value(e1, e1, verbatim) == doctest::Approx(0.26894).epsilon(1e-4));
  CHECK(pair_score_value(e1, e1, similarity) == doctest::Approx(0.73106).epsilon(1e-4));

  RandomStream rng(5);
  for (int i = 0; i < 10; ++i) {
    std::vector<double> a{rng.gaussian(), rng.gaussian(), rng.gaussian()};
    std::vector<double> b{rng.gaussian(), rng.gaussian(), rng.gaussian()};
    CHECK(pair_score_value(a, b, similarity) ==
          doctest::Approx(pair_score_value(b, a, similarity)).epsilon(1e-14));
    double v = pair_score_value(a, b, similarity);
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK_THROWS_AS(pair_score_value(std::vector<double>{0, 0}, e1, similarity),
                  Error);
}

TEST_CASE("supcon: two same-label orthogonal unit vectors") {
  Tape tape;
  BatchContext ctx;
  ctx.items.push_back(item(tape, {1, 0}, 0, 0, 0, 2));
  ctx.items.push_back(item(tape, {0, 1}, 0, 0, 1, 2));
  ctx.batch_size = 2;
  ContrastiveConfig cfg;
  double loss = tape.value(supcon_loss(tape, ctx, cfg)).scalar_value();
  // Both anchors: ratio exp(0.5)/exp(0); hand oracle frozen below.
  double oracle = -(1.0 / 4.0) * 2.0 * std::exp(0.5);
  CHECK(loss == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(loss == doctest::Approx(-0.82436).epsilon(1e-4));
}

TEST_CASE("supcon: no positive pairs gives zero loss") {
  Tape tape;
  BatchContext ctx;
  ctx.items.push_back(item(tape, {1, 0}, 0, 0, 0, 2));
  ctx.items.push_back(item(tape, {0, 1}, 1, 0, 1, 2));
  ctx.batch_size = 2;
  ContrastiveConfig cfg;
  CHECK(tape.value(supcon_loss(tape, ctx, cfg)).scalar_value() == 0.0);
}

TEST_CASE("supcon: batch below two sentences is zero") {
  Tape tape;
  BatchContext ctx;
  ctx.items.push_back(item(tape, {1, 0}, 0, 0, 0, 1));
  ctx.batch_size = 1;
  ContrastiveConfig cfg;
  CHECK(tape.value(supcon_loss(tape, ctx, cfg)).scalar_value() == 0.0);
}

TEST_CASE("supcon: a foreign bank entry widens the denominator") {
  ContrastiveConfig cfg;
  Tape t1;
  BatchContext plain;
  plain.items.push_back(item(t1, {1, 0}, 0, 0, 0, 2));
  plain.items.push_back(item(t1, {0, 1}, 0, 0, 1, 2));
  plain.batch_size = 2;
  double base = t1.value(supcon_loss(t1, plain, cfg)).scalar_value();

  Tape t2;
  BatchContext with_bank;
  with_bank.items.push_back(item(t2, {1, 0}, 0, 0, 0, 2));
  with_bank.items.push_back(item(t2, {0, 1}, 0, 0, 1, 2));
  with_bank.items.push_back(item(t2, {1, 1}, 1, -1, 0, 2, true));
  with_bank.batch_size = 2;
  double banked = t2.value(supcon_loss(t2, with_bank, cfg)).scalar_value();

  // Hand recomputation of the banked case.
  double d_pos = 0.5;
  double d_bank = sigmoid(std::sqrt(0.5));  // cos 45 degrees
  double expect = -(1.0 / 4.0) * 2.0 *
                  (std::exp(d_pos) / (1.0 + std::exp(d_bank)));
  CHECK(banked == doctest::Approx(expect).epsilon(1e-12));
  CHECK(banked > base);  // moved toward zero
}

TEST_CASE("supcon: invariant to rescaling and batch order") {
  ContrastiveConfig cfg;
  RandomStream rng(11);
  std::vector<std::vector<double>> vecs;
  std::vector<int> labels{0, 1, 0, 2, 1, 0};
  for (std::size_t i = 0; i < labels.size(); ++i)
    vecs.push_back({rng.gaussian(), rng.gaussian(), rng.gaussian()});

  auto loss_for = [&](double scale_factor,
                      const std::vector<std::size_t>& order) {
    Tape tape;
    BatchContext ctx;
    for (std::size_t idx : order) {
      auto v = vecs[idx];
      for (auto& x : v) x *= scale_factor;
      ctx.items.push_back(item(tape, v, labels[idx], 0,
                               static_cast<int>(idx), 6));
    }
    ctx.batch_size = order.size();
    return tape.value(supcon_loss(tape, ctx, cfg)).scalar_value();
  };

  std::vector<std::size_t> identity{0, 1, 2, 3, 4, 5};
  std::vector<std::size_t> shuffled{4, 2, 0, 5, 3, 1};
  double a = loss_for(1.0, identity);
  CHECK(loss_for(3.7, identity) == doctest::Approx(a).epsilon(1e-12));
  CHECK(loss_for(1.0, shuffled) == doctest::Approx(a).epsilon(1e-12));
}

TEST_CASE("discourse_weight: formula and conventions") {
  CHECK(discourse_weight(2, 6, true, 10) == doctest::Approx(0.25));
  CHECK(discourse_weight(6, 2, true, 10) == doctest::Approx(0.25));
  CHECK(discourse_weight(3, 4, true, 10) == doctest::Approx(1.0));
  CHECK(discourse_weight(0, 0, false, 10) == doctest::Approx(0.1));
  CHECK_THROWS_AS(discourse_weight(3, 3, true, 10), Error);
}

TEST_CASE("discourse loss equals plain supcon when every beta is 1") {
  ContrastiveConfig cfg;
  // Adjacent sentences in one document.
  {
    Tape t1, t2;
    BatchContext a, b;
    for (Tape* t : {&t1, &t2}) {
      BatchContext& ctx = t == &t1 ? a : b;
      ctx.items.push_back(item(*t, {1, 0.2}, 0, 0, 0, 2));
      ctx.items.push_back(item(*t, {0.1, 1}, 0, 0, 1, 2));
      ctx.batch_size = 2;
    }
    CHECK(t1.value(supcon_loss(t1, a, cfg)).scalar_value() ==
          t2.value(discourse_supcon_loss(t2, b, cfg)).scalar_value());
  }
  // Three single-sentence documents: cross-document beta is 1/1.
  {
    Tape t1, t2;
    BatchContext a, b;
    for (Tape* t : {&t1, &t2}) {
      BatchContext& ctx = t == &t1 ? a : b;
      ctx.items.push_back(item(*t, {1, 0.2, 0}, 0, 0, 0, 1));
      ctx.items.push_back(item(*t, {0.1, 1, 0.3}, 0, 1, 0, 1));
      ctx.items.push_back(item(*t, {0.4, 0.1, 1}, 1, 2, 0, 1));
      ctx.batch_size = 3;
    }
    CHECK(t1.value(supcon_loss(t1, a, cfg)).scalar_value() ==
          t2.value(discourse_supcon_loss(t2, b, cfg)).scalar_value());
  }
}

TEST_CASE("discourse: positive at distance 2, hand value") {
  Tape tape;
  BatchContext ctx;
  // Orthogonal unit vectors so d = 0.5 under the similarity orientation.
  ctx.items.push_back(item(tape, {1, 0}, 0, 0, 0, 3));
  ctx.items.push_back(item(tape, {0, 1}, 0, 0, 2, 3));
  ctx.batch_size = 2;
  ContrastiveConfig cfg;
  double loss =
      tape.value(discourse_supcon_loss(tape, ctx, cfg)).scalar_value();
  // beta = 1/2; numerator exp(0.25); denominator exp((1-0.5)*0.5).
  double ratio = std::exp(0.25) / std::exp(0.25);
  CHECK(loss == doctest::Approx(-(1.0 / 4.0) * 2.0 * ratio).epsilon(1e-12));
  CHECK(loss == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("discourse: a positive nearby outweighs the same positive far away") {
  ContrastiveConfig cfg;
  auto loss_at_distance = [&](int distance) {
    Tape tape;
    BatchContext ctx;
    ctx.items.push_back(item(tape, {1, 0}, 0, 0, 0, 6));
    ctx.items.push_back(item(tape, {0, 1}, 0, 0, distance, 6));
    ctx.batch_size = 2;
    return tape.value(discourse_supcon_loss(tape, ctx, cfg)).scalar_value();
  };
  CHECK(loss_at_distance(1) < loss_at_distance(5));
  CHECK(std::exp(1.0 * 0.5) > std::exp(0.2 * 0.5));
}

TEST_CASE("memory bank: FIFO per label") {
  MemoryBank bank(3, 2);
  bank.enqueue(0, {1.0});
  CHECK(bank.queue(0).size() == 1);
  bank.enqueue(0, {2.0});
  bank.enqueue(1, {9.0});
  bank.enqueue(0, {3.0});
  REQUIRE(bank.queue(0).size() == 2);
  CHECK(bank.queue(0)[0][0] == 2.0);
  CHECK(bank.queue(0)[1][0] == 3.0);
  CHECK(bank.queue(1).size() == 1);
  CHECK(bank.total_size() == 3);
  CHECK_THROWS_AS(bank.enqueue(7, {0.0}), Error);
}

TEST_CASE("bank entries carry no gradient back to their source") {
  // A parameter feeds a representation on an earlier tape; its value is
  // detached into the bank. A later tape must see only a constant.
  Parameter source{"source", Tensor::from_vector({0.7, -0.2}), true};
  MemoryBank bank(2, 4);
  {
    Tape warmup;
    auto rep = warmup.tanh(warmup.param(source));
    bank.enqueue(0, {warmup.value(rep).at(0), warmup.value(rep).at(1)});
  }

  Tape tape;
  BatchContext ctx;
  ctx.items.push_back(item(tape, {1, 0}, 0, 0, 0, 2));
  ctx.items.push_back(item(tape, {0, 1}, 0, 0, 1, 2));
  for (const auto& stored : bank.queue(0)) {
    ContrastiveItem bank_item =
        item(tape, stored, 0, -1, 0, 2, true);
    CHECK_FALSE(tape.requires_grad(bank_item.rep));
    ctx.items.push_back(bank_item);
  }
  ctx.batch_size = 2;
  ContrastiveConfig cfg;
  tape.backward(supcon_loss(tape, ctx, cfg));
  CHECK(tape.grad_or_zero(tape.param(source)) == Tensor({2}));
}
