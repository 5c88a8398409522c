#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rrl/crf.hpp"
#include "rrl/random.hpp"

using namespace rrl;

namespace {

// Brute-force enumeration over all K^m label sequences.
struct BruteCrf {
  const Tensor& emissions;
  const Tensor& transitions;
  const Tensor& start;
  const Tensor& end;

  double score(const std::vector<int>& seq) const {
    std::size_t m = emissions.rows();
    double s = start.at(seq[0]) + emissions.at2(0, seq[0]);
    for (std::size_t t = 1; t < m; ++t)
      s += transitions.at2(seq[t - 1], seq[t]) + emissions.at2(t, seq[t]);
    return s + end.at(seq[m - 1]);
  }

  template <typename Fn>
  void for_each_sequence(Fn&& fn) const {
    std::size_t m = emissions.rows(), k = emissions.cols();
    std::vector<int> seq(m, 0);
    for (;;) {
      fn(seq);
      std::size_t t = m;
      while (t > 0) {
        --t;
        if (++seq[t] < static_cast<int>(k)) break;
        seq[t] = 0;
        if (t == 0) return;
      }
      if (t == 0 && seq[0] == 0) return;
    }
  }

  double log_partition() const {
    double mx = -1e300;
    for_each_sequence([&](const std::vector<int>& s) { mx = std::max(mx, score(s)); });
    double acc = 0.0;
    for_each_sequence(
        [&](const std::vector<int>& s) { acc += std::exp(score(s) - mx); });
    return mx + std::log(acc);
  }

  std::vector<int> best_sequence() const {
    std::vector<int> best;
    double top = -1e300;
    for_each_sequence([&](const std::vector<int>& s) {
      double v = score(s);
      if (v > top) {
        top = v;
        best = s;
      }
    });
    return best;
  }

  Tensor marginals() const {
    std::size_t m = emissions.rows(), k = emissions.cols();
    double lz = log_partition();
    Tensor out({m, k});
    for_each_sequence([&](const std::vector<int>& s) {
      double w = std::exp(score(s) - lz);
      for (std::size_t t = 0; t < m; ++t) out.at2(t, s[t]) += w;
    });
    return out;
  }
};

Tensor zeros_vec(std::size_t k) { return Tensor({k}); }

Tensor random_tensor(RandomStream& rng, std::vector<std::size_t> shape,
                     double span = 2.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i)
    t.at(i) = span * (rng.uniform01() - 0.5);
  return t;
}

}  // namespace

TEST_CASE("log_partition: single position and all-zero scores") {
  Tensor e1 = Tensor::from_matrix(1, 2, {0.1, 0.2});
  Tensor trans({2, 2});
  Tensor start = zeros_vec(2), end = zeros_vec(2);
  CrfScores s{trans, start, end};
  double lz = crf_log_partition(e1, s);
  CHECK(lz == doctest::Approx(std::log(std::exp(0.1) + std::exp(0.2)))
                  .epsilon(1e-12));
  CHECK(lz == doctest::Approx(0.84444).epsilon(1e-4));

  Tensor e2({2, 3});
  Tensor trans3({3, 3});
  Tensor s3 = zeros_vec(3), e3 = zeros_vec(3);
  CrfScores sc{trans3, s3, e3};
  CHECK(crf_log_partition(e2, sc) ==
        doctest::Approx(std::log(9.0)).epsilon(1e-12));
}

TEST_CASE("nll: uniform single position is log 2 and peaked is near zero") {
  Tensor e = Tensor::from_matrix(1, 2, {0, 0});
  Tensor trans({2, 2});
  Tensor start = zeros_vec(2), end = zeros_vec(2);
  CrfScores s{trans, start, end};
  std::vector<int> gold{0};
  CHECK(crf_nll(e, s, gold) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Tensor peaked = Tensor::from_matrix(2, 2, {100, -100, -100, 100});
  std::vector<int> gold2{0, 1};
  CHECK(crf_nll(peaked, s, gold2) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(crf_viterbi(peaked, s) == gold2);

  std::vector<int> bad{0, 5};
  CHECK_THROWS_AS(crf_nll(peaked, s, bad), Error);
}

TEST_CASE("viterbi: all-zero scores give the all-zeros sequence") {
  Tensor e({3, 3});
  Tensor trans({3, 3});
  Tensor start = zeros_vec(3), end = zeros_vec(3);
  CHECK(crf_viterbi(e, {trans, start, end}) == std::vector<int>{0, 0, 0});

  Tensor e1 = Tensor::from_matrix(1, 2, {0.1, 0.2});
  Tensor t2({2, 2});
  Tensor s2 = zeros_vec(2), n2 = zeros_vec(2);
  CHECK(crf_viterbi(e1, {t2, s2, n2}) == std::vector<int>{1});
}

TEST_CASE("marginals: single position and symmetric cases") {
  Tensor e = Tensor::from_matrix(1, 3, {0.3, -0.1, 0.9});
  Tensor trans({3, 3});
  Tensor start = Tensor::from_vector({0.2, 0.0, -0.4});
  Tensor end = Tensor::from_vector({0.0, 0.5, 0.0});
  Tensor m = crf_marginals(e, {trans, start, end});
  // Reduces to the softmax of emissions + start + end.
  double z = 0.0;
  std::vector<double> v(3);
  for (int j = 0; j < 3; ++j) {
    v[j] = std::exp(e.at2(0, j) + start.at(j) + end.at(j));
    z += v[j];
  }
  for (int j = 0; j < 3; ++j)
    CHECK(m.at2(0, j) == doctest::Approx(v[j] / z).epsilon(1e-12));

  Tensor ez({2, 3});
  Tensor sz = zeros_vec(3), nz = zeros_vec(3);
  Tensor tz({3, 3});
  Tensor mu = crf_marginals(ez, {tz, sz, nz});
  for (std::size_t t = 0; t < 2; ++t)
    for (int j = 0; j < 3; ++j)
      CHECK(mu.at2(t, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("random instances match brute-force enumeration") {
  RandomStream rng(2718);
  for (int round = 0; round < 60; ++round) {
    std::size_t m = 1 + rng.uniform_index(4);
    std::size_t k = 2 + rng.uniform_index(2);
    Tensor e = random_tensor(rng, {m, k});
    Tensor trans = random_tensor(rng, {k, k});
    Tensor start = random_tensor(rng, {k});
    Tensor end = random_tensor(rng, {k});
    CrfScores s{trans, start, end};
    BruteCrf brute{e, trans, start, end};

    CHECK(crf_log_partition(e, s) ==
          doctest::Approx(brute.log_partition()).epsilon(1e-10));
    CHECK(crf_viterbi(e, s) == brute.best_sequence());

    Tensor ours = crf_marginals(e, s);
    Tensor theirs = brute.marginals();
    for (std::size_t i = 0; i < ours.size(); ++i)
      CHECK(std::abs(ours.at(i) - theirs.at(i)) <= 1e-8);
    for (std::size_t t = 0; t < m; ++t) {
      double row = 0.0;
      for (std::size_t j = 0; j < k; ++j) row += ours.at2(t, j);
      CHECK(std::abs(row - 1.0) <= 1e-9);
    }

    // NLL of a random sequence is non-negative and log_partition dominates.
    std::vector<int> seq(m);
    for (auto& l : seq) l = static_cast<int>(rng.uniform_index(k));
    CHECK(crf_nll(e, s, seq) >= -1e-9);
  }
}

TEST_CASE("tape NLL equals the plain NLL and its emission gradient is "
          "marginals minus one-hot") {
  RandomStream rng(31415);
  HasherConfig h;
  h.hash_buckets = 16;
  h.embed_dim = 4;
  EncoderConfig ec;
  ec.h_tok = 2;
  ec.attn_dim = 2;
  ec.h_sent = 2;
  ec.dropout = 0.0;
  Model model(LabelSet({"A", "B", "C"}), h, ec, 7);

  for (int round = 0; round < 20; ++round) {
    std::size_t m = 1 + rng.uniform_index(4);
    Tensor e = random_tensor(rng, {m, 3});
    std::vector<int> gold(m);
    for (auto& l : gold) l = static_cast<int>(rng.uniform_index(3));

    Tape tape;
    Parameter emissions{"emissions", e, true};
    auto en = tape.param(emissions);
    auto nll = crf_nll_node(tape, model, en, gold);
    CHECK(tape.value(nll).scalar_value() ==
          doctest::Approx(crf_nll(e, crf_scores(model), gold)).epsilon(1e-12));

    tape.backward(nll);
    Tensor g = tape.grad_or_zero(en);
    Tensor marg = crf_marginals(e, crf_scores(model));
    for (std::size_t t = 0; t < m; ++t)
      for (std::size_t j = 0; j < 3; ++j) {
        double expect = marg.at2(t, j) -
                        (static_cast<std::size_t>(gold[t]) == j ? 1.0 : 0.0);
        CHECK(std::abs(g.at2(t, j) - expect) <= 1e-8);
      }
  }
}
