#include "rrl/crf.hpp"

#include <algorithm>
#include <cmath>

namespace rrl {

namespace {

double logsumexp_range(const double* v, std::size_t n) {
  double mx = *std::max_element(v, v + n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - mx);
  return mx + std::log(s);
}

void check_inputs(const Tensor& emissions, const CrfScores& scores) {
  require(emissions.rank() == 2 && emissions.rows() >= 1,
          "crf: emissions must be (m, K) with m >= 1");
  std::size_t k = emissions.cols();
  require(scores.transitions.rank() == 2 && scores.transitions.rows() == k &&
              scores.transitions.cols() == k &&
              scores.start.size() == k && scores.end.size() == k,
          "crf: score shapes disagree with K");
}

}  // namespace

double crf_log_partition(const Tensor& emissions, const CrfScores& scores) {
  check_inputs(emissions, scores);
  std::size_t m = emissions.rows(), k = emissions.cols();
  std::vector<double> alpha(k), next(k), work(k);
  for (std::size_t j = 0; j < k; ++j)
    alpha[j] = scores.start.at(j) + emissions.at2(0, j);
  for (std::size_t t = 1; t < m; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t i = 0; i < k; ++i)
        work[i] = alpha[i] + scores.transitions.at2(i, j);
      next[j] = logsumexp_range(work.data(), k) + emissions.at2(t, j);
    }
    alpha.swap(next);
  }
  for (std::size_t j = 0; j < k; ++j) alpha[j] += scores.end.at(j);
  return logsumexp_range(alpha.data(), k);
}

double crf_sequence_score(const Tensor& emissions, const CrfScores& scores,
                          std::span<const int> labels) {
  check_inputs(emissions, scores);
  std::size_t m = emissions.rows(), k = emissions.cols();
  require(labels.size() == m, "crf: label sequence length mismatch");
  for (int l : labels)
    require(l >= 0 && static_cast<std::size_t>(l) < k,
            "crf: gold label out of range");
  double s = scores.start.at(labels[0]) + emissions.at2(0, labels[0]);
  for (std::size_t t = 1; t < m; ++t)
    s += scores.transitions.at2(labels[t - 1], labels[t]) +
         emissions.at2(t, labels[t]);
  return s + scores.end.at(labels[m - 1]);
}

double crf_nll(const Tensor& emissions, const CrfScores& scores,
               std::span<const int> labels) {
  return crf_log_partition(emissions, scores) -
         crf_sequence_score(emissions, scores, labels);
}

std::vector<int> crf_viterbi(const Tensor& emissions, const CrfScores& scores) {
  check_inputs(emissions, scores);
  std::size_t m = emissions.rows(), k = emissions.cols();
  std::vector<double> best(k), next(k);
  std::vector<std::vector<int>> back(m, std::vector<int>(k, 0));
  for (std::size_t j = 0; j < k; ++j)
    best[j] = scores.start.at(j) + emissions.at2(0, j);
  for (std::size_t t = 1; t < m; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      int arg = 0;
      double top = best[0] + scores.transitions.at2(0, j);
      for (std::size_t i = 1; i < k; ++i) {
        double v = best[i] + scores.transitions.at2(i, j);
        if (v > top) {  // strict: ties keep the lowest id
          top = v;
          arg = static_cast<int>(i);
        }
      }
      next[j] = top + emissions.at2(t, j);
      back[t][j] = arg;
    }
    best.swap(next);
  }
  int last = 0;
  double top = best[0] + scores.end.at(0);
  for (std::size_t j = 1; j < k; ++j) {
    double v = best[j] + scores.end.at(j);
    if (v > top) {
      top = v;
      last = static_cast<int>(j);
    }
  }
  std::vector<int> path(m);
  path[m - 1] = last;
  for (std::size_t t = m - 1; t > 0; --t) path[t - 1] = back[t][path[t]];
  return path;
}

Tensor crf_marginals(const Tensor& emissions, const CrfScores& scores) {
  check_inputs(emissions, scores);
  std::size_t m = emissions.rows(), k = emissions.cols();
  std::vector<std::vector<double>> alpha(m, std::vector<double>(k));
  std::vector<std::vector<double>> beta(m, std::vector<double>(k));
  std::vector<double> work(k);

  for (std::size_t j = 0; j < k; ++j)
    alpha[0][j] = scores.start.at(j) + emissions.at2(0, j);
  for (std::size_t t = 1; t < m; ++t)
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t i = 0; i < k; ++i)
        work[i] = alpha[t - 1][i] + scores.transitions.at2(i, j);
      alpha[t][j] = logsumexp_range(work.data(), k) + emissions.at2(t, j);
    }

  for (std::size_t j = 0; j < k; ++j) beta[m - 1][j] = scores.end.at(j);
  for (std::size_t t = m - 1; t > 0; --t)
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j)
        work[j] = scores.transitions.at2(i, j) + emissions.at2(t, j) +
                  beta[t][j];
      beta[t - 1][i] = logsumexp_range(work.data(), k);
    }

  Tensor out({m, k});
  for (std::size_t t = 0; t < m; ++t) {
    for (std::size_t j = 0; j < k; ++j) work[j] = alpha[t][j] + beta[t][j];
    double lse = logsumexp_range(work.data(), k);
    for (std::size_t j = 0; j < k; ++j)
      out.at2(t, j) = std::exp(work[j] - lse);
  }
  return out;
}

Tape::NodeId crf_emissions_node(Tape& tape, Model& model, Tape::NodeId reps) {
  return tape.matmul(reps, tape.param(model.crf_emission()));
}

Tape::NodeId crf_nll_node(Tape& tape, Model& model, Tape::NodeId emissions,
                          std::span<const int> gold) {
  const Tensor& e = tape.value(emissions);
  std::size_t m = e.rows(), k = e.cols();
  require(gold.size() == m, "crf: gold length mismatch");
  for (int l : gold)
    require(l >= 0 && static_cast<std::size_t>(l) < k,
            "crf: gold label out of range");

  Tape::NodeId trans = tape.param(model.crf_transitions());
  Tape::NodeId start = tape.param(model.crf_start());
  Tape::NodeId end = tape.param(model.crf_end());
  Tape::NodeId trans_t = tape.transpose(trans);

  // Forward recursion in log space.
  Tape::NodeId alpha = tape.add(tape.row(emissions, 0), start);
  for (std::size_t t = 1; t < m; ++t) {
    Tape::NodeId mat = tape.add(trans_t, alpha);  // [j][i] = trans[i][j]+alpha[i]
    alpha = tape.add(tape.logsumexp(mat), tape.row(emissions, t));
  }
  Tape::NodeId log_z = tape.logsumexp(tape.add(alpha, end));

  // Gold path score.
  Tape::NodeId score = tape.sum(
      tape.slice(start, static_cast<std::size_t>(gold[0]), 1));
  for (std::size_t t = 0; t < m; ++t) {
    score = tape.add(score,
                     tape.sum(tape.slice(tape.row(emissions, t),
                                         static_cast<std::size_t>(gold[t]), 1)));
    if (t + 1 < m)
      score = tape.add(
          score, tape.sum(tape.slice(tape.row(trans, gold[t]),
                                     static_cast<std::size_t>(gold[t + 1]), 1)));
  }
  score = tape.add(
      score, tape.sum(tape.slice(end, static_cast<std::size_t>(gold[m - 1]), 1)));

  return tape.add(log_z, tape.neg(score));
}

}  // namespace rrl
