#pragma once

#include <span>
#include <vector>

#include "rrl/model.hpp"
#include "rrl/tensor.hpp"

namespace rrl {

// Plain-value view of the linear-chain scores used by decoding.
// transitions is (K, K) indexed [from][to].
struct CrfScores {
  const Tensor& transitions;
  const Tensor& start;
  const Tensor& end;
};

inline CrfScores crf_scores(Model& model) {
  return CrfScores{model.crf_transitions().value, model.crf_start().value,
                   model.crf_end().value};
}

// log sum over all K^m label sequences of exp(path score), computed by the
// forward recursion in log space.
double crf_log_partition(const Tensor& emissions, const CrfScores& scores);

double crf_sequence_score(const Tensor& emissions, const CrfScores& scores,
                          std::span<const int> labels);

// Negative log-likelihood, >= 0 up to numerical slack.
double crf_nll(const Tensor& emissions, const CrfScores& scores,
               std::span<const int> labels);

// Best-scoring sequence; ties break toward the lowest label id at each
// backtrack step.
std::vector<int> crf_viterbi(const Tensor& emissions, const CrfScores& scores);

// Forward-backward posterior P(l_i = k | x) per position, rows sum to 1.
Tensor crf_marginals(const Tensor& emissions, const CrfScores& scores);

// (m, rep_dim) representations -> (m, K) emission scores on the tape.
Tape::NodeId crf_emissions_node(Tape& tape, Model& model, Tape::NodeId reps);

// Tape NLL for one document; gradients flow to emissions and CRF scores.
Tape::NodeId crf_nll_node(Tape& tape, Model& model, Tape::NodeId emissions,
                          std::span<const int> gold);

}  // namespace rrl
