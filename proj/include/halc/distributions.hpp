#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace halc {

using TokenId = int;

/// Unnormalized log-probabilities indexed by token id.
struct Logits {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

/// Normalized distribution indexed by token id.
struct ProbDist {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }
};

/// Tokens whose expert probability is within a factor beta of the expert's mode.
struct PlausibilityMask {
  std::vector<bool> allowed;
  double beta = 0.1;

  bool contains(TokenId t) const { return allowed[static_cast<std::size_t>(t)]; }
  std::size_t count() const;
};

ProbDist softmax(const Logits& l);

/// Base-2 Jensen-Shannon divergence, in [0, 1].
double jsd(const ProbDist& p, const ProbDist& q);

double total_variation(const ProbDist& p, const ProbDist& q);

/// (1 + alpha) * expert - alpha * amateur, elementwise.
Logits contrast_logits(const Logits& expert, const Logits& amateur, double alpha);

PlausibilityMask plausibility_mask(const ProbDist& expert, double beta);

/// Masked log-space contrast. The mask comes from softmax(expert).
ProbDist contrast_distribution(const Logits& expert, const Logits& amateur, double alpha,
                               double beta);

/// Index pairs (i < j) ranked by JSD descending, ties lexicographic; at most m pairs.
std::vector<std::pair<int, int>> top_m_pairs(std::span<const ProbDist> dists, int m);

/// Full symmetric pairwise JSD matrix.
std::vector<std::vector<double>> jsd_matrix(std::span<const ProbDist> dists);

/// Lowest token id among the maximal entries.
TokenId argmax_token(const ProbDist& p);
TokenId argmax_token(const Logits& l);

double log_prob(const Logits& l, TokenId t);

}  // namespace halc
