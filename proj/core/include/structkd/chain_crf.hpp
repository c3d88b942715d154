#pragma once

// Exact inference for linear-chain CRFs.
//
// Score(y) = start[y_0] + sum_i emissions(i, y_i)
//          + sum_{i>=1} transitions[i-1](y_{i-1}, y_i) + stop[y_{n-1}].
// Position 0's substructure score is start + emission; every later position
// absorbs its emission into the incoming transition.

#include <vector>

#include "structkd/corpus.hpp"
#include "structkd/marginal_table.hpp"
#include "structkd/model.hpp"
#include "structkd/numerics.hpp"
#include "structkd/scorer.hpp"

namespace structkd {

struct ChainLattice {
  ChainLattice() = default;
  ChainLattice(std::size_t n, std::size_t labels, double fill = 0.0);

  std::size_t length() const { return emissions.rows(); }
  std::size_t labels() const { return emissions.cols(); }

  // Every score multiplied by `factor` (kLogZero entries stay kLogZero).
  ChainLattice scaled(double factor) const;
  // Total score of one tag sequence.
  double sequence_score(const std::vector<int>& tags) const;

  Matrix emissions;                  // n x L
  std::vector<Matrix> transitions;   // (n-1) slices of L x L
  std::vector<double> start;         // L
  std::vector<double> stop;          // L
};

double log_partition(const ChainLattice& lat);

// Pairwise table plus unary rows obtained from forward * backward.
MarginalTable pairwise_marginals(const ChainLattice& lat);
Matrix unary_marginals(const ChainLattice& lat);

// Ties break toward the lowest label id at every backpointer.
TagSequence viterbi(const ChainLattice& lat);

struct ChainLoss {
  double loss = 0.0;
  ChainLattice grad;  // d loss / d every lattice score
};

// -Score(gold) + log Z, gradient = marginal - gold indicator.
ChainLoss nll_and_grad(const ChainLattice& lat, const TagSequence& gold);

// Draws one tag sequence from P(y) by forward filtering, backward sampling.
// `uniform` must return values in [0, 1).
template <typename Uniform>
std::vector<int> sample_chain(const ChainLattice& lat, Uniform&& uniform);

// ---------------------------------------------------------------------------
// Model glue (Family::kChainCrf)

ChainLattice build_lattice(const Model& model, const SentenceFeatures& feats);

// Pushes `coefficient * lattice_grad` back onto the hashed weights.
void backprop_lattice(const Model& model, const SentenceFeatures& feats,
                      const ChainLattice& lattice_grad, double coefficient, GradBuffer& grad);

// Sentence-level NLL through the features; returns the loss.
double chain_nll(const Model& model, const SentenceFeatures& feats, const TagSequence& gold,
                 double coefficient, GradBuffer& grad);

// Forward log-potentials alpha(i, y): sum over prefixes ending in y at i.
Matrix forward_scores(const ChainLattice& lat);

template <typename Uniform>
std::vector<int> sample_chain(const ChainLattice& lat, Uniform&& uniform) {
  const std::size_t n = lat.length();
  const std::size_t L = lat.labels();
  const Matrix alpha = forward_scores(lat);
  auto draw = [&](const std::vector<double>& logits) {
    const std::vector<double> p = softmax(logits);
    double u = uniform();
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (u < p[k]) return static_cast<int>(k);
      u -= p[k];
    }
    // Rounding slack: fall back to the last label with mass.
    for (std::size_t k = p.size(); k-- > 0;) {
      if (p[k] > 0.0) return static_cast<int>(k);
    }
    return 0;
  };
  std::vector<int> tags(n);
  std::vector<double> logits(L);
  for (std::size_t a = 0; a < L; ++a) logits[a] = alpha(n - 1, a) + lat.stop[a];
  tags[n - 1] = draw(logits);
  for (std::size_t i = n - 1; i-- > 0;) {
    const int next = tags[i + 1];
    for (std::size_t a = 0; a < L; ++a) {
      logits[a] = alpha(i, a) + lat.transitions[i](a, static_cast<std::size_t>(next));
    }
    tags[i] = draw(logits);
  }
  return tags;
}

}  // namespace structkd
