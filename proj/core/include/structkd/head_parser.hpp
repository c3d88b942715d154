#pragma once

// Head-selection dependency models without a tree constraint. Dependents
// are 1-based (row i-1 of every matrix); head columns run 0..n with column 0
// the root. The self-head entry of each row is masked with kLogZero scores
// and probability exactly 0.

#include <vector>

#include "structkd/corpus.hpp"
#include "structkd/marginal_table.hpp"
#include "structkd/model.hpp"
#include "structkd/numerics.hpp"
#include "structkd/scorer.hpp"

namespace structkd {

struct ArcDistributions {
  Matrix head_rows;  // n x (n+1), P(h_i = j)
  Matrix rel_rows;   // n x R, P(l_i = r)
};

// sib(i, j, k): dependents i and k sharing head j. Entries with k == i,
// j == i or j == k are zero and never read.
class SiblingScores {
 public:
  SiblingScores() = default;
  explicit SiblingScores(int n) : n_(n), data_(static_cast<std::size_t>(n) * (n + 1) * n, 0.0) {}

  int length() const { return n_; }
  double& operator()(int dep, int head, int sib) { return data_[index(dep, head, sib)]; }
  double operator()(int dep, int head, int sib) const { return data_[index(dep, head, sib)]; }
  std::span<double> data() { return data_; }

 private:
  std::size_t index(int dep, int head, int sib) const {
    return (static_cast<std::size_t>(dep - 1) * (n_ + 1) + head) * n_ + (sib - 1);
  }
  int n_ = 0;
  std::vector<double> data_;
};

// n x (n+1) first-order arc scores; kLogZero on the self-head entries.
Matrix arc_scores(const Model& model, const SentenceFeatures& feats);
// n x R relation scores from the dependent's token features.
Matrix rel_scores(const Model& model, const SentenceFeatures& feats);
SiblingScores sibling_scores(const Model& model, const SentenceFeatures& feats);

ArcDistributions first_order_distributions(const Model& model, const SentenceFeatures& feats);

// P(h_i = j) * P(l_i = r). Throws UsageError when j == i.
double arc_marginal(const ArcDistributions& d, int dep, int head, int rel);

// Mean-field iterations over per-token head distributions:
//   Q^0 = softmax(arc), Q^t(i, j) ∝ exp(arc(i, j) + sum_{k != i} sib(i, j, k) Q^{t-1}(k, j)).
// Returns Q^K.
Matrix mfvi_second_order(const Matrix& arc, const SiblingScores& sib, int iterations);

// Head rows from the model's own inference (first-order softmax or mean
// field), relation rows from the first-order relation classifier. Every
// score is multiplied by `score_scale` first.
ArcDistributions parser_distributions(const Model& model, const SentenceFeatures& feats,
                                      double score_scale = 1.0);

// Joint table over (head, relation) per token: column j * R + r.
MarginalTable arc_marginal_table(const ArcDistributions& d);

// Per-token argmax head and relation, ties toward smaller indices.
HeadAssignment decode_heads(const ArcDistributions& d);

// --- joint (head, relation) MaxEnt student --------------------------------

// n x (n+1)R scores of the arc-label classifier; self-head block masked.
Matrix joint_arc_scores(const Model& model, const SentenceFeatures& feats);
// Per-token argmax over columns j * R + r; ties toward smaller head, then
// smaller relation.
HeadAssignment decode_joint(const Matrix& rows, int relations);
// Pushes an n x (n+1)R score gradient onto the arc-label features.
void backprop_joint_scores(const SentenceFeatures& feats, const Matrix& score_grad, int relations,
                           double coefficient, GradBuffer& grad);

// --- training losses, all returning the loss and accumulating gradients ---

double joint_arc_nll(const Model& model, const SentenceFeatures& feats, const HeadAssignment& gold,
                     double coefficient, GradBuffer& grad);
// First-order teacher: -log P(h_i) - log P(l_i).
double first_order_nll(const Model& model, const SentenceFeatures& feats,
                       const HeadAssignment& gold, double coefficient, GradBuffer& grad);
// Second-order teacher: -log Q^K(h_i) - log P(l_i), differentiated through
// every unrolled mean-field iteration.
double second_order_nll(const Model& model, const SentenceFeatures& feats,
                        const HeadAssignment& gold, double coefficient, GradBuffer& grad);

}  // namespace structkd
