#pragma once

// Locally normalized per-token classifier over BIOES tags.

#include "structkd/corpus.hpp"
#include "structkd/marginal_table.hpp"
#include "structkd/model.hpp"
#include "structkd/numerics.hpp"
#include "structkd/scorer.hpp"

namespace structkd {

// n x L raw label scores.
Matrix token_scores(const Model& model, const SentenceFeatures& feats);

// Row-wise log_softmax / softmax of a score matrix.
Matrix row_log_softmax(const Matrix& scores);
Matrix row_softmax(const Matrix& scores);

// One categorical per token; every row sums to 1.
Matrix token_distributions(const Model& model, const SentenceFeatures& feats);

// sum_i -log P(gold_i); gradient (softmax - one-hot) pushed through the
// token features with weight `coefficient`.
double token_nll(const Model& model, const SentenceFeatures& feats, const TagSequence& gold,
                 double coefficient, GradBuffer& grad);

// Pushes an n x L gradient w.r.t. token scores onto the hashed weights.
void backprop_token_scores(const SentenceFeatures& feats, const Matrix& score_grad,
                           double coefficient, GradBuffer& grad);

// pairwise[i-1](a, b) = rows(i-1, a) * rows(i, b); unary = rows.
MarginalTable pair_marginals_from_tokens(const Matrix& rows);

// Per-row argmax, ties toward the lowest id.
TagSequence decode_tokens(const Matrix& rows);

}  // namespace structkd
