#include "structkd/token_maxent.hpp"

#include <cmath>

#include "structkd/errors.hpp"

namespace structkd {

Matrix token_scores(const Model& model, const SentenceFeatures& feats) {
  require_family(model, Family::kTokenMaxEnt, "token classifier");
  const int n = feats.size();
  const int L = model.num_outputs();
  Matrix out(n, L);
  for (int i = 0; i < n; ++i) {
    const FeatureVec& f = feats.token(i);
    for (int b = 0; b < L; ++b) out(i, b) = score(model.params, f, b);
  }
  return out;
}

Matrix row_log_softmax(const Matrix& scores) {
  Matrix out(scores.rows(), scores.cols());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    const auto row = log_softmax(scores.row(i));
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

Matrix row_softmax(const Matrix& scores) {
  Matrix out(scores.rows(), scores.cols());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    const auto row = softmax(scores.row(i));
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

Matrix token_distributions(const Model& model, const SentenceFeatures& feats) {
  return row_softmax(token_scores(model, feats));
}

void backprop_token_scores(const SentenceFeatures& feats, const Matrix& score_grad,
                           double coefficient, GradBuffer& grad) {
  for (std::size_t i = 0; i < score_grad.rows(); ++i) {
    const FeatureVec& f = feats.token(static_cast<int>(i));
    for (std::size_t b = 0; b < score_grad.cols(); ++b) {
      accumulate_grad(grad, f, static_cast<int>(b), coefficient * score_grad(i, b));
    }
  }
}

double token_nll(const Model& model, const SentenceFeatures& feats, const TagSequence& gold,
                 double coefficient, GradBuffer& grad) {
  const Matrix logp = row_log_softmax(token_scores(model, feats));
  if (gold.tags.size() != logp.rows()) throw UsageError("gold length does not match sentence");
  Matrix g(logp.rows(), logp.cols());
  double loss = 0.0;
  for (std::size_t i = 0; i < logp.rows(); ++i) {
    const int y = gold.tags[i];
    if (y < 0 || y >= static_cast<int>(logp.cols())) throw UsageError("gold tag id out of range");
    loss -= logp(i, y);
    for (std::size_t b = 0; b < logp.cols(); ++b) g(i, b) = std::exp(logp(i, b));
    g(i, y) -= 1.0;
  }
  backprop_token_scores(feats, g, coefficient, grad);
  return loss;
}

MarginalTable pair_marginals_from_tokens(const Matrix& rows) {
  if (rows.rows() == 0) throw UsageError("token distributions are empty");
  const std::size_t n = rows.rows();
  const std::size_t L = rows.cols();
  MarginalTable out;
  out.kind = TableKind::kChainPairwise;
  out.unary = rows;
  out.pairwise.assign(n - 1, Matrix(L, L));
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t a = 0; a < L; ++a) {
      for (std::size_t b = 0; b < L; ++b) out.pairwise[i - 1](a, b) = rows(i - 1, a) * rows(i, b);
    }
  }
  return out;
}

TagSequence decode_tokens(const Matrix& rows) {
  TagSequence out;
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    out.tags.push_back(static_cast<int>(argmax(rows.row(i))));
  }
  return out;
}

}  // namespace structkd
