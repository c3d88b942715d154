#include "structkd/head_parser.hpp"

#include <cmath>

#include "structkd/errors.hpp"
#include "structkd/token_maxent.hpp"

namespace structkd {

namespace {

void require_parser(const Model& model) {
  if (model.family != Family::kFirstOrderParser && model.family != Family::kSecondOrderParser) {
    throw UsageError("expected a first- or second-order head-selection parser, got '" +
                     std::string(family_name(model.family)) + "'");
  }
}

void check_gold(const HeadAssignment& gold, int n, int relations) {
  if (static_cast<int>(gold.heads.size()) != n || static_cast<int>(gold.rels.size()) != n) {
    throw UsageError("gold head assignment length does not match sentence");
  }
  for (int i = 1; i <= n; ++i) {
    const int h = gold.heads[i - 1];
    const int r = gold.rels[i - 1];
    if (h < 0 || h > n || h == i) throw UsageError("gold head out of range");
    if (r < 0 || r >= relations) throw UsageError("gold relation out of range");
  }
}

}  // namespace

Matrix arc_scores(const Model& model, const SentenceFeatures& feats) {
  require_parser(model);
  const int n = feats.size();
  Matrix out(n, n + 1);
  for (int i = 1; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      out(i - 1, j) = j == i ? kLogZero : score(model.params, feats.arc(j, i), 0);
    }
  }
  return out;
}

Matrix rel_scores(const Model& model, const SentenceFeatures& feats) {
  require_parser(model);
  const int n = feats.size();
  const int R = model.labels.size();
  Matrix out(n, R);
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < R; ++r) out(i, r) = score(model.params, feats.token(i), r);
  }
  return out;
}

SiblingScores sibling_scores(const Model& model, const SentenceFeatures& feats) {
  require_family(model, Family::kSecondOrderParser, "sibling scorer");
  const int n = feats.size();
  SiblingScores out(n);
  for (int i = 1; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      if (j == i) continue;
      for (int k = 1; k <= n; ++k) {
        if (k == i || k == j) continue;
        out(i, j, k) = score(model.params, feats.sibling(j, i, k), 0);
      }
    }
  }
  return out;
}

ArcDistributions first_order_distributions(const Model& model, const SentenceFeatures& feats) {
  return {row_softmax(arc_scores(model, feats)), row_softmax(rel_scores(model, feats))};
}

double arc_marginal(const ArcDistributions& d, int dep, int head, int rel) {
  const int n = static_cast<int>(d.head_rows.rows());
  if (dep < 1 || dep > n || head < 0 || head > n) throw UsageError("arc index out of range");
  if (head == dep) throw UsageError("a token cannot head itself");
  if (rel < 0 || rel >= static_cast<int>(d.rel_rows.cols())) {
    throw UsageError("relation id out of range");
  }
  return d.head_rows(dep - 1, head) * d.rel_rows(dep - 1, rel);
}

namespace {

// logits(i, j) = arc(i, j) + sum_{k != i} sib(i, j, k) * q(k, j)
Matrix mean_field_logits(const Matrix& arc, const SiblingScores& sib, const Matrix& q) {
  const int n = static_cast<int>(arc.rows());
  Matrix logits = arc;
  for (int i = 1; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      if (j == i) continue;
      double message = 0.0;
      for (int k = 1; k <= n; ++k) {
        if (k == i || k == j) continue;
        message += sib(i, j, k) * q(k - 1, j);
      }
      logits(i - 1, j) += message;
    }
  }
  return logits;
}

}  // namespace

Matrix mfvi_second_order(const Matrix& arc, const SiblingScores& sib, int iterations) {
  if (iterations < 0) throw UsageError("mean-field iteration count must be non-negative");
  if (sib.length() != static_cast<int>(arc.rows())) {
    throw UsageError("sibling tensor does not match arc score matrix");
  }
  Matrix q = row_softmax(arc);
  for (int t = 0; t < iterations; ++t) q = row_softmax(mean_field_logits(arc, sib, q));
  return q;
}

ArcDistributions parser_distributions(const Model& model, const SentenceFeatures& feats,
                                      double score_scale) {
  require_parser(model);
  auto scale = [score_scale](std::span<double> v) {
    if (score_scale == 1.0) return;
    for (double& x : v) {
      if (x != kLogZero) x *= score_scale;
    }
  };
  Matrix arc = arc_scores(model, feats);
  Matrix rel = rel_scores(model, feats);
  scale(arc.data());
  scale(rel.data());
  ArcDistributions out;
  if (model.family == Family::kSecondOrderParser) {
    SiblingScores sib = sibling_scores(model, feats);
    scale(sib.data());
    out.head_rows = mfvi_second_order(arc, sib, model.mfvi_iterations);
  } else {
    out.head_rows = row_softmax(arc);
  }
  out.rel_rows = row_softmax(rel);
  return out;
}

MarginalTable arc_marginal_table(const ArcDistributions& d) {
  const std::size_t n = d.head_rows.rows();
  const std::size_t R = d.rel_rows.cols();
  MarginalTable out;
  out.kind = TableKind::kArc;
  out.relations = static_cast<int>(R);
  out.unary = Matrix(n, (n + 1) * R);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= n; ++j) {
      for (std::size_t r = 0; r < R; ++r) out.unary(i, j * R + r) = d.head_rows(i, j) * d.rel_rows(i, r);
    }
  }
  return out;
}

HeadAssignment decode_heads(const ArcDistributions& d) {
  HeadAssignment out;
  for (std::size_t i = 0; i < d.head_rows.rows(); ++i) {
    out.heads.push_back(static_cast<int>(argmax(d.head_rows.row(i))));
    out.rels.push_back(static_cast<int>(argmax(d.rel_rows.row(i))));
  }
  return out;
}

// ---------------------------------------------------------------------------

Matrix joint_arc_scores(const Model& model, const SentenceFeatures& feats) {
  require_family(model, Family::kArcMaxEnt, "arc-label classifier");
  const int n = feats.size();
  const int R = model.labels.size();
  Matrix out(n, static_cast<std::size_t>((n + 1) * R), kLogZero);
  for (int i = 1; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      if (j == i) continue;
      const FeatureVec f = feats.arc(j, i);
      for (int r = 0; r < R; ++r) out(i - 1, j * R + r) = score(model.params, f, r);
    }
  }
  return out;
}

HeadAssignment decode_joint(const Matrix& rows, int relations) {
  HeadAssignment out;
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    const int col = static_cast<int>(argmax(rows.row(i)));
    out.heads.push_back(col / relations);
    out.rels.push_back(col % relations);
  }
  return out;
}

void backprop_joint_scores(const SentenceFeatures& feats, const Matrix& g, int relations,
                           double coefficient, GradBuffer& grad) {
  const int n = static_cast<int>(g.rows());
  for (int i = 1; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      if (j == i) continue;
      const FeatureVec f = feats.arc(j, i);
      for (int r = 0; r < relations; ++r) {
        accumulate_grad(grad, f, r, coefficient * g(i - 1, j * relations + r));
      }
    }
  }
}

double joint_arc_nll(const Model& model, const SentenceFeatures& feats, const HeadAssignment& gold,
                     double coefficient, GradBuffer& grad) {
  const int n = feats.size();
  const int R = model.labels.size();
  check_gold(gold, n, R);
  const Matrix logp = row_log_softmax(joint_arc_scores(model, feats));
  Matrix g(logp.rows(), logp.cols());
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const int col = gold.heads[i] * R + gold.rels[i];
    loss -= logp(i, col);
    for (std::size_t c = 0; c < logp.cols(); ++c) {
      g(i, c) = logp(i, c) == kLogZero ? 0.0 : std::exp(logp(i, c));
    }
    g(i, col) -= 1.0;
  }
  backprop_joint_scores(feats, g, R, coefficient, grad);
  return loss;
}

namespace {

// Shared by both teacher orders: relation NLL on token features.
double relation_nll(const Model& model, const SentenceFeatures& feats, const HeadAssignment& gold,
                    double coefficient, GradBuffer& grad) {
  const Matrix logp = row_log_softmax(rel_scores(model, feats));
  double loss = 0.0;
  for (std::size_t i = 0; i < logp.rows(); ++i) {
    const int y = gold.rels[i];
    loss -= logp(i, y);
    const FeatureVec& f = feats.token(static_cast<int>(i));
    for (std::size_t r = 0; r < logp.cols(); ++r) {
      const double g = std::exp(logp(i, r)) - (static_cast<int>(r) == y ? 1.0 : 0.0);
      accumulate_grad(grad, f, static_cast<int>(r), coefficient * g);
    }
  }
  return loss;
}

void backprop_arc_scores(const SentenceFeatures& feats, const Matrix& g, double coefficient,
                         GradBuffer& grad) {
  const int n = static_cast<int>(g.rows());
  for (int i = 1; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      if (j == i) continue;
      accumulate_grad(grad, feats.arc(j, i), 0, coefficient * g(i - 1, j));
    }
  }
}

}  // namespace

double first_order_nll(const Model& model, const SentenceFeatures& feats,
                       const HeadAssignment& gold, double coefficient, GradBuffer& grad) {
  require_family(model, Family::kFirstOrderParser, "first-order parser");
  const int n = feats.size();
  check_gold(gold, n, model.labels.size());
  const Matrix logp = row_log_softmax(arc_scores(model, feats));
  Matrix g(n, n + 1);
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    loss -= logp(i, gold.heads[i]);
    for (int j = 0; j <= n; ++j) g(i, j) = logp(i, j) == kLogZero ? 0.0 : std::exp(logp(i, j));
    g(i, gold.heads[i]) -= 1.0;
  }
  backprop_arc_scores(feats, g, coefficient, grad);
  return loss + relation_nll(model, feats, gold, coefficient, grad);
}

double second_order_nll(const Model& model, const SentenceFeatures& feats,
                        const HeadAssignment& gold, double coefficient, GradBuffer& grad) {
  require_family(model, Family::kSecondOrderParser, "second-order parser");
  const int n = feats.size();
  check_gold(gold, n, model.labels.size());
  const int K = model.mfvi_iterations;
  const Matrix arc = arc_scores(model, feats);
  const SiblingScores sib = sibling_scores(model, feats);

  std::vector<Matrix> q;  // q[t] = Q^t
  q.push_back(row_softmax(arc));
  for (int t = 0; t < K; ++t) q.push_back(row_softmax(mean_field_logits(arc, sib, q.back())));

  double loss = 0.0;
  Matrix d_logits(n, n + 1);  // gradient w.r.t. the logits that produced q[t]
  for (int i = 0; i < n; ++i) {
    const int h = gold.heads[i];
    loss -= std::log(q[K](i, h));
    for (int j = 0; j <= n; ++j) d_logits(i, j) = q[K](i, j);
    d_logits(i, h) -= 1.0;
  }

  Matrix d_arc(n, n + 1);
  SiblingScores d_sib(n);
  for (int t = K; t >= 1; --t) {
    const Matrix& prev = q[t - 1];
    Matrix d_prev(n, n + 1);
    for (int i = 1; i <= n; ++i) {
      for (int j = 0; j <= n; ++j) {
        if (j == i) continue;
        const double g = d_logits(i - 1, j);
        d_arc(i - 1, j) += g;
        if (g == 0.0) continue;
        for (int k = 1; k <= n; ++k) {
          if (k == i || k == j) continue;
          d_sib(i, j, k) += g * prev(k - 1, j);
          d_prev(k - 1, j) += g * sib(i, j, k);
        }
      }
    }
    // Back through the row softmax that produced `prev`.
    for (int k = 0; k < n; ++k) {
      double inner = 0.0;
      for (int j = 0; j <= n; ++j) inner += prev(k, j) * d_prev(k, j);
      for (int j = 0; j <= n; ++j) d_logits(k, j) = prev(k, j) * (d_prev(k, j) - inner);
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= n; ++j) d_arc(i, j) += d_logits(i, j);
  }

  backprop_arc_scores(feats, d_arc, coefficient, grad);
  for (int i = 1; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      if (j == i) continue;
      for (int k = 1; k <= n; ++k) {
        if (k == i || k == j) continue;
        const double g = d_sib(i, j, k);
        if (g != 0.0) accumulate_grad(grad, feats.sibling(j, i, k), 0, coefficient * g);
      }
    }
  }
  return loss + relation_nll(model, feats, gold, coefficient, grad);
}

}  // namespace structkd
