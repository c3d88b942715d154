#include "structkd/chain_crf.hpp"

#include <cmath>

#include "structkd/errors.hpp"

namespace structkd {

ChainLattice::ChainLattice(std::size_t n, std::size_t labels, double fill)
    : emissions(n, labels, fill), start(labels, fill), stop(labels, fill) {
  if (n == 0) throw UsageError("chain lattice needs at least one position");
  transitions.assign(n - 1, Matrix(labels, labels, fill));
}

ChainLattice ChainLattice::scaled(double factor) const {
  ChainLattice out = *this;
  auto scale = [factor](std::span<double> values) {
    for (double& v : values) {
      if (v != kLogZero) v *= factor;
    }
  };
  scale(out.emissions.data());
  for (auto& t : out.transitions) scale(t.data());
  scale(out.start);
  scale(out.stop);
  return out;
}

double ChainLattice::sequence_score(const std::vector<int>& tags) const {
  const std::size_t n = length();
  if (tags.size() != n) throw UsageError("tag sequence length does not match lattice");
  double total = start[tags[0]] + emissions(0, tags[0]);
  for (std::size_t i = 1; i < n; ++i) {
    total += transitions[i - 1](tags[i - 1], tags[i]) + emissions(i, tags[i]);
  }
  return total + stop[tags[n - 1]];
}

Matrix forward_scores(const ChainLattice& lat) {
  const std::size_t n = lat.length();
  const std::size_t L = lat.labels();
  Matrix alpha(n, L);
  for (std::size_t b = 0; b < L; ++b) alpha(0, b) = lat.start[b] + lat.emissions(0, b);
  std::vector<double> terms(L);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t b = 0; b < L; ++b) {
      for (std::size_t a = 0; a < L; ++a) terms[a] = alpha(i - 1, a) + lat.transitions[i - 1](a, b);
      alpha(i, b) = log_sum_exp(terms) + lat.emissions(i, b);
    }
  }
  return alpha;
}

namespace {

Matrix backward_scores(const ChainLattice& lat) {
  const std::size_t n = lat.length();
  const std::size_t L = lat.labels();
  Matrix beta(n, L);
  for (std::size_t a = 0; a < L; ++a) beta(n - 1, a) = lat.stop[a];
  std::vector<double> terms(L);
  for (std::size_t i = n - 1; i-- > 0;) {
    for (std::size_t a = 0; a < L; ++a) {
      for (std::size_t b = 0; b < L; ++b) {
        terms[b] = lat.transitions[i](a, b) + lat.emissions(i + 1, b) + beta(i + 1, b);
      }
      beta(i, a) = log_sum_exp(terms);
    }
  }
  return beta;
}

double final_log_z(const ChainLattice& lat, const Matrix& alpha) {
  const std::size_t n = lat.length();
  std::vector<double> terms(lat.labels());
  for (std::size_t a = 0; a < terms.size(); ++a) terms[a] = alpha(n - 1, a) + lat.stop[a];
  const double z = log_sum_exp(terms);
  if (z == kLogZero) throw DegenerateDistribution("chain lattice admits no tag sequence");
  return z;
}

double safe_exp(double x) { return x == kLogZero ? 0.0 : std::exp(x); }

}  // namespace

double log_partition(const ChainLattice& lat) { return final_log_z(lat, forward_scores(lat)); }

MarginalTable pairwise_marginals(const ChainLattice& lat) {
  const std::size_t n = lat.length();
  const std::size_t L = lat.labels();
  const Matrix alpha = forward_scores(lat);
  const Matrix beta = backward_scores(lat);
  const double z = final_log_z(lat, alpha);

  MarginalTable out;
  out.kind = TableKind::kChainPairwise;
  out.unary = Matrix(n, L);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < L; ++a) out.unary(i, a) = safe_exp(alpha(i, a) + beta(i, a) - z);
  }
  out.pairwise.assign(n - 1, Matrix(L, L));
  for (std::size_t i = 1; i < n; ++i) {
    Matrix& slice = out.pairwise[i - 1];
    for (std::size_t a = 0; a < L; ++a) {
      for (std::size_t b = 0; b < L; ++b) {
        slice(a, b) = safe_exp(alpha(i - 1, a) + lat.transitions[i - 1](a, b) +
                               lat.emissions(i, b) + beta(i, b) - z);
      }
    }
  }
  return out;
}

Matrix unary_marginals(const ChainLattice& lat) {
  const Matrix alpha = forward_scores(lat);
  const Matrix beta = backward_scores(lat);
  const double z = final_log_z(lat, alpha);
  Matrix out(lat.length(), lat.labels());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t a = 0; a < out.cols(); ++a) out(i, a) = safe_exp(alpha(i, a) + beta(i, a) - z);
  }
  return out;
}

TagSequence viterbi(const ChainLattice& lat) {
  const std::size_t n = lat.length();
  const std::size_t L = lat.labels();
  Matrix best(n, L);
  std::vector<std::vector<int>> back(n, std::vector<int>(L, 0));
  for (std::size_t b = 0; b < L; ++b) best(0, b) = lat.start[b] + lat.emissions(0, b);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t b = 0; b < L; ++b) {
      double top = kLogZero;
      int arg = 0;
      for (std::size_t a = 0; a < L; ++a) {
        const double v = best(i - 1, a) + lat.transitions[i - 1](a, b);
        if (v > top) {
          top = v;
          arg = static_cast<int>(a);
        }
      }
      best(i, b) = top + lat.emissions(i, b);
      back[i][b] = arg;
    }
  }
  double top = kLogZero;
  int last = 0;
  for (std::size_t a = 0; a < L; ++a) {
    const double v = best(n - 1, a) + lat.stop[a];
    if (v > top) {
      top = v;
      last = static_cast<int>(a);
    }
  }
  TagSequence out{std::vector<int>(n)};
  out.tags[n - 1] = last;
  for (std::size_t i = n - 1; i > 0; --i) out.tags[i - 1] = back[i][out.tags[i]];
  return out;
}

ChainLoss nll_and_grad(const ChainLattice& lat, const TagSequence& gold) {
  const std::size_t n = lat.length();
  const int L = static_cast<int>(lat.labels());
  if (gold.tags.size() != n) throw UsageError("gold length does not match lattice");
  for (int t : gold.tags) {
    if (t < 0 || t >= L) throw UsageError("gold tag id out of range");
  }
  const MarginalTable m = pairwise_marginals(lat);
  const double z = log_partition(lat);

  ChainLoss out;
  out.loss = z - lat.sequence_score(gold.tags);
  out.grad = ChainLattice(n, lat.labels());
  out.grad.emissions = m.unary;
  for (std::size_t i = 0; i + 1 < n; ++i) out.grad.transitions[i] = m.pairwise[i];
  for (std::size_t a = 0; a < lat.labels(); ++a) {
    out.grad.start[a] = m.unary(0, a);
    out.grad.stop[a] = m.unary(n - 1, a);
  }
  out.grad.start[gold.tags[0]] -= 1.0;
  out.grad.stop[gold.tags[n - 1]] -= 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.grad.emissions(i, gold.tags[i]) -= 1.0;
    if (i > 0) out.grad.transitions[i - 1](gold.tags[i - 1], gold.tags[i]) -= 1.0;
  }
  return out;
}

// ---------------------------------------------------------------------------

ChainLattice build_lattice(const Model& model, const SentenceFeatures& feats) {
  require_family(model, Family::kChainCrf, "chain lattice model");
  const std::size_t n = static_cast<std::size_t>(feats.size());
  const int L = model.num_outputs();
  ChainLattice lat(n, static_cast<std::size_t>(L));
  for (std::size_t i = 0; i < n; ++i) {
    const FeatureVec& f = feats.token(static_cast<int>(i));
    for (int b = 0; b < L; ++b) lat.emissions(i, b) = score(model.params, f, b);
  }
  Matrix trans(L, L);
  for (int a = 0; a < L; ++a) {
    const FeatureVec f = feats.transition(a);
    for (int b = 0; b < L; ++b) {
      trans(a, b) = model.bioes_constrained && !bioes_transition_allowed(a, b)
                        ? kLogZero
                        : score(model.params, f, b);
    }
  }
  for (auto& t : lat.transitions) t = trans;
  const FeatureVec start = feats.start_boundary();
  const FeatureVec stop = feats.stop_boundary();
  for (int b = 0; b < L; ++b) {
    lat.start[b] = model.bioes_constrained && !bioes_start_allowed(b) ? kLogZero
                                                                       : score(model.params, start, b);
    lat.stop[b] = model.bioes_constrained && !bioes_stop_allowed(b) ? kLogZero
                                                                     : score(model.params, stop, b);
  }
  return lat;
}

void backprop_lattice(const Model& model, const SentenceFeatures& feats,
                      const ChainLattice& g, double coefficient, GradBuffer& grad) {
  const std::size_t n = g.length();
  const int L = static_cast<int>(g.labels());
  for (std::size_t i = 0; i < n; ++i) {
    const FeatureVec& f = feats.token(static_cast<int>(i));
    for (int b = 0; b < L; ++b) accumulate_grad(grad, f, b, coefficient * g.emissions(i, b));
  }
  for (int a = 0; a < L; ++a) {
    const FeatureVec f = feats.transition(a);
    for (int b = 0; b < L; ++b) {
      if (model.bioes_constrained && !bioes_transition_allowed(a, b)) continue;
      double total = 0.0;
      for (const auto& t : g.transitions) total += t(a, b);
      accumulate_grad(grad, f, b, coefficient * total);
    }
  }
  const FeatureVec start = feats.start_boundary();
  const FeatureVec stop = feats.stop_boundary();
  for (int b = 0; b < L; ++b) {
    if (!model.bioes_constrained || bioes_start_allowed(b)) {
      accumulate_grad(grad, start, b, coefficient * g.start[b]);
    }
    if (!model.bioes_constrained || bioes_stop_allowed(b)) {
      accumulate_grad(grad, stop, b, coefficient * g.stop[b]);
    }
  }
}

double chain_nll(const Model& model, const SentenceFeatures& feats, const TagSequence& gold,
                 double coefficient, GradBuffer& grad) {
  const ChainLattice lat = build_lattice(model, feats);
  ChainLoss result = nll_and_grad(lat, gold);
  backprop_lattice(model, feats, result.grad, coefficient, grad);
  return result.loss;
}

}  // namespace structkd
