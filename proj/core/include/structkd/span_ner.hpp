#pragma once

// Span-factored NER. A structure is any set of pairwise disjoint labeled
// spans (including the empty set); its score is the sum of its span scores.
//
// With tokens 1..n and e(i, j, l) = exp(s(i, j, l)):
//   suffix F(i) = F(i+1) + sum_{j >= i} sum_l e(i, j, l) F(j+1),  F(n+1) = 1
//   prefix B(i) = B(i-1) + sum_{k <= i} sum_l e(k, i, l) B(k-1),  B(0) = 1
// and Z = F(1) = B(n). F(i) sums over structures confined to tokens i..n,
// B(i) over structures confined to 1..i, so a span (k, j) splits any
// structure containing it into B(k-1) * e(k, j, l) * F(j+1).

#include <cmath>
#include <vector>

#include "structkd/corpus.hpp"
#include "structkd/model.hpp"
#include "structkd/numerics.hpp"
#include "structkd/scorer.hpp"

namespace structkd {

class SpanScoreTable {
 public:
  SpanScoreTable() = default;
  SpanScoreTable(int n, int types, double fill = 0.0);

  int length() const { return n_; }
  int types() const { return types_; }
  // 1 <= start <= end <= n
  double& operator()(int start, int end, int type) { return data_[index(start, end, type)]; }
  double operator()(int start, int end, int type) const { return data_[index(start, end, type)]; }
  std::size_t entries() const { return data_.size(); }

  SpanScoreTable scaled(double factor) const;
  double set_score(const SpanSet& spans) const;

 private:
  std::size_t index(int start, int end, int type) const;
  int n_ = 0;
  int types_ = 0;
  std::vector<double> data_;
};

struct SpanChart {
  std::vector<double> log_prefix;  // log B(i), i = 0..n
  std::vector<double> log_suffix;  // log F(i), i = 1..n+1 (index 0 unused)
  double log_z = 0.0;
};

SpanChart span_chart(const SpanScoreTable& t);

// Suffix recursion.
double span_log_partition(const SpanScoreTable& t);
// Prefix recursion; equal to span_log_partition up to rounding.
double span_log_partition_prefix(const SpanScoreTable& t);

// P(structure contains span (i, j, l)), in the table's layout.
SpanScoreTable span_marginals(const SpanScoreTable& t);

// n x (1 + 4|L|) rows in BioesScheme tag order. P(y_n = B), P(y_1 = I),
// P(y_n = I) and P(y_1 = E) are exact zeros.
Matrix bioes_marginals(const SpanScoreTable& t);

// Max-scoring structure. Spans with non-positive contribution never enter;
// ties go to fewer spans, then to the leftmost start.
SpanSet decode_spans(const SpanScoreTable& t);

// Exact draw from P(structure) using the suffix chart.
template <typename Uniform>
SpanSet sample_spans(const SpanScoreTable& t, Uniform&& uniform);

// --- model glue (Family::kSpanNer) -----------------------------------------

SpanScoreTable span_scores(const Model& model, const SentenceFeatures& feats);
void backprop_span_scores(const SentenceFeatures& feats, const SpanScoreTable& score_grad,
                          double coefficient, GradBuffer& grad);
// log Z - score(gold); gradient = span marginal - gold indicator.
double span_nll(const Model& model, const SentenceFeatures& feats, const SpanSet& gold,
                double coefficient, GradBuffer& grad);

template <typename Uniform>
SpanSet sample_spans(const SpanScoreTable& t, Uniform&& uniform) {
  const int n = t.length();
  const SpanChart chart = span_chart(t);
  std::vector<Span> spans;
  int i = 1;
  while (i <= n) {
    const double norm = chart.log_suffix[i];
    double u = uniform();
    double p = std::exp(chart.log_suffix[i + 1] - norm);
    if (u < p) {
      ++i;
      continue;
    }
    u -= p;
    int chosen_end = 0;
    int chosen_type = 0;
    for (int j = i; j <= n && chosen_end == 0; ++j) {
      for (int l = 0; l < t.types(); ++l) {
        p = std::exp(t(i, j, l) + chart.log_suffix[j + 1] - norm);
        if (u < p) {
          chosen_end = j;
          chosen_type = l;
          break;
        }
        u -= p;
      }
    }
    if (chosen_end == 0) {  // rounding slack
      ++i;
      continue;
    }
    spans.push_back({i, chosen_end, chosen_type});
    i = chosen_end + 1;
  }
  return SpanSet{std::move(spans)};
}

}  // namespace structkd
