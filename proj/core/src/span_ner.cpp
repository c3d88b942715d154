#include "structkd/span_ner.hpp"

#include <cmath>

#include "structkd/errors.hpp"

namespace structkd {

SpanScoreTable::SpanScoreTable(int n, int types, double fill) : n_(n), types_(types) {
  if (n < 1 || types < 0) throw UsageError("span table needs n >= 1 and a type count >= 0");
  data_.assign(static_cast<std::size_t>(n) * n * types, fill);
}

std::size_t SpanScoreTable::index(int start, int end, int type) const {
  return (static_cast<std::size_t>(start - 1) * n_ + (end - 1)) * types_ + type;
}

SpanScoreTable SpanScoreTable::scaled(double factor) const {
  SpanScoreTable out = *this;
  for (double& v : out.data_) v *= factor;
  return out;
}

double SpanScoreTable::set_score(const SpanSet& spans) const {
  double total = 0.0;
  for (const Span& s : spans.spans) total += (*this)(s.start, s.end, s.type);
  return total;
}

SpanChart span_chart(const SpanScoreTable& t) {
  const int n = t.length();
  const int L = t.types();
  SpanChart c;
  c.log_suffix.assign(static_cast<std::size_t>(n) + 2, kLogZero);
  c.log_suffix[n + 1] = 0.0;
  for (int i = n; i >= 1; --i) {
    double acc = c.log_suffix[i + 1];
    for (int j = i; j <= n; ++j) {
      for (int l = 0; l < L; ++l) acc = log_add(acc, t(i, j, l) + c.log_suffix[j + 1]);
    }
    c.log_suffix[i] = acc;
  }
  c.log_prefix.assign(static_cast<std::size_t>(n) + 1, kLogZero);
  c.log_prefix[0] = 0.0;
  for (int i = 1; i <= n; ++i) {
    double acc = c.log_prefix[i - 1];
    for (int k = 1; k <= i; ++k) {
      for (int l = 0; l < L; ++l) acc = log_add(acc, t(k, i, l) + c.log_prefix[k - 1]);
    }
    c.log_prefix[i] = acc;
  }
  c.log_z = c.log_suffix[1];
  return c;
}

double span_log_partition(const SpanScoreTable& t) { return span_chart(t).log_suffix[1]; }

double span_log_partition_prefix(const SpanScoreTable& t) {
  return span_chart(t).log_prefix[t.length()];
}

SpanScoreTable span_marginals(const SpanScoreTable& t) {
  const int n = t.length();
  const SpanChart c = span_chart(t);
  SpanScoreTable mu(n, t.types());
  for (int k = 1; k <= n; ++k) {
    for (int j = k; j <= n; ++j) {
      for (int l = 0; l < t.types(); ++l) {
        mu(k, j, l) = std::exp(c.log_prefix[k - 1] + t(k, j, l) + c.log_suffix[j + 1] - c.log_z);
      }
    }
  }
  return mu;
}

Matrix bioes_marginals(const SpanScoreTable& t) {
  const int n = t.length();
  const int L = t.types();
  const SpanChart c = span_chart(t);
  const SpanScoreTable mu = span_marginals(t);
  Matrix out(n, 1 + 4 * L, 0.0);
  for (int i = 1; i <= n; ++i) {
    out(i - 1, BioesScheme::outside()) =
        std::exp(c.log_prefix[i - 1] + c.log_suffix[i + 1] - c.log_z);
    for (int l = 0; l < L; ++l) {
      out(i - 1, BioesScheme::tag(BioesPart::kSingle, l)) = mu(i, i, l);
      // Empty ranges leave exact zeros: no B at i = n, no E at i = 1, no I
      // at either edge.
      double b = 0.0;
      for (int j = i + 1; j <= n; ++j) b += mu(i, j, l);
      double e = 0.0;
      for (int k = 1; k < i; ++k) e += mu(k, i, l);
      double inside = 0.0;
      for (int k = 1; k < i; ++k) {
        for (int j = i + 1; j <= n; ++j) inside += mu(k, j, l);
      }
      out(i - 1, BioesScheme::tag(BioesPart::kBegin, l)) = b;
      out(i - 1, BioesScheme::tag(BioesPart::kEnd, l)) = e;
      out(i - 1, BioesScheme::tag(BioesPart::kInside, l)) = inside;
    }
  }
  return out;
}

SpanSet decode_spans(const SpanScoreTable& t) {
  const int n = t.length();
  struct Cell {
    double score = 0.0;
    int count = 0;
    int end = 0;  // 0 = skip position
    int type = 0;
  };
  std::vector<Cell> best(static_cast<std::size_t>(n) + 2);
  for (int i = n; i >= 1; --i) {
    Cell cell{best[i + 1].score, best[i + 1].count, 0, 0};
    for (int j = i; j <= n; ++j) {
      for (int l = 0; l < t.types(); ++l) {
        const double s = t(i, j, l) + best[j + 1].score;
        const int count = best[j + 1].count + 1;
        // Equal score and count: a span starting here is further left than
        // anything the skip option can start with.
        const bool better = s > cell.score ||
                            (s == cell.score && count < cell.count) ||
                            (s == cell.score && count == cell.count && cell.end == 0);
        if (better) cell = Cell{s, count, j, l};
      }
    }
    best[i] = cell;
  }
  SpanSet out;
  int i = 1;
  while (i <= n) {
    if (best[i].end == 0) {
      ++i;
      continue;
    }
    out.spans.push_back({i, best[i].end, best[i].type});
    i = best[i].end + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------

SpanScoreTable span_scores(const Model& model, const SentenceFeatures& feats) {
  require_family(model, Family::kSpanNer, "span model");
  const int n = feats.size();
  const int L = model.labels.size();
  SpanScoreTable out(n, L);
  for (int i = 1; i <= n; ++i) {
    for (int j = i; j <= n; ++j) {
      const FeatureVec f = feats.span(i, j);
      for (int l = 0; l < L; ++l) out(i, j, l) = score(model.params, f, l);
    }
  }
  return out;
}

void backprop_span_scores(const SentenceFeatures& feats, const SpanScoreTable& g,
                          double coefficient, GradBuffer& grad) {
  const int n = g.length();
  for (int i = 1; i <= n; ++i) {
    for (int j = i; j <= n; ++j) {
      const FeatureVec f = feats.span(i, j);
      for (int l = 0; l < g.types(); ++l) accumulate_grad(grad, f, l, coefficient * g(i, j, l));
    }
  }
}

double span_nll(const Model& model, const SentenceFeatures& feats, const SpanSet& gold,
                double coefficient, GradBuffer& grad) {
  const SpanScoreTable t = span_scores(model, feats);
  const SpanSet checked = make_span_set(gold.spans, t.length());
  for (const Span& s : checked.spans) {
    if (s.type < 0 || s.type >= t.types()) throw UsageError("gold span type out of range");
  }
  SpanScoreTable g = span_marginals(t);
  for (const Span& s : checked.spans) g(s.start, s.end, s.type) -= 1.0;
  backprop_span_scores(feats, g, coefficient, grad);
  return span_log_partition(t) - t.set_score(checked);
}

}  // namespace structkd
