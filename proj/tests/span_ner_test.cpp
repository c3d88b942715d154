#include "structkd/span_ner.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "structkd/corpus.hpp"
#include "structkd/model.hpp"
#include "structkd/oracle.hpp"
#include "test_util.hpp"

namespace structkd {
namespace {

using testing::max_abs_diff;
using testing::random_span_table;
using testing::tokens;

TEST(SpanScores, ShapeAndZeroWeights) {
  LabelAlphabet types;
  types.add("PER");
  types.add("LOC");
  const Model m(Family::kSpanNer, types, 12);
  const SpanScoreTable t = span_scores(m, SentenceFeatures(tokens({"x"}), 12));
  EXPECT_EQ(t.entries(), 2u);
  EXPECT_EQ(t(1, 1, 0), 0.0);
  EXPECT_EQ(t(1, 1, 1), 0.0);
}

TEST(SpanPartition, HandEnumeratedExamples) {
  EXPECT_NEAR(span_log_partition(SpanScoreTable(1, 1)), std::log(2.0), 1e-15);
  EXPECT_NEAR(span_log_partition(SpanScoreTable(2, 1)), std::log(5.0), 1e-15);
  EXPECT_NEAR(span_log_partition_prefix(SpanScoreTable(2, 1)), std::log(5.0), 1e-15);
}

TEST(SpanPartition, MatchesEnumerationBothDirections) {
  Rng rng(1);
  for (int k = 0; k < 100; ++k) {
    const SpanScoreTable t = random_span_table(rng, 1 + rng.below(6), 1 + rng.below(3));
    const double z = exact_partition(enumerate_spans(t));
    EXPECT_NEAR(span_log_partition(t), z, 1e-9);
    EXPECT_NEAR(span_log_partition_prefix(t), z, 1e-9);
  }
}

TEST(BioesMarginals, HandEnumeratedRows) {
  // Tag order O, B, I, E, S.
  const Matrix one = bioes_marginals(SpanScoreTable(1, 1));
  EXPECT_NEAR(one(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(one(0, 4), 0.5, 1e-15);
  EXPECT_EQ(one(0, 1), 0.0);
  EXPECT_EQ(one(0, 2), 0.0);
  EXPECT_EQ(one(0, 3), 0.0);

  const Matrix two = bioes_marginals(SpanScoreTable(2, 1));
  EXPECT_NEAR(two(0, 0), 0.4, 1e-15);
  EXPECT_NEAR(two(0, 4), 0.4, 1e-15);
  EXPECT_NEAR(two(0, 1), 0.2, 1e-15);
  EXPECT_EQ(two(0, 2), 0.0);
  EXPECT_EQ(two(0, 3), 0.0);
}

TEST(BioesMarginals, MatchEnumerationWithExactEdgeZeros) {
  Rng rng(2);
  for (int k = 0; k < 100; ++k) {
    const int n = 1 + rng.below(6);
    const int L = 1 + rng.below(3);
    const SpanScoreTable t = random_span_table(rng, n, L);
    const Matrix rows = bioes_marginals(t);
    const MarginalTable exact = exact_marginals(enumerate_spans(t), TableKind::kTokenUnary);
    EXPECT_LT(max_abs_diff(rows, exact.unary), 1e-9);
    for (int i = 0; i < n; ++i) {
      double total = 0.0;
      for (double v : rows.row(i)) total += v;
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
    for (int l = 0; l < L; ++l) {
      EXPECT_EQ(rows(n - 1, 1 + 4 * l), 0.0);
      EXPECT_EQ(rows(0, 2 + 4 * l), 0.0);
      EXPECT_EQ(rows(n - 1, 2 + 4 * l), 0.0);
      EXPECT_EQ(rows(0, 3 + 4 * l), 0.0);
    }
  }
}

TEST(SpanMarginals, MatchEnumeration) {
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    const int n = 1 + rng.below(5);
    const int L = 1 + rng.below(2);
    const SpanScoreTable t = random_span_table(rng, n, L);
    const StructureEnumeration e = enumerate_spans(t);
    const auto p = exact_probabilities(e);
    const SpanScoreTable mu = span_marginals(t);
    for (int i = 1; i <= n; ++i) {
      for (int j = i; j <= n; ++j) {
        for (int l = 0; l < L; ++l) {
          double expected = 0.0;
          for (std::size_t s = 0; s < e.size(); ++s) {
            for (const Span& sp : e.span_sets[s].spans) {
              if (sp.start == i && sp.end == j && sp.type == l) expected += p[s];
            }
          }
          EXPECT_NEAR(mu(i, j, l), expected, 1e-9);
        }
      }
    }
  }
}

TEST(DecodeSpans, Examples) {
  EXPECT_EQ(decode_spans(SpanScoreTable(4, 2, -0.5)), SpanSet{});
  SpanScoreTable t(4, 2, -1.0);
  t(2, 3, 1) = 5.0;
  EXPECT_EQ(decode_spans(t), (SpanSet{{{2, 3, 1}}}));
}

TEST(DecodeSpans, MatchesEnumeratedArgmax) {
  Rng rng(4);
  for (int k = 0; k < 100; ++k) {
    const SpanScoreTable t = random_span_table(rng, 5, 1 + rng.below(2));
    const StructureEnumeration e = enumerate_spans(t);
    EXPECT_EQ(decode_spans(t), e.span_sets[exact_argmax(e)]);
  }
}

TEST(SampleSpans, DrawsValidStructures) {
  Rng rng(5);
  const SpanScoreTable t = random_span_table(rng, 6, 2);
  auto uniform = [&rng] { return rng.uniform(); };
  for (int k = 0; k < 200; ++k) {
    const SpanSet s = sample_spans(t, uniform);
    EXPECT_NO_THROW(make_span_set(s.spans, 6));
  }
}

}  // namespace
}  // namespace structkd
