#include "structkd/head_parser.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "structkd/errors.hpp"
#include "structkd/model.hpp"
#include "structkd/oracle.hpp"
#include "structkd/token_maxent.hpp"
#include "test_util.hpp"

namespace structkd {
namespace {

using testing::max_abs_diff;
using testing::random_matrix;
using testing::tokens;

Model parser(Family family, int relations, int bits = 12) {
  LabelAlphabet r;
  for (int k = 0; k < relations; ++k) r.add("r" + std::to_string(k));
  return Model(family, r, bits);
}

Matrix random_arcs(Rng& rng, int n) {
  Matrix m = random_matrix(rng, n, n + 1);
  for (int i = 1; i <= n; ++i) m(i - 1, i) = kLogZero;
  return m;
}

SiblingScores random_sib(Rng& rng, int n) {
  SiblingScores s(n);
  for (int i = 1; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      for (int k = 1; k <= n; ++k) {
        if (k != i && j != i && j != k) s(i, j, k) = rng.uniform(-2, 2);
      }
    }
  }
  return s;
}

TEST(FirstOrder, ZeroWeightsTwoTokens) {
  const Model m = parser(Family::kFirstOrderParser, 2);
  const ArcDistributions d = first_order_distributions(m, SentenceFeatures(tokens({"a", "b"}), 12));
  EXPECT_EQ(d.head_rows(0, 0), 0.5);
  EXPECT_EQ(d.head_rows(0, 1), 0.0);
  EXPECT_EQ(d.head_rows(0, 2), 0.5);
  EXPECT_EQ(d.head_rows(1, 1), 0.5);
  EXPECT_EQ(d.head_rows(1, 2), 0.0);
}

TEST(FirstOrder, SingleTokenAttachesToRoot) {
  Rng rng(1);
  Model m = parser(Family::kFirstOrderParser, 2);
  for (double& w : m.params.weights) w = rng.uniform(-1, 1);
  const ArcDistributions d = first_order_distributions(m, SentenceFeatures(tokens({"x"}), 12));
  EXPECT_EQ(d.head_rows(0, 0), 1.0);
  EXPECT_EQ(d.head_rows(0, 1), 0.0);
}

TEST(FirstOrder, RowsMatchDirectSoftmax) {
  Rng rng(2);
  Model m = parser(Family::kFirstOrderParser, 3);
  for (double& w : m.params.weights) w = rng.uniform(-1, 1);
  const SentenceFeatures f(tokens({"the", "big", "dog"}), 12);
  const ArcDistributions d = first_order_distributions(m, f);
  for (int i = 1; i <= 3; ++i) {
    std::vector<double> s;
    for (int j = 0; j <= 3; ++j) s.push_back(j == i ? kLogZero : score(m.params, f.arc(j, i), 0));
    const auto p = softmax(s);
    for (int j = 0; j <= 3; ++j) EXPECT_NEAR(d.head_rows(i - 1, j), p[j], 1e-15);
  }
}

TEST(ArcMarginal, Examples) {
  const ArcDistributions uniform{Matrix(2, 3, 0.5), Matrix(2, 2, 0.5)};
  EXPECT_EQ(arc_marginal(uniform, 1, 0, 1), 0.25);
  ArcDistributions sure{Matrix(1, 2, 0.0), Matrix(1, 1, 1.0)};
  sure.head_rows(0, 0) = 1.0;
  EXPECT_EQ(arc_marginal(sure, 1, 0, 0), 1.0);
  EXPECT_THROW(arc_marginal(uniform, 1, 1, 0), UsageError);
}

TEST(ArcMarginal, SumsToOne) {
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    const int n = 1 + rng.below(6);
    const int R = 1 + rng.below(3);
    const ArcDistributions d{row_softmax(random_arcs(rng, n)), row_softmax(random_matrix(rng, n, R))};
    for (int i = 1; i <= n; ++i) {
      double total = 0.0;
      for (int j = 0; j <= n; ++j) {
        if (j == i) continue;
        for (int r = 0; r < R; ++r) total += arc_marginal(d, i, j, r);
      }
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST(ArcMarginal, TableMatchesEnumeration) {
  Rng rng(4);
  for (int k = 0; k < 50; ++k) {
    const int n = 1 + rng.below(4);
    const int R = 1 + rng.below(2);
    const Matrix arc = random_arcs(rng, n);
    const Matrix rel = random_matrix(rng, n, R);
    Matrix joint(n, (n + 1) * R);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j <= n; ++j) {
        for (int r = 0; r < R; ++r) joint(i, j * R + r) = arc(i, j) + rel(i, r);
      }
    }
    const MarginalTable exact = exact_marginals(enumerate_heads(joint, R), TableKind::kArc);
    const MarginalTable dp = arc_marginal_table({row_softmax(arc), row_softmax(rel)});
    EXPECT_LT(max_abs_diff(dp.unary, exact.unary), 1e-9);
  }
}

TEST(MeanField, ZeroIterationsIsFirstOrder) {
  Rng rng(5);
  const Matrix arc = random_arcs(rng, 4);
  EXPECT_EQ(mfvi_second_order(arc, random_sib(rng, 4), 0), row_softmax(arc));
}

TEST(MeanField, ZeroSiblingScoresIsFirstOrder) {
  Rng rng(6);
  const Matrix arc = random_arcs(rng, 4);
  for (int K = 0; K < 5; ++K) EXPECT_EQ(mfvi_second_order(arc, SiblingScores(4), K), row_softmax(arc));
}

TEST(MeanField, MatchesStepByStepRecursion) {
  Rng rng(7);
  const int n = 3;
  const Matrix arc = random_arcs(rng, n);
  const SiblingScores sib = random_sib(rng, n);
  Matrix q = row_softmax(arc);
  for (int t = 1; t <= 3; ++t) {
    Matrix logits(n, n + 1);
    for (int i = 1; i <= n; ++i) {
      for (int j = 0; j <= n; ++j) {
        if (j == i) {
          logits(i - 1, j) = kLogZero;
          continue;
        }
        double s = arc(i - 1, j);
        for (int k = 1; k <= n; ++k) {
          if (k != i && k != j) s += sib(i, j, k) * q(k - 1, j);
        }
        logits(i - 1, j) = s;
      }
    }
    q = row_softmax(logits);
    const Matrix got = mfvi_second_order(arc, sib, t);
    EXPECT_LT(max_abs_diff(got, q), 1e-12);
    for (int i = 0; i < n; ++i) {
      double total = 0.0;
      for (int j = 0; j <= n; ++j) {
        EXPECT_GE(got(i, j), 0.0);
        total += got(i, j);
      }
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST(DecodeHeads, OneHotAndUniform) {
  ArcDistributions d{Matrix(2, 3, 0.0), Matrix(2, 2, 0.0)};
  d.head_rows(0, 2) = 1.0;
  d.head_rows(1, 0) = 1.0;
  d.rel_rows(0, 1) = 1.0;
  d.rel_rows(1, 0) = 1.0;
  EXPECT_EQ(decode_heads(d), (HeadAssignment{{2, 0}, {1, 0}}));

  ArcDistributions u{Matrix(2, 3, 0.5), Matrix(2, 2, 0.5)};
  u.head_rows(0, 1) = 0.0;
  u.head_rows(1, 2) = 0.0;
  EXPECT_EQ(decode_heads(u).heads, (std::vector<int>{0, 0}));
}

TEST(DecodeHeads, MatchesPerRowArgmax) {
  Rng rng(8);
  for (int k = 0; k < 50; ++k) {
    const int n = 1 + rng.below(6);
    const ArcDistributions d{row_softmax(random_arcs(rng, n)), row_softmax(random_matrix(rng, n, 2))};
    const HeadAssignment h = decode_heads(d);
    for (int i = 0; i < n; ++i) {
      int best = 0;
      for (int j = 1; j <= n; ++j) {
        if (d.head_rows(i, j) > d.head_rows(i, best)) best = j;
      }
      EXPECT_EQ(h.heads[i], best);
    }
  }
}

TEST(JointArc, SelfBlockMasked) {
  const Model m = parser(Family::kArcMaxEnt, 2);
  const Matrix s = joint_arc_scores(m, SentenceFeatures(tokens({"a", "b"}), 12));
  ASSERT_EQ(s.cols(), 6u);
  EXPECT_EQ(s(0, 2), kLogZero);
  EXPECT_EQ(s(0, 3), kLogZero);
  EXPECT_EQ(s(1, 4), kLogZero);
  EXPECT_EQ(s(0, 0), 0.0);
}

TEST(ParserLosses, RejectInvalidGold) {
  const Model m = parser(Family::kFirstOrderParser, 2);
  GradBuffer g(m.params);
  const SentenceFeatures f(tokens({"a", "b"}), 12);
  EXPECT_THROW(first_order_nll(m, f, HeadAssignment{{1, 0}, {0, 0}}, 1.0, g), UsageError);
  EXPECT_THROW(first_order_nll(m, f, HeadAssignment{{2, 0}, {0, 5}}, 1.0, g), UsageError);
}

}  // namespace
}  // namespace structkd
