#include "structkd/chain_crf.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "structkd/errors.hpp"
#include "structkd/model.hpp"
#include "structkd/oracle.hpp"
#include "test_util.hpp"

namespace structkd {
namespace {

using testing::max_abs_diff;
using testing::random_lattice;

TEST(LogPartition, UniformExamples) {
  EXPECT_NEAR(log_partition(ChainLattice(1, 2)), std::log(2.0), 1e-15);
  EXPECT_NEAR(log_partition(ChainLattice(2, 2)), std::log(4.0), 1e-15);
}

TEST(LogPartition, MatchesEnumeration) {
  Rng rng(1);
  for (int k = 0; k < 100; ++k) {
    const ChainLattice lat = random_lattice(rng, 1 + rng.below(6), 1 + rng.below(4));
    EXPECT_NEAR(log_partition(lat), exact_partition(enumerate_chain(lat)), 1e-9);
  }
  const ChainLattice lat = random_lattice(rng, 4, 3);
  EXPECT_EQ(enumerate_chain(lat).size(), 81u);
}

TEST(PairwiseMarginals, UniformAndForbidden) {
  const MarginalTable m = pairwise_marginals(ChainLattice(3, 2));
  for (const Matrix& slice : m.pairwise) {
    for (double v : slice.data()) EXPECT_NEAR(v, 0.25, 1e-15);
  }
  ChainLattice lat(3, 2);
  lat.transitions[1](0, 1) = kLogZero;
  EXPECT_EQ(pairwise_marginals(lat).pairwise[1](0, 1), 0.0);
}

TEST(PairwiseMarginals, MatchEnumeration) {
  Rng rng(2);
  for (int k = 0; k < 50; ++k) {
    const ChainLattice lat = random_lattice(rng, 4, 3);
    const MarginalTable exact = exact_marginals(enumerate_chain(lat), TableKind::kChainPairwise);
    const MarginalTable dp = pairwise_marginals(lat);
    ASSERT_EQ(dp.pairwise.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_LT(max_abs_diff(dp.pairwise[i], exact.pairwise[i]), 1e-9);
    EXPECT_LT(max_abs_diff(dp.unary, exact.unary), 1e-9);
  }
}

TEST(PairwiseMarginals, ConsistentWithUnary) {
  Rng rng(3);
  for (int k = 0; k < 100; ++k) {
    const int n = 2 + rng.below(7);
    const int L = 1 + rng.below(5);
    const MarginalTable m = pairwise_marginals(random_lattice(rng, n, L));
    for (int i = 1; i < n; ++i) {
      for (int b = 0; b < L; ++b) {
        double in = 0.0;
        double out = 0.0;
        for (int a = 0; a < L; ++a) {
          in += m.pairwise[i - 1](a, b);
          out += m.pairwise[i - 1](b, a);
        }
        EXPECT_NEAR(in, m.unary(i, b), 1e-9);
        EXPECT_NEAR(out, m.unary(i - 1, b), 1e-9);
      }
    }
  }
}

TEST(UnaryMarginals, Examples) {
  const Matrix uniform = unary_marginals(ChainLattice(3, 4));
  for (double v : uniform.data()) EXPECT_NEAR(v, 0.25, 1e-15);
  ChainLattice one(1, 2);
  one.emissions(0, 0) = 0.3;
  one.start[1] = 1.0;
  one.stop[0] = -0.2;
  const auto expected = softmax(std::vector<double>{0.3 - 0.2, 1.0});
  const Matrix u = unary_marginals(one);
  EXPECT_NEAR(u(0, 0), expected[0], 1e-15);
  EXPECT_NEAR(u(0, 1), expected[1], 1e-15);
}

TEST(UnaryMarginals, ShiftInvariance) {
  Rng rng(4);
  for (int k = 0; k < 50; ++k) {
    const int n = 1 + rng.below(6);
    const int L = 1 + rng.below(4);
    ChainLattice lat = random_lattice(rng, n, L);
    const double z = log_partition(lat);
    const MarginalTable before = pairwise_marginals(lat);
    const int pos = rng.below(n);
    const double c = rng.uniform(-5, 5);
    for (int b = 0; b < L; ++b) lat.emissions(pos, b) += c;
    EXPECT_NEAR(log_partition(lat), z + c, 1e-9);
    const MarginalTable after = pairwise_marginals(lat);
    EXPECT_LT(max_abs_diff(before.unary, after.unary), 1e-9);
    for (std::size_t i = 0; i < before.pairwise.size(); ++i) {
      EXPECT_LT(max_abs_diff(before.pairwise[i], after.pairwise[i]), 1e-9);
    }
  }
}

TEST(Viterbi, Examples) {
  ChainLattice lat(3, 3);
  lat.emissions(0, 2) = 5.0;
  lat.emissions(1, 0) = 5.0;
  lat.emissions(2, 1) = 5.0;
  EXPECT_EQ(viterbi(lat).tags, (std::vector<int>{2, 0, 1}));
  EXPECT_EQ(viterbi(ChainLattice(4, 3)).tags, (std::vector<int>{0, 0, 0, 0}));
}

TEST(Viterbi, MatchesEnumeratedArgmax) {
  Rng rng(5);
  for (int k = 0; k < 100; ++k) {
    const ChainLattice lat = random_lattice(rng, 5, 3);
    const StructureEnumeration e = enumerate_chain(lat);
    EXPECT_EQ(viterbi(lat).tags, e.sites[exact_argmax(e)]);
  }
}

TEST(Nll, UniformAndPeaked) {
  const ChainLoss uniform = nll_and_grad(ChainLattice(4, 3), TagSequence{{0, 2, 1, 1}});
  EXPECT_NEAR(uniform.loss, 4 * std::log(3.0), 1e-12);
  ChainLattice peaked(3, 2);
  for (int i = 0; i < 3; ++i) peaked.emissions(i, 1) = 60.0;
  EXPECT_LT(nll_and_grad(peaked, TagSequence{{1, 1, 1}}).loss, 1e-20);
}

TEST(Nll, GradientMatchesFiniteDifferences) {
  Rng rng(6);
  for (int k = 0; k < 20; ++k) {
    const int n = 1 + rng.below(5);
    const int L = 2 + rng.below(2);
    ChainLattice lat = random_lattice(rng, n, L);
    TagSequence gold;
    for (int i = 0; i < n; ++i) gold.tags.push_back(rng.below(L));
    const ChainLoss loss = nll_and_grad(lat, gold);
    for (int pos = 0; pos < n; ++pos) {
      for (int b = 0; b < L; ++b) {
        const double v = lat.emissions(pos, b);
        lat.emissions(pos, b) = v + 1e-5;
        const double up = nll_and_grad(lat, gold).loss;
        lat.emissions(pos, b) = v - 1e-5;
        const double down = nll_and_grad(lat, gold).loss;
        lat.emissions(pos, b) = v;
        EXPECT_NEAR(loss.grad.emissions(pos, b), (up - down) / 2e-5, 1e-6);
      }
    }
  }
}

TEST(Nll, InvalidGoldRejected) {
  EXPECT_THROW(nll_and_grad(ChainLattice(2, 2), TagSequence{{0, 5}}), UsageError);
  EXPECT_THROW(nll_and_grad(ChainLattice(2, 2), TagSequence{{0}}), UsageError);
}

TEST(SampleChain, PairFrequenciesMatchMarginals) {
  Rng rng(7);
  const ChainLattice lat = random_lattice(rng, 4, 3, 1.0);
  const MarginalTable m = pairwise_marginals(lat);
  const int draws = 10000;
  std::vector<Matrix> counts(3, Matrix(3, 3));
  auto uniform = [&rng] { return rng.uniform(); };
  for (int s = 0; s < draws; ++s) {
    const auto y = sample_chain(lat, uniform);
    for (int i = 1; i < 4; ++i) counts[i - 1](y[i - 1], y[i]) += 1.0;
  }
  for (int i = 0; i < 3; ++i) {
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        const double p = m.pairwise[i](a, b);
        const double sigma = std::sqrt(p * (1 - p) / draws);
        EXPECT_NEAR(counts[i](a, b) / draws, p, 3 * sigma + 1e-12);
      }
    }
  }
}

TEST(BuildLattice, ConstrainedMasksInvalidTransitions) {
  LabelAlphabet types;
  types.add("PER");
  Model m(Family::kChainCrf, types, 12);
  m.bioes_constrained = true;
  const SentenceFeatures f(testing::tokens({"a", "b", "c"}), 12);
  const ChainLattice lat = build_lattice(m, f);
  EXPECT_EQ(lat.transitions[0](1, 0), kLogZero);  // B -> O
  EXPECT_EQ(lat.start[2], kLogZero);              // I at start
  EXPECT_EQ(lat.stop[1], kLogZero);               // B at end
  EXPECT_EQ(lat.transitions[0](1, 3), 0.0);       // B -> E
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(unary_marginals(lat)(i, 0) > 0.0, true);
  }
  EXPECT_EQ(unary_marginals(lat)(2, 1), 0.0);
}

}  // namespace
}  // namespace structkd
