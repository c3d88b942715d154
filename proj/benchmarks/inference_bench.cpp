#include <benchmark/benchmark.h>

#include "structkd/chain_crf.hpp"
#include "structkd/distill.hpp"
#include "structkd/head_parser.hpp"
#include "structkd/span_ner.hpp"
#include "structkd/token_maxent.hpp"
#include "structkd/synth.hpp"

namespace {

using namespace structkd;

Matrix random_matrix(Rng& rng, int rows, int cols) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(-2.0, 2.0);
  return m;
}

ChainLattice random_lattice(Rng& rng, int n, int labels) {
  ChainLattice lat(n, labels);
  lat.emissions = random_matrix(rng, n, labels);
  for (auto& t : lat.transitions) t = random_matrix(rng, labels, labels);
  return lat;
}

SpanScoreTable random_spans(Rng& rng, int n, int types) {
  SpanScoreTable t(n, types);
  for (int i = 1; i <= n; ++i) {
    for (int j = i; j <= n; ++j) {
      for (int l = 0; l < types; ++l) t(i, j, l) = rng.uniform(-2.0, 2.0);
    }
  }
  return t;
}

// Sentence length in range(0), BIOES tags over four entity types.
constexpr int kTags = 17;

void BM_LogPartition(benchmark::State& state) {
  Rng rng(1);
  const ChainLattice lat = random_lattice(rng, static_cast<int>(state.range(0)), kTags);
  for (auto _ : state) benchmark::DoNotOptimize(log_partition(lat));
}
BENCHMARK(BM_LogPartition)->Arg(10)->Arg(40)->Arg(100);

void BM_PairwiseMarginals(benchmark::State& state) {
  Rng rng(2);
  const ChainLattice lat = random_lattice(rng, static_cast<int>(state.range(0)), kTags);
  for (auto _ : state) benchmark::DoNotOptimize(pairwise_marginals(lat));
}
BENCHMARK(BM_PairwiseMarginals)->Arg(10)->Arg(40)->Arg(100);

void BM_Viterbi(benchmark::State& state) {
  Rng rng(3);
  const ChainLattice lat = random_lattice(rng, static_cast<int>(state.range(0)), kTags);
  for (auto _ : state) benchmark::DoNotOptimize(viterbi(lat));
}
BENCHMARK(BM_Viterbi)->Arg(10)->Arg(40)->Arg(100);

void BM_BioesMarginals(benchmark::State& state) {
  Rng rng(4);
  const SpanScoreTable t = random_spans(rng, static_cast<int>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(bioes_marginals(t));
}
BENCHMARK(BM_BioesMarginals)->Arg(10)->Arg(40)->Arg(100);

void BM_Mfvi(benchmark::State& state) {
  Rng rng(5);
  const int n = static_cast<int>(state.range(0));
  Matrix arc = random_matrix(rng, n, n + 1);
  for (int i = 1; i <= n; ++i) arc(i - 1, i) = kLogZero;
  SiblingScores sib(n);
  for (double& v : sib.data()) v = rng.uniform(-1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(mfvi_second_order(arc, sib, 3));
}
BENCHMARK(BM_Mfvi)->Arg(10)->Arg(40);

void BM_KdLossLocal(benchmark::State& state) {
  Rng rng(6);
  const int n = static_cast<int>(state.range(0));
  const Matrix teacher = row_softmax(random_matrix(rng, n, kTags));
  const Matrix student = row_log_softmax(random_matrix(rng, n, kTags));
  for (auto _ : state) benchmark::DoNotOptimize(kd_loss_local(teacher, student));
}
BENCHMARK(BM_KdLossLocal)->Arg(10)->Arg(40)->Arg(100);

void BM_KdLossGlobal(benchmark::State& state) {
  Rng rng(7);
  const int n = static_cast<int>(state.range(0));
  const MarginalTable teacher = pairwise_marginals(random_lattice(rng, n, kTags));
  const ChainLattice student = random_lattice(rng, n, kTags);
  for (auto _ : state) benchmark::DoNotOptimize(kd_loss_global(teacher, student));
}
BENCHMARK(BM_KdLossGlobal)->Arg(10)->Arg(40)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
