#pragma once

// Brute-force ground truth for small instances. Every routine here walks
// the full output space explicitly; nothing is shared with the dynamic
// programs it is used to check, and sums run in long double in reverse
// enumeration order.

#include <cstdint>
#include <vector>

#include "structkd/chain_crf.hpp"
#include "structkd/corpus.hpp"
#include "structkd/marginal_table.hpp"
#include "structkd/numerics.hpp"
#include "structkd/span_ner.hpp"

namespace structkd {

enum class OracleTask { kChain, kHeads, kSpans };

inline constexpr std::uint64_t kOracleBound = 1'000'000;

struct StructureEnumeration {
  OracleTask task = OracleTask::kChain;
  int length = 0;
  // Per-position label space: L for chains, (n+1)R for heads (column
  // j * R + r), 1 + 4|L| BIOES tags for spans.
  int site_labels = 0;
  int relations = 0;
  std::vector<std::vector<int>> sites;  // one label per position per structure
  std::vector<SpanSet> span_sets;       // kSpans only
  std::vector<double> log_scores;       // unnormalized

  std::size_t size() const { return log_scores.size(); }
};

// All L^n tag sequences, first position slowest.
StructureEnumeration enumerate_chain(const ChainLattice& lat);
// Independent categorical per position with the given site log-potentials,
// in the same order as enumerate_chain. kLogZero entries are excluded.
StructureEnumeration enumerate_independent(const Matrix& site_scores);
// Head assignments from a joint (head, relation) potential table laid out
// as in MarginalTable::kArc; self-head columns are excluded.
StructureEnumeration enumerate_heads(const Matrix& joint_scores, int relations);
// Every set of disjoint labeled spans, with its BIOES encoding as sites.
StructureEnumeration enumerate_spans(const SpanScoreTable& table);

// Closed-form size of the span-set space.
std::uint64_t count_span_structures(int n, int types);

double exact_partition(const StructureEnumeration& e);
std::vector<double> exact_probabilities(const StructureEnumeration& e);

// kChainPairwise (chain-ordered enumerations), kTokenUnary or kArc.
MarginalTable exact_marginals(const StructureEnumeration& e, TableKind space);

double exact_entropy(const StructureEnumeration& e);

// -sum_y P_t(y) log P_s(y) where the student is itself an enumeration over
// the same space in the same order (globally normalized students).
double exact_kd_cross_entropy(const StructureEnumeration& teacher,
                              const StructureEnumeration& student);
// Same, for a locally normalized student: log P_s(y) = sum_i rows(i, y_i).
double exact_kd_cross_entropy(const StructureEnumeration& teacher, const Matrix& student_log_rows);

// Index of the highest-scoring structure; ties go to fewer spans, then to
// the earlier structure in enumeration order.
std::size_t exact_argmax(const StructureEnumeration& e);

}  // namespace structkd
