#pragma once

#include <cstddef>
#include <vector>

#include "structkd/numerics.hpp"

namespace structkd {

// Probabilities over a student's substructure space for one sentence.
//
//  kChainPairwise: pairwise[i-1](a, b) = P(y_{i-1} = a, y_i = b) for
//                  i = 1..n-1 (0-based), plus unary rows P(y_i).
//  kTokenUnary:    unary rows only (one categorical per token).
//  kArc:           unary row i holds P(h_i = j, l_i = r) at column j * R + r,
//                  j = 0..n; the self-head column block is exactly 0.
enum class TableKind { kChainPairwise, kTokenUnary, kArc };

struct MarginalTable {
  TableKind kind = TableKind::kTokenUnary;
  std::vector<Matrix> pairwise;
  Matrix unary;
  int relations = 0;  // kArc only

  std::size_t length() const { return unary.rows(); }
  std::size_t labels() const { return unary.cols(); }
};

}  // namespace structkd
