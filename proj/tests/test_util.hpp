#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "structkd/chain_crf.hpp"
#include "structkd/numerics.hpp"
#include "structkd/span_ner.hpp"
#include "structkd/synth.hpp"

namespace structkd::testing {

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double spread = 2.0) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(-spread, spread);
  return m;
}

inline ChainLattice random_lattice(Rng& rng, int n, int labels, double spread = 2.0) {
  ChainLattice lat(n, labels);
  lat.emissions = random_matrix(rng, n, labels, spread);
  for (auto& t : lat.transitions) t = random_matrix(rng, labels, labels, spread);
  for (double& v : lat.start) v = rng.uniform(-spread, spread);
  for (double& v : lat.stop) v = rng.uniform(-spread, spread);
  return lat;
}

inline SpanScoreTable random_span_table(Rng& rng, int n, int types) {
  SpanScoreTable t(n, types);
  for (int i = 1; i <= n; ++i) {
    for (int j = i; j <= n; ++j) {
      for (int l = 0; l < types; ++l) t(i, j, l) = rng.uniform(-2.0, 2.0);
    }
  }
  return t;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return INFINITY;
  double worst = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k) {
    worst = std::max(worst, std::abs(a.data()[k] - b.data()[k]));
  }
  return worst;
}

inline std::vector<std::string> tokens(std::initializer_list<const char*> words) {
  return {words.begin(), words.end()};
}

}  // namespace structkd::testing
