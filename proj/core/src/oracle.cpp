#include "structkd/oracle.hpp"

#include <cmath>
#include <functional>

#include "structkd/errors.hpp"

namespace structkd {

namespace {

using Wide = long double;

void check_bound(Wide count) {
  if (count > static_cast<Wide>(kOracleBound)) {
    throw OracleRefusal(count > 1.8e19L ? UINT64_MAX : static_cast<std::uint64_t>(count));
  }
}

// Log normalizer accumulated from the back in extended precision.
Wide wide_log_z(const std::vector<double>& scores) {
  Wide peak = -INFINITY;
  for (double s : scores) peak = std::max<Wide>(peak, s);
  if (peak == -INFINITY) throw DegenerateDistribution("enumeration has no mass");
  Wide total = 0.0L;
  for (std::size_t k = scores.size(); k-- > 0;) total += std::exp(static_cast<Wide>(scores[k]) - peak);
  return peak + std::log(total);
}

// Odometer over per-position candidate lists, first position slowest.
StructureEnumeration odometer(const std::vector<std::vector<int>>& candidates,
                              const std::function<double(const std::vector<int>&)>& score) {
  Wide count = 1.0L;
  for (const auto& c : candidates) count *= static_cast<Wide>(c.size());
  check_bound(count);
  StructureEnumeration e;
  const std::size_t n = candidates.size();
  std::vector<std::size_t> digit(n, 0);
  std::vector<int> current(n);
  while (true) {
    for (std::size_t i = 0; i < n; ++i) current[i] = candidates[i][digit[i]];
    e.sites.push_back(current);
    e.log_scores.push_back(score(current));
    std::size_t pos = n;
    while (pos > 0) {
      --pos;
      if (++digit[pos] < candidates[pos].size()) break;
      digit[pos] = 0;
      if (pos == 0) return e;
    }
    if (n == 0) return e;
  }
}

}  // namespace

StructureEnumeration enumerate_chain(const ChainLattice& lat) {
  const int n = static_cast<int>(lat.length());
  const int L = static_cast<int>(lat.labels());
  std::vector<std::vector<int>> candidates(n);
  for (auto& c : candidates) {
    for (int a = 0; a < L; ++a) c.push_back(a);
  }
  // Score summed from the last position backwards.
  StructureEnumeration e = odometer(candidates, [&](const std::vector<int>& y) {
    Wide s = lat.stop[y[n - 1]];
    for (int i = n - 1; i >= 1; --i) s += lat.emissions(i, y[i]) + lat.transitions[i - 1](y[i - 1], y[i]);
    s += lat.emissions(0, y[0]) + lat.start[y[0]];
    return static_cast<double>(s);
  });
  e.task = OracleTask::kChain;
  e.length = n;
  e.site_labels = L;
  return e;
}

StructureEnumeration enumerate_independent(const Matrix& site_scores) {
  const int n = static_cast<int>(site_scores.rows());
  std::vector<std::vector<int>> candidates(n);
  for (int i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < site_scores.cols(); ++c) {
      if (site_scores(i, c) != kLogZero) candidates[i].push_back(static_cast<int>(c));
    }
  }
  StructureEnumeration e = odometer(candidates, [&](const std::vector<int>& y) {
    Wide s = 0.0L;
    for (int i = n - 1; i >= 0; --i) s += site_scores(i, y[i]);
    return static_cast<double>(s);
  });
  e.task = OracleTask::kChain;
  e.length = n;
  e.site_labels = static_cast<int>(site_scores.cols());
  return e;
}

StructureEnumeration enumerate_heads(const Matrix& joint_scores, int relations) {
  const int n = static_cast<int>(joint_scores.rows());
  if (joint_scores.cols() != static_cast<std::size_t>((n + 1) * relations)) {
    throw UsageError("joint head table has the wrong width");
  }
  Matrix masked = joint_scores;
  for (int i = 1; i <= n; ++i) {
    for (int r = 0; r < relations; ++r) masked(i - 1, i * relations + r) = kLogZero;
  }
  StructureEnumeration e = enumerate_independent(masked);
  e.task = OracleTask::kHeads;
  e.relations = relations;
  return e;
}

std::uint64_t count_span_structures(int n, int types) {
  // c(i) = structures over tokens i..n; c(n+1) = 1.
  std::vector<Wide> c(static_cast<std::size_t>(n) + 2, 0.0L);
  c[n + 1] = 1.0L;
  for (int i = n; i >= 1; --i) {
    c[i] = c[i + 1];
    for (int j = i; j <= n; ++j) c[i] += static_cast<Wide>(types) * c[j + 1];
  }
  const Wide total = c[1];
  return total > 1.8e19L ? UINT64_MAX : static_cast<std::uint64_t>(total);
}

StructureEnumeration enumerate_spans(const SpanScoreTable& table) {
  const int n = table.length();
  const int L = table.types();
  check_bound(static_cast<Wide>(count_span_structures(n, L)));
  StructureEnumeration e;
  e.task = OracleTask::kSpans;
  e.length = n;
  e.site_labels = 1 + 4 * L;

  std::vector<Span> chosen;
  std::function<void(int)> walk = [&](int i) {
    if (i > n) {
      Wide s = 0.0L;
      std::vector<int> tags(static_cast<std::size_t>(n), 0);
      for (auto it = chosen.rbegin(); it != chosen.rend(); ++it) {
        s += table(it->start, it->end, it->type);
        if (it->start == it->end) {
          tags[it->start - 1] = 4 + 4 * it->type;
        } else {
          tags[it->start - 1] = 1 + 4 * it->type;
          for (int k = it->start + 1; k < it->end; ++k) tags[k - 1] = 2 + 4 * it->type;
          tags[it->end - 1] = 3 + 4 * it->type;
        }
      }
      e.sites.push_back(std::move(tags));
      e.span_sets.push_back(SpanSet{chosen});
      e.log_scores.push_back(static_cast<double>(s));
      return;
    }
    walk(i + 1);
    for (int j = i; j <= n; ++j) {
      for (int l = 0; l < L; ++l) {
        chosen.push_back({i, j, l});
        walk(j + 1);
        chosen.pop_back();
      }
    }
  };
  walk(1);
  return e;
}

double exact_partition(const StructureEnumeration& e) {
  return static_cast<double>(wide_log_z(e.log_scores));
}

std::vector<double> exact_probabilities(const StructureEnumeration& e) {
  const Wide z = wide_log_z(e.log_scores);
  std::vector<double> p(e.size());
  for (std::size_t k = 0; k < e.size(); ++k) {
    p[k] = e.log_scores[k] == kLogZero ? 0.0
                                        : static_cast<double>(std::exp(static_cast<Wide>(e.log_scores[k]) - z));
  }
  return p;
}

MarginalTable exact_marginals(const StructureEnumeration& e, TableKind space) {
  const std::vector<double> p = exact_probabilities(e);
  const std::size_t n = static_cast<std::size_t>(e.length);
  const std::size_t K = static_cast<std::size_t>(e.site_labels);
  std::vector<Wide> unary(n * K, 0.0L);
  std::vector<Wide> pairwise(n > 0 ? (n - 1) * K * K : 0, 0.0L);
  for (std::size_t k = e.size(); k-- > 0;) {
    const auto& y = e.sites[k];
    for (std::size_t i = 0; i < n; ++i) unary[i * K + y[i]] += p[k];
    if (space == TableKind::kChainPairwise) {
      for (std::size_t i = 1; i < n; ++i) pairwise[((i - 1) * K + y[i - 1]) * K + y[i]] += p[k];
    }
  }
  MarginalTable out;
  out.kind = space;
  out.relations = e.relations;
  out.unary = Matrix(n, K);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < K; ++a) out.unary(i, a) = static_cast<double>(unary[i * K + a]);
  }
  if (space == TableKind::kChainPairwise) {
    out.pairwise.assign(n - 1, Matrix(K, K));
    for (std::size_t i = 1; i < n; ++i) {
      for (std::size_t a = 0; a < K; ++a) {
        for (std::size_t b = 0; b < K; ++b) {
          out.pairwise[i - 1](a, b) = static_cast<double>(pairwise[((i - 1) * K + a) * K + b]);
        }
      }
    }
  }
  return out;
}

double exact_entropy(const StructureEnumeration& e) {
  const Wide z = wide_log_z(e.log_scores);
  Wide h = 0.0L;
  for (std::size_t k = e.size(); k-- > 0;) {
    if (e.log_scores[k] == kLogZero) continue;
    const Wide logp = static_cast<Wide>(e.log_scores[k]) - z;
    h -= std::exp(logp) * logp;
  }
  return static_cast<double>(h);
}

double exact_kd_cross_entropy(const StructureEnumeration& teacher,
                              const StructureEnumeration& student) {
  if (teacher.size() != student.size()) throw UsageError("enumerations cover different spaces");
  const Wide zt = wide_log_z(teacher.log_scores);
  const Wide zs = wide_log_z(student.log_scores);
  Wide ce = 0.0L;
  for (std::size_t k = teacher.size(); k-- > 0;) {
    if (teacher.sites[k] != student.sites[k]) throw UsageError("enumerations are not aligned");
    if (teacher.log_scores[k] == kLogZero) continue;
    const Wide pt = std::exp(static_cast<Wide>(teacher.log_scores[k]) - zt);
    ce -= pt * (static_cast<Wide>(student.log_scores[k]) - zs);
  }
  return static_cast<double>(ce);
}

double exact_kd_cross_entropy(const StructureEnumeration& teacher, const Matrix& student_log_rows) {
  if (student_log_rows.rows() != static_cast<std::size_t>(teacher.length) ||
      student_log_rows.cols() != static_cast<std::size_t>(teacher.site_labels)) {
    throw UsageError("student rows do not match the teacher's site space");
  }
  const Wide zt = wide_log_z(teacher.log_scores);
  Wide ce = 0.0L;
  for (std::size_t k = teacher.size(); k-- > 0;) {
    if (teacher.log_scores[k] == kLogZero) continue;
    const Wide pt = std::exp(static_cast<Wide>(teacher.log_scores[k]) - zt);
    Wide logps = 0.0L;
    for (int i = teacher.length - 1; i >= 0; --i) logps += student_log_rows(i, teacher.sites[k][i]);
    ce -= pt * logps;
  }
  return static_cast<double>(ce);
}

std::size_t exact_argmax(const StructureEnumeration& e) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < e.size(); ++k) {
    const double s = e.log_scores[k];
    const double b = e.log_scores[best];
    if (s > b) {
      best = k;
    } else if (s == b && e.task == OracleTask::kSpans &&
               e.span_sets[k].spans.size() < e.span_sets[best].spans.size()) {
      best = k;
    }
  }
  return best;
}

}  // namespace structkd
