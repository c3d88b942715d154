#include "structkd/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "structkd/errors.hpp"

namespace structkd {

double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw UsageError("log_sum_exp of an empty sequence");
  const double peak = *std::max_element(values.begin(), values.end());
  if (peak == kLogZero) return kLogZero;
  double total = 0.0;
  for (double v : values) total += std::exp(v - peak);
  return peak + std::log(total);
}

std::vector<double> log_softmax(std::span<const double> values) {
  if (values.empty()) throw UsageError("log_softmax of an empty sequence");
  const double norm = log_sum_exp(values);
  if (norm == kLogZero) {
    throw DegenerateDistribution("log_softmax over a support with no mass");
  }
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = values[i] == kLogZero ? kLogZero : values[i] - norm;
  }
  return out;
}

std::vector<double> softmax(std::span<const double> values) {
  std::vector<double> out = log_softmax(values);
  for (double& v : out) v = v == kLogZero ? 0.0 : std::exp(v);
  return out;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace structkd
