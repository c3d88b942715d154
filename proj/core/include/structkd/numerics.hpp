#pragma once

// Log-space arithmetic shared by every inference routine. The additive
// identity of the log semiring is -infinity; no routine here returns NaN.

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace structkd {

using LogScore = double;

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)), exact when either side is kLogZero.
double log_add(double a, double b);

// log sum_i exp(values[i]) via max shifting. Throws UsageError when empty.
// An all-kLogZero input yields kLogZero.
double log_sum_exp(std::span<const double> values);

// Normalizes in log space. Throws DegenerateDistribution when every entry is
// kLogZero.
std::vector<double> log_softmax(std::span<const double> values);

// exp(log_softmax(values)); masked (kLogZero) entries come out as exact 0.
std::vector<double> softmax(std::span<const double> values);

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) & { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const& { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) && = delete;

  std::span<double> data() & { return data_; }
  std::span<const double> data() const& { return data_; }
  // Spans into a temporary would dangle.
  std::span<const double> data() && = delete;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

}  // namespace structkd
