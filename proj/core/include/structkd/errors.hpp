#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace structkd {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller violated a precondition (bad argument, wrong model family, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A normalization was requested over a support with no mass.
class DegenerateDistribution : public Error {
 public:
  using Error::Error;
};

class InvariantViolation : public Error {
 public:
  using Error::Error;
};

// The brute-force oracle refuses instances above its enumeration bound.
class OracleRefusal : public Error {
 public:
  explicit OracleRefusal(std::uint64_t count)
      : Error("enumeration would visit " + std::to_string(count) +
              " structures, above the oracle bound"),
        count_(count) {}

  std::uint64_t count() const { return count_; }

 private:
  std::uint64_t count_;
};

}  // namespace structkd
