#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Oracle-equivalence and gradient suites runnable from a release binary.
// Every check compares a dynamic program, loss or gradient against brute-force
// enumeration or central finite differences on random small instances.

namespace structkd {

enum class Suite { kChain, kSpans, kHeads, kKd, kGrad };

std::string_view suite_name(Suite s);
std::optional<Suite> parse_suite(std::string_view name);
std::vector<Suite> all_suites();

struct VerifyOptions {
  int instances = 100;   // random instances per check
  int fd_weights = 50;   // weights probed per gradient check
  std::uint64_t seed = 1;
};

struct Check {
  std::string name;
  int instances = 0;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed = true;
};

struct SuiteReport {
  Suite suite = Suite::kChain;
  std::vector<Check> checks;
  double seconds = 0.0;
  bool passed() const;
};

SuiteReport run_suite(Suite suite, const VerifyOptions& options = {});

}  // namespace structkd
