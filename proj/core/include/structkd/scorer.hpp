#pragma once

// Hashed sparse linear scoring. A FeatureVec holds template ids already
// reduced to the hash space; score() conditions each id on an output label by
// XOR-ing a label-salted constant and re-mixing before addressing a weight.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace structkd {

inline constexpr int kTemplateVersion = 1;
inline constexpr int kDefaultHashBits = 20;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// FNV-1a followed by mix64.
std::uint64_t hash_string(std::string_view text);

struct FeatureVec {
  std::vector<std::uint64_t> ids;
  std::vector<double> values;

  std::size_t size() const { return ids.size(); }
  friend bool operator==(const FeatureVec&, const FeatureVec&) = default;
};

struct SparseParams {
  explicit SparseParams(int hash_bits = kDefaultHashBits);

  int hash_bits() const { return bits_; }
  std::uint64_t mask() const { return (std::uint64_t{1} << bits_) - 1; }
  std::size_t size() const { return weights.size(); }

  std::vector<double> weights;

 private:
  int bits_;
};

// Weight slot addressed by template id `id` under output label `label`.
std::size_t slot(std::uint64_t id, int label, std::uint64_t mask);

double score(const SparseParams& params, const FeatureVec& f, int label);

// Dense gradient accumulator with a touched-slot list so it can be cleared
// and applied in time proportional to the slots actually written.
class GradBuffer {
 public:
  explicit GradBuffer(const SparseParams& shape);

  void add(std::size_t slot, double value);
  double operator[](std::size_t slot) const { return values_[slot]; }
  std::span<const std::size_t> touched() const { return touched_; }
  std::size_t size() const { return values_.size(); }
  std::uint64_t mask() const { return mask_; }

  // weights -= rate * grad
  void apply(SparseParams& params, double rate) const;
  void clear();

 private:
  std::uint64_t mask_;
  std::vector<double> values_;
  std::vector<std::uint8_t> marked_;
  std::vector<std::size_t> touched_;
};

void accumulate_grad(GradBuffer& grad, const FeatureVec& f, int label, double coefficient);

// ---------------------------------------------------------------------------
// Feature templates

// Per-sentence template cache. Token indices passed to the arc/span/sibling
// templates are 1-based; head 0 is the root.
class SentenceFeatures {
 public:
  SentenceFeatures(const std::vector<std::string>& tokens, int hash_bits);

  int size() const { return static_cast<int>(tokens_.size()); }
  int hash_bits() const { return bits_; }

  // Features of the 0-based position `pos`: identity, lowercase, prefixes and
  // suffixes up to length 3, neighbors within a window of 1, and a bias.
  const FeatureVec& token(int pos) const;

  // Head `head` (0 = root) governing dependent `dep`.
  FeatureVec arc(int head, int dep) const;
  // Dependents `dep` and `sibling` sharing head `head`.
  FeatureVec sibling(int head, int dep, int sibling) const;
  // Entity span covering tokens start..end (inclusive).
  FeatureVec span(int start, int end) const;
  // Label-pair transition out of `prev`; the target label is the score label.
  FeatureVec transition(int prev) const;
  FeatureVec start_boundary() const;
  FeatureVec stop_boundary() const;

 private:
  FeatureVec finish(std::vector<std::string> templates) const;
  std::string lower(int pos) const;

  std::vector<std::string> tokens_;
  std::vector<std::string> lowered_;
  std::vector<FeatureVec> token_features_;
  int bits_;
};

int distance_bucket(int signed_distance);
int length_bucket(int length);

}  // namespace structkd
