#include "structkd/scorer.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <unordered_set>

#include "structkd/errors.hpp"

namespace structkd {

std::uint64_t hash_string(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(h);
}

SparseParams::SparseParams(int hash_bits) : bits_(hash_bits) {
  if (hash_bits < 1 || hash_bits > 30) throw UsageError("hash bits must lie in [1, 30]");
  weights.assign(std::size_t{1} << hash_bits, 0.0);
}

std::size_t slot(std::uint64_t id, int label, std::uint64_t mask) {
  const std::uint64_t salt = mix64(0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(label + 1));
  return static_cast<std::size_t>(mix64(id ^ salt) & mask);
}

double score(const SparseParams& params, const FeatureVec& f, int label) {
  const std::uint64_t mask = params.mask();
  double total = 0.0;
  for (std::size_t k = 0; k < f.ids.size(); ++k) {
    total += params.weights[slot(f.ids[k], label, mask)] * f.values[k];
  }
  return total;
}

GradBuffer::GradBuffer(const SparseParams& shape)
    : mask_(shape.mask()), values_(shape.size(), 0.0), marked_(shape.size(), 0) {}

void GradBuffer::add(std::size_t s, double value) {
  if (!marked_[s]) {
    marked_[s] = 1;
    touched_.push_back(s);
  }
  values_[s] += value;
}

void GradBuffer::apply(SparseParams& params, double rate) const {
  for (std::size_t s : touched_) params.weights[s] -= rate * values_[s];
}

void GradBuffer::clear() {
  for (std::size_t s : touched_) {
    values_[s] = 0.0;
    marked_[s] = 0;
  }
  touched_.clear();
}

void accumulate_grad(GradBuffer& grad, const FeatureVec& f, int label, double coefficient) {
  if (coefficient == 0.0) return;
  for (std::size_t k = 0; k < f.ids.size(); ++k) {
    grad.add(slot(f.ids[k], label, grad.mask()), coefficient * f.values[k]);
  }
}

// ---------------------------------------------------------------------------

int distance_bucket(int d) {
  const int sign = d < 0 ? -1 : 1;
  const int a = std::abs(d);
  int b = a;
  if (a > 10) {
    b = 11;
  } else if (a > 5) {
    b = 6;
  }
  return sign * b;
}

int length_bucket(int length) {
  if (length >= 8) return 8;
  if (length >= 5) return 5;
  return length;
}

SentenceFeatures::SentenceFeatures(const std::vector<std::string>& tokens, int hash_bits)
    : tokens_(tokens), bits_(hash_bits) {
  if (tokens_.empty()) throw UsageError("sentence must contain at least one token");
  lowered_.reserve(tokens_.size());
  for (const auto& t : tokens_) {
    std::string l = t;
    std::transform(l.begin(), l.end(), l.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    lowered_.push_back(std::move(l));
  }
  const int n = size();
  token_features_.reserve(tokens_.size());
  for (int p = 0; p < n; ++p) {
    const std::string& w = tokens_[p];
    std::vector<std::string> t;
    t.push_back("w=" + w);
    t.push_back("lw=" + lowered_[p]);
    for (std::size_t k = 1; k <= 3 && k <= w.size(); ++k) {
      t.push_back("p" + std::to_string(k) + "=" + w.substr(0, k));
      t.push_back("s" + std::to_string(k) + "=" + w.substr(w.size() - k));
    }
    t.push_back("w-1=" + (p > 0 ? lowered_[p - 1] : std::string("<s>")));
    t.push_back("w+1=" + (p + 1 < n ? lowered_[p + 1] : std::string("</s>")));
    t.push_back("bias");
    token_features_.push_back(finish(std::move(t)));
  }
}

FeatureVec SentenceFeatures::finish(std::vector<std::string> templates) const {
  const std::uint64_t mask = (std::uint64_t{1} << bits_) - 1;
  FeatureVec f;
  std::unordered_set<std::uint64_t> seen;
  for (const auto& t : templates) {
    const std::uint64_t id = hash_string(t) & mask;
    if (seen.insert(id).second) {
      f.ids.push_back(id);
      f.values.push_back(1.0);
    }
  }
  return f;
}

std::string SentenceFeatures::lower(int pos) const {
  if (pos < 0) return "<s>";
  if (pos >= size()) return "</s>";
  return lowered_[static_cast<std::size_t>(pos)];
}

const FeatureVec& SentenceFeatures::token(int pos) const {
  if (pos < 0 || pos >= size()) throw UsageError("token position out of range");
  return token_features_[static_cast<std::size_t>(pos)];
}

FeatureVec SentenceFeatures::arc(int head, int dep) const {
  const int n = size();
  if (dep < 1 || dep > n || head < 0 || head > n || head == dep) {
    throw UsageError("arc descriptor out of range");
  }
  const std::string hw = head == 0 ? "<root>" : lower(head - 1);
  const std::string dw = lower(dep - 1);
  const std::string d = std::to_string(head == 0 ? 0 : distance_bucket(head - dep));
  return finish({
      "a:hw=" + hw,
      "a:dw=" + dw,
      "a:hw|dw=" + hw + "|" + dw,
      "a:d=" + d,
      "a:d|dw=" + d + "|" + dw,
      "a:d|hw=" + d + "|" + hw,
      "a:b",
  });
}

FeatureVec SentenceFeatures::sibling(int head, int dep, int sib) const {
  const int n = size();
  if (dep < 1 || dep > n || sib < 1 || sib > n || head < 0 || head > n || dep == sib ||
      head == dep || head == sib) {
    throw UsageError("sibling descriptor out of range");
  }
  const std::string hw = head == 0 ? "<root>" : lower(head - 1);
  const std::string dw = lower(dep - 1);
  const std::string sw = lower(sib - 1);
  const std::string side = (head == 0 || (dep < head) == (sib < head)) ? "same" : "split";
  return finish({
      "g:hw|dw|sw=" + hw + "|" + dw + "|" + sw,
      "g:dw|sw=" + dw + "|" + sw,
      "g:side=" + side,
      "g:b",
  });
}

FeatureVec SentenceFeatures::span(int start, int end) const {
  const int n = size();
  if (start < 1 || start > end || end > n) throw UsageError("span descriptor out of range");
  const std::string first = lower(start - 1);
  const std::string last = lower(end - 1);
  const std::string len = std::to_string(length_bucket(end - start + 1));
  return finish({
      "sp:f=" + first,
      "sp:l=" + last,
      "sp:f|l=" + first + "|" + last,
      "sp:len=" + len,
      "sp:len|f=" + len + "|" + first,
      "sp:len|l=" + len + "|" + last,
      "sp:prev=" + lower(start - 2),
      "sp:next=" + lower(end),
      "sp:b",
  });
}

FeatureVec SentenceFeatures::transition(int prev) const {
  return finish({"t:prev=" + std::to_string(prev)});
}

FeatureVec SentenceFeatures::start_boundary() const { return finish({"t:start"}); }

FeatureVec SentenceFeatures::stop_boundary() const { return finish({"t:stop"}); }

}  // namespace structkd
