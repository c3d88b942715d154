#pragma once

// Synthetic corpora sampled exactly from planted models, so that desk-scale
// experiments have a known generating distribution.

#include <cstdint>
#include <optional>
#include <string>
#include <random>
#include <vector>

#include "structkd/chain_crf.hpp"
#include "structkd/corpus.hpp"
#include "structkd/numerics.hpp"
#include "structkd/span_ner.hpp"

namespace structkd {

// Portable draws on top of std::mt19937_64 (the standard distributions are
// implementation-defined, so they are avoided for reproducibility).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // 0..n-1
  int below(int n) { return static_cast<int>(engine_() % static_cast<std::uint64_t>(n)); }
  std::uint64_t next() { return engine_(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(engine_() % i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

enum class SynthTask { kChain, kHeads, kSpans };

struct SynthConfig {
  SynthTask task = SynthTask::kChain;
  int sentences = 100;
  int max_len = 12;
  // Entity types (chain, spans) or dependency relations (heads).
  int types = 2;
  int vocab = 200;
  std::uint64_t seed = 1;
};

// Linear-chain CRF over BIOES tags with word-identity emissions. Invalid
// BIOES transitions and boundaries carry kLogZero.
struct PlantedChain {
  int types = 0;
  Matrix emission;    // vocab x tags
  Matrix transition;  // tags x tags
  std::vector<double> start;
  std::vector<double> stop;

  ChainLattice lattice(const std::vector<int>& words) const;
};

// Span-set model: s(i, j, l) = first[w_i][l] + last[w_j][l] - penalty * (j - i) + bias.
struct PlantedSpans {
  int types = 0;
  Matrix first;
  Matrix last;
  double length_penalty = 0.6;
  double bias = -0.5;

  SpanScoreTable table(const std::vector<int>& words) const;
};

// Per-token independent head and relation choice from word categories.
struct PlantedHeads {
  int categories = 6;
  int relations = 0;
  std::vector<int> category;   // per word
  Matrix attach;               // (categories + 1) x categories: head cat (last = root) -> dep cat
  std::vector<double> distance;  // indexed by distance_bucket + 11
  Matrix relation;             // categories x relations

  Matrix head_scores(const std::vector<int>& words) const;  // n x (n+1), self masked
  Matrix relation_scores(const std::vector<int>& words) const;
};

PlantedChain make_planted_chain(int vocab, int types, Rng& rng);
PlantedSpans make_planted_spans(int vocab, int types, Rng& rng);
PlantedHeads make_planted_heads(int vocab, int relations, Rng& rng);

// Entity type names: PER, LOC, ORG, MISC, then T4, T5, ...
LabelAlphabet synthetic_entity_types(int types);

// Deterministic for a fixed config. NER tasks come back in canonical BIOES
// form (labels = BioesScheme(synthetic_entity_types(types)).tag_alphabet()),
// the head task with relations r0, r1, ...
Dataset synth_generate(const SynthConfig& cfg);

// The sampled corpus together with the planted model that generated it.
struct SynthCorpus {
  Dataset data;
  std::optional<PlantedChain> chain;
  std::optional<PlantedSpans> spans;
  std::optional<PlantedHeads> heads;
};
SynthCorpus synth_corpus(const SynthConfig& cfg);

// Inverse of the "w<id>" token naming used by the generator.
std::vector<int> word_ids(const std::vector<std::string>& tokens);

// Consecutive slices of the given sizes.
std::vector<Dataset> split_dataset(const Dataset& data, const std::vector<std::size_t>& sizes);

// Copy with gold removed.
Dataset strip_gold(const Dataset& data);

}  // namespace structkd
