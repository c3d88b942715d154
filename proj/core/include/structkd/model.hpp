#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "structkd/corpus.hpp"
#include "structkd/scorer.hpp"

namespace structkd {

enum class Family {
  kChainCrf,           // linear-chain CRF over BIOES tags
  kTokenMaxEnt,        // per-token softmax over BIOES tags
  kSpanNer,            // span-set model over entity types
  kFirstOrderParser,   // head-selection parser, P(h) and P(l) separately
  kSecondOrderParser,  // sibling-factor mean-field head distribution
  kArcMaxEnt,          // joint per-token softmax over (head, relation)
};

std::string_view family_name(Family f);
std::optional<Family> parse_family(std::string_view name);

bool is_ner_family(Family f);
bool is_parser_family(Family f);

struct Model {
  Model(Family family, LabelAlphabet labels, int hash_bits = kDefaultHashBits)
      : family(family), labels(std::move(labels)), params(hash_bits) {}

  Family family;
  // Entity types for NER families (tags come from BioesScheme), relations
  // for parser families.
  LabelAlphabet labels;
  SparseParams params;
  int mfvi_iterations = 3;
  // CRF only: forbid invalid BIOES transitions with -inf scores.
  bool bioes_constrained = false;

  BioesScheme scheme() const { return BioesScheme(labels); }
  // Output label count of the primary scoring site (BIOES tags, entity types
  // or relations).
  int num_outputs() const;

  friend bool operator==(const Model& a, const Model& b) {
    return a.family == b.family && a.labels == b.labels &&
           a.params.weights == b.params.weights && a.mfvi_iterations == b.mfvi_iterations &&
           a.bioes_constrained == b.bioes_constrained;
  }
};

// Throws UsageError unless `model.family == expected`.
void require_family(const Model& model, Family expected, std::string_view role);

// JSON document: alphabets, hash size, template version, and the weight
// vector as base64 of little-endian IEEE doubles.
void save_model(std::ostream& out, const Model& model);
Model load_model(std::istream& in);
void save_model_file(const std::string& path, const Model& model);
Model load_model_file(const std::string& path);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

}  // namespace structkd
