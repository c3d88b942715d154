#pragma once

// Sentence records, CoNLL readers/writers, and the BIOES span encoding.
// Token indices inside HeadAssignment and SpanSet are 1-based; head 0 is the
// synthetic root. TagSequence is a plain 0-based vector over positions.

#include <cstddef>
#include <compare>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace structkd {

class LabelAlphabet {
 public:
  LabelAlphabet() = default;
  explicit LabelAlphabet(const std::vector<std::string>& names);

  // Returns the id of `name`, inserting it if new.
  int add(std::string_view name);
  // Throws UsageError for unknown names.
  int id(std::string_view name) const;
  std::optional<int> find(std::string_view name) const;
  const std::string& name(int id) const;
  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

  friend bool operator==(const LabelAlphabet& a, const LabelAlphabet& b) {
    return a.names_ == b.names_;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

struct TagSequence {
  std::vector<int> tags;
  friend bool operator==(const TagSequence&, const TagSequence&) = default;
};

struct HeadAssignment {
  std::vector<int> heads;  // heads[i-1] in 0..n, never i
  std::vector<int> rels;
  friend bool operator==(const HeadAssignment&, const HeadAssignment&) = default;
};

struct Span {
  int start = 1;  // inclusive, 1-based
  int end = 1;    // inclusive
  int type = 0;
  friend auto operator<=>(const Span&, const Span&) = default;
};

// Kept sorted by (start, end, type).
struct SpanSet {
  std::vector<Span> spans;
  friend bool operator==(const SpanSet&, const SpanSet&) = default;
};

// Sorts spans and checks 1 <= start <= end <= n and pairwise disjointness.
// Throws InvariantViolation otherwise.
SpanSet make_span_set(std::vector<Span> spans, int n);

enum class Provenance { kLabeled, kPseudoLabeled };

struct SentenceRecord {
  std::vector<std::string> tokens;
  std::variant<std::monostate, TagSequence, HeadAssignment, SpanSet> gold;
  Provenance provenance = Provenance::kLabeled;

  int size() const { return static_cast<int>(tokens.size()); }
  bool has_tags() const { return std::holds_alternative<TagSequence>(gold); }
  bool has_heads() const { return std::holds_alternative<HeadAssignment>(gold); }
  const TagSequence& tags() const { return std::get<TagSequence>(gold); }
  const HeadAssignment& heads() const { return std::get<HeadAssignment>(gold); }
};

// `labels` holds NER tag strings or dependency relations, depending on the
// reader that produced the dataset.
struct Dataset {
  LabelAlphabet labels;
  std::vector<SentenceRecord> sentences;
};

// Whitespace-column NER format; the tag is the last column. "-DOCSTART-"
// lines are dropped. Tags are kept verbatim and the alphabet is built in
// order of first appearance.
Dataset read_conll_ner(std::istream& in);
Dataset read_conllu(std::istream& in);

void write_conll_ner(std::ostream& out, const Dataset& data);
void write_conllu(std::ostream& out, const Dataset& data);

// ---------------------------------------------------------------------------
// BIOES

enum class BioesPart { kOutside, kBegin, kInside, kEnd, kSingle };

// Tag ids are fixed: O = 0, then B/I/E/S for each entity type in type-id
// order, i.e. B-l = 1 + 4l, I-l = 2 + 4l, E-l = 3 + 4l, S-l = 4 + 4l.
class BioesScheme {
 public:
  BioesScheme() = default;
  explicit BioesScheme(LabelAlphabet types);

  int add_type(std::string_view name) { return types_.add(name); }
  const LabelAlphabet& types() const { return types_; }
  int num_types() const { return types_.size(); }
  int num_tags() const { return 1 + 4 * types_.size(); }

  static constexpr int outside() { return 0; }
  static int tag(BioesPart part, int type);
  static BioesPart part(int tag);
  static int type(int tag);  // -1 for O

  // "O", "B-PER", ...
  LabelAlphabet tag_alphabet() const;

 private:
  LabelAlphabet types_;
};

// Well-formedness of adjacent BIOES tags and of sequence boundaries.
bool bioes_transition_allowed(int prev, int next);
bool bioes_start_allowed(int tag);
bool bioes_stop_allowed(int tag);

TagSequence spans_to_bioes(const SpanSet& spans, int n);

// Total function. Accepts B I* E and S fragments of a single type; every
// other fragment is dropped.
SpanSet bioes_to_spans(const TagSequence& tags);

// Rewrites IOB1/IOB2/BIOES tag strings into BIOES strings.
std::vector<std::string> normalize_to_bioes(const std::vector<std::string>& tags);

// Maps a verbatim NER dataset onto a BIOES scheme. With no scheme given, one
// is built from entity types in order of first appearance. Unknown entity
// types under a fixed scheme raise UsageError.
Dataset canonicalize_ner(const Dataset& raw, BioesScheme& scheme, bool extend_scheme);

}  // namespace structkd
