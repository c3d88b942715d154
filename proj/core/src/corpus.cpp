#include "structkd/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

#include "structkd/errors.hpp"

namespace structkd {

LabelAlphabet::LabelAlphabet(const std::vector<std::string>& names) {
  for (const auto& n : names) add(n);
}

int LabelAlphabet::add(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it != index_.end()) return it->second;
  const int id = size();
  names_.emplace_back(name);
  index_.emplace(names_.back(), id);
  return id;
}

int LabelAlphabet::id(std::string_view name) const {
  auto found = find(name);
  if (!found) throw UsageError("unknown label '" + std::string(name) + "'");
  return *found;
}

std::optional<int> LabelAlphabet::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& LabelAlphabet::name(int id) const {
  if (id < 0 || id >= size()) throw UsageError("label id out of range: " + std::to_string(id));
  return names_[static_cast<std::size_t>(id)];
}

SpanSet make_span_set(std::vector<Span> spans, int n) {
  std::sort(spans.begin(), spans.end());
  for (std::size_t k = 0; k < spans.size(); ++k) {
    const Span& s = spans[k];
    if (s.start < 1 || s.start > s.end || s.end > n) {
      throw InvariantViolation("span (" + std::to_string(s.start) + "," + std::to_string(s.end) +
                               ") outside sentence of length " + std::to_string(n));
    }
    if (k > 0 && spans[k - 1].end >= s.start) {
      throw InvariantViolation("overlapping spans at token " + std::to_string(s.start));
    }
  }
  return SpanSet{std::move(spans)};
}

namespace {

std::vector<std::string> split_whitespace(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string field;
  while (ss >> field) out.push_back(field);
  return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t begin = 0;
  while (true) {
    const std::size_t tab = line.find('\t', begin);
    out.push_back(line.substr(begin, tab - begin));
    if (tab == std::string::npos) break;
    begin = tab + 1;
  }
  return out;
}

void chomp(std::string& line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

std::optional<int> parse_int(std::string_view text) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

}  // namespace

Dataset read_conll_ner(std::istream& in) {
  Dataset data;
  SentenceRecord current;
  TagSequence tags;
  std::size_t columns = 0;
  std::size_t line_no = 0;
  std::string line;

  auto flush = [&] {
    if (current.tokens.empty()) return;
    current.gold = std::move(tags);
    data.sentences.push_back(std::move(current));
    current = SentenceRecord{};
    tags = TagSequence{};
    columns = 0;
  };

  while (std::getline(in, line)) {
    ++line_no;
    chomp(line);
    if (is_blank(line)) {
      flush();
      continue;
    }
    auto fields = split_whitespace(line);
    if (fields.front().rfind("-DOCSTART-", 0) == 0) continue;
    if (fields.size() < 2) throw ParseError("expected at least a token and a tag column", line_no);
    if (columns == 0) {
      columns = fields.size();
    } else if (fields.size() != columns) {
      throw ParseError("expected " + std::to_string(columns) + " columns, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    current.tokens.push_back(fields.front());
    tags.tags.push_back(data.labels.add(fields.back()));
  }
  flush();
  return data;
}

Dataset read_conllu(std::istream& in) {
  Dataset data;
  SentenceRecord current;
  HeadAssignment heads;
  std::size_t line_no = 0;
  std::string line;

  auto flush = [&] {
    if (current.tokens.empty()) return;
    const int n = current.size();
    for (int i = 1; i <= n; ++i) {
      const int h = heads.heads[static_cast<std::size_t>(i - 1)];
      if (h < 0 || h > n || h == i) {
        throw ParseError("token " + std::to_string(i) + " has invalid head " + std::to_string(h),
                         line_no);
      }
    }
    current.gold = std::move(heads);
    data.sentences.push_back(std::move(current));
    current = SentenceRecord{};
    heads = HeadAssignment{};
  };

  while (std::getline(in, line)) {
    ++line_no;
    chomp(line);
    if (is_blank(line)) {
      flush();
      continue;
    }
    if (line.front() == '#') continue;
    auto fields = split_tabs(line);
    if (fields.size() != 10) {
      throw ParseError("expected 10 tab-separated columns, found " + std::to_string(fields.size()),
                       line_no);
    }
    const std::string& id = fields[0];
    if (id.find('-') != std::string::npos || id.find('.') != std::string::npos) continue;
    auto head = parse_int(fields[6]);
    if (!head) throw ParseError("non-integer HEAD '" + fields[6] + "'", line_no);
    current.tokens.push_back(fields[1]);
    heads.heads.push_back(*head);
    heads.rels.push_back(data.labels.add(fields[7]));
  }
  flush();
  return data;
}

void write_conll_ner(std::ostream& out, const Dataset& data) {
  for (const auto& s : data.sentences) {
    const auto& tags = s.tags().tags;
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      out << s.tokens[i] << ' ' << data.labels.name(tags[i]) << '\n';
    }
    out << '\n';
  }
}

void write_conllu(std::ostream& out, const Dataset& data) {
  for (const auto& s : data.sentences) {
    const auto& gold = s.heads();
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      out << (i + 1) << '\t' << s.tokens[i] << "\t_\t_\t_\t_\t" << gold.heads[i] << '\t'
          << data.labels.name(gold.rels[i]) << "\t_\t_\n";
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

BioesScheme::BioesScheme(LabelAlphabet types) : types_(std::move(types)) {}

int BioesScheme::tag(BioesPart part, int type) {
  switch (part) {
    case BioesPart::kOutside: return 0;
    case BioesPart::kBegin: return 1 + 4 * type;
    case BioesPart::kInside: return 2 + 4 * type;
    case BioesPart::kEnd: return 3 + 4 * type;
    case BioesPart::kSingle: return 4 + 4 * type;
  }
  return 0;
}

BioesPart BioesScheme::part(int tag) {
  if (tag == 0) return BioesPart::kOutside;
  switch ((tag - 1) % 4) {
    case 0: return BioesPart::kBegin;
    case 1: return BioesPart::kInside;
    case 2: return BioesPart::kEnd;
    default: return BioesPart::kSingle;
  }
}

int BioesScheme::type(int tag) { return tag == 0 ? -1 : (tag - 1) / 4; }

LabelAlphabet BioesScheme::tag_alphabet() const {
  LabelAlphabet tags;
  tags.add("O");
  for (const auto& t : types_.names()) {
    tags.add("B-" + t);
    tags.add("I-" + t);
    tags.add("E-" + t);
    tags.add("S-" + t);
  }
  return tags;
}

bool bioes_transition_allowed(int prev, int next) {
  const BioesPart p = BioesScheme::part(prev);
  const BioesPart q = BioesScheme::part(next);
  if (p == BioesPart::kBegin || p == BioesPart::kInside) {
    return (q == BioesPart::kInside || q == BioesPart::kEnd) &&
           BioesScheme::type(prev) == BioesScheme::type(next);
  }
  return q == BioesPart::kOutside || q == BioesPart::kBegin || q == BioesPart::kSingle;
}

bool bioes_start_allowed(int tag) {
  const BioesPart p = BioesScheme::part(tag);
  return p == BioesPart::kOutside || p == BioesPart::kBegin || p == BioesPart::kSingle;
}

bool bioes_stop_allowed(int tag) {
  const BioesPart p = BioesScheme::part(tag);
  return p == BioesPart::kOutside || p == BioesPart::kEnd || p == BioesPart::kSingle;
}

TagSequence spans_to_bioes(const SpanSet& spans, int n) {
  const SpanSet checked = make_span_set(spans.spans, n);
  TagSequence out{std::vector<int>(static_cast<std::size_t>(n), BioesScheme::outside())};
  for (const Span& s : checked.spans) {
    if (s.start == s.end) {
      out.tags[s.start - 1] = BioesScheme::tag(BioesPart::kSingle, s.type);
      continue;
    }
    out.tags[s.start - 1] = BioesScheme::tag(BioesPart::kBegin, s.type);
    for (int k = s.start + 1; k < s.end; ++k) {
      out.tags[k - 1] = BioesScheme::tag(BioesPart::kInside, s.type);
    }
    out.tags[s.end - 1] = BioesScheme::tag(BioesPart::kEnd, s.type);
  }
  return out;
}

SpanSet bioes_to_spans(const TagSequence& tags) {
  SpanSet out;
  int open_start = 0;  // 0 = nothing open
  int open_type = -1;
  for (int i = 1; i <= static_cast<int>(tags.tags.size()); ++i) {
    const int tag = tags.tags[i - 1];
    const BioesPart part = BioesScheme::part(tag);
    const int type = BioesScheme::type(tag);
    switch (part) {
      case BioesPart::kOutside:
        open_start = 0;
        break;
      case BioesPart::kSingle:
        open_start = 0;
        out.spans.push_back({i, i, type});
        break;
      case BioesPart::kBegin:
        open_start = i;
        open_type = type;
        break;
      case BioesPart::kInside:
        if (open_start != 0 && type != open_type) open_start = 0;
        break;
      case BioesPart::kEnd:
        if (open_start != 0 && type == open_type) out.spans.push_back({open_start, i, type});
        open_start = 0;
        break;
    }
  }
  return out;
}

std::vector<std::string> normalize_to_bioes(const std::vector<std::string>& tags) {
  struct Parsed {
    char prefix;  // 'O', 'B', 'I', 'E', 'S'
    std::string type;
  };
  std::vector<Parsed> parsed;
  parsed.reserve(tags.size());
  for (const auto& t : tags) {
    if (t == "O" || t.size() < 3 || t[1] != '-') {
      parsed.push_back({'O', ""});
    } else {
      parsed.push_back({t[0], t.substr(2)});
    }
  }
  // Chunk boundaries under IOB1/IOB2 semantics; E/S close chunks explicitly.
  std::vector<std::string> out(tags.size(), "O");
  std::size_t i = 0;
  while (i < parsed.size()) {
    if (parsed[i].prefix == 'O') {
      ++i;
      continue;
    }
    const std::string& type = parsed[i].type;
    std::size_t j = i;
    if (parsed[i].prefix != 'S' && parsed[i].prefix != 'E') {
      while (j + 1 < parsed.size() && parsed[j + 1].type == type &&
             (parsed[j + 1].prefix == 'I' || parsed[j + 1].prefix == 'E')) {
        ++j;
        if (parsed[j].prefix == 'E') break;
      }
    }
    if (j == i) {
      out[i] = "S-" + type;
    } else {
      out[i] = "B-" + type;
      for (std::size_t k = i + 1; k < j; ++k) out[k] = "I-" + type;
      out[j] = "E-" + type;
    }
    i = j + 1;
  }
  return out;
}

Dataset canonicalize_ner(const Dataset& raw, BioesScheme& scheme, bool extend_scheme) {
  std::vector<std::vector<std::string>> normalized;
  normalized.reserve(raw.sentences.size());
  for (const auto& s : raw.sentences) {
    std::vector<std::string> names;
    for (int t : s.tags().tags) names.push_back(raw.labels.name(t));
    normalized.push_back(normalize_to_bioes(names));
    if (extend_scheme) {
      for (const auto& n : normalized.back()) {
        if (n != "O") scheme.add_type(n.substr(2));
      }
    }
  }
  Dataset out;
  out.labels = scheme.tag_alphabet();
  for (std::size_t k = 0; k < raw.sentences.size(); ++k) {
    SentenceRecord rec;
    rec.tokens = raw.sentences[k].tokens;
    rec.provenance = raw.sentences[k].provenance;
    TagSequence tags;
    for (const auto& n : normalized[k]) {
      if (!out.labels.find(n)) throw UsageError("entity type not in model scheme: " + n);
      tags.tags.push_back(out.labels.id(n));
    }
    rec.gold = std::move(tags);
    out.sentences.push_back(std::move(rec));
  }
  return out;
}

}  // namespace structkd
