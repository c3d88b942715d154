#include "structkd/synth.hpp"

#include <cmath>

#include "structkd/errors.hpp"
#include "structkd/scorer.hpp"

namespace structkd {

namespace {

std::string word_name(int w) { return "w" + std::to_string(w); }

std::vector<int> draw_words(int n, int vocab, Rng& rng) {
  std::vector<int> words(static_cast<std::size_t>(n));
  for (int& w : words) w = rng.below(vocab);
  return words;
}

std::vector<std::string> word_tokens(const std::vector<int>& words) {
  std::vector<std::string> tokens;
  tokens.reserve(words.size());
  for (int w : words) tokens.push_back(word_name(w));
  return tokens;
}

int draw_length(int max_len, Rng& rng) {
  const int lo = std::min(3, max_len);
  return lo + rng.below(max_len - lo + 1);
}

}  // namespace

ChainLattice PlantedChain::lattice(const std::vector<int>& words) const {
  const std::size_t n = words.size();
  const std::size_t L = transition.rows();
  ChainLattice lat(n, L);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t b = 0; b < L; ++b) lat.emissions(i, b) = emission(words[i], b);
  }
  for (auto& t : lat.transitions) t = transition;
  lat.start = start;
  lat.stop = stop;
  return lat;
}

SpanScoreTable PlantedSpans::table(const std::vector<int>& words) const {
  const int n = static_cast<int>(words.size());
  SpanScoreTable t(n, types);
  for (int i = 1; i <= n; ++i) {
    for (int j = i; j <= n; ++j) {
      for (int l = 0; l < types; ++l) {
        t(i, j, l) = first(words[i - 1], l) + last(words[j - 1], l) - length_penalty * (j - i) + bias;
      }
    }
  }
  return t;
}

Matrix PlantedHeads::head_scores(const std::vector<int>& words) const {
  const int n = static_cast<int>(words.size());
  Matrix out(n, n + 1);
  for (int i = 1; i <= n; ++i) {
    const int dc = category[words[i - 1]];
    for (int j = 0; j <= n; ++j) {
      if (j == i) {
        out(i - 1, j) = kLogZero;
        continue;
      }
      const int hc = j == 0 ? categories : category[words[j - 1]];
      const int bucket = j == 0 ? 0 : distance_bucket(j - i);
      out(i - 1, j) = attach(hc, dc) + distance[bucket + 11];
    }
  }
  return out;
}

Matrix PlantedHeads::relation_scores(const std::vector<int>& words) const {
  Matrix out(words.size(), relations);
  for (std::size_t i = 0; i < words.size(); ++i) {
    for (int r = 0; r < relations; ++r) out(i, r) = relation(category[words[i]], r);
  }
  return out;
}

PlantedChain make_planted_chain(int vocab, int types, Rng& rng) {
  const int L = 1 + 4 * types;
  PlantedChain p;
  p.types = types;
  p.emission = Matrix(vocab, L);
  for (int w = 0; w < vocab; ++w) {
    for (int b = 0; b < L; ++b) p.emission(w, b) = rng.uniform(-2.0, 2.0) + (b == 0 ? 1.0 : 0.0);
  }
  p.transition = Matrix(L, L);
  for (int a = 0; a < L; ++a) {
    for (int b = 0; b < L; ++b) {
      p.transition(a, b) = bioes_transition_allowed(a, b) ? rng.uniform(-1.5, 1.5) : kLogZero;
    }
  }
  p.start.resize(L);
  p.stop.resize(L);
  for (int b = 0; b < L; ++b) {
    p.start[b] = bioes_start_allowed(b) ? rng.uniform(-1.0, 1.0) : kLogZero;
    p.stop[b] = bioes_stop_allowed(b) ? rng.uniform(-1.0, 1.0) : kLogZero;
  }
  return p;
}

PlantedSpans make_planted_spans(int vocab, int types, Rng& rng) {
  PlantedSpans p;
  p.types = types;
  p.first = Matrix(vocab, types);
  p.last = Matrix(vocab, types);
  for (int w = 0; w < vocab; ++w) {
    for (int l = 0; l < types; ++l) {
      p.first(w, l) = rng.uniform(-2.5, 1.5);
      p.last(w, l) = rng.uniform(-2.5, 1.5);
    }
  }
  return p;
}

PlantedHeads make_planted_heads(int vocab, int relations, Rng& rng) {
  PlantedHeads p;
  p.relations = relations;
  p.category.resize(static_cast<std::size_t>(vocab));
  for (int& c : p.category) c = rng.below(p.categories);
  p.attach = Matrix(p.categories + 1, p.categories);
  for (double& v : p.attach.data()) v = rng.uniform(-2.0, 2.0);
  p.distance.assign(23, 0.0);
  for (int b = -11; b <= 11; ++b) p.distance[b + 11] = -0.6 * std::abs(b) + rng.uniform(-0.5, 0.5);
  p.relation = Matrix(p.categories, relations);
  for (double& v : p.relation.data()) v = rng.uniform(-2.0, 2.0);
  return p;
}

LabelAlphabet synthetic_entity_types(int types) {
  static const char* kNames[] = {"PER", "LOC", "ORG", "MISC"};
  LabelAlphabet out;
  for (int l = 0; l < types; ++l) out.add(l < 4 ? std::string(kNames[l]) : "T" + std::to_string(l));
  return out;
}

std::vector<int> word_ids(const std::vector<std::string>& tokens) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (t.size() < 2 || t[0] != 'w' ||
        t.find_first_not_of("0123456789", 1) != std::string::npos) {
      throw UsageError("not a synthetic word token: '" + t + "'");
    }
    ids.push_back(std::stoi(t.substr(1)));
  }
  return ids;
}

Dataset synth_generate(const SynthConfig& cfg) { return synth_corpus(cfg).data; }

SynthCorpus synth_corpus(const SynthConfig& cfg) {
  if (cfg.sentences < 1 || cfg.max_len < 1 || cfg.vocab < 1 || cfg.types < 0) {
    throw UsageError("synthetic corpus sizes must be at least 1");
  }
  if (cfg.task != SynthTask::kChain && cfg.types < 1) {
    throw UsageError("span and head corpora need at least one label");
  }
  Rng rng(cfg.seed);
  SynthCorpus out;
  Dataset& data = out.data;
  auto uniform = [&rng] { return rng.uniform(); };

  switch (cfg.task) {
    case SynthTask::kChain: {
      const PlantedChain& planted = out.chain.emplace(make_planted_chain(cfg.vocab, cfg.types, rng));
      data.labels = BioesScheme(synthetic_entity_types(cfg.types)).tag_alphabet();
      for (int s = 0; s < cfg.sentences; ++s) {
        const auto words = draw_words(draw_length(cfg.max_len, rng), cfg.vocab, rng);
        SentenceRecord rec;
        rec.tokens = word_tokens(words);
        rec.gold = TagSequence{sample_chain(planted.lattice(words), uniform)};
        data.sentences.push_back(std::move(rec));
      }
      break;
    }
    case SynthTask::kSpans: {
      const PlantedSpans& planted = out.spans.emplace(make_planted_spans(cfg.vocab, cfg.types, rng));
      data.labels = BioesScheme(synthetic_entity_types(cfg.types)).tag_alphabet();
      for (int s = 0; s < cfg.sentences; ++s) {
        const auto words = draw_words(draw_length(cfg.max_len, rng), cfg.vocab, rng);
        SentenceRecord rec;
        rec.tokens = word_tokens(words);
        rec.gold = spans_to_bioes(sample_spans(planted.table(words), uniform),
                                  static_cast<int>(words.size()));
        data.sentences.push_back(std::move(rec));
      }
      break;
    }
    case SynthTask::kHeads: {
      const PlantedHeads& planted = out.heads.emplace(make_planted_heads(cfg.vocab, cfg.types, rng));
      for (int r = 0; r < cfg.types; ++r) data.labels.add("r" + std::to_string(r));
      auto draw = [&rng](std::span<const double> logits) {
        const auto p = softmax(logits);
        double u = rng.uniform();
        for (std::size_t k = 0; k < p.size(); ++k) {
          if (u < p[k]) return static_cast<int>(k);
          u -= p[k];
        }
        for (std::size_t k = p.size(); k-- > 0;) {
          if (p[k] > 0.0) return static_cast<int>(k);
        }
        return 0;
      };
      for (int s = 0; s < cfg.sentences; ++s) {
        const auto words = draw_words(draw_length(cfg.max_len, rng), cfg.vocab, rng);
        const Matrix heads = planted.head_scores(words);
        const Matrix rels = planted.relation_scores(words);
        HeadAssignment gold;
        for (std::size_t i = 0; i < words.size(); ++i) {
          gold.heads.push_back(draw(heads.row(i)));
          gold.rels.push_back(draw(rels.row(i)));
        }
        SentenceRecord rec;
        rec.tokens = word_tokens(words);
        rec.gold = std::move(gold);
        data.sentences.push_back(std::move(rec));
      }
      break;
    }
  }
  return out;
}

std::vector<Dataset> split_dataset(const Dataset& data, const std::vector<std::size_t>& sizes) {
  std::vector<Dataset> out;
  std::size_t offset = 0;
  for (std::size_t size : sizes) {
    if (offset + size > data.sentences.size()) throw UsageError("split sizes exceed the dataset");
    Dataset part;
    part.labels = data.labels;
    part.sentences.assign(data.sentences.begin() + static_cast<std::ptrdiff_t>(offset),
                          data.sentences.begin() + static_cast<std::ptrdiff_t>(offset + size));
    out.push_back(std::move(part));
    offset += size;
  }
  return out;
}

Dataset strip_gold(const Dataset& data) {
  Dataset out = data;
  for (auto& s : out.sentences) s.gold = std::monostate{};
  return out;
}

}  // namespace structkd
