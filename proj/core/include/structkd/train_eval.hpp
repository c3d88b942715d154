#pragma once

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "structkd/corpus.hpp"
#include "structkd/distill.hpp"
#include "structkd/model.hpp"

namespace structkd {

struct TrainConfig {
  int epochs = 10;
  double learning_rate = 0.1;
  int batch_size = 32;
  std::uint64_t seed = 1;
  int hash_bits = kDefaultHashBits;
  int mfvi_iterations = 3;
  bool bioes_constrained = false;
};

struct DistillConfig {
  KdCase kd_case = KdCase::k2a;
  TemperatureConfig temperature;
  double anneal_rate = 1.0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_metric = 0.0;
};

struct RunManifest {
  std::string family;
  std::string metric;  // "f1" or "las"
  TrainConfig config;
  std::optional<DistillConfig> distill;
  std::size_t train_sentences = 0;
  std::size_t pseudo_labeled_sentences = 0;
  std::vector<EpochRecord> history;
  int best_epoch = 0;  // 0 = the untrained initial model
  double best_dev_metric = 0.0;

  std::string to_json() const;
  std::string history_csv() const;
};

struct TrainResult {
  Model model;
  RunManifest manifest;
};

// Mini-batch SGD with gradient averaging. With a teacher, each sentence's
// loss is lambda(step) * L_KD + (1 - lambda(step)) * L_target. The model
// with the best dev metric (entity F1 or LAS) is returned; ties keep the
// earlier epoch. Deterministic for a fixed config.
TrainResult train(Family family, const Dataset& train_data, const Dataset& dev,
                  const TrainConfig& cfg, const Model* teacher = nullptr,
                  const std::optional<DistillConfig>& distill = std::nullopt);

// Supplies the tempered teacher table of one training sentence. Lets a
// teacher that is not a Model (for example a planted generator) drive
// distillation.
using TeacherTables = std::function<MarginalTable(const SentenceRecord&)>;

TrainResult train(Family family, const Dataset& train_data, const Dataset& dev,
                  const TrainConfig& cfg, const TeacherTables& teacher,
                  const DistillConfig& distill);

// ---------------------------------------------------------------------------
// Metrics

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Exact span-and-type match, micro-averaged. An empty prediction has
// precision 0 against a non-empty gold set; when both are empty every score
// is 1.
Prf entity_f1(const std::vector<SpanSet>& pred, const std::vector<SpanSet>& gold);
Prf entity_f1(const SpanSet& pred, const SpanSet& gold);
Prf entity_f1(const std::vector<TagSequence>& pred, const std::vector<TagSequence>& gold);

struct Attachment {
  double uas = 0.0;
  double las = 0.0;
};

// Per-token accuracy over all tokens, punctuation included.
Attachment uas_las(const HeadAssignment& pred, const HeadAssignment& gold);
Attachment uas_las(const std::vector<HeadAssignment>& pred, const std::vector<HeadAssignment>& gold);

using Prediction = std::variant<TagSequence, HeadAssignment>;

// BIOES tags for NER families (span models are re-encoded), heads otherwise.
Prediction predict(const Model& model, const SentenceRecord& sentence);

struct Evaluation {
  bool dependency = false;
  Prf ner;
  Attachment attachment;
  // F1 for NER models, LAS for parsers.
  double primary() const { return dependency ? attachment.las : ner.f1; }
};

Evaluation evaluate(const Model& model, const Dataset& data);

// Scheme from a canonical BIOES tag alphabet ("O", "B-X", "I-X", "E-X", "S-X", ...).
BioesScheme scheme_from_tags(const LabelAlphabet& tags);

}  // namespace structkd
