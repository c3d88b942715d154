#include "structkd/train_eval.hpp"

#include <numeric>
#include <sstream>

#include "json.hpp"
#include "structkd/chain_crf.hpp"
#include "structkd/errors.hpp"
#include "structkd/head_parser.hpp"
#include "structkd/span_ner.hpp"
#include "structkd/synth.hpp"
#include "structkd/token_maxent.hpp"

namespace structkd {

BioesScheme scheme_from_tags(const LabelAlphabet& tags) {
  BioesScheme scheme;
  for (int id = 1; id < tags.size(); id += 4) {
    const std::string& name = tags.name(id);
    if (name.size() < 3 || name.rfind("B-", 0) != 0) {
      throw UsageError("tag alphabet is not in canonical BIOES order: '" + name + "'");
    }
    scheme.add_type(name.substr(2));
  }
  if (!(scheme.tag_alphabet() == tags)) {
    throw UsageError("tag alphabet is not in canonical BIOES order");
  }
  return scheme;
}

namespace {

LabelAlphabet model_labels(Family family, const Dataset& data) {
  if (is_ner_family(family)) return scheme_from_tags(data.labels).types();
  return data.labels;
}

void check_compatible(Family family, const Dataset& data) {
  for (const auto& s : data.sentences) {
    if (std::holds_alternative<std::monostate>(s.gold)) continue;
    if (is_ner_family(family) && !s.has_tags()) {
      throw UsageError("NER model family needs tag-sequence data");
    }
    if (is_parser_family(family) && !s.has_heads()) {
      throw UsageError("parser model family needs head-assignment data");
    }
  }
}

double target_loss(const Model& model, const SentenceFeatures& feats, const SentenceRecord& rec,
                   double coefficient, GradBuffer& grad) {
  switch (model.family) {
    case Family::kChainCrf: return chain_nll(model, feats, rec.tags(), coefficient, grad);
    case Family::kTokenMaxEnt: return token_nll(model, feats, rec.tags(), coefficient, grad);
    case Family::kSpanNer:
      return span_nll(model, feats, bioes_to_spans(rec.tags()), coefficient, grad);
    case Family::kFirstOrderParser:
      return first_order_nll(model, feats, rec.heads(), coefficient, grad);
    case Family::kSecondOrderParser:
      return second_order_nll(model, feats, rec.heads(), coefficient, grad);
    case Family::kArcMaxEnt: return joint_arc_nll(model, feats, rec.heads(), coefficient, grad);
  }
  return 0.0;
}

nlohmann::ordered_json config_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},         {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size}, {"seed", c.seed},
          {"hash_bits", c.hash_bits},   {"mfvi_iterations", c.mfvi_iterations},
          {"bioes_constrained", c.bioes_constrained}};
}

}  // namespace

namespace {

TrainResult train_impl(Family family, const Dataset& train_data, const Dataset& dev,
                       const TrainConfig& cfg, const TeacherTables* teacher,
                       const std::optional<DistillConfig>& distill) {
  if (train_data.sentences.empty()) throw UsageError("training data is empty");
  if (cfg.epochs < 0 || cfg.batch_size < 1 || !(cfg.learning_rate > 0.0)) {
    throw UsageError("invalid training configuration");
  }
  if (distill && student_family(distill->kd_case) != family) {
    throw UsageError("case " + std::string(case_name(distill->kd_case)) + " needs a '" +
                     std::string(family_name(student_family(distill->kd_case))) + "' student");
  }
  check_compatible(family, train_data);
  check_compatible(family, dev);

  Model model(family, model_labels(family, train_data), cfg.hash_bits);
  model.mfvi_iterations = cfg.mfvi_iterations;
  model.bioes_constrained = cfg.bioes_constrained;

  std::vector<SentenceFeatures> feats;
  feats.reserve(train_data.sentences.size());
  for (const auto& s : train_data.sentences) feats.emplace_back(s.tokens, cfg.hash_bits);

  std::vector<MarginalTable> tables;
  if (distill) {
    tables.reserve(train_data.sentences.size());
    for (const auto& s : train_data.sentences) tables.push_back((*teacher)(s));
  }

  RunManifest manifest;
  manifest.family = std::string(family_name(family));
  manifest.metric = is_ner_family(family) ? "f1" : "las";
  manifest.config = cfg;
  manifest.distill = distill;
  manifest.train_sentences = train_data.sentences.size();
  for (const auto& s : train_data.sentences) {
    if (s.provenance == Provenance::kPseudoLabeled) ++manifest.pseudo_labeled_sentences;
  }

  Model best = model;
  manifest.best_dev_metric = dev.sentences.empty() ? 0.0 : evaluate(model, dev).primary();

  const std::size_t n = train_data.sentences.size();
  const std::size_t batches = (n + static_cast<std::size_t>(cfg.batch_size) - 1) / cfg.batch_size;
  AnnealConfig anneal;
  anneal.total_steps = std::max<long>(1, static_cast<long>(batches) * cfg.epochs);
  if (distill) anneal.rate = distill->anneal_rate;

  Rng rng(cfg.seed);
  GradBuffer grad(model.params);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  long step = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t end = std::min(n, begin + static_cast<std::size_t>(cfg.batch_size));
      const double coefficient = 1.0 / static_cast<double>(end - begin);
      const double lambda = distill ? lambda_schedule(step, anneal) : 0.0;
      grad.clear();
      for (std::size_t b = begin; b < end; ++b) {
        const std::size_t k = order[b];
        const SentenceRecord& rec = train_data.sentences[k];
        if (distill) {
          epoch_loss += student_objective(distill->kd_case, model, feats[k], &tables[k], rec, lambda,
                                          distill->temperature, coefficient, grad);
        } else {
          epoch_loss += target_loss(model, feats[k], rec, coefficient, grad);
        }
      }
      grad.apply(model.params, cfg.learning_rate);
      ++step;
    }
    EpochRecord record{epoch, epoch_loss, 0.0};
    if (!dev.sentences.empty()) record.dev_metric = evaluate(model, dev).primary();
    manifest.history.push_back(record);
    if (record.dev_metric > manifest.best_dev_metric || dev.sentences.empty()) {
      manifest.best_dev_metric = record.dev_metric;
      manifest.best_epoch = epoch;
      best = model;
    }
  }
  return {std::move(best), std::move(manifest)};
}

}  // namespace

TrainResult train(Family family, const Dataset& train_data, const Dataset& dev,
                  const TrainConfig& cfg, const Model* teacher,
                  const std::optional<DistillConfig>& distill) {
  if ((teacher != nullptr) != distill.has_value()) {
    throw UsageError("a teacher is required exactly when distilling");
  }
  if (!distill) return train_impl(family, train_data, dev, cfg, nullptr, std::nullopt);
  require_family(*teacher, teacher_family(distill->kd_case), "teacher");
  if (train_data.sentences.empty()) throw UsageError("training data is empty");
  if (!(teacher->labels == model_labels(family, train_data))) {
    throw UsageError("teacher and student label sets differ");
  }
  const DistillConfig d = *distill;
  const TeacherTables tables = [teacher, d](const SentenceRecord& s) {
    const SentenceFeatures tf(s.tokens, teacher->params.hash_bits());
    return teacher_marginal_table(d.kd_case, *teacher, tf, d.temperature);
  };
  return train_impl(family, train_data, dev, cfg, &tables, distill);
}

TrainResult train(Family family, const Dataset& train_data, const Dataset& dev,
                  const TrainConfig& cfg, const TeacherTables& teacher,
                  const DistillConfig& distill) {
  if (!teacher) throw UsageError("a teacher is required when distilling");
  return train_impl(family, train_data, dev, cfg, &teacher, distill);
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json doc;
  doc["family"] = family;
  doc["metric"] = metric;
  doc["seed"] = config.seed;
  doc["config"] = config_json(config);
  if (distill) {
    doc["distill"] = {
        {"case", std::string(case_name(distill->kd_case))},
        {"temperature", distill->temperature.temperature},
        {"temp_mode", distill->temperature.mode == TemperatureMode::kLocal ? "local" : "global"},
        {"student_side_temperature", distill->temperature.student_side},
        {"anneal_rate", distill->anneal_rate},
    };
  } else {
    doc["distill"] = nullptr;
  }
  doc["train_sentences"] = train_sentences;
  doc["pseudo_labeled_sentences"] = pseudo_labeled_sentences;
  auto history_json = nlohmann::ordered_json::array();
  for (const auto& h : history) {
    history_json.push_back(
        {{"epoch", h.epoch}, {"train_loss", h.train_loss}, {"dev_metric", h.dev_metric}});
  }
  doc["history"] = std::move(history_json);
  doc["best_epoch"] = best_epoch;
  doc["best_dev_metric"] = best_dev_metric;
  return doc.dump(2);
}

std::string RunManifest::history_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,train_loss,dev_" << metric << "\n";
  for (const auto& h : history) out << h.epoch << ',' << h.train_loss << ',' << h.dev_metric << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------

namespace {

Prf make_prf(std::size_t tp, std::size_t predicted, std::size_t expected) {
  Prf out;
  if (predicted == 0 && expected == 0) return {1.0, 1.0, 1.0};
  out.precision = predicted == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(predicted);
  out.recall = expected == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(expected);
  if (out.precision + out.recall > 0.0) {
    out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  }
  return out;
}

}  // namespace

Prf entity_f1(const std::vector<SpanSet>& pred, const std::vector<SpanSet>& gold) {
  if (pred.size() != gold.size()) throw UsageError("prediction and gold corpus sizes differ");
  std::size_t tp = 0;
  std::size_t predicted = 0;
  std::size_t expected = 0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    predicted += pred[k].spans.size();
    expected += gold[k].spans.size();
    for (const Span& s : pred[k].spans) {
      if (std::find(gold[k].spans.begin(), gold[k].spans.end(), s) != gold[k].spans.end()) ++tp;
    }
  }
  return make_prf(tp, predicted, expected);
}

Prf entity_f1(const SpanSet& pred, const SpanSet& gold) {
  return entity_f1(std::vector<SpanSet>{pred}, std::vector<SpanSet>{gold});
}

Prf entity_f1(const std::vector<TagSequence>& pred, const std::vector<TagSequence>& gold) {
  std::vector<SpanSet> p;
  std::vector<SpanSet> g;
  for (const auto& t : pred) p.push_back(bioes_to_spans(t));
  for (const auto& t : gold) g.push_back(bioes_to_spans(t));
  return entity_f1(p, g);
}

Attachment uas_las(const std::vector<HeadAssignment>& pred, const std::vector<HeadAssignment>& gold) {
  if (pred.size() != gold.size()) throw UsageError("prediction and gold corpus sizes differ");
  std::size_t tokens = 0;
  std::size_t heads = 0;
  std::size_t labeled = 0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const auto& p = pred[k];
    const auto& g = gold[k];
    if (p.heads.size() != g.heads.size() || p.rels.size() != g.rels.size() ||
        p.heads.size() != p.rels.size()) {
      throw UsageError("prediction and gold lengths differ");
    }
    for (std::size_t i = 0; i < p.heads.size(); ++i) {
      ++tokens;
      if (p.heads[i] == g.heads[i]) {
        ++heads;
        if (p.rels[i] == g.rels[i]) ++labeled;
      }
    }
  }
  if (tokens == 0) return {};
  return {static_cast<double>(heads) / tokens, static_cast<double>(labeled) / tokens};
}

Attachment uas_las(const HeadAssignment& pred, const HeadAssignment& gold) {
  return uas_las(std::vector<HeadAssignment>{pred}, std::vector<HeadAssignment>{gold});
}

Prediction predict(const Model& model, const SentenceRecord& sentence) {
  const SentenceFeatures feats(sentence.tokens, model.params.hash_bits());
  switch (model.family) {
    case Family::kChainCrf: return viterbi(build_lattice(model, feats));
    case Family::kTokenMaxEnt: return decode_tokens(token_scores(model, feats));
    case Family::kSpanNer:
      return spans_to_bioes(decode_spans(span_scores(model, feats)), feats.size());
    case Family::kFirstOrderParser:
    case Family::kSecondOrderParser: return decode_heads(parser_distributions(model, feats));
    case Family::kArcMaxEnt:
      return decode_joint(joint_arc_scores(model, feats), model.labels.size());
  }
  throw UsageError("unknown model family");
}

Evaluation evaluate(const Model& model, const Dataset& data) {
  Evaluation out;
  out.dependency = is_parser_family(model.family);
  if (out.dependency) {
    std::vector<HeadAssignment> pred;
    std::vector<HeadAssignment> gold;
    for (const auto& s : data.sentences) {
      pred.push_back(std::get<HeadAssignment>(predict(model, s)));
      gold.push_back(s.heads());
    }
    out.attachment = uas_las(pred, gold);
  } else {
    std::vector<TagSequence> pred;
    std::vector<TagSequence> gold;
    for (const auto& s : data.sentences) {
      pred.push_back(std::get<TagSequence>(predict(model, s)));
      gold.push_back(s.tags());
    }
    out.ner = entity_f1(pred, gold);
  }
  return out;
}

}  // namespace structkd
