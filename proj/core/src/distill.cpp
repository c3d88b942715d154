#include "structkd/distill.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "structkd/errors.hpp"
#include "structkd/head_parser.hpp"
#include "structkd/span_ner.hpp"
#include "structkd/token_maxent.hpp"

namespace structkd {

namespace {

struct CaseInfo {
  KdCase kd_case;
  std::string_view name;
  Family teacher;
  Family student;
};

constexpr std::array<CaseInfo, 6> kCases{{
    {KdCase::k1a, "1a", Family::kChainCrf, Family::kChainCrf},
    {KdCase::k1b, "1b", Family::kFirstOrderParser, Family::kArcMaxEnt},
    {KdCase::k2a, "2a", Family::kChainCrf, Family::kTokenMaxEnt},
    {KdCase::k2b, "2b", Family::kSecondOrderParser, Family::kArcMaxEnt},
    {KdCase::k3, "3", Family::kTokenMaxEnt, Family::kChainCrf},
    {KdCase::k4, "4", Family::kSpanNer, Family::kTokenMaxEnt},
}};

const CaseInfo& info(KdCase c) {
  for (const auto& i : kCases) {
    if (i.kd_case == c) return i;
  }
  throw UsageError("unknown distillation case");
}

double safe_exp(double x) { return x == kLogZero ? 0.0 : std::exp(x); }

// p^(1/T) renormalized; exact zeros preserved.
void temper_row(std::span<double> row, double inv_t) {
  double peak = 0.0;
  for (double p : row) peak = std::max(peak, p);
  if (peak <= 0.0) throw DegenerateDistribution("cannot temper a row without mass");
  double total = 0.0;
  for (double& p : row) {
    p = p > 0.0 ? std::exp(inv_t * (std::log(p) - std::log(peak))) : 0.0;
    total += p;
  }
  for (double& p : row) p /= total;
}

}  // namespace

std::string_view case_name(KdCase c) { return info(c).name; }

std::optional<KdCase> parse_case(std::string_view name) {
  for (const auto& i : kCases) {
    if (i.name == name) return i.kd_case;
  }
  return std::nullopt;
}

Family teacher_family(KdCase c) { return info(c).teacher; }
Family student_family(KdCase c) { return info(c).student; }

MarginalTable apply_local_temperature(const MarginalTable& table, double temperature) {
  if (!(temperature > 0.0)) throw UsageError("temperature must be positive");
  MarginalTable out = table;
  if (temperature == 1.0) return out;
  const double inv_t = 1.0 / temperature;
  for (auto& slice : out.pairwise) temper_row(slice.data(), inv_t);
  for (std::size_t i = 0; i < out.unary.rows(); ++i) temper_row(out.unary.row(i), inv_t);
  return out;
}

MarginalTable chain_teacher_table(KdCase kd_case, const ChainLattice& teacher,
                                  const TemperatureConfig& temp) {
  if (kd_case != KdCase::k1a && kd_case != KdCase::k2a) {
    throw UsageError("chain teachers serve cases 1a and 2a only");
  }
  if (!(temp.temperature > 0.0)) throw UsageError("temperature must be positive");
  const bool global = temp.mode == TemperatureMode::kGlobal;
  const ChainLattice lat = global ? teacher.scaled(1.0 / temp.temperature) : teacher;
  MarginalTable table;
  if (kd_case == KdCase::k1a) {
    table = pairwise_marginals(lat);
  } else {
    table.kind = TableKind::kTokenUnary;
    table.unary = unary_marginals(lat);
  }
  return global ? table : apply_local_temperature(table, temp.temperature);
}

MarginalTable span_teacher_table(const SpanScoreTable& teacher, const TemperatureConfig& temp) {
  if (!(temp.temperature > 0.0)) throw UsageError("temperature must be positive");
  const bool global = temp.mode == TemperatureMode::kGlobal;
  MarginalTable table;
  table.kind = TableKind::kTokenUnary;
  table.unary = bioes_marginals(global ? teacher.scaled(1.0 / temp.temperature) : teacher);
  return global ? table : apply_local_temperature(table, temp.temperature);
}

MarginalTable teacher_marginal_table(KdCase kd_case, const Model& teacher,
                                     const SentenceFeatures& feats, const TemperatureConfig& temp) {
  require_family(teacher, teacher_family(kd_case), "teacher");
  if (!(temp.temperature > 0.0)) throw UsageError("temperature must be positive");
  const bool global = temp.mode == TemperatureMode::kGlobal;
  const double scale = global ? 1.0 / temp.temperature : 1.0;

  MarginalTable table;
  switch (kd_case) {
    case KdCase::k1a:
    case KdCase::k2a:
      return chain_teacher_table(kd_case, build_lattice(teacher, feats), temp);
    case KdCase::k4:
      return span_teacher_table(span_scores(teacher, feats), temp);
    case KdCase::k3: {
      Matrix scores = token_scores(teacher, feats);
      for (double& v : scores.data()) v *= scale;
      table = pair_marginals_from_tokens(row_softmax(scores));
      break;
    }
    case KdCase::k1b:
    case KdCase::k2b: {
      table = arc_marginal_table(parser_distributions(teacher, feats, scale));
      break;
    }
  }
  return global ? table : apply_local_temperature(table, temp.temperature);
}

LocalKdLoss kd_loss_local(const Matrix& teacher, const Matrix& student_log) {
  if (teacher.rows() != student_log.rows() || teacher.cols() != student_log.cols()) {
    throw UsageError("teacher and student substructure spaces differ in shape");
  }
  LocalKdLoss out;
  out.grad = Matrix(teacher.rows(), teacher.cols());
  for (std::size_t i = 0; i < teacher.rows(); ++i) {
    for (std::size_t c = 0; c < teacher.cols(); ++c) {
      const double t = teacher(i, c);
      if (t != 0.0) out.loss -= t * student_log(i, c);
      out.grad(i, c) = safe_exp(student_log(i, c)) - t;
    }
  }
  return out;
}

GlobalKdLoss kd_loss_global(const MarginalTable& teacher, const ChainLattice& student) {
  const std::size_t n = student.length();
  const std::size_t L = student.labels();
  if (teacher.kind != TableKind::kChainPairwise || teacher.unary.rows() != n ||
      teacher.unary.cols() != L || teacher.pairwise.size() + 1 != n) {
    throw UsageError("teacher table does not cover the student CRF's pairwise space");
  }
  const MarginalTable own = pairwise_marginals(student);
  auto weighted = [](double p, double s) { return p == 0.0 ? 0.0 : p * s; };

  GlobalKdLoss out;
  out.grad = ChainLattice(n, L);
  double expected = 0.0;
  for (std::size_t b = 0; b < L; ++b) {
    const double first = teacher.unary(0, b);
    const double last = teacher.unary(n - 1, b);
    expected += weighted(first, student.start[b] + student.emissions(0, b));
    expected += weighted(last, student.stop[b]);
    out.grad.start[b] = own.unary(0, b) - first;
    out.grad.emissions(0, b) = own.unary(0, b) - first;
    out.grad.stop[b] = own.unary(n - 1, b) - last;
  }
  for (std::size_t i = 1; i < n; ++i) {
    const Matrix& tp = teacher.pairwise[i - 1];
    const Matrix& sp = own.pairwise[i - 1];
    Matrix& gt = out.grad.transitions[i - 1];
    for (std::size_t a = 0; a < L; ++a) {
      for (std::size_t b = 0; b < L; ++b) {
        expected += weighted(tp(a, b), student.transitions[i - 1](a, b) + student.emissions(i, b));
        gt(a, b) = sp(a, b) - tp(a, b);
        out.grad.emissions(i, b) += gt(a, b);
      }
    }
  }
  out.loss = log_partition(student) - expected;
  return out;
}

double lambda_schedule(long step, const AnnealConfig& cfg) {
  if (cfg.total_steps <= 0) throw UsageError("anneal total_steps must be positive");
  if (!(cfg.rate > 0.0)) throw UsageError("anneal rate must be positive");
  if (step < 0) throw UsageError("anneal step must be non-negative");
  const double lambda = 1.0 - cfg.rate * static_cast<double>(step) / static_cast<double>(cfg.total_steps);
  return std::clamp(lambda, 0.0, 1.0);
}

SentenceRecord pseudo_label(const Model& teacher, const SentenceRecord& sentence) {
  const SentenceFeatures feats(sentence.tokens, teacher.params.hash_bits());
  SentenceRecord out;
  out.tokens = sentence.tokens;
  out.provenance = Provenance::kPseudoLabeled;
  switch (teacher.family) {
    case Family::kChainCrf:
      out.gold = viterbi(build_lattice(teacher, feats));
      break;
    case Family::kTokenMaxEnt:
      out.gold = decode_tokens(token_scores(teacher, feats));
      break;
    case Family::kSpanNer:
      out.gold = spans_to_bioes(decode_spans(span_scores(teacher, feats)), feats.size());
      break;
    case Family::kFirstOrderParser:
    case Family::kSecondOrderParser:
      out.gold = decode_heads(parser_distributions(teacher, feats));
      break;
    case Family::kArcMaxEnt:
      out.gold = decode_joint(joint_arc_scores(teacher, feats), teacher.labels.size());
      break;
  }
  return out;
}

std::variant<TagSequence, HeadAssignment> decode_from_marginals(const MarginalTable& table) {
  if (table.kind == TableKind::kArc) return decode_joint(table.unary, table.relations);
  return decode_tokens(table.unary);
}

double student_objective(KdCase kd_case, const Model& student, const SentenceFeatures& feats,
                         const MarginalTable* teacher, const SentenceRecord& record, double lambda,
                         const TemperatureConfig& temp, double coefficient, GradBuffer& grad) {
  require_family(student, student_family(kd_case), "student");
  const bool has_gold = !std::holds_alternative<std::monostate>(record.gold);
  if (!teacher && !has_gold) throw UsageError("sentence has neither gold nor teacher supervision");
  double kd_weight = teacher ? lambda : 0.0;
  double target_weight = has_gold ? 1.0 - kd_weight : 0.0;
  if (!has_gold) kd_weight = 1.0;
  const double student_scale = temp.student_side ? 1.0 / temp.temperature : 1.0;

  double loss = 0.0;
  switch (student.family) {
    case Family::kChainCrf: {
      const ChainLattice lat = build_lattice(student, feats);
      ChainLattice g(lat.length(), lat.labels());
      auto add = [](ChainLattice& acc, const ChainLattice& part, double w) {
        for (std::size_t k = 0; k < acc.emissions.data().size(); ++k) {
          acc.emissions.data()[k] += w * part.emissions.data()[k];
        }
        for (std::size_t i = 0; i < acc.transitions.size(); ++i) {
          for (std::size_t k = 0; k < acc.transitions[i].data().size(); ++k) {
            acc.transitions[i].data()[k] += w * part.transitions[i].data()[k];
          }
        }
        for (std::size_t b = 0; b < acc.start.size(); ++b) {
          acc.start[b] += w * part.start[b];
          acc.stop[b] += w * part.stop[b];
        }
      };
      if (kd_weight > 0.0) {
        const GlobalKdLoss kd = kd_loss_global(*teacher, lat.scaled(student_scale));
        loss += kd_weight * kd.loss;
        add(g, kd.grad, kd_weight * student_scale);
      }
      if (target_weight > 0.0) {
        const ChainLoss nll = nll_and_grad(lat, record.tags());
        loss += target_weight * nll.loss;
        add(g, nll.grad, target_weight);
      }
      backprop_lattice(student, feats, g, coefficient, grad);
      break;
    }
    case Family::kTokenMaxEnt:
    case Family::kArcMaxEnt: {
      const bool arcs = student.family == Family::kArcMaxEnt;
      const int R = student.labels.size();
      const Matrix scores = arcs ? joint_arc_scores(student, feats) : token_scores(student, feats);
      Matrix g(scores.rows(), scores.cols());
      if (kd_weight > 0.0) {
        Matrix scaled = scores;
        for (double& v : scaled.data()) {
          if (v != kLogZero) v *= student_scale;
        }
        const LocalKdLoss kd = kd_loss_local(teacher->unary, row_log_softmax(scaled));
        loss += kd_weight * kd.loss;
        for (std::size_t k = 0; k < g.data().size(); ++k) {
          g.data()[k] += kd_weight * student_scale * kd.grad.data()[k];
        }
      }
      if (target_weight > 0.0) {
        const Matrix logp = row_log_softmax(scores);
        for (std::size_t i = 0; i < logp.rows(); ++i) {
          int col = 0;
          if (arcs) {
            const auto& gold = record.heads();
            col = gold.heads.at(i) * R + gold.rels.at(i);
          } else {
            col = record.tags().tags.at(i);
          }
          if (col < 0 || col >= static_cast<int>(logp.cols())) throw UsageError("gold id out of range");
          loss -= target_weight * logp(i, col);
          for (std::size_t c = 0; c < logp.cols(); ++c) {
            g(i, c) += target_weight * safe_exp(logp(i, c));
          }
          g(i, col) -= target_weight;
        }
      }
      if (arcs) {
        backprop_joint_scores(feats, g, R, coefficient, grad);
      } else {
        backprop_token_scores(feats, g, coefficient, grad);
      }
      break;
    }
    default:
      throw UsageError("model family cannot be a distillation student");
  }
  return loss;
}

}  // namespace structkd
