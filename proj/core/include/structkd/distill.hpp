#pragma once

// Structural knowledge distillation. The student's loss on one sentence is
//
//   lambda * L_KD + (1 - lambda) * L_target,
//
// where L_KD is the cross-entropy between the teacher's and the student's
// distributions over full structures. Because the student's score factorizes
// over substructures u, it reduces to
//
//   L_KD = -sum_u P_t(u | x) Score_s(u, x) + log Z_s(x)          (CRF students)
//   L_KD = -sum_u P_t(u | x) log P_s(u | x)                      (local students)
//
// so only the teacher's substructure marginals over the student's space are
// needed.

#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "structkd/chain_crf.hpp"
#include "structkd/corpus.hpp"
#include "structkd/marginal_table.hpp"
#include "structkd/model.hpp"
#include "structkd/scorer.hpp"
#include "structkd/span_ner.hpp"

namespace structkd {

enum class KdCase {
  k1a,  // CRF -> CRF
  k1b,  // first-order parser -> arc-label MaxEnt
  k2a,  // CRF -> token MaxEnt
  k2b,  // second-order parser -> arc-label MaxEnt
  k3,   // token MaxEnt -> CRF
  k4,   // span model -> BIOES token MaxEnt
};

std::string_view case_name(KdCase c);
std::optional<KdCase> parse_case(std::string_view name);
Family teacher_family(KdCase c);
Family student_family(KdCase c);

enum class TemperatureMode { kGlobal, kLocal };

struct TemperatureConfig {
  double temperature = 1.0;
  TemperatureMode mode = TemperatureMode::kLocal;
  // Also divide the student's scores by the temperature inside L_KD.
  bool student_side = false;
};

struct AnnealConfig {
  double rate = 1.0;
  long total_steps = 1;
};

// Renormalizes p^(1/T) over each support: every pairwise slice and every
// unary row. Zero entries stay exactly zero.
MarginalTable apply_local_temperature(const MarginalTable& table, double temperature);

// Teacher marginals over the student's substructure space for `kd_case`.
// Global mode divides every teacher score by T before marginalizing; local
// mode marginalizes at T = 1 and then applies apply_local_temperature.
MarginalTable teacher_marginal_table(KdCase kd_case, const Model& teacher,
                                     const SentenceFeatures& feats, const TemperatureConfig& temp);

// Tempered tables from raw teacher scores. `kd_case` is 1a (pairwise) or 2a
// (unary) for chain teachers; span teachers serve case 4.
MarginalTable chain_teacher_table(KdCase kd_case, const ChainLattice& teacher,
                                  const TemperatureConfig& temp);
MarginalTable span_teacher_table(const SpanScoreTable& teacher, const TemperatureConfig& temp);

struct LocalKdLoss {
  double loss = 0.0;
  Matrix grad;  // d loss / d student site scores = softmax - teacher
};

// Sum over sites of cross-entropy(teacher row, student row). Rows of
// `student_log_rows` are log-probabilities.
LocalKdLoss kd_loss_local(const Matrix& teacher_rows, const Matrix& student_log_rows);

struct GlobalKdLoss {
  double loss = 0.0;
  ChainLattice grad;  // student marginals - teacher marginals
};

// Teacher table over a CRF student's pairwise space. The first position's
// substructure is start + emission, the last position also carries stop.
GlobalKdLoss kd_loss_global(const MarginalTable& teacher, const ChainLattice& student);

// clamp(1 - rate * step / total_steps, 0, 1)
double lambda_schedule(long step, const AnnealConfig& cfg);

// The teacher's single best structure as gold, provenance pseudo-labeled.
SentenceRecord pseudo_label(const Model& teacher, const SentenceRecord& sentence);

// Per-site mode of a marginal table (ties toward the lowest id).
std::variant<TagSequence, HeadAssignment> decode_from_marginals(const MarginalTable& table);

// lambda * L_KD + (1 - lambda) * L_target for one sentence, gradients pushed
// onto the student's weights scaled by `coefficient`. `teacher` may be null
// (pure target loss); a record without gold contributes only L_KD.
double student_objective(KdCase kd_case, const Model& student, const SentenceFeatures& feats,
                         const MarginalTable* teacher, const SentenceRecord& record, double lambda,
                         const TemperatureConfig& temp, double coefficient, GradBuffer& grad);

}  // namespace structkd
