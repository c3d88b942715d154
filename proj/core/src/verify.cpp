#include "structkd/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include "structkd/chain_crf.hpp"
#include "structkd/distill.hpp"
#include "structkd/errors.hpp"
#include "structkd/head_parser.hpp"
#include "structkd/oracle.hpp"
#include "structkd/span_ner.hpp"
#include "structkd/synth.hpp"
#include "structkd/token_maxent.hpp"

namespace structkd {

namespace {

constexpr double kExact = 1e-9;
constexpr double kFdStep = 1e-5;
constexpr double kFdTolerance = 1e-4;
// Gradients below this magnitude are compared on an absolute scale.
constexpr double kFdFloor = 1e-6;
constexpr int kFdHashBits = 14;

class Tracker {
 public:
  Tracker(std::string name, double tolerance) {
    check_.name = std::move(name);
    check_.tolerance = tolerance;
  }
  void see(double error) {
    if (std::isnan(error) || !(error <= check_.tolerance)) check_.passed = false;
    if (std::isnan(error)) error = INFINITY;
    check_.max_error = std::max(check_.max_error, error);
  }
  void count() { ++check_.instances; }
  Check done() const { return check_; }

 private:
  Check check_;
};

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return INFINITY;
  double worst = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k) {
    worst = std::max(worst, std::abs(a.data()[k] - b.data()[k]));
  }
  return worst;
}

double table_diff(const MarginalTable& a, const MarginalTable& b) {
  double worst = max_abs_diff(a.unary, b.unary);
  if (a.pairwise.size() != b.pairwise.size()) return INFINITY;
  for (std::size_t i = 0; i < a.pairwise.size(); ++i) {
    worst = std::max(worst, max_abs_diff(a.pairwise[i], b.pairwise[i]));
  }
  return worst;
}

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double spread = 2.0) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(-spread, spread);
  return m;
}

ChainLattice random_lattice(Rng& rng, int n, int labels) {
  ChainLattice lat(n, labels);
  lat.emissions = random_matrix(rng, n, labels);
  for (auto& t : lat.transitions) t = random_matrix(rng, labels, labels);
  for (double& v : lat.start) v = rng.uniform(-2.0, 2.0);
  for (double& v : lat.stop) v = rng.uniform(-2.0, 2.0);
  return lat;
}

// n x (n+1) with the self column masked.
Matrix random_head_scores(Rng& rng, int n) {
  Matrix m = random_matrix(rng, n, n + 1);
  for (int i = 1; i <= n; ++i) m(i - 1, i) = kLogZero;
  return m;
}

Matrix random_joint_scores(Rng& rng, int n, int relations) {
  Matrix m = random_matrix(rng, n, static_cast<std::size_t>(n + 1) * relations);
  for (int i = 1; i <= n; ++i) {
    for (int r = 0; r < relations; ++r) m(i - 1, i * relations + r) = kLogZero;
  }
  return m;
}

SiblingScores random_siblings(Rng& rng, int n) {
  SiblingScores sib(n);
  for (int i = 1; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      for (int k = 1; k <= n; ++k) {
        if (k != i && j != i && j != k) sib(i, j, k) = rng.uniform(-1.5, 1.5);
      }
    }
  }
  return sib;
}

SpanScoreTable random_span_table(Rng& rng, int n, int types) {
  SpanScoreTable t(n, types);
  for (int i = 1; i <= n; ++i) {
    for (int j = i; j <= n; ++j) {
      for (int l = 0; l < types; ++l) t(i, j, l) = rng.uniform(-2.0, 2.0);
    }
  }
  return t;
}

// Joint (head, relation) log scores of a factorized head/relation model.
Matrix joint_from_rows(const Matrix& head_log, const Matrix& rel_log) {
  const std::size_t n = head_log.rows();
  const std::size_t R = rel_log.cols();
  Matrix joint(n, (n + 1) * R);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= n; ++j) {
      for (std::size_t r = 0; r < R; ++r) {
        joint(i, j * R + r) =
            head_log(i, j) == kLogZero ? kLogZero : head_log(i, j) + rel_log(i, r);
      }
    }
  }
  return joint;
}

Matrix log_of(const Matrix& p) {
  Matrix out(p.rows(), p.cols());
  for (std::size_t k = 0; k < p.data().size(); ++k) {
    out.data()[k] = p.data()[k] > 0.0 ? std::log(p.data()[k]) : kLogZero;
  }
  return out;
}

double lattice_norm(const ChainLattice& g) {
  double s = 0.0;
  for (double v : g.emissions.data()) s += v * v;
  for (const auto& t : g.transitions) {
    for (double v : t.data()) s += v * v;
  }
  for (double v : g.start) s += v * v;
  for (double v : g.stop) s += v * v;
  return std::sqrt(s);
}

std::vector<double*> lattice_entries(ChainLattice& lat) {
  std::vector<double*> out;
  for (double& v : lat.emissions.data()) out.push_back(&v);
  for (auto& t : lat.transitions) {
    for (double& v : t.data()) out.push_back(&v);
  }
  for (double& v : lat.start) out.push_back(&v);
  for (double& v : lat.stop) out.push_back(&v);
  return out;
}

double fd_relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), kFdFloor});
}

// ---------------------------------------------------------------------------

std::vector<Check> chain_checks(const VerifyOptions& opt, Rng& rng) {
  Tracker logz("chain log-partition vs enumeration", kExact);
  Tracker pairwise("chain pairwise+unary marginals vs enumeration", kExact);
  Tracker unary("chain unary marginals vs enumeration", kExact);
  Tracker best("viterbi score equals enumerated maximum", kExact);
  Tracker pairs("maxent pair products vs enumeration", kExact);
  Tracker uniform("uniform chain: log Z = n ln L", kExact);
  for (int k = 0; k < opt.instances; ++k) {
    const int n = 1 + rng.below(5);
    const int L = 1 + rng.below(3);
    const ChainLattice lat = random_lattice(rng, n, L);
    const StructureEnumeration e = enumerate_chain(lat);
    const double z = exact_partition(e);
    logz.see(std::abs(log_partition(lat) - z));
    const MarginalTable exact = exact_marginals(e, TableKind::kChainPairwise);
    pairwise.see(table_diff(pairwise_marginals(lat), exact));
    unary.see(max_abs_diff(unary_marginals(lat), exact.unary));
    best.see(std::abs(lat.sequence_score(viterbi(lat).tags) - e.log_scores[exact_argmax(e)]));

    const Matrix scores = random_matrix(rng, n, L);
    pairs.see(table_diff(pair_marginals_from_tokens(row_softmax(scores)),
                         exact_marginals(enumerate_independent(scores), TableKind::kChainPairwise)));

    uniform.see(std::abs(log_partition(ChainLattice(n, L)) - n * std::log(static_cast<double>(L))));
    for (Tracker* t : {&logz, &pairwise, &unary, &best, &pairs, &uniform}) t->count();
  }
  return {logz.done(), pairwise.done(), unary.done(), best.done(), pairs.done(), uniform.done()};
}

std::vector<Check> span_checks(const VerifyOptions& opt, Rng& rng) {
  Tracker count("span structure count vs recurrence", 0.0);
  Tracker suffix("span log-partition (suffix) vs enumeration", kExact);
  Tracker prefix("span log-partition (prefix) vs enumeration", kExact);
  Tracker spans("span marginals vs enumeration", kExact);
  Tracker bioes("BIOES marginals vs enumeration", kExact);
  Tracker edges("BIOES edge marginals are exactly zero", 0.0);
  Tracker best("span decode score equals enumerated maximum", kExact);
  for (int k = 0; k < opt.instances; ++k) {
    const int n = 1 + rng.below(6);
    const int L = 1 + rng.below(2);
    const SpanScoreTable t = random_span_table(rng, n, L);
    const StructureEnumeration e = enumerate_spans(t);
    count.see(std::abs(static_cast<double>(e.size()) -
                       static_cast<double>(count_span_structures(n, L))));
    const double z = exact_partition(e);
    suffix.see(std::abs(span_log_partition(t) - z));
    prefix.see(std::abs(span_log_partition_prefix(t) - z));

    const std::vector<double> p = exact_probabilities(e);
    SpanScoreTable exact_spans(n, L);
    for (std::size_t s = e.size(); s-- > 0;) {
      for (const Span& sp : e.span_sets[s].spans) exact_spans(sp.start, sp.end, sp.type) += p[s];
    }
    const SpanScoreTable mu = span_marginals(t);
    double worst = 0.0;
    for (int i = 1; i <= n; ++i) {
      for (int j = i; j <= n; ++j) {
        for (int l = 0; l < L; ++l) worst = std::max(worst, std::abs(mu(i, j, l) - exact_spans(i, j, l)));
      }
    }
    spans.see(worst);

    const Matrix rows = bioes_marginals(t);
    bioes.see(max_abs_diff(rows, exact_marginals(e, TableKind::kTokenUnary).unary));
    double edge = 0.0;
    for (int l = 0; l < L; ++l) {
      edge = std::max({edge, std::abs(rows(n - 1, 1 + 4 * l)), std::abs(rows(0, 2 + 4 * l)),
                       std::abs(rows(n - 1, 2 + 4 * l)), std::abs(rows(0, 3 + 4 * l))});
    }
    edges.see(edge);
    best.see(std::abs(t.set_score(decode_spans(t)) - e.log_scores[exact_argmax(e)]));
    for (Tracker* tr : {&count, &suffix, &prefix, &spans, &bioes, &edges, &best}) tr->count();
  }
  return {count.done(), suffix.done(), prefix.done(), spans.done(),
          bioes.done(),  edges.done(),  best.done()};
}

std::vector<Check> head_checks(const VerifyOptions& opt, Rng& rng) {
  Tracker first("first-order arc marginals P(h)P(r) vs enumeration", kExact);
  Tracker joint("arc-label maxent marginals vs enumeration", kExact);
  Tracker second("mean-field arc table vs enumeration of its factorization", kExact);
  Tracker decode("joint decode score equals enumerated maximum", kExact);
  Tracker rows("head rows are distributions with zero self mass", kExact);
  for (int k = 0; k < opt.instances; ++k) {
    const int n = 1 + rng.below(4);
    const int R = 1 + rng.below(2);
    const Matrix arc = random_head_scores(rng, n);
    const Matrix rel = random_matrix(rng, n, R);
    const ArcDistributions d{row_softmax(arc), row_softmax(rel)};
    // Unnormalized joint scores: the enumeration normalizes them itself.
    Matrix raw(n, static_cast<std::size_t>(n + 1) * R);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j <= n; ++j) {
        for (int r = 0; r < R; ++r) raw(i, j * R + r) = arc(i, j) + rel(i, r);
      }
    }
    first.see(max_abs_diff(arc_marginal_table(d).unary,
                           exact_marginals(enumerate_heads(raw, R), TableKind::kArc).unary));

    const Matrix js = random_joint_scores(rng, n, R);
    const StructureEnumeration je = enumerate_heads(js, R);
    joint.see(max_abs_diff(row_softmax(js), exact_marginals(je, TableKind::kArc).unary));
    const HeadAssignment h = decode_joint(row_softmax(js), R);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += js(i, h.heads[i] * R + h.rels[i]);
    decode.see(std::abs(s - je.log_scores[exact_argmax(je)]));

    const Matrix q = mfvi_second_order(arc, random_siblings(rng, n), 3);
    const ArcDistributions d2{q, d.rel_rows};
    second.see(max_abs_diff(
        arc_marginal_table(d2).unary,
        exact_marginals(enumerate_heads(joint_from_rows(log_of(q), log_of(d.rel_rows)), R),
                        TableKind::kArc)
            .unary));
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      double total = 0.0;
      for (int j = 0; j <= n; ++j) total += q(i, j);
      worst = std::max({worst, std::abs(total - 1.0), std::abs(q(i, i + 1))});
    }
    rows.see(worst);
    for (Tracker* t : {&first, &joint, &second, &decode, &rows}) t->count();
  }
  return {first.done(), joint.done(), second.done(), decode.done(), rows.done()};
}

Model random_model(Rng& rng, Family family, int labels, double spread = 0.5) {
  LabelAlphabet alphabet;
  for (int l = 0; l < labels; ++l) alphabet.add("L" + std::to_string(l));
  Model m(family, alphabet, kFdHashBits);
  for (double& w : m.params.weights) w = rng.uniform(-spread, spread);
  return m;
}

std::vector<std::string> random_tokens(Rng& rng, int n) {
  std::vector<std::string> tokens;
  for (int i = 0; i < n; ++i) tokens.push_back("w" + std::to_string(rng.below(10)));
  return tokens;
}

std::vector<Check> kd_checks(const VerifyOptions& opt, Rng& rng) {
  std::vector<Check> out;
  for (KdCase c : {KdCase::k1a, KdCase::k1b, KdCase::k2a, KdCase::k2b, KdCase::k3, KdCase::k4}) {
    Tracker t("case " + std::string(case_name(c)) + ": factorized KD loss = enumerated cross-entropy",
              kExact);
    for (int k = 0; k < opt.instances; ++k) {
      double factorized = 0.0;
      double exact = 0.0;
      switch (c) {
        case KdCase::k1a: {
          const int n = 1 + rng.below(5);
          const int L = 1 + rng.below(3);
          const ChainLattice teacher = random_lattice(rng, n, L);
          const ChainLattice student = random_lattice(rng, n, L);
          factorized = kd_loss_global(pairwise_marginals(teacher), student).loss;
          exact = exact_kd_cross_entropy(enumerate_chain(teacher), enumerate_chain(student));
          break;
        }
        case KdCase::k2a: {
          const int n = 1 + rng.below(5);
          const int L = 1 + rng.below(3);
          const ChainLattice teacher = random_lattice(rng, n, L);
          const Matrix student = row_log_softmax(random_matrix(rng, n, L));
          factorized = kd_loss_local(unary_marginals(teacher), student).loss;
          exact = exact_kd_cross_entropy(enumerate_chain(teacher), student);
          break;
        }
        case KdCase::k3: {
          const int n = 1 + rng.below(5);
          const int L = 1 + rng.below(3);
          const Matrix teacher = random_matrix(rng, n, L);
          const ChainLattice student = random_lattice(rng, n, L);
          factorized = kd_loss_global(pair_marginals_from_tokens(row_softmax(teacher)), student).loss;
          exact = exact_kd_cross_entropy(enumerate_independent(teacher), enumerate_chain(student));
          break;
        }
        case KdCase::k1b:
        case KdCase::k2b: {
          const int n = 1 + rng.below(4);
          const int R = 1 + rng.below(2);
          const Matrix arc = random_head_scores(rng, n);
          const Matrix rel_rows = row_softmax(random_matrix(rng, n, R));
          const Matrix head_rows = c == KdCase::k1b
                                       ? row_softmax(arc)
                                       : mfvi_second_order(arc, random_siblings(rng, n), 3);
          const Matrix student = row_log_softmax(random_joint_scores(rng, n, R));
          factorized = kd_loss_local(arc_marginal_table({head_rows, rel_rows}).unary, student).loss;
          exact = exact_kd_cross_entropy(
              enumerate_heads(joint_from_rows(log_of(head_rows), log_of(rel_rows)), R), student);
          break;
        }
        case KdCase::k4: {
          const int n = 1 + rng.below(6);
          const int L = 1 + rng.below(2);
          const SpanScoreTable teacher = random_span_table(rng, n, L);
          const Matrix student = row_log_softmax(random_matrix(rng, n, 1 + 4 * L));
          factorized = kd_loss_local(bioes_marginals(teacher), student).loss;
          exact = exact_kd_cross_entropy(enumerate_spans(teacher), student);
          break;
        }
      }
      t.see(std::abs(factorized - exact));
      t.count();
    }
    out.push_back(t.done());
  }

  Tracker self_grad_1a("case 1a self-distillation: gradient norm", 1e-7);
  Tracker self_loss_1a("case 1a self-distillation: loss = teacher entropy", 1e-7);
  Tracker self_grad_1b("case 1b self-distillation: gradient norm", 1e-7);
  Tracker self_loss_1b("case 1b self-distillation: loss = teacher entropy", 1e-7);
  Tracker self_model("case 1a self-distillation through hashed features: gradient norm", 1e-7);
  for (int k = 0; k < opt.instances; ++k) {
    {
      const ChainLattice lat = random_lattice(rng, 1 + rng.below(5), 1 + rng.below(3));
      const GlobalKdLoss kd = kd_loss_global(pairwise_marginals(lat), lat);
      self_grad_1a.see(lattice_norm(kd.grad));
      self_loss_1a.see(std::abs(kd.loss - exact_entropy(enumerate_chain(lat))));
    }
    {
      const int n = 1 + rng.below(4);
      const int R = 1 + rng.below(2);
      const ArcDistributions d{row_softmax(random_head_scores(rng, n)),
                               row_softmax(random_matrix(rng, n, R))};
      const Matrix joint = joint_from_rows(log_of(d.head_rows), log_of(d.rel_rows));
      const LocalKdLoss kd = kd_loss_local(arc_marginal_table(d).unary, row_log_softmax(joint));
      double norm = 0.0;
      for (double v : kd.grad.data()) norm += v * v;
      self_grad_1b.see(std::sqrt(norm));
      self_loss_1b.see(std::abs(kd.loss - exact_entropy(enumerate_heads(joint, R))));
    }
    {
      const Model m = random_model(rng, Family::kChainCrf, 1 + rng.below(2));
      SentenceRecord rec;
      rec.tokens = random_tokens(rng, 1 + rng.below(5));
      const SentenceFeatures feats(rec.tokens, m.params.hash_bits());
      const MarginalTable table = teacher_marginal_table(KdCase::k1a, m, feats, {});
      GradBuffer g(m.params);
      student_objective(KdCase::k1a, m, feats, &table, rec, 1.0, {}, 1.0, g);
      double norm = 0.0;
      for (std::size_t s : g.touched()) norm += g[s] * g[s];
      self_model.see(std::sqrt(norm));
    }
    for (Tracker* t : {&self_grad_1a, &self_loss_1a, &self_grad_1b, &self_loss_1b, &self_model}) {
      t->count();
    }
  }
  for (const Tracker* t : {&self_grad_1a, &self_loss_1a, &self_grad_1b, &self_loss_1b, &self_model}) {
    out.push_back(t->done());
  }

  Tracker identity("local temperature T=1 is the identity", 1e-12);
  Tracker argmax_inv("per-site argmax invariant under local temperature, T in 1..5", 0.0);
  Check differ;
  differ.name = "local and global temperature differ on a chain teacher (min gap)";
  differ.tolerance = 1e-6;
  differ.max_error = INFINITY;
  for (int k = 0; k < opt.instances; ++k) {
    const ChainLattice lat = random_lattice(rng, 2 + rng.below(4), 2 + rng.below(2));
    const MarginalTable table = pairwise_marginals(lat);
    identity.see(table_diff(apply_local_temperature(table, 1.0), table));
    double flips = 0.0;
    for (int T = 1; T <= 5; ++T) {
      const MarginalTable tempered = apply_local_temperature(table, T);
      for (std::size_t i = 0; i < table.unary.rows(); ++i) {
        if (argmax(table.unary.row(i)) != argmax(tempered.unary.row(i))) flips += 1.0;
      }
      for (std::size_t i = 0; i < table.pairwise.size(); ++i) {
        if (argmax(table.pairwise[i].data()) != argmax(tempered.pairwise[i].data())) flips += 1.0;
      }
    }
    argmax_inv.see(flips);
    const double gap = table_diff(apply_local_temperature(table, 2.0),
                                  pairwise_marginals(lat.scaled(0.5)));
    differ.max_error = std::min(differ.max_error, gap);
    if (!(gap > differ.tolerance)) differ.passed = false;
    ++differ.instances;
    identity.count();
    argmax_inv.count();
  }
  out.push_back(identity.done());
  out.push_back(differ);
  out.push_back(argmax_inv.done());
  return out;
}

// ---------------------------------------------------------------------------
// Finite differences

using ModelLoss = std::function<double(const Model&, GradBuffer&)>;

Check fd_weights(const std::string& name, Model model, const ModelLoss& loss, int probes, Rng& rng) {
  Tracker t(name, kFdTolerance);
  GradBuffer analytic(model.params);
  loss(model, analytic);
  std::vector<std::size_t> slots(analytic.touched().begin(), analytic.touched().end());
  std::sort(slots.begin(), slots.end());
  rng.shuffle(slots);
  if (slots.size() > static_cast<std::size_t>(probes)) slots.resize(probes);
  GradBuffer scratch(model.params);
  for (std::size_t s : slots) {
    const double w = model.params.weights[s];
    model.params.weights[s] = w + kFdStep;
    scratch.clear();
    const double up = loss(model, scratch);
    model.params.weights[s] = w - kFdStep;
    scratch.clear();
    const double down = loss(model, scratch);
    model.params.weights[s] = w;
    t.see(fd_relative_error(analytic[s], (up - down) / (2.0 * kFdStep)));
    t.count();
  }
  if (static_cast<int>(slots.size()) < probes) t.see(INFINITY);
  return t.done();
}

struct Sample {
  SentenceRecord record;
  SentenceFeatures feats;
};

TagSequence random_tags(Rng& rng, int n, int labels) {
  TagSequence t;
  for (int i = 0; i < n; ++i) t.tags.push_back(rng.below(labels));
  return t;
}

HeadAssignment random_heads(Rng& rng, int n, int relations) {
  HeadAssignment h;
  for (int i = 1; i <= n; ++i) {
    int head = rng.below(n);
    if (head >= i) ++head;
    h.heads.push_back(head);
    h.rels.push_back(rng.below(relations));
  }
  return h;
}

std::vector<Sample> random_samples(Rng& rng, bool parser, int labels) {
  std::vector<Sample> out;
  for (int k = 0; k < 4; ++k) {
    SentenceRecord rec;
    rec.tokens = random_tokens(rng, 1 + rng.below(5));
    const int n = rec.size();
    if (parser) {
      rec.gold = random_heads(rng, n, labels);
    } else {
      rec.gold = random_tags(rng, n, 1 + 4 * labels);
    }
    out.push_back({rec, SentenceFeatures(rec.tokens, kFdHashBits)});
  }
  return out;
}

std::vector<Check> grad_checks(const VerifyOptions& opt, Rng& rng) {
  std::vector<Check> out;
  const int P = opt.fd_weights;

  {
    const auto data = random_samples(rng, false, 2);
    auto run = [&](Family family, const std::string& name, auto&& fn) {
      out.push_back(fd_weights(name, random_model(rng, family, 2), [&](const Model& m, GradBuffer& g) {
        double total = 0.0;
        for (const auto& s : data) total += fn(m, s, g);
        return total;
      }, P, rng));
    };
    run(Family::kChainCrf, "chain NLL", [](const Model& m, const Sample& s, GradBuffer& g) {
      return chain_nll(m, s.feats, s.record.tags(), 1.0, g);
    });
    run(Family::kTokenMaxEnt, "maxent NLL", [](const Model& m, const Sample& s, GradBuffer& g) {
      return token_nll(m, s.feats, s.record.tags(), 1.0, g);
    });
    run(Family::kSpanNer, "span NLL", [](const Model& m, const Sample& s, GradBuffer& g) {
      return span_nll(m, s.feats, bioes_to_spans(s.record.tags()), 1.0, g);
    });
  }
  {
    const auto data = random_samples(rng, true, 2);
    auto run = [&](Family family, const std::string& name, auto&& fn) {
      out.push_back(fd_weights(name, random_model(rng, family, 2), [&](const Model& m, GradBuffer& g) {
        double total = 0.0;
        for (const auto& s : data) total += fn(m, s, g);
        return total;
      }, P, rng));
    };
    run(Family::kFirstOrderParser, "first-order parser NLL",
        [](const Model& m, const Sample& s, GradBuffer& g) {
          return first_order_nll(m, s.feats, s.record.heads(), 1.0, g);
        });
    run(Family::kSecondOrderParser, "second-order parser NLL (unrolled mean field)",
        [](const Model& m, const Sample& s, GradBuffer& g) {
          return second_order_nll(m, s.feats, s.record.heads(), 1.0, g);
        });
    run(Family::kArcMaxEnt, "arc-label maxent NLL", [](const Model& m, const Sample& s, GradBuffer& g) {
      return joint_arc_nll(m, s.feats, s.record.heads(), 1.0, g);
    });
  }

  // Score-space KD losses: probe random score entries.
  {
    Tracker t("kd_loss_local w.r.t. student scores", kFdTolerance);
    while (t.done().instances < P) {
      const int n = 1 + rng.below(5);
      const int L = 2 + rng.below(3);
      const Matrix teacher = row_softmax(random_matrix(rng, n, L));
      Matrix scores = random_matrix(rng, n, L);
      const LocalKdLoss kd = kd_loss_local(teacher, row_log_softmax(scores));
      for (int probe = 0; probe < 4; ++probe) {
        const std::size_t k = static_cast<std::size_t>(rng.below(static_cast<int>(scores.data().size())));
        const double v = scores.data()[k];
        scores.data()[k] = v + kFdStep;
        const double up = kd_loss_local(teacher, row_log_softmax(scores)).loss;
        scores.data()[k] = v - kFdStep;
        const double down = kd_loss_local(teacher, row_log_softmax(scores)).loss;
        scores.data()[k] = v;
        t.see(fd_relative_error(kd.grad.data()[k], (up - down) / (2.0 * kFdStep)));
        t.count();
      }
    }
    out.push_back(t.done());
  }
  {
    Tracker t("kd_loss_global w.r.t. student lattice scores", kFdTolerance);
    while (t.done().instances < P) {
      const int n = 1 + rng.below(5);
      const int L = 2 + rng.below(2);
      const MarginalTable teacher = pairwise_marginals(random_lattice(rng, n, L));
      ChainLattice student = random_lattice(rng, n, L);
      GlobalKdLoss kd = kd_loss_global(teacher, student);
      std::vector<double*> params = lattice_entries(student);
      std::vector<double*> grads = lattice_entries(kd.grad);
      for (int probe = 0; probe < 4; ++probe) {
        const std::size_t k = static_cast<std::size_t>(rng.below(static_cast<int>(params.size())));
        const double v = *params[k];
        *params[k] = v + kFdStep;
        const double up = kd_loss_global(teacher, student).loss;
        *params[k] = v - kFdStep;
        const double down = kd_loss_global(teacher, student).loss;
        *params[k] = v;
        t.see(fd_relative_error(*grads[k], (up - down) / (2.0 * kFdStep)));
        t.count();
      }
    }
    out.push_back(t.done());
  }

  // Full case pipelines: teacher table fixed, student objective through features.
  bool student_side = false;
  for (KdCase c : {KdCase::k1a, KdCase::k1b, KdCase::k2a, KdCase::k2b, KdCase::k3, KdCase::k4}) {
    const bool parser = c == KdCase::k1b || c == KdCase::k2b;
    const int labels = 2;
    const auto data = random_samples(rng, parser, labels);
    const Model teacher = random_model(rng, teacher_family(c), labels, 1.0);
    TemperatureConfig temp{2.0, student_side ? TemperatureMode::kGlobal : TemperatureMode::kLocal,
                           student_side};
    student_side = !student_side;
    std::vector<MarginalTable> tables;
    for (const auto& s : data) tables.push_back(teacher_marginal_table(c, teacher, s.feats, temp));
    const std::string name = "case " + std::string(case_name(c)) + " pipeline (lambda 0.6, T 2" +
                             (temp.student_side ? ", student-side" : "") + ")";
    out.push_back(fd_weights(name, random_model(rng, student_family(c), labels),
                             [&](const Model& m, GradBuffer& g) {
                               double total = 0.0;
                               for (std::size_t k = 0; k < data.size(); ++k) {
                                 total += student_objective(c, m, data[k].feats, &tables[k],
                                                            data[k].record, 0.6, temp, 1.0, g);
                               }
                               return total;
                             },
                             P, rng));
  }
  return out;
}

}  // namespace

std::string_view suite_name(Suite s) {
  switch (s) {
    case Suite::kChain: return "chain";
    case Suite::kSpans: return "spans";
    case Suite::kHeads: return "heads";
    case Suite::kKd: return "kd";
    case Suite::kGrad: return "grad";
  }
  return "?";
}

std::optional<Suite> parse_suite(std::string_view name) {
  for (Suite s : all_suites()) {
    if (suite_name(s) == name) return s;
  }
  return std::nullopt;
}

std::vector<Suite> all_suites() {
  return {Suite::kChain, Suite::kSpans, Suite::kHeads, Suite::kKd, Suite::kGrad};
}

bool SuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

SuiteReport run_suite(Suite suite, const VerifyOptions& options) {
  if (options.instances < 1 || options.fd_weights < 1) {
    throw UsageError("verify needs at least one instance and one probed weight");
  }
  const auto begin = std::chrono::steady_clock::now();
  Rng rng(options.seed * 1000003ULL + static_cast<std::uint64_t>(suite));
  SuiteReport report;
  report.suite = suite;
  switch (suite) {
    case Suite::kChain: report.checks = chain_checks(options, rng); break;
    case Suite::kSpans: report.checks = span_checks(options, rng); break;
    case Suite::kHeads: report.checks = head_checks(options, rng); break;
    case Suite::kKd: report.checks = kd_checks(options, rng); break;
    case Suite::kGrad: report.checks = grad_checks(options, rng); break;
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
  return report;
}

}  // namespace structkd
