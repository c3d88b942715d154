// Acceptance gate: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "structkd/chain_crf.hpp"
#include "structkd/corpus.hpp"
#include "structkd/distill.hpp"
#include "structkd/synth.hpp"
#include "structkd/train_eval.hpp"
#include "structkd/verify.hpp"

using namespace structkd;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

int failures = 0;

void report(int id, const std::string& title, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("criterion %d [%s]: %s (%s)\n", id, title.c_str(), pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c, d);
  return buf;
}

// Checks of `r` whose names contain any of `keys`.
std::vector<Check> select(const SuiteReport& r, const std::vector<std::string>& keys) {
  std::vector<Check> out;
  for (const Check& c : r.checks) {
    for (const auto& k : keys) {
      if (c.name.find(k) != std::string::npos) {
        out.push_back(c);
        break;
      }
    }
  }
  return out;
}

bool all_pass(const std::vector<Check>& checks, double* worst = nullptr) {
  bool ok = !checks.empty();
  double w = 0.0;
  for (const Check& c : checks) {
    ok = ok && c.passed;
    w = std::max(w, c.max_error);
  }
  if (worst) *worst = w;
  return ok;
}

void print_failed(const std::vector<Check>& checks) {
  for (const Check& c : checks) {
    if (!c.passed) std::printf("    failed: %s (max error %.3g > %.3g)\n", c.name.c_str(), c.max_error, c.tolerance);
  }
}

// --- criterion 6 / 7 experiment -------------------------------------------

constexpr int kSeeds = 5;

struct Corpus {
  Dataset train;
  Dataset dev;
  Dataset test;
  Dataset unlabeled;
  SynthCorpus source;
};

Corpus make_corpus(SynthTask task) {
  SynthConfig cfg;
  cfg.task = task;
  cfg.sentences = 4000;
  cfg.max_len = 12;
  cfg.types = 2;
  cfg.seed = 2024;
  Corpus c;
  c.source = synth_corpus(cfg);
  auto parts = split_dataset(c.source.data, {2000, 500, 500, 1000});
  c.train = parts[0];
  c.dev = parts[1];
  c.test = parts[2];
  c.unlabeled = strip_gold(parts[3]);
  return c;
}

TrainConfig base_config() {
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.learning_rate = 0.1;
  cfg.batch_size = 32;
  cfg.hash_bits = 18;
  return cfg;
}

// Tempered tables of the planted model that generated the corpus.
TeacherTables planted_teacher(const Corpus& c, const DistillConfig& d) {
  if (c.source.chain) {
    const PlantedChain* planted = &*c.source.chain;
    return [planted, d](const SentenceRecord& s) {
      return chain_teacher_table(d.kd_case, planted->lattice(word_ids(s.tokens)), d.temperature);
    };
  }
  const PlantedSpans* planted = &*c.source.spans;
  return [planted, d](const SentenceRecord& s) {
    return span_teacher_table(planted->table(word_ids(s.tokens)), d.temperature);
  };
}

double mean_dev(Family family, const Dataset& train_data, const Dataset& dev,
                const Corpus* teacher, const std::optional<DistillConfig>& distill) {
  double total = 0.0;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    TrainConfig cfg = base_config();
    cfg.seed = static_cast<std::uint64_t>(seed);
    const TrainResult r = distill ? train(family, train_data, dev, cfg,
                                          planted_teacher(*teacher, *distill), *distill)
                                  : train(family, train_data, dev, cfg);
    total += r.manifest.best_dev_metric;
  }
  return 100.0 * total / kSeeds;
}

struct GridResult {
  double best_mean = -1.0;
  DistillConfig best;
};

GridResult grid_search(KdCase kd_case, const Corpus& corpus) {
  GridResult out;
  for (int T = 1; T <= 5; ++T) {
    for (double rate : {0.5, 1.0, 1.5}) {
      DistillConfig d;
      d.kd_case = kd_case;
      d.temperature.temperature = T;
      d.anneal_rate = rate;
      const double m = mean_dev(student_family(kd_case), corpus.train, corpus.dev, &corpus, d);
      std::printf("    case %s T=%d rate=%.1f: mean dev F1 %.2f\n",
                  std::string(case_name(kd_case)).c_str(), T, rate, m);
      if (m > out.best_mean) {
        out.best_mean = m;
        out.best = d;
      }
    }
  }
  return out;
}

// --- criterion 8 ------------------------------------------------------------

SpanSet random_span_set(Rng& rng, int n, int types) {
  std::vector<Span> spans;
  int i = 1;
  while (i <= n) {
    if (rng.below(3) == 0) {
      ++i;
      continue;
    }
    const int end = i + rng.below(n - i + 1);
    spans.push_back({i, end, rng.below(types)});
    i = end + 1;
  }
  return SpanSet{spans};
}

}  // namespace

int main() {
  const auto start = Clock::now();
  VerifyOptions options;
  options.instances = 100;
  options.fd_weights = 50;

  // 1
  {
    const SuiteReport kd = run_suite(Suite::kKd, options);
    const auto checks = select(kd, {"factorized KD loss"});
    double worst = 0.0;
    const bool ok = all_pass(checks, &worst) && checks.size() == 6 && kd.seconds < 60.0;
    report(1, "factorized KD loss equals enumerated cross-entropy", ok,
           fmt("6 cases x 100 pairs, max abs error %.2e <= 1e-9, suite %.2f s < 60 s", worst,
               kd.seconds));
    print_failed(checks);
  }
  // 2
  {
    std::vector<Check> checks;
    for (Suite s : {Suite::kChain, Suite::kSpans, Suite::kHeads}) {
      const SuiteReport r = run_suite(s, options);
      checks.insert(checks.end(), r.checks.begin(), r.checks.end());
    }
    double worst = 0.0;
    const bool ok = all_pass(checks, &worst);
    report(2, "inference matches enumeration", ok,
           fmt("%.0f checks x 100 instances, max abs error %.2e, BIOES edge marginals exactly 0",
               static_cast<double>(checks.size()), worst));
    print_failed(checks);
  }
  // 3
  {
    const SuiteReport r = run_suite(Suite::kGrad, options);
    double worst = 0.0;
    bool ok = all_pass(r.checks, &worst) && r.checks.size() == 14;
    for (const Check& c : r.checks) ok = ok && c.instances >= 50;
    report(3, "gradients match central finite differences", ok,
           fmt("%.0f losses, >= 50 probes each, max relative error %.2e <= 1e-4",
               static_cast<double>(r.checks.size()), worst));
    print_failed(r.checks);
  }
  // 4 and 5
  {
    const SuiteReport kd = run_suite(Suite::kKd, options);
    const auto self = select(kd, {"self-distillation"});
    double worst = 0.0;
    const bool ok4 = all_pass(self, &worst) && self.size() == 5;
    report(4, "self-distillation stationarity (1a, 1b)", ok4,
           fmt("gradient norm and |loss - entropy| max %.2e <= 1e-7", worst));
    print_failed(self);

    const auto temp = select(kd, {"temperature"});
    double gap = 0.0;
    for (const Check& c : temp) {
      if (c.name.find("differ") != std::string::npos) gap = c.max_error;
    }
    const bool ok5 = all_pass(temp) && temp.size() == 3;
    report(5, "temperature semantics", ok5,
           fmt("local T=1 identity, min local/global gap %.2e > 1e-6, argmax invariant for T=1..5",
               gap));
    print_failed(temp);
  }
  // 6 and 7
  {
    const auto t0 = Clock::now();
    const Corpus chain = make_corpus(SynthTask::kChain);
    const Corpus spans = make_corpus(SynthTask::kSpans);

    const double maxent_plain = mean_dev(Family::kTokenMaxEnt, chain.train, chain.dev, nullptr, {});
    const double crf_plain = mean_dev(Family::kChainCrf, chain.train, chain.dev, nullptr, {});
    const double span_maxent_plain =
        mean_dev(Family::kTokenMaxEnt, spans.train, spans.dev, nullptr, {});
    std::printf("    no KD: chain corpus maxent %.2f, CRF %.2f; span corpus maxent %.2f\n",
                maxent_plain, crf_plain, span_maxent_plain);

    const GridResult g2a = grid_search(KdCase::k2a, chain);
    const GridResult g1a = grid_search(KdCase::k1a, chain);
    const GridResult g4 = grid_search(KdCase::k4, spans);
    const double elapsed6 = seconds_since(t0);

    const bool ok6 = g2a.best_mean >= maxent_plain && g1a.best_mean >= crf_plain - 0.2 &&
                     g4.best_mean >= span_maxent_plain - 0.2 && elapsed6 < 600.0;
    std::ostringstream d6;
    d6 << std::fixed;
    d6.precision(2);
    d6 << "mean dev F1 over 5 seeds, KD vs none: 2a " << g2a.best_mean << " vs " << maxent_plain
       << ", 1a " << g1a.best_mean << " vs " << crf_plain << ", 4 " << g4.best_mean << " vs "
       << span_maxent_plain << "; " << elapsed6 << " s";
    report(6, "distillation does not hurt, 2a helps", ok6, d6.str());

    const auto t1 = Clock::now();
    Dataset augmented = chain.train;
    for (const auto& s : chain.unlabeled.sentences) {
      SentenceRecord rec = s;
      rec.gold = viterbi(chain.source.chain->lattice(word_ids(s.tokens)));
      rec.provenance = Provenance::kPseudoLabeled;
      augmented.sentences.push_back(std::move(rec));
    }
    const double with_unlabeled =
        mean_dev(Family::kTokenMaxEnt, augmented, chain.dev, &chain, g2a.best);
    const bool ok7 = with_unlabeled >= g2a.best_mean - 0.2;
    report(7, "pseudo-labeled unlabeled data does not degrade 2a", ok7,
           fmt("mean dev F1 %.2f with 1000 pseudo-labeled sentences vs %.2f without; %.1f s",
               with_unlabeled, g2a.best_mean, seconds_since(t1)));
  }
  // 8
  {
    Rng rng(8);
    int mismatches = 0;
    for (int k = 0; k < 10000; ++k) {
      const int n = 1 + rng.below(15);
      const SpanSet s = random_span_set(rng, n, 1 + rng.below(4));
      if (!(bioes_to_spans(spans_to_bioes(s, n)) == s)) ++mismatches;
    }
    bool metrics = true;
    auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
    const SpanSet gold{{{1, 1, 0}, {3, 4, 1}}};
    const Prf same = entity_f1(gold, gold);
    metrics = metrics && near(same.precision, 1) && near(same.recall, 1) && near(same.f1, 1);
    const Prf none = entity_f1(SpanSet{}, gold);
    metrics = metrics && none.precision == 0.0 && none.recall == 0.0 && none.f1 == 0.0;
    const Prf half = entity_f1(SpanSet{{{1, 1, 0}, {5, 5, 0}}}, gold);
    metrics = metrics && near(half.precision, 0.5) && near(half.recall, 0.5) && near(half.f1, 0.5);
    const HeadAssignment h{{2, 0, 2}, {0, 1, 0}};
    const Attachment a1 = uas_las(h, h);
    metrics = metrics && a1.uas == 1.0 && a1.las == 1.0;
    const Attachment a2 = uas_las(HeadAssignment{{2, 0, 2}, {1, 0, 1}}, h);
    metrics = metrics && a2.uas == 1.0 && a2.las == 0.0;
    const Attachment a3 =
        uas_las(HeadAssignment{{2, 0}, {0, 0}}, HeadAssignment{{2, 1}, {0, 0}});
    metrics = metrics && a3.uas == 0.5 && a3.las == 0.5;
    report(8, "BIOES round trip and metric formulas", mismatches == 0 && metrics,
           fmt("%.0f / 10000 round-trip mismatches, metric examples ", mismatches) +
               (metrics ? "ok" : "wrong"));
  }

  std::printf("acceptance: %d failing criteria, %.1f s total\n", failures, seconds_since(start));
  return failures == 0 ? 0 : 1;
}
