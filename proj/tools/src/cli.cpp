#include "structkd_cli/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "structkd/corpus.hpp"
#include "structkd/distill.hpp"
#include "structkd/errors.hpp"
#include "structkd/model.hpp"
#include "structkd/synth.hpp"
#include "structkd/train_eval.hpp"
#include "structkd/verify.hpp"

namespace structkd::cli {

namespace {

using nlohmann::ordered_json;

const std::map<std::string, Family> kTasks{
    {"ner-crf", Family::kChainCrf},           {"ner-maxent", Family::kTokenMaxEnt},
    {"ner-span", Family::kSpanNer},           {"dep-1st", Family::kFirstOrderParser},
    {"dep-2nd", Family::kSecondOrderParser},  {"dep-arc", Family::kArcMaxEnt},
};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write '" + path + "'");
  return out;
}

// Parser data: relation ids re-expressed in `relations`. Unknown names are
// added when `extend` is set and otherwise map to -1, which never matches.
Dataset align_relations(const Dataset& raw, LabelAlphabet& relations, bool extend) {
  Dataset out;
  for (const auto& s : raw.sentences) {
    SentenceRecord rec = s;
    HeadAssignment h = s.heads();
    for (int& r : h.rels) {
      const std::string& name = raw.labels.name(r);
      if (extend) {
        r = relations.add(name);
      } else {
        r = relations.find(name).value_or(-1);
      }
    }
    rec.gold = std::move(h);
    out.sentences.push_back(std::move(rec));
  }
  out.labels = relations;
  return out;
}

// Reads a corpus in the format of `family` and expresses its labels in the
// label space `labels` (entity types or relations).
Dataset read_corpus(const std::string& path, Family family, LabelAlphabet& labels, bool extend) {
  std::ifstream in = open_input(path);
  if (is_ner_family(family)) {
    BioesScheme scheme(labels);
    Dataset data = canonicalize_ner(read_conll_ner(in), scheme, extend);
    labels = scheme.types();
    return data;
  }
  return align_relations(read_conllu(in), labels, extend);
}

void write_corpus(const std::string& path, Family family, const Dataset& data) {
  std::ofstream out = open_output(path);
  if (is_ner_family(family)) {
    write_conll_ner(out, data);
  } else {
    write_conllu(out, data);
  }
}

void write_run(const std::string& model_path, const TrainResult& result) {
  save_model_file(model_path, result.model);
  open_output(model_path + ".manifest.json") << result.manifest.to_json() << '\n';
  open_output(model_path + ".history.csv") << result.manifest.history_csv();
}

struct TrainFlags {
  std::string train;
  std::string dev;
  std::string out;
  TrainConfig config;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--train", f.train, "training corpus")->required()->check(CLI::ExistingFile);
  cmd->add_option("--dev", f.dev, "development corpus")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "output model path")->required();
  cmd->add_option("--epochs", f.config.epochs)->check(CLI::NonNegativeNumber);
  cmd->add_option("--lr", f.config.learning_rate)->check(CLI::PositiveNumber);
  cmd->add_option("--batch", f.config.batch_size)->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.config.seed);
  cmd->add_option("--hash-bits", f.config.hash_bits)->check(CLI::Range(8, 28));
  cmd->add_option("--mfvi-iters", f.config.mfvi_iterations)->check(CLI::NonNegativeNumber);
  cmd->add_flag("--bioes-constrained", f.config.bioes_constrained,
                "mask BIOES-invalid transitions in CRF models");
}

int train_plain(Family family, const TrainFlags& f, std::ostream& out) {
  LabelAlphabet labels;
  const Dataset train_data = read_corpus(f.train, family, labels, true);
  const Dataset dev = read_corpus(f.dev, family, labels, false);
  const TrainResult result = train(family, train_data, dev, f.config);
  write_run(f.out, result);
  out << "best epoch " << result.manifest.best_epoch << ", dev " << result.manifest.metric << ' '
      << std::fixed << std::setprecision(2) << 100.0 * result.manifest.best_dev_metric << '\n';
  return kExitOk;
}

void print_table(std::ostream& out, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    width.resize(std::max(width.size(), r.size()), 0);
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) {
      std::string cell = r[c];
      if (c + 1 < r.size()) cell.resize(width[c] + 2, ' ');
      line += cell;
    }
    out << line << '\n';
  }
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string scientific(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(2) << v;
  return s.str();
}

int run_eval(const std::string& model_path, const std::string& test_path, bool json,
             std::ostream& out) {
  const Model model = load_model_file(model_path);
  LabelAlphabet labels = model.labels;
  const Dataset test = read_corpus(test_path, model.family, labels, false);
  const Evaluation e = evaluate(model, test);
  if (json) {
    ordered_json doc{{"model", model_path}, {"test", test_path}, {"sentences", test.sentences.size()}};
    if (e.dependency) {
      doc["uas"] = 100.0 * e.attachment.uas;
      doc["las"] = 100.0 * e.attachment.las;
    } else {
      doc["precision"] = 100.0 * e.ner.precision;
      doc["recall"] = 100.0 * e.ner.recall;
      doc["f1"] = 100.0 * e.ner.f1;
    }
    out << doc.dump(2) << '\n';
  } else if (e.dependency) {
    print_table(out, {{"metric", "value"},
                      {"UAS", fixed(100.0 * e.attachment.uas, 2)},
                      {"LAS", fixed(100.0 * e.attachment.las, 2)}});
  } else {
    print_table(out, {{"metric", "value"},
                      {"precision", fixed(100.0 * e.ner.precision, 2)},
                      {"recall", fixed(100.0 * e.ner.recall, 2)},
                      {"F1", fixed(100.0 * e.ner.f1, 2)}});
  }
  return kExitOk;
}

int run_verify(const std::string& suite, const VerifyOptions& options, bool json, std::ostream& out) {
  std::vector<Suite> suites;
  if (suite == "all") {
    suites = all_suites();
  } else {
    suites.push_back(*parse_suite(suite));
  }
  bool passed = true;
  std::vector<std::vector<std::string>> rows{
      {"suite", "check", "n", "max error", "tolerance", "status"}};
  ordered_json doc = ordered_json::array();
  for (Suite s : suites) {
    const SuiteReport report = run_suite(s, options);
    passed = passed && report.passed();
    for (const Check& c : report.checks) {
      rows.push_back({std::string(suite_name(s)), c.name, std::to_string(c.instances),
                      scientific(c.max_error), scientific(c.tolerance), c.passed ? "ok" : "FAIL"});
      doc.push_back({{"suite", suite_name(s)},
                     {"check", c.name},
                     {"instances", c.instances},
                     {"max_error", c.max_error},
                     {"tolerance", c.tolerance},
                     {"passed", c.passed}});
    }
  }
  if (json) {
    out << doc.dump(2) << '\n';
  } else {
    print_table(out, rows);
    out << (passed ? "all checks passed" : "verification FAILED") << '\n';
  }
  return passed ? kExitOk : kExitFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Structured knowledge distillation toolkit", "structkd"};
  app.require_subcommand(1, 1);

  std::vector<std::string> task_names;
  for (const auto& [name, _] : kTasks) task_names.push_back(name);

  // train-teacher
  TrainFlags teacher_flags;
  std::string teacher_task;
  auto* train_teacher = app.add_subcommand("train-teacher", "train a teacher model on gold data");
  train_teacher->add_option("--task", teacher_task)
      ->required()
      ->check(CLI::IsMember({"ner-crf", "ner-maxent", "ner-span", "dep-1st", "dep-2nd"}));
  add_train_flags(train_teacher, teacher_flags);

  // train-student
  TrainFlags student_flags;
  std::string student_task;
  auto* train_student =
      app.add_subcommand("train-student", "train a student model on gold data without a teacher");
  train_student->add_option("--task", student_task)
      ->required()
      ->check(CLI::IsMember({"ner-crf", "ner-maxent", "dep-arc"}));
  add_train_flags(train_student, student_flags);

  // distill
  TrainFlags distill_flags;
  DistillConfig distill_cfg;
  std::string case_text;
  std::string teacher_path;
  std::string unlabeled_path;
  std::string temp_mode = "local";
  auto* distill_cmd = app.add_subcommand("distill", "train a student from a teacher");
  distill_cmd->add_option("--case", case_text)
      ->required()
      ->check(CLI::IsMember({"1a", "1b", "2a", "2b", "3", "4"}));
  distill_cmd->add_option("--teacher", teacher_path)->required()->check(CLI::ExistingFile);
  distill_cmd->add_option("--unlabeled", unlabeled_path, "extra sentences to pseudo-label")
      ->check(CLI::ExistingFile);
  distill_cmd->add_option("--temperature", distill_cfg.temperature.temperature)
      ->check(CLI::PositiveNumber);
  distill_cmd->add_option("--temp-mode", temp_mode)->check(CLI::IsMember({"local", "global"}));
  distill_cmd->add_flag("--student-side-temperature", distill_cfg.temperature.student_side,
                        "also divide the student's scores by the temperature");
  distill_cmd->add_option("--anneal-rate", distill_cfg.anneal_rate)->check(CLI::PositiveNumber);
  add_train_flags(distill_cmd, distill_flags);

  // eval
  std::string eval_model;
  std::string eval_test;
  bool eval_json = false;
  auto* eval_cmd = app.add_subcommand("eval", "score a model on a labeled corpus");
  eval_cmd->add_option("--model", eval_model)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--test", eval_test)->required()->check(CLI::ExistingFile);
  eval_cmd->add_flag("--json", eval_json);

  // pseudo-label
  std::string pl_teacher;
  std::string pl_in;
  std::string pl_out;
  auto* pl_cmd = app.add_subcommand("pseudo-label", "label a corpus with a teacher's best output");
  pl_cmd->add_option("--teacher", pl_teacher)->required()->check(CLI::ExistingFile);
  pl_cmd->add_option("--in", pl_in)->required()->check(CLI::ExistingFile);
  pl_cmd->add_option("--out", pl_out)->required();

  // verify
  std::string suite = "all";
  VerifyOptions verify_options;
  bool verify_json = false;
  auto* verify_cmd = app.add_subcommand("verify", "run oracle-equivalence and gradient checks");
  verify_cmd->add_option("--suite", suite)
      ->check(CLI::IsMember({"chain", "spans", "heads", "kd", "grad", "all"}));
  verify_cmd->add_option("--instances", verify_options.instances)->check(CLI::PositiveNumber);
  verify_cmd->add_option("--fd-weights", verify_options.fd_weights)->check(CLI::PositiveNumber);
  verify_cmd->add_option("--seed", verify_options.seed);
  verify_cmd->add_flag("--json", verify_json);

  // synth
  SynthConfig synth_cfg;
  std::string synth_task = "chain";
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "sample a corpus from a planted model");
  synth_cmd->add_option("--task", synth_task)->check(CLI::IsMember({"chain", "spans", "heads"}));
  synth_cmd->add_option("--sentences", synth_cfg.sentences)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--max-len", synth_cfg.max_len)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--types", synth_cfg.types, "entity types or relations")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--vocab", synth_cfg.vocab)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", synth_cfg.seed);
  synth_cmd->add_option("--out", synth_out)->required();

  std::vector<std::string> argv_storage{"structkd"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*train_teacher) return train_plain(kTasks.at(teacher_task), teacher_flags, out);
    if (*train_student) return train_plain(kTasks.at(student_task), student_flags, out);

    if (*distill_cmd) {
      distill_cfg.kd_case = *parse_case(case_text);
      distill_cfg.temperature.mode =
          temp_mode == "global" ? TemperatureMode::kGlobal : TemperatureMode::kLocal;
      const Model teacher = load_model_file(teacher_path);
      require_family(teacher, teacher_family(distill_cfg.kd_case), "teacher for case " + case_text);
      const Family family = student_family(distill_cfg.kd_case);
      LabelAlphabet labels = teacher.labels;
      Dataset train_data = read_corpus(distill_flags.train, teacher.family, labels, false);
      const Dataset dev = read_corpus(distill_flags.dev, teacher.family, labels, false);
      if (!unlabeled_path.empty()) {
        const Dataset extra =
            strip_gold(read_corpus(unlabeled_path, teacher.family, labels, false));
        for (const auto& s : extra.sentences) train_data.sentences.push_back(pseudo_label(teacher, s));
      }
      const TrainResult result =
          train(family, train_data, dev, distill_flags.config, &teacher, distill_cfg);
      write_run(distill_flags.out, result);
      out << "best epoch " << result.manifest.best_epoch << ", dev " << result.manifest.metric
          << ' ' << fixed(100.0 * result.manifest.best_dev_metric, 2) << '\n';
      return kExitOk;
    }

    if (*eval_cmd) return run_eval(eval_model, eval_test, eval_json, out);

    if (*pl_cmd) {
      const Model teacher = load_model_file(pl_teacher);
      LabelAlphabet labels = teacher.labels;
      Dataset data = read_corpus(pl_in, teacher.family, labels, false);
      for (auto& s : data.sentences) s = pseudo_label(teacher, s);
      write_corpus(pl_out, teacher.family, data);
      out << "labeled " << data.sentences.size() << " sentences\n";
      return kExitOk;
    }

    if (*verify_cmd) return run_verify(suite, verify_options, verify_json, out);

    if (*synth_cmd) {
      synth_cfg.task = synth_task == "chain"   ? SynthTask::kChain
                       : synth_task == "spans" ? SynthTask::kSpans
                                               : SynthTask::kHeads;
      const Dataset data = synth_generate(synth_cfg);
      write_corpus(synth_out,
                   synth_cfg.task == SynthTask::kHeads ? Family::kFirstOrderParser : Family::kChainCrf,
                   data);
      out << "wrote " << data.sentences.size() << " sentences\n";
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace structkd::cli
