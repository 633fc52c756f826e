#include "advstance/evaluation.hpp"

#include "advstance/checkpoint.hpp"
#include "advstance/errors.hpp"
#include "advstance/rng.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

namespace advstance {

std::vector<std::string> Corpora::topics() const {
  std::set<std::string> all;
  for (const auto& [t, _] : labeled) all.insert(t);
  for (const auto& [t, _] : unlabeled) all.insert(t);
  return {all.begin(), all.end()};
}

std::shared_ptr<const Tokenizer> build_corpus_tokenizer(const Corpora& corpora,
                                                        const std::map<std::string, std::string>& descriptions,
                                                        std::size_t max_size) {
  std::vector<std::string> texts;
  for (const auto& [_, records] : corpora.labeled) {
    for (const auto& r : records) texts.push_back(r.text);
  }
  for (const auto& [_, records] : corpora.unlabeled) {
    for (const auto& r : records) texts.push_back(r.text);
  }
  for (const auto& [_, d] : descriptions) texts.push_back(d);
  return std::make_shared<WordTokenizer>(WordTokenizer::build(texts, max_size));
}

SeedStreams seed_streams(std::uint64_t seed) {
  Rng root(seed);
  SeedStreams s{};
  s.split = root.next();
  s.init = root.next();
  s.train = root.next();
  return s;
}

MetricReport evaluate(const StanceClassifier& classifier, std::span<const LabeledExample> examples,
                      FavgClasses classes) {
  const auto encoded = classifier.encode_all(examples);
  const auto pred = classifier.predict(encoded);
  std::vector<Stance> gold;
  gold.reserve(examples.size());
  for (const auto& ex : examples) gold.push_back(ex.stance);
  return score(pred, gold, classes);
}

SeedRun train_seed(const TaskSpec& spec, const TrainConfig& cfg, const ModelSetup& setup, const Corpora& corpora,
                   std::uint64_t seed, const EpochCallback& on_epoch) {
  spec.validate();
  cfg.validate();
  if (!setup.tokenizer) throw ConfigError("model setup has no tokenizer");
  const SeedStreams streams = seed_streams(seed);

  SeedRun run;
  run.seed = seed;
  run.splits = build_splits(spec, corpora.labeled, corpora.unlabeled, setup.ratios, streams.split);

  ClassifierOptions options;
  options.limits = PairLimits{cfg.max_desc_tokens, cfg.max_text_tokens};
  options.use_description = setup.use_description;
  run.classifier = std::make_unique<StanceClassifier>(
      make_model_config(cfg, setup.encoder, setup.use_geo, setup.normalize_adjacency), spec, setup.tokenizer,
      setup.descriptions, setup.graph, streams.init, options);
  if (!setup.encoder_weights.empty()) {
    load_prefixed_parameters(run.classifier->model().params(), load_archive(setup.encoder_weights), "encoder.");
  }

  Trainer trainer(*run.classifier, cfg, streams.train);
  std::function<void(const EpochRecord&)> cb;
  if (on_epoch) cb = [&](const EpochRecord& r) { on_epoch(seed, r); };
  run.fit = trainer.fit(run.splits, cb);
  run.test = evaluate(*run.classifier, run.splits.test_labeled, cfg.favg_classes);
  return run;
}

TaskReport run_task(const TaskSpec& spec, const TrainConfig& cfg, const ModelSetup& setup, const Corpora& corpora,
                    const EpochCallback& on_epoch) {
  TaskReport report;
  report.task = spec.name();
  std::vector<MetricReport> scores;
  for (std::uint64_t seed : cfg.seeds) {
    SeedRun run = train_seed(spec, cfg, setup, corpora, seed, on_epoch);
    report.per_seed.push_back({seed, run.test});
    scores.push_back(run.test);
  }
  report.mean = mean_report(scores);
  return report;
}

std::vector<TaskSpec> suite_tasks(TaskMode mode, const std::vector<std::string>& topics,
                                  const std::vector<std::uint64_t>& seeds) {
  if (topics.size() < 2) throw ConfigError("a suite needs at least two topics");
  std::vector<TaskSpec> out;
  if (mode == TaskMode::cross_target) {
    for (const auto& src : topics) {
      for (const auto& dst : topics) {
        if (src == dst) continue;
        out.push_back(TaskSpec{mode, {src}, dst, seeds});
      }
    }
  } else {
    if (topics.size() < 3) throw ConfigError("zero-shot suite needs at least three topics (two or more sources)");
    for (const auto& dst : topics) {
      TaskSpec spec{mode, {}, dst, seeds};
      for (const auto& t : topics) {
        if (t != dst) spec.source_topics.push_back(t);
      }
      out.push_back(std::move(spec));
    }
  }
  for (const auto& s : out) s.validate();
  return out;
}

std::vector<TaskReport> run_suite(TaskMode mode, const Corpora& corpora, const TrainConfig& cfg,
                                  const ModelSetup& setup, const EpochCallback& on_epoch) {
  std::vector<TaskReport> out;
  for (const auto& spec : suite_tasks(mode, corpora.topics(), cfg.seeds)) {
    out.push_back(run_task(spec, cfg, setup, corpora, on_epoch));
  }
  return out;
}

namespace {

std::string tsv_line(const std::string& task, const std::string& seed, const MetricReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\n", r.per_class_f1[0],
                r.per_class_f1[1], r.per_class_f1[2], r.f_avg, r.micro_f1, r.macro_f1, r.f_m);
  return task + "\t" + seed + buf;
}

}  // namespace

std::string format_report_tsv(const std::vector<TaskReport>& reports) {
  std::string out = "task\tseed\tF_favor\tF_against\tF_none\tF_avg\tmicro\tmacro\tF_m\n";
  for (const auto& t : reports) {
    for (const auto& s : t.per_seed) out += tsv_line(t.task, std::to_string(s.seed), s.report);
    out += tsv_line(t.task, "mean", t.mean);
  }
  return out;
}

std::string format_report_table(const std::vector<TaskReport>& reports) {
  std::size_t width = 4;
  for (const auto& t : reports) width = std::max(width, t.task.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s  %7s  %7s  %5s\n", static_cast<int>(width), "task", "F_avg", "F_m", "seeds");
  out += buf;
  for (const auto& t : reports) {
    std::snprintf(buf, sizeof(buf), "%-*s  %7.2f  %7.2f  %5zu\n", static_cast<int>(width), t.task.c_str(),
                  100.0 * t.mean.f_avg, 100.0 * t.mean.f_m, t.per_seed.size());
    out += buf;
  }
  return out;
}

}  // namespace advstance
