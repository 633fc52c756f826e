#include "advstance/runner.hpp"

#include "advstance/errors.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace advstance {

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string(), 0, "", "cannot read file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

Registry make_registry(const std::map<std::string, std::string>& descriptions, const GeoGraph& graph) {
  Registry r;
  for (const auto& [t, _] : descriptions) r.topics.insert(t);
  r.regions = graph.region_set();
  return r;
}

std::string rule_for(const DataError& e) {
  if (e.field() == "topic" && e.detail().starts_with("unknown topic")) return "TOPIC_UNKNOWN";
  if (e.field() == "geo") return "GEO_UNKNOWN";
  if (e.field() == "stance") return "STANCE_INVALID";
  return "PARSE_ERROR";
}

template <typename Parse>
void scan_records(const std::filesystem::path& path, Parse parse, std::vector<Finding>& findings,
                  std::set<std::string>& topics_seen) {
  const std::string content = read_text(path);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    const std::string line = content.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? content.size() : nl + 1;
    ++line_no;
    try {
      for (const auto& rec : parse(line)) topics_seen.insert(rec.topic);
    } catch (const DataError& e) {
      findings.push_back({path.string(), line_no, rule_for(e), e.detail()});
    }
  }
}

void write_report(const RunLayout& layout, const std::string& stem, const std::vector<TaskReport>& reports) {
  write_text(layout.reports / (stem + ".tsv"), format_report_tsv(reports));
  write_text(layout.reports / (stem + ".txt"), format_report_table(reports));
}

std::string log_text(const FitResult& fit) {
  std::string out;
  for (const auto& r : fit.history) out += format_epoch_line(r) + "\n";
  return out;
}

}  // namespace

GeoGraph load_run_graph(const RunConfig& cfg) {
  if (cfg.data.geo_graph.empty()) return us_states_graph();
  return load_geo_graph(cfg.data.geo_graph).with_unknown();
}

LoadedData load_run_data(const RunConfig& cfg) {
  if (cfg.data.descriptions.empty()) throw ConfigError("data.descriptions is not set");
  LoadedData data{{}, load_descriptions(cfg.data.descriptions), load_run_graph(cfg)};
  const Registry registry = make_registry(data.descriptions, data.graph);
  std::vector<LabeledExample> labeled;
  for (const auto& p : cfg.data.labeled) {
    auto recs = load_labeled(p, registry);
    labeled.insert(labeled.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
  }
  std::vector<UnlabeledExample> unlabeled;
  for (const auto& p : cfg.data.unlabeled) {
    auto recs = load_unlabeled(p, registry);
    unlabeled.insert(unlabeled.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
  }
  data.corpora.labeled = group_by_topic(labeled);
  data.corpora.unlabeled = group_by_topic(unlabeled);
  return data;
}

ModelSetup make_model_setup(const RunConfig& cfg, const LoadedData& data) {
  ModelSetup setup;
  setup.encoder = cfg.encoder;
  setup.use_geo = cfg.use_geo;
  setup.normalize_adjacency = cfg.normalize_adjacency;
  setup.use_description = cfg.use_description;
  setup.descriptions = data.descriptions;
  setup.graph = data.graph;
  setup.ratios = cfg.ratios;
  if (cfg.encoder.kind == EncoderKind::tiny) {
    setup.tokenizer = build_corpus_tokenizer(data.corpora, data.descriptions, cfg.encoder.vocab_size);
  } else {
    setup.tokenizer = std::make_shared<WordPieceTokenizer>(
        WordPieceTokenizer::from_file(resolve_encoder_file(cfg.encoder, "vocab")));
    setup.encoder_weights = resolve_encoder_file(cfg.encoder, "weights");
  }
  return setup;
}

std::string format_finding(const Finding& f) {
  std::string out = f.file.empty() ? std::string("<config>") : f.file;
  if (f.line > 0) out += ":" + std::to_string(f.line);
  return out + ": " + f.rule + ": " + f.message;
}

std::vector<Finding> validate_run(const RunConfig& cfg) {
  std::vector<Finding> findings;
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    findings.push_back({"", 0, "CONFIG_INVALID", e.what()});
  }

  auto exists = [&](const std::filesystem::path& p, const char* key) {
    if (p.empty()) {
      findings.push_back({"", 0, "PATH_MISSING", std::string(key) + " is not set"});
      return false;
    }
    if (!std::filesystem::is_regular_file(p)) {
      findings.push_back({p.string(), 0, "PATH_MISSING", std::string(key) + " does not exist"});
      return false;
    }
    return true;
  };

  std::optional<GeoGraph> graph;
  if (cfg.data.geo_graph.empty()) {
    graph = us_states_graph();
  } else if (exists(cfg.data.geo_graph, "data.geo_graph")) {
    try {
      graph = load_run_graph(cfg);
    } catch (const DataError& e) {
      findings.push_back({cfg.data.geo_graph.string(), e.line(), "GRAPH_INVALID", e.detail()});
    }
  }

  std::map<std::string, std::string> descriptions;
  bool have_descriptions = false;
  if (exists(cfg.data.descriptions, "data.descriptions")) {
    try {
      descriptions = load_descriptions(cfg.data.descriptions);
      have_descriptions = true;
    } catch (const DataError& e) {
      findings.push_back({cfg.data.descriptions.string(), e.line(), "DESC_INVALID", e.detail()});
    }
  }

  std::set<std::string> task_topics;
  for (const auto& t : cfg.task.source_topics) task_topics.insert(t);
  if (!cfg.task.destination_topic.empty()) task_topics.insert(cfg.task.destination_topic);

  // Task topics count as known so a missing description is reported once, as DESC_MISSING.
  Registry registry;
  if (have_descriptions) {
    for (const auto& [t, _] : descriptions) registry.topics.insert(t);
    registry.topics.insert(task_topics.begin(), task_topics.end());
  }
  if (graph) registry.regions = graph->region_set();

  std::set<std::string> labeled_topics;
  std::set<std::string> unlabeled_topics;
  if (cfg.data.labeled.empty()) findings.push_back({"", 0, "PATH_MISSING", "data.labeled lists no files"});
  for (const auto& p : cfg.data.labeled) {
    if (!exists(p, "data.labeled")) continue;
    scan_records(p, [&](const std::string& line) { return parse_labeled(line, p.string(), registry); }, findings,
                 labeled_topics);
  }
  for (const auto& p : cfg.data.unlabeled) {
    if (!exists(p, "data.unlabeled")) continue;
    scan_records(p, [&](const std::string& line) { return parse_unlabeled(line, p.string(), registry); }, findings,
                 unlabeled_topics);
  }

  for (const auto& t : task_topics) {
    if (have_descriptions && cfg.use_description && !descriptions.contains(t)) {
      findings.push_back({cfg.data.descriptions.string(), 0, "DESC_MISSING", "no policy description for topic '" + t + "'"});
    }
    if (!labeled_topics.contains(t)) {
      findings.push_back({"", 0, "TOPIC_NO_DATA", "no labeled records for task topic '" + t + "'"});
    }
  }
  return findings;
}

RunLayout prepare_run_dir(const RunConfig& cfg) {
  RunLayout l{cfg.output_dir, cfg.output_dir / "checkpoints", cfg.output_dir / "logs", cfg.output_dir / "reports"};
  for (const auto& d : {l.checkpoints, l.logs, l.reports}) std::filesystem::create_directories(d);
  write_text(l.root / "config.snapshot", serialize_run_config(cfg));
  return l;
}

std::string run_stem(const std::string& task, std::uint64_t seed) {
  std::string safe;
  for (std::size_t i = 0; i < task.size(); ++i) {
    if (task.compare(i, 2, "->") == 0) {
      safe += "_to_";
      ++i;
    } else {
      const char c = task[i];
      const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
      safe += ok ? c : '_';
    }
  }
  return safe + ".seed" + std::to_string(seed);
}

TrainOutcome run_train(const RunConfig& cfg, const LoadedData& data, const LogSink& log) {
  cfg.validate();
  const ModelSetup setup = make_model_setup(cfg, data);
  const RunLayout layout = prepare_run_dir(cfg);
  TrainOutcome out;
  out.report.task = cfg.task.name();
  std::vector<MetricReport> scores;
  for (std::uint64_t seed : cfg.train.seeds) {
    if (log) log("training " + out.report.task + " seed " + std::to_string(seed));
    SeedRun run = train_seed(cfg.task, cfg.train, setup, data.corpora, seed,
                             [&](std::uint64_t, const EpochRecord& r) {
                               if (log) log(format_epoch_line(r));
                             });
    const std::string stem = run_stem(out.report.task, seed);
    out.logs.push_back(layout.logs / (stem + ".log"));
    write_text(out.logs.back(), log_text(run.fit));
    out.checkpoints.push_back(layout.checkpoints / (stem + ".ckpt"));
    save_checkpoint(out.checkpoints.back(), *run.classifier, cfg,
                    CheckpointInfo{seed, run.fit.best_epoch, run.fit.best_dev_f_avg});
    out.report.per_seed.push_back({seed, run.test});
    scores.push_back(run.test);
  }
  out.report.mean = mean_report(scores);
  write_report(layout, "train", {out.report});
  return out;
}

EvalOutcome run_eval(const RunConfig& cfg, const LoadedData& data, const std::filesystem::path& checkpoint) {
  cfg.validate();
  LoadedCheckpoint ckpt = load_checkpoint_with_config(checkpoint, cfg);
  const SplitBundle splits =
      build_splits(cfg.task, data.corpora.labeled, data.corpora.unlabeled, cfg.ratios, seed_streams(ckpt.info.seed).split);
  EvalOutcome out;
  out.test.task = out.dev.task = cfg.task.name();
  const MetricReport test = evaluate(*ckpt.classifier, splits.test_labeled, cfg.train.favg_classes);
  const MetricReport dev = evaluate(*ckpt.classifier, splits.dev_labeled, cfg.train.favg_classes);
  out.test.per_seed.push_back({ckpt.info.seed, test});
  out.test.mean = test;
  out.dev.per_seed.push_back({ckpt.info.seed, dev});
  out.dev.mean = dev;
  const RunLayout layout = prepare_run_dir(cfg);
  write_report(layout, "eval_test", {out.test});
  write_report(layout, "eval_dev", {out.dev});
  return out;
}

std::vector<TaskReport> run_suite_to_dir(const RunConfig& cfg, const LoadedData& data,
                                         const std::vector<TaskMode>& modes, const LogSink& log) {
  cfg.train.validate();
  const ModelSetup setup = make_model_setup(cfg, data);
  std::vector<TaskSpec> tasks;
  for (TaskMode m : modes) {
    for (auto& t : suite_tasks(m, data.corpora.topics(), cfg.train.seeds)) tasks.push_back(std::move(t));
  }
  const RunLayout layout = prepare_run_dir(cfg);
  std::vector<TaskReport> reports;
  for (const auto& spec : tasks) {
    TaskReport report;
    report.task = spec.name();
    std::vector<MetricReport> scores;
    for (std::uint64_t seed : cfg.train.seeds) {
      if (log) log("suite " + report.task + " seed " + std::to_string(seed));
      const SeedRun run = train_seed(spec, cfg.train, setup, data.corpora, seed);
      write_text(layout.logs / (run_stem(report.task, seed) + ".log"), log_text(run.fit));
      report.per_seed.push_back({seed, run.test});
      scores.push_back(run.test);
    }
    report.mean = mean_report(scores);
    reports.push_back(std::move(report));
  }
  write_report(layout, "suite", reports);
  return reports;
}

std::vector<Prediction> predict_records(const StanceClassifier& classifier,
                                        const std::vector<UnlabeledExample>& records) {
  std::vector<Prediction> out;
  if (records.empty()) return out;
  const auto encoded = classifier.encode_all(std::span<const UnlabeledExample>(records));
  const Matrix probs = classifier.predict_proba(encoded);
  out.resize(records.size());
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    auto& p = out[static_cast<std::size_t>(r)];
    Eigen::Index best = 0;
    probs.row(r).maxCoeff(&best);
    p.label = static_cast<Stance>(best);
    for (int c = 0; c < kNumStances; ++c) p.probabilities[static_cast<std::size_t>(c)] = probs(r, c);
  }
  return out;
}

std::string format_predictions(const std::vector<Prediction>& predictions) {
  std::string out;
  char buf[128];
  for (const auto& p : predictions) {
    std::snprintf(buf, sizeof(buf), "%s\t%.9f\t%.9f\t%.9f\n", std::string(to_string(p.label)).c_str(),
                  p.probabilities[0], p.probabilities[1], p.probabilities[2]);
    out += buf;
  }
  return out;
}

}  // namespace advstance
