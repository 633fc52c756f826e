// advstance: validate, train, eval, suite, predict, synth and accept.
//
// Exit status: 0 success, 1 runtime failure, 2 configuration or validation
// failure (bad config, data findings, missing or incompatible checkpoint).

#include "advstance/checkpoint.hpp"
#include "advstance/errors.hpp"
#include "advstance/harness.hpp"
#include "advstance/runner.hpp"
#include "advstance/synth.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace advstance;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitInvalid = 2;

/// A problem with the user's inputs rather than with the computation.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct RunOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

void add_run_options(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("-c,--config", o.config, "run configuration file")->required();
  cmd->add_option("--set", o.overrides, "override one key, key=value (repeatable)");
  cmd->add_option("--seed", o.seed, "run a single seed instead of the configured list");
}

RunConfig load_config(const RunOptions& o) {
  if (!fs::exists(o.config)) throw ConfigError("config file not found: " + o.config);
  std::vector<std::string> overrides = o.overrides;
  if (o.seed) overrides.push_back("train.seeds=" + std::to_string(*o.seed));
  RunConfig cfg = load_run_config(o.config, overrides);
  cfg.validate();
  return cfg;
}

void print_findings(const std::vector<Finding>& findings) {
  for (const auto& f : findings) std::cerr << format_finding(f) << "\n";
}

/// Config and data are fully checked before anything is written.
LoadedData load_checked(const RunConfig& cfg) {
  const auto findings = validate_run(cfg);
  if (!findings.empty()) {
    print_findings(findings);
    throw UsageError(std::to_string(findings.size()) + " validation finding(s); nothing was written");
  }
  return load_run_data(cfg);
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw UsageError(what + " not found: " + p.string());
}

LogSink stderr_log(bool quiet) {
  if (quiet) return {};
  return [](const std::string& line) { std::cerr << line << "\n"; };
}

int cmd_validate(const RunOptions& o) {
  const RunConfig cfg = load_run_config(o.config, o.overrides);
  const auto findings = validate_run(cfg);
  print_findings(findings);
  std::cout << findings.size() << " finding(s)\n";
  return findings.empty() ? 0 : kExitInvalid;
}

int cmd_train(const RunOptions& o, bool quiet) {
  const RunConfig cfg = load_config(o);
  const LoadedData data = load_checked(cfg);
  const TrainOutcome out = run_train(cfg, data, stderr_log(quiet));
  std::cout << format_report_table({out.report});
  for (const auto& c : out.checkpoints) std::cout << "checkpoint " << c.string() << "\n";
  return 0;
}

int cmd_eval(const RunOptions& o, const std::string& checkpoint) {
  require_file(checkpoint, "checkpoint");
  const RunConfig cfg = load_config(o);
  const LoadedData data = load_checked(cfg);
  const EvalOutcome out = run_eval(cfg, data, checkpoint);
  std::cout << "test\n" << format_report_table({out.test}) << "dev\n" << format_report_table({out.dev});
  return 0;
}

int cmd_suite(const RunOptions& o, const std::vector<std::string>& mode_names, bool quiet) {
  const RunConfig cfg = load_config(o);
  std::vector<TaskMode> modes;
  for (const auto& m : mode_names) modes.push_back(parse_task_mode(m));
  const LoadedData data = load_checked(cfg);
  const auto reports = run_suite_to_dir(cfg, data, modes, stderr_log(quiet));
  std::cout << format_report_table(reports);
  return 0;
}

int cmd_predict(const std::string& checkpoint, const std::string& input, const std::string& output) {
  require_file(checkpoint, "checkpoint");
  require_file(input, "input file");
  const LoadedCheckpoint loaded = load_checkpoint(checkpoint);
  const auto& clf = *loaded.classifier;
  Registry registry;
  registry.regions = clf.model().graph().region_set();
  for (const auto& t : clf.task().topics()) {
    if (clf.descriptions().contains(t)) registry.topics.insert(t);
  }
  const auto records = load_unlabeled(input, registry);
  const std::string text = format_predictions(predict_records(clf, records));
  if (output.empty() || output == "-") {
    std::cout << text;
  } else {
    std::ofstream out(output, std::ios::binary);
    if (!out) throw Error("cannot write " + output);
    out << text;
  }
  return 0;
}

int cmd_synth(const SynthConfig& gen, const std::string& out_dir, bool write_config) {
  gen.validate();
  const SynthCorpus corpus = synth_generate(gen);
  const SynthFiles files = write_synth_corpus(corpus, out_dir);
  if (write_config) {
    RunConfig cfg;
    cfg.data.labeled = files.labeled;
    cfg.data.unlabeled = files.unlabeled;
    cfg.data.descriptions = files.descriptions;
    cfg.data.geo_graph = files.geo_graph;
    cfg.task = TaskSpec{TaskMode::cross_target, {corpus.topics[0]}, corpus.topics[1], cfg.train.seeds};
    cfg.train.learning_rate = 1e-2;
    cfg.train.encoder_lr_scale = 0.1;
    cfg.output_dir = fs::absolute(fs::path(out_dir) / "run");
    std::ofstream f(fs::path(out_dir) / "run.cfg", std::ios::binary);
    f << serialize_run_config(cfg);
  }
  std::cout << "wrote " << corpus.topics.size() << " topics to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial cross-target stance detection"};
  app.require_subcommand(1);
  app.fallthrough();
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "suppress per-epoch progress");

  RunOptions run;
  auto* validate = app.add_subcommand("validate", "check a configuration and every file it names");
  validate->add_option("-c,--config", run.config, "run configuration file")->required();
  validate->add_option("--set", run.overrides, "override one key, key=value (repeatable)");

  auto* train = app.add_subcommand("train", "train the configured task, one checkpoint per seed");
  add_run_options(train, run);

  std::string checkpoint;
  auto* eval = app.add_subcommand("eval", "score a checkpoint on the test set and its dev split");
  add_run_options(eval, run);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();

  std::vector<std::string> modes{"cross_target", "zero_shot"};
  auto* suite = app.add_subcommand("suite", "run every cross-target and zero-shot task over the corpora");
  add_run_options(suite, run);
  suite->add_option("--modes", modes, "task modes")->delimiter(',');

  std::string input;
  std::string output;
  auto* predict = app.add_subcommand("predict", "label unlabeled records with a checkpoint");
  predict->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  predict->add_option("--input", input, "records in the unlabeled format")->required();
  predict->add_option("--output", output, "output file (default: stdout)");

  SynthConfig gen;
  std::string synth_dir;
  bool synth_config = true;
  auto* synth = app.add_subcommand("synth", "write a synthetic corpus with a planted stance signal");
  synth->add_option("--out", synth_dir, "output directory")->required();
  synth->add_option("--topics", gen.n_topics, "number of topics");
  synth->add_option("--labeled", gen.labeled_per_topic, "labeled texts per topic");
  synth->add_option("--unlabeled", gen.unlabeled_per_topic, "unlabeled texts per topic");
  synth->add_option("--regions", gen.n_regions, "number of regions");
  synth->add_option("--seed", gen.seed, "generator seed");
  synth->add_flag("!--no-config", synth_config, "do not write run.cfg");

  AcceptanceOptions accept_opts;
  accept_opts.work_dir = fs::temp_directory_path() / "advstance_acceptance";
  auto* accept = app.add_subcommand("accept", "run the acceptance criteria, one PASS/FAIL line each");
  accept->add_option("--only", accept_opts.only, "criterion ids")->delimiter(',');
  accept->add_option("--known-failures", accept_opts.known_failures, "criterion ids expected to fail")
      ->delimiter(',');
  accept->add_option("--work-dir", accept_opts.work_dir, "scratch directory");
  accept->add_option("--set", accept_opts.transfer_overrides, "transfer run override key=value");
  accept->add_flag("--verbose", accept_opts.verbose, "print per-seed progress");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }

  try {
    if (*validate) return cmd_validate(run);
    if (*train) return cmd_train(run, quiet);
    if (*eval) return cmd_eval(run, checkpoint);
    if (*suite) return cmd_suite(run, modes, quiet);
    if (*predict) return cmd_predict(checkpoint, input, output);
    if (*synth) return cmd_synth(gen, synth_dir, synth_config);
    if (*accept) return run_acceptance_command(accept_opts, std::cout, std::cerr);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const LeakageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
