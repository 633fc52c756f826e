#pragma once

// File-backed runs: loading the data named by a RunConfig, the output
// directory layout, and the train / eval / suite / predict workflows.

#include "advstance/checkpoint.hpp"
#include "advstance/config.hpp"
#include "advstance/evaluation.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace advstance {

struct LoadedData {
  Corpora corpora;
  std::map<std::string, std::string> descriptions;
  GeoGraph graph;
};

/// The configured graph file with UNKNOWN added, or the built-in US-states graph.
GeoGraph load_run_graph(const RunConfig& cfg);

/// Loads corpora, descriptions and the graph. Records must use topics that
/// have a description and regions of the graph.
LoadedData load_run_data(const RunConfig& cfg);

/// Tokenizer and encoder files for the configured encoder kind.
ModelSetup make_model_setup(const RunConfig& cfg, const LoadedData& data);

// ---------------------------------------------------------------------------
// Validation

struct Finding {
  std::string file;
  std::size_t line = 0;  // 0 when not tied to a line
  std::string rule;
  std::string message;
};

/// `file:line: RULE: message`
std::string format_finding(const Finding& f);

/// Checks every referenced file record by record and cross-checks topics,
/// descriptions and regions. Rule ids: CONFIG_INVALID, PATH_MISSING,
/// PARSE_ERROR, STANCE_INVALID, TOPIC_UNKNOWN, GEO_UNKNOWN, DESC_MISSING,
/// DESC_INVALID, GRAPH_INVALID, TOPIC_NO_DATA.
std::vector<Finding> validate_run(const RunConfig& cfg);

// ---------------------------------------------------------------------------
// Output directory

struct RunLayout {
  std::filesystem::path root;
  std::filesystem::path checkpoints;
  std::filesystem::path logs;
  std::filesystem::path reports;
};

/// Creates root/{checkpoints,logs,reports} and writes root/config.snapshot.
RunLayout prepare_run_dir(const RunConfig& cfg);

/// File-name-safe `<task>.seed<k>`.
std::string run_stem(const std::string& task, std::uint64_t seed);

using LogSink = std::function<void(const std::string&)>;

struct TrainOutcome {
  TaskReport report;
  std::vector<std::filesystem::path> checkpoints;
  std::vector<std::filesystem::path> logs;
};

/// Fits one model per seed of the configured task. Writes the epoch log
/// `epoch<TAB>L_sc<TAB>L_td<TAB>dev_Favg` and the best checkpoint per seed,
/// plus reports/train.{tsv,txt} with destination test scores.
TrainOutcome run_train(const RunConfig& cfg, const LoadedData& data, const LogSink& log = {});

struct EvalOutcome {
  TaskReport test;
  TaskReport dev;
};

/// Scores a checkpoint, rebuilt under `cfg`, on the destination test set and
/// on the dev split of its own seed. Writes reports/eval_{test,dev}.{tsv,txt}.
EvalOutcome run_eval(const RunConfig& cfg, const LoadedData& data, const std::filesystem::path& checkpoint);

/// Runs the requested suite modes over every topic in the corpora and writes
/// reports/suite.{tsv,txt} plus one epoch log per task and seed.
std::vector<TaskReport> run_suite_to_dir(const RunConfig& cfg, const LoadedData& data,
                                         const std::vector<TaskMode>& modes, const LogSink& log = {});

struct Prediction {
  Stance label = Stance::none;
  std::array<double, kNumStances> probabilities{};
};

/// One prediction per record, in input order.
std::vector<Prediction> predict_records(const StanceClassifier& classifier,
                                        const std::vector<UnlabeledExample>& records);
/// `label<TAB>p_favor<TAB>p_against<TAB>p_none` lines.
std::string format_predictions(const std::vector<Prediction>& predictions);

}  // namespace advstance
