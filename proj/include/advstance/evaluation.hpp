#pragma once

// Per-task and suite-level evaluation with multi-seed aggregation.

#include "advstance/classifier.hpp"
#include "advstance/data.hpp"
#include "advstance/metrics.hpp"
#include "advstance/training.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace advstance {

struct Corpora {
  LabeledCorpora labeled;
  UnlabeledCorpora unlabeled;

  /// Topics present in either collection, sorted.
  [[nodiscard]] std::vector<std::string> topics() const;
};

/// Everything besides the training configuration that a classifier needs.
struct ModelSetup {
  EncoderConfig encoder;
  bool use_geo = true;
  bool normalize_adjacency = false;
  bool use_description = true;
  std::shared_ptr<const Tokenizer> tokenizer;
  std::map<std::string, std::string> descriptions;
  GeoGraph graph{{std::string(kUnknownRegion)}, {}};
  SplitRatios ratios;
  /// Archive with `encoder.*` tensors loaded over the random initialisation.
  std::filesystem::path encoder_weights;
};

/// Word vocabulary over every text and description, sized for the encoder.
std::shared_ptr<const Tokenizer> build_corpus_tokenizer(const Corpora& corpora,
                                                        const std::map<std::string, std::string>& descriptions,
                                                        std::size_t max_size);

/// Independent streams for one seed: split sampling, parameter init, training.
struct SeedStreams {
  std::uint64_t split;
  std::uint64_t init;
  std::uint64_t train;
};
SeedStreams seed_streams(std::uint64_t seed);

struct SeedRun {
  std::uint64_t seed = 0;
  SplitBundle splits;
  std::unique_ptr<StanceClassifier> classifier;
  FitResult fit;
  MetricReport test;
};

using EpochCallback = std::function<void(std::uint64_t seed, const EpochRecord&)>;

/// Splits, fits and scores the destination test set for one seed.
SeedRun train_seed(const TaskSpec& spec, const TrainConfig& cfg, const ModelSetup& setup, const Corpora& corpora,
                   std::uint64_t seed, const EpochCallback& on_epoch = {});

/// Scores a classifier on labeled examples.
MetricReport evaluate(const StanceClassifier& classifier, std::span<const LabeledExample> examples,
                      FavgClasses classes = FavgClasses::stance_bearing);

struct SeedScore {
  std::uint64_t seed = 0;
  MetricReport report;
};

struct TaskReport {
  std::string task;
  std::vector<SeedScore> per_seed;
  MetricReport mean;
};

/// One run per seed in cfg.seeds, then the field-wise mean.
TaskReport run_task(const TaskSpec& spec, const TrainConfig& cfg, const ModelSetup& setup, const Corpora& corpora,
                    const EpochCallback& on_epoch = {});

/// Cross-target: every ordered pair of distinct topics. Zero-shot: each topic
/// held out once with all others as sources (needs at least three topics).
std::vector<TaskSpec> suite_tasks(TaskMode mode, const std::vector<std::string>& topics,
                                  const std::vector<std::uint64_t>& seeds);

std::vector<TaskReport> run_suite(TaskMode mode, const Corpora& corpora, const TrainConfig& cfg,
                                  const ModelSetup& setup, const EpochCallback& on_epoch = {});

/// Header plus one line per seed and one `mean` line per task:
/// task, seed, F_favor, F_against, F_none, F_avg, micro, macro, F_m.
std::string format_report_tsv(const std::vector<TaskReport>& reports);
/// Aligned table of mean F_avg and F_m per task, scores in percent.
std::string format_report_table(const std::vector<TaskReport>& reports);

}  // namespace advstance
