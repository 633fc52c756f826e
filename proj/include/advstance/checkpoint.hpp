#pragma once

// Single-file archives of named tensors and text entries, used for model
// checkpoints and converted pretrained encoder weights.
//
// Layout (little-endian): magic "ADVSTAR1", u64 entry count, then per entry
// u8 kind (0 tensor, 1 text), u64 name length, name bytes, and either
// u64 rows, u64 cols, rows*cols f64 in row-major order, or u64 length and
// the text bytes.

#include "advstance/classifier.hpp"
#include "advstance/config.hpp"
#include "advstance/training.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>

namespace advstance {

struct Archive {
  std::map<std::string, Matrix> tensors;
  std::map<std::string, std::string> texts;
};

void save_archive(const Archive& archive, const std::filesystem::path& path);
/// Throws DataError on a missing, truncated or foreign file.
Archive load_archive(const std::filesystem::path& path);

/// Copies every parameter whose name starts with `prefix` from the archive.
/// All of them must be present with the store's shapes; the error names the
/// offending tensor.
void load_prefixed_parameters(ParameterStore& store, const Archive& archive, const std::string& prefix);

/// Replaces all model parameters. Missing, unexpected or misshapen tensors
/// are errors naming the tensor.
void restore_parameters(StanceModel& model, const Archive& archive);

struct CheckpointInfo {
  std::uint64_t seed = 0;
  std::size_t best_epoch = 0;
  double best_dev_f_avg = 0.0;
};

void save_checkpoint(const std::filesystem::path& path, const StanceClassifier& classifier, const RunConfig& config,
                     const CheckpointInfo& info);

struct LoadedCheckpoint {
  RunConfig config;
  CheckpointInfo info;
  std::unique_ptr<StanceClassifier> classifier;
};

/// Rebuilds the classifier from the configuration, tokenizer, descriptions
/// and graph stored in the checkpoint, then restores its parameters.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Builds a classifier from `config` (encoder, task, limits) with the stored
/// tokenizer, descriptions and graph, and restores the stored parameters.
/// Shape disagreements between `config` and the stored tensors are errors.
LoadedCheckpoint load_checkpoint_with_config(const std::filesystem::path& path, const RunConfig& config);

}  // namespace advstance
