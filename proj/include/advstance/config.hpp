#pragma once

// Flat `section.key = value` run configuration with command-line overrides.

#include "advstance/data.hpp"
#include "advstance/encoder.hpp"
#include "advstance/training.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace advstance {

/// Environment variable naming the directory searched for pretrained
/// encoder files when encoder.weights_path / encoder.vocab_path are unset.
inline constexpr const char* kCacheDirEnv = "ADVSTANCE_CACHE_DIR";

struct DataPaths {
  std::vector<std::filesystem::path> labeled;
  std::vector<std::filesystem::path> unlabeled;
  std::filesystem::path descriptions;
  std::filesystem::path geo_graph;  // empty selects the built-in US-states graph
};

struct RunConfig {
  TrainConfig train;
  TaskSpec task;
  EncoderConfig encoder;
  bool use_geo = true;
  bool normalize_adjacency = false;
  bool use_description = true;
  SplitRatios ratios;
  DataPaths data;
  std::filesystem::path output_dir = "runs/default";

  /// Cross-field checks that do not touch the file system.
  void validate() const;
};

/// `key = value` lines; `#` starts a comment. Duplicate keys are errors.
/// Errors name `source:line`.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text, const std::string& source);

/// Every key accepted by apply_setting, sorted.
std::vector<std::string> config_keys();

/// Sets one key. Relative paths are resolved against `base_dir`.
/// Throws ConfigError for unknown keys and malformed values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value,
                   const std::filesystem::path& base_dir = {});

/// Parses `key=value` from a command-line override.
std::pair<std::string, std::string> split_override(std::string_view text);

RunConfig parse_run_config(std::string_view text, const std::string& source, const std::filesystem::path& base_dir);
/// Reads a config file, then applies overrides (relative to the working directory).
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// All keys with their current values; paths are written absolute so the
/// snapshot reloads from anywhere.
std::string serialize_run_config(const RunConfig& cfg);

/// Resolved pretrained-encoder file, honouring the cache directory variable.
/// `file` is "weights" or "vocab".
std::filesystem::path resolve_encoder_file(const EncoderConfig& encoder, std::string_view file);

}  // namespace advstance
