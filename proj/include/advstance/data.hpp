#pragma once

// Corpus records, the region graph, task definitions and train/dev/test
// splitting.

#include "advstance/autodiff.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace advstance {

enum class Stance : int { favor = 0, against = 1, none = 2 };

inline constexpr int kNumStances = 3;
inline constexpr std::array<Stance, 3> kAllStances{Stance::favor, Stance::against, Stance::none};

std::string_view to_string(Stance s);
/// Throws std::invalid_argument naming the allowed labels.
Stance parse_stance(std::string_view text);

/// Region name used for examples without a location.
inline constexpr std::string_view kUnknownRegion = "UNKNOWN";

struct LabeledExample {
  std::string topic;
  std::string text;
  Stance stance = Stance::none;
  std::string geo;

  bool operator==(const LabeledExample&) const = default;
};

struct UnlabeledExample {
  std::string topic;
  std::string text;
  std::optional<std::string> geo;

  bool operator==(const UnlabeledExample&) const = default;
};

/// Drops the stance label.
UnlabeledExample strip_label(const LabeledExample& ex);

struct PolicyDescription {
  std::string topic;
  std::string description;
};

/// Validation context for loaders. Empty sets disable the respective check.
struct Registry {
  std::set<std::string> topics;
  std::set<std::string> regions;
};

/// Escapes backslash, tab, CR and newline so a field fits on one line.
std::string escape_field(std::string_view raw);
std::string unescape_field(std::string_view escaped);

std::vector<LabeledExample> load_labeled(const std::filesystem::path& path, const Registry& registry = {});
std::vector<UnlabeledExample> load_unlabeled(const std::filesystem::path& path, const Registry& registry = {});
std::vector<LabeledExample> parse_labeled(std::string_view content, const std::string& source_name,
                                          const Registry& registry = {});
std::vector<UnlabeledExample> parse_unlabeled(std::string_view content, const std::string& source_name,
                                              const Registry& registry = {});

void save_labeled(const std::filesystem::path& path, const std::vector<LabeledExample>& records);
void save_unlabeled(const std::filesystem::path& path, const std::vector<UnlabeledExample>& records);
std::string serialize_labeled(const std::vector<LabeledExample>& records);
std::string serialize_unlabeled(const std::vector<UnlabeledExample>& records);

/// One description per topic; empty descriptions and duplicates are errors.
std::map<std::string, std::string> load_descriptions(const std::filesystem::path& path);
std::map<std::string, std::string> parse_descriptions(std::string_view content, const std::string& source_name);
std::string serialize_descriptions(const std::map<std::string, std::string>& descriptions);
void save_descriptions(const std::filesystem::path& path, const std::map<std::string, std::string>& descriptions);

/// Region vocabulary with a symmetric 0/1 adjacency matrix whose diagonal is
/// all ones.
class GeoGraph {
 public:
  /// Self-loops are forced; edges must reference listed regions.
  GeoGraph(std::vector<std::string> regions, const std::vector<std::pair<std::string, std::string>>& edges);

  [[nodiscard]] std::size_t size() const { return regions_.size(); }
  [[nodiscard]] const std::vector<std::string>& regions() const { return regions_; }
  [[nodiscard]] const Matrix& adjacency() const { return adjacency_; }
  [[nodiscard]] bool contains(std::string_view region) const;
  /// Throws DataError for unknown regions.
  [[nodiscard]] int index_of(std::string_view region) const;
  /// Index for an optional location; missing maps to UNKNOWN when present.
  [[nodiscard]] int index_or_unknown(const std::optional<std::string>& region) const;

  /// Same graph with an isolated UNKNOWN node appended if it is missing.
  [[nodiscard]] GeoGraph with_unknown() const;
  [[nodiscard]] std::set<std::string> region_set() const { return {regions_.begin(), regions_.end()}; }

  [[nodiscard]] std::string serialize() const;

 private:
  std::vector<std::string> regions_;
  std::map<std::string, int, std::less<>> index_;
  Matrix adjacency_;
};

GeoGraph load_geo_graph(const std::filesystem::path& path);
GeoGraph parse_geo_graph(std::string_view content, const std::string& source_name);

/// 50 US states plus DC with land-border adjacency, plus UNKNOWN (N = 52).
GeoGraph us_states_graph();
/// The same graph in file form, without UNKNOWN (51 regions).
std::string us_states_graph_file();

enum class TaskMode { cross_target, zero_shot };

std::string_view to_string(TaskMode m);
TaskMode parse_task_mode(std::string_view text);

struct TaskSpec {
  TaskMode mode = TaskMode::cross_target;
  std::vector<std::string> source_topics;
  std::string destination_topic;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};

  /// Throws ConfigError when the mode/topic invariants do not hold.
  void validate() const;
  /// Sources followed by the destination; the index is the discriminator class.
  [[nodiscard]] std::vector<std::string> topics() const;
  [[nodiscard]] int topic_index(std::string_view topic) const;
  /// "SH->WM" for cross-target tasks, the destination for zero-shot ones.
  [[nodiscard]] std::string name() const;
};

struct SplitRatios {
  double train = 0.85;  // remainder goes to dev
};

struct SplitBundle {
  std::vector<LabeledExample> train_labeled;
  std::vector<LabeledExample> dev_labeled;
  std::vector<LabeledExample> test_labeled;
  /// Unlabeled texts of every task topic plus the training texts, stance stripped.
  std::vector<UnlabeledExample> discriminator_pool;
};

using LabeledCorpora = std::map<std::string, std::vector<LabeledExample>>;
using UnlabeledCorpora = std::map<std::string, std::vector<UnlabeledExample>>;

/// Groups records by their topic field, preserving input order.
LabeledCorpora group_by_topic(const std::vector<LabeledExample>& records);
UnlabeledCorpora group_by_topic(const std::vector<UnlabeledExample>& records);

/// Stratified (per stance label) train/dev split of the source topics; the
/// destination's labeled data is the test set. Deterministic in `seed`.
SplitBundle build_splits(const TaskSpec& spec, const LabeledCorpora& labeled, const UnlabeledCorpora& unlabeled,
                         SplitRatios ratios, std::uint64_t seed);

}  // namespace advstance
