#pragma once

// Synthetic stance corpora with a planted, topic-invariant stance signal.
//
// Every text mixes
//   * shared stance cues  "s<c>x<j>"     (class c, same tokens for all topics)
//   * topic markers       "t<k>m<j>"     (unique to topic k, stance-neutral)
//   * topic stance cues   "t<k>s<c>x<j>" (class c, only inside topic k)
//   * filler words        "w<j>"
// The label is recoverable from shared cues alone: the gold class always has
// strictly more shared cues than any other class (see synth_oracle_label).

#include "advstance/data.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace advstance {

struct SynthConfig {
  int n_topics = 3;
  int labeled_per_topic = 200;
  int unlabeled_per_topic = 300;
  int shared_cue_vocab = 6;   // per stance class
  int topic_marker_vocab = 12;  // per topic
  int topic_cue_vocab = 3;    // per (topic, stance class)
  int filler_vocab = 40;
  int text_length = 12;
  int shared_cues_per_text = 2;
  double distractor_rate = 0.5;  // chance of one shared cue from another class
  int markers_per_text = 3;
  int topic_cues_per_text = 1;
  int description_length = 8;
  int n_regions = 8;
  double region_prior_strength = 0.5;
  double missing_geo_rate = 0.1;  // unlabeled texts only
  std::uint64_t seed = 7;

  /// Throws ConfigError for degenerate settings (empty vocabularies etc).
  void validate() const;
};

struct SynthCorpus {
  std::vector<std::string> topics;
  LabeledCorpora labeled;
  UnlabeledCorpora unlabeled;
  std::map<std::string, std::string> descriptions;
  GeoGraph graph;
};

SynthCorpus synth_generate(const SynthConfig& cfg);

/// The labeling rule: the stance class with the most shared cues.
/// Returns std::nullopt on a tie or when no shared cue is present.
std::optional<Stance> synth_oracle_label(std::string_view text);

std::string synth_topic_name(int k);

struct SynthFiles {
  std::vector<std::filesystem::path> labeled;
  std::vector<std::filesystem::path> unlabeled;
  std::filesystem::path descriptions;
  std::filesystem::path geo_graph;
};

/// Writes one labeled and one unlabeled file per topic, the descriptions and
/// the region graph into `dir` (created if needed).
SynthFiles write_synth_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir);

}  // namespace advstance
