#include "advstance/synth.hpp"

#include "advstance/errors.hpp"
#include "advstance/rng.hpp"

#include <array>
#include <fstream>
#include <sstream>

namespace advstance {

void SynthConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw ConfigError(std::string("synth: ") + name + " must be positive");
  };
  if (n_topics < 2) throw ConfigError("synth: n_topics must be >= 2");
  positive(labeled_per_topic, "labeled_per_topic");
  positive(shared_cue_vocab, "shared_cue_vocab");
  positive(topic_marker_vocab, "topic_marker_vocab");
  positive(topic_cue_vocab, "topic_cue_vocab");
  positive(filler_vocab, "filler_vocab");
  positive(shared_cues_per_text, "shared_cues_per_text");
  positive(description_length, "description_length");
  positive(n_regions, "n_regions");
  if (unlabeled_per_topic < 0 || markers_per_text < 0 || topic_cues_per_text < 0) {
    throw ConfigError("synth: counts must be non-negative");
  }
  if (shared_cues_per_text < 2 && distractor_rate > 0.0) {
    throw ConfigError("synth: distractors need at least two shared cues per text");
  }
  const int fixed = shared_cues_per_text + 1 + markers_per_text + topic_cues_per_text;
  if (text_length < fixed) {
    throw ConfigError("synth: text_length must be >= " + std::to_string(fixed));
  }
  for (double p : {distractor_rate, region_prior_strength, missing_geo_rate}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("synth: rates must lie in [0, 1]");
  }
}

std::string synth_topic_name(int k) { return "T" + std::to_string(k); }

namespace {

std::string shared_cue(int c, int j) { return "s" + std::to_string(c) + "x" + std::to_string(j); }
std::string marker(int k, int j) { return "t" + std::to_string(k) + "m" + std::to_string(j); }
std::string topic_cue(int k, int c, int j) {
  return "t" + std::to_string(k) + "s" + std::to_string(c) + "x" + std::to_string(j);
}
std::string filler(int j) { return "w" + std::to_string(j); }

int pick(Rng& rng, int n) { return static_cast<int>(rng.below(static_cast<std::size_t>(n))); }

std::string make_text(const SynthConfig& cfg, Rng& rng, int topic, int label) {
  std::vector<std::string> tokens;
  for (int i = 0; i < cfg.shared_cues_per_text; ++i) tokens.push_back(shared_cue(label, pick(rng, cfg.shared_cue_vocab)));
  if (rng.bernoulli(cfg.distractor_rate)) {
    const int other = (label + 1 + pick(rng, kNumStances - 1)) % kNumStances;
    tokens.push_back(shared_cue(other, pick(rng, cfg.shared_cue_vocab)));
  }
  for (int i = 0; i < cfg.markers_per_text; ++i) tokens.push_back(marker(topic, pick(rng, cfg.topic_marker_vocab)));
  for (int i = 0; i < cfg.topic_cues_per_text; ++i) {
    tokens.push_back(topic_cue(topic, label, pick(rng, cfg.topic_cue_vocab)));
  }
  while (static_cast<int>(tokens.size()) < cfg.text_length) tokens.push_back(filler(pick(rng, cfg.filler_vocab)));
  rng.shuffle(tokens);
  std::string text;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) text += ' ';
    text += tokens[i];
  }
  return text;
}

}  // namespace

SynthCorpus synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);

  std::vector<std::string> regions;
  std::vector<std::pair<std::string, std::string>> edges;
  for (int r = 0; r < cfg.n_regions; ++r) regions.push_back("R" + std::to_string(r));
  for (int r = 0; r + 1 < cfg.n_regions; ++r) edges.emplace_back(regions[r], regions[r + 1]);
  if (cfg.n_regions > 2) edges.emplace_back(regions.back(), regions.front());
  regions.emplace_back(kUnknownRegion);

  SynthCorpus out{{}, {}, {}, {}, GeoGraph(regions, edges)};

  // Region r leans towards stance r mod 3.
  auto draw_label = [&](int region) {
    if (rng.bernoulli(cfg.region_prior_strength)) return region % kNumStances;
    return pick(rng, kNumStances);
  };

  for (int k = 0; k < cfg.n_topics; ++k) {
    const std::string topic = synth_topic_name(k);
    out.topics.push_back(topic);

    std::string desc = "policy";
    for (int i = 1; i < cfg.description_length; ++i) {
      desc += ' ';
      desc += (i % 2 == 1) ? marker(k, (i / 2) % cfg.topic_marker_vocab) : filler((k * 7 + i) % cfg.filler_vocab);
    }
    out.descriptions[topic] = desc;

    auto& lab = out.labeled[topic];
    for (int i = 0; i < cfg.labeled_per_topic; ++i) {
      const int region = pick(rng, cfg.n_regions);
      const int label = draw_label(region);
      lab.push_back({topic, make_text(cfg, rng, k, label), static_cast<Stance>(label), regions[region]});
    }
    auto& unl = out.unlabeled[topic];
    for (int i = 0; i < cfg.unlabeled_per_topic; ++i) {
      const int region = pick(rng, cfg.n_regions);
      const int label = draw_label(region);
      UnlabeledExample ex{topic, make_text(cfg, rng, k, label), regions[region]};
      if (rng.bernoulli(cfg.missing_geo_rate)) ex.geo.reset();
      unl.push_back(std::move(ex));
    }
  }
  return out;
}

std::optional<Stance> synth_oracle_label(std::string_view text) {
  std::array<int, kNumStances> counts{};
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) {
    // Shared cues look exactly like s<digit>x<digits>.
    if (tok.size() >= 4 && tok[0] == 's' && tok[2] == 'x' && tok[1] >= '0' && tok[1] < '0' + kNumStances) {
      ++counts[static_cast<std::size_t>(tok[1] - '0')];
    }
  }
  int best = 0;
  for (int c = 1; c < kNumStances; ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  for (int c = 0; c < kNumStances; ++c) {
    if (c != best && counts[c] == counts[best]) return std::nullopt;
  }
  if (counts[best] == 0) return std::nullopt;
  return static_cast<Stance>(best);
}

SynthFiles write_synth_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  SynthFiles files;
  for (const auto& topic : corpus.topics) {
    files.labeled.push_back(dir / (topic + ".labeled.tsv"));
    save_labeled(files.labeled.back(), corpus.labeled.at(topic));
    files.unlabeled.push_back(dir / (topic + ".unlabeled.tsv"));
    save_unlabeled(files.unlabeled.back(), corpus.unlabeled.at(topic));
  }
  files.descriptions = dir / "descriptions.tsv";
  save_descriptions(files.descriptions, corpus.descriptions);
  files.geo_graph = dir / "regions.geo";
  std::ofstream(files.geo_graph, std::ios::binary | std::ios::trunc) << corpus.graph.serialize();
  return files;
}

}  // namespace advstance
