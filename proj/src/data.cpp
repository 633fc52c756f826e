#include "advstance/data.hpp"

#include "advstance/errors.hpp"
#include "advstance/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace advstance {

std::string_view to_string(Stance s) {
  switch (s) {
    case Stance::favor:
      return "favor";
    case Stance::against:
      return "against";
    case Stance::none:
      return "none";
  }
  return "none";
}

Stance parse_stance(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "favor") return Stance::favor;
  if (lower == "against") return Stance::against;
  if (lower == "none") return Stance::none;
  throw std::invalid_argument("invalid stance '" + std::string(text) + "' (allowed: favor, against, none)");
}

UnlabeledExample strip_label(const LabeledExample& ex) { return {ex.topic, ex.text, ex.geo}; }

std::string escape_field(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    switch (c) {
      case '\\':
        out += "\\\\";
        break;
      case '\t':
        out += "\\t";
        break;
      case '\n':
        out += "\\n";
        break;
      case '\r':
        out += "\\r";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string unescape_field(std::string_view escaped) {
  std::string out;
  out.reserve(escaped.size());
  for (std::size_t i = 0; i < escaped.size(); ++i) {
    const char c = escaped[i];
    if (c != '\\' || i + 1 == escaped.size()) {
      out += c;
      continue;
    }
    const char n = escaped[++i];
    switch (n) {
      case 't':
        out += '\t';
        break;
      case 'n':
        out += '\n';
        break;
      case 'r':
        out += '\r';
        break;
      case '\\':
        out += '\\';
        break;
      default:
        out += '\\';
        out += n;
    }
  }
  return out;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string(), 0, "", "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string(), 0, "", "cannot write file");
  out << content;
}

/// Calls fn(line_number, line) for every non-blank line.
template <typename Fn>
void for_each_line(std::string_view content, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) fn(line_no, line);
    pos = end + 1;
  }
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = line.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + 1;
  }
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

void check_topic(const std::string& topic, const Registry& registry, const std::string& src, std::size_t line) {
  if (topic.empty()) throw DataError(src, line, "topic", "empty topic");
  if (!registry.topics.empty() && !registry.topics.contains(topic)) {
    throw DataError(src, line, "topic", "unknown topic '" + topic + "'");
  }
}

void check_region(const std::string& geo, const Registry& registry, const std::string& src, std::size_t line) {
  if (!registry.regions.empty() && !registry.regions.contains(geo)) {
    throw DataError(src, line, "geo", "unknown region '" + geo + "'");
  }
}

}  // namespace

std::vector<LabeledExample> parse_labeled(std::string_view content, const std::string& source_name,
                                          const Registry& registry) {
  std::vector<LabeledExample> out;
  for_each_line(content, [&](std::size_t line_no, std::string_view line) {
    const auto fields = split(line, '\t');
    if (fields.size() != 4) {
      throw DataError(source_name, line_no, "record",
                      "expected 4 tab-separated fields (topic, stance, geo, text), got " +
                          std::to_string(fields.size()));
    }
    LabeledExample ex;
    ex.topic = unescape_field(fields[0]);
    check_topic(ex.topic, registry, source_name, line_no);
    try {
      ex.stance = parse_stance(fields[1]);
    } catch (const std::invalid_argument& e) {
      throw DataError(source_name, line_no, "stance", e.what());
    }
    ex.geo = unescape_field(fields[2]);
    if (ex.geo.empty()) ex.geo = std::string(kUnknownRegion);
    check_region(ex.geo, registry, source_name, line_no);
    ex.text = unescape_field(fields[3]);
    if (ex.text.empty()) throw DataError(source_name, line_no, "text", "empty text");
    out.push_back(std::move(ex));
  });
  return out;
}

std::vector<UnlabeledExample> parse_unlabeled(std::string_view content, const std::string& source_name,
                                              const Registry& registry) {
  std::vector<UnlabeledExample> out;
  for_each_line(content, [&](std::size_t line_no, std::string_view line) {
    const auto fields = split(line, '\t');
    if (fields.size() != 3) {
      throw DataError(source_name, line_no, "record",
                      "expected 3 tab-separated fields (topic, geo, text), got " + std::to_string(fields.size()));
    }
    UnlabeledExample ex;
    ex.topic = unescape_field(fields[0]);
    check_topic(ex.topic, registry, source_name, line_no);
    std::string geo = unescape_field(fields[1]);
    if (!geo.empty()) {
      check_region(geo, registry, source_name, line_no);
      ex.geo = std::move(geo);
    }
    ex.text = unescape_field(fields[2]);
    if (ex.text.empty()) throw DataError(source_name, line_no, "text", "empty text");
    out.push_back(std::move(ex));
  });
  return out;
}

std::vector<LabeledExample> load_labeled(const std::filesystem::path& path, const Registry& registry) {
  return parse_labeled(read_file(path), path.string(), registry);
}

std::vector<UnlabeledExample> load_unlabeled(const std::filesystem::path& path, const Registry& registry) {
  return parse_unlabeled(read_file(path), path.string(), registry);
}

std::string serialize_labeled(const std::vector<LabeledExample>& records) {
  std::string out;
  for (const auto& r : records) {
    out += escape_field(r.topic) + '\t' + std::string(to_string(r.stance)) + '\t' + escape_field(r.geo) + '\t' +
           escape_field(r.text) + '\n';
  }
  return out;
}

std::string serialize_unlabeled(const std::vector<UnlabeledExample>& records) {
  std::string out;
  for (const auto& r : records) {
    out += escape_field(r.topic) + '\t' + escape_field(r.geo.value_or("")) + '\t' + escape_field(r.text) + '\n';
  }
  return out;
}

void save_labeled(const std::filesystem::path& path, const std::vector<LabeledExample>& records) {
  write_file(path, serialize_labeled(records));
}

void save_unlabeled(const std::filesystem::path& path, const std::vector<UnlabeledExample>& records) {
  write_file(path, serialize_unlabeled(records));
}

std::map<std::string, std::string> parse_descriptions(std::string_view content, const std::string& source_name) {
  std::map<std::string, std::string> out;
  for_each_line(content, [&](std::size_t line_no, std::string_view line) {
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw DataError(source_name, line_no, "record", "expected topic<TAB>description");
    }
    std::string topic = unescape_field(line.substr(0, tab));
    std::string desc = unescape_field(line.substr(tab + 1));
    if (topic.empty()) throw DataError(source_name, line_no, "topic", "empty topic");
    if (trim(desc).empty()) throw DataError(source_name, line_no, "description", "empty description");
    if (!out.emplace(topic, std::move(desc)).second) {
      throw DataError(source_name, line_no, "topic", "duplicate description for topic '" + topic + "'");
    }
  });
  return out;
}

std::map<std::string, std::string> load_descriptions(const std::filesystem::path& path) {
  return parse_descriptions(read_file(path), path.string());
}

std::string serialize_descriptions(const std::map<std::string, std::string>& descriptions) {
  std::string out;
  for (const auto& [topic, desc] : descriptions) out += escape_field(topic) + '\t' + escape_field(desc) + '\n';
  return out;
}

void save_descriptions(const std::filesystem::path& path, const std::map<std::string, std::string>& descriptions) {
  write_file(path, serialize_descriptions(descriptions));
}

// ---------------------------------------------------------------------------
// GeoGraph

GeoGraph::GeoGraph(std::vector<std::string> regions, const std::vector<std::pair<std::string, std::string>>& edges)
    : regions_(std::move(regions)) {
  if (regions_.empty()) throw DataError("", 0, "regions", "a region graph needs at least one region");
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    if (regions_[i].empty()) throw DataError("", 0, "regions", "empty region name");
    if (!index_.emplace(regions_[i], static_cast<int>(i)).second) {
      throw DataError("", 0, "regions", "duplicate region '" + regions_[i] + "'");
    }
  }
  const auto n = static_cast<Eigen::Index>(regions_.size());
  adjacency_ = Matrix::Identity(n, n);
  for (const auto& [a, b] : edges) {
    const int i = index_of(a);
    const int j = index_of(b);
    adjacency_(i, j) = 1.0;
    adjacency_(j, i) = 1.0;
  }
}

bool GeoGraph::contains(std::string_view region) const { return index_.find(region) != index_.end(); }

int GeoGraph::index_of(std::string_view region) const {
  auto it = index_.find(region);
  if (it == index_.end()) throw DataError("", 0, "geo", "unknown region '" + std::string(region) + "'");
  return it->second;
}

int GeoGraph::index_or_unknown(const std::optional<std::string>& region) const {
  return index_of(region ? std::string_view(*region) : kUnknownRegion);
}

GeoGraph GeoGraph::with_unknown() const {
  if (contains(kUnknownRegion)) return *this;
  std::vector<std::string> regions = regions_;
  std::vector<std::pair<std::string, std::string>> edges;
  for (Eigen::Index i = 0; i < adjacency_.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < adjacency_.cols(); ++j) {
      if (adjacency_(i, j) != 0.0) edges.emplace_back(regions_[i], regions_[j]);
    }
  }
  regions.emplace_back(kUnknownRegion);
  return GeoGraph(std::move(regions), edges);
}

std::string GeoGraph::serialize() const {
  std::string out;
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    if (i > 0) out += ',';
    out += regions_[i];
  }
  out += '\n';
  for (Eigen::Index i = 0; i < adjacency_.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < adjacency_.cols(); ++j) {
      if (adjacency_(i, j) != 0.0) out += regions_[i] + ',' + regions_[j] + '\n';
    }
  }
  return out;
}

GeoGraph parse_geo_graph(std::string_view content, const std::string& source_name) {
  std::vector<std::string> regions;
  std::set<std::string> known;
  std::vector<std::pair<std::string, std::string>> edges;
  bool header = true;
  for_each_line(content, [&](std::size_t line_no, std::string_view line) {
    const auto parts = split(line, ',');
    if (header) {
      header = false;
      for (auto p : parts) {
        std::string name = trim(p);
        if (name.empty()) throw DataError(source_name, line_no, "regions", "empty region name");
        if (!known.insert(name).second) {
          throw DataError(source_name, line_no, "regions", "duplicate region '" + name + "'");
        }
        regions.push_back(std::move(name));
      }
      return;
    }
    if (parts.size() != 2) throw DataError(source_name, line_no, "edge", "expected regionA,regionB");
    std::string a = trim(parts[0]);
    std::string b = trim(parts[1]);
    for (const auto* r : {&a, &b}) {
      if (!known.contains(*r)) {
        throw DataError(source_name, line_no, "edge", "edge references unknown region '" + *r + "'");
      }
    }
    edges.emplace_back(std::move(a), std::move(b));
  });
  if (regions.empty()) throw DataError(source_name, 0, "regions", "missing region list");
  return GeoGraph(std::move(regions), edges);
}

GeoGraph load_geo_graph(const std::filesystem::path& path) {
  return parse_geo_graph(read_file(path), path.string());
}

std::string us_states_graph_file() {
  static constexpr std::string_view kStates =
      "AL,AK,AZ,AR,CA,CO,CT,DE,FL,GA,HI,ID,IL,IN,IA,KS,KY,LA,ME,MD,MA,MI,MN,MS,MO,MT,NE,NV,NH,NJ,NM,NY,NC,ND,OH,OK,"
      "OR,PA,RI,SC,SD,TN,TX,UT,VT,VA,WA,WV,WI,WY,DC";
  // Shared land borders; four-corner point contacts are not edges.
  static constexpr std::string_view kBorders[] = {
      "AL FL GA MS TN",       "AZ CA NV NM UT",       "AR LA MS MO OK TN TX", "CA NV OR",
      "CO KS NE NM OK UT WY", "CT MA NY RI",          "DE MD NJ PA",          "FL GA",
      "GA NC SC TN",          "ID MT NV OR UT WA WY", "IL IN IA KY MO WI",    "IN KY MI OH",
      "IA MN MO NE SD WI",    "KS MO NE OK",          "KY MO OH TN VA WV",    "LA MS TX",
      "ME NH",                "MD PA VA WV DC",       "MA NH NY RI VT",       "MI OH WI",
      "MN ND SD WI",          "MS TN",                "MO NE OK TN",          "MT ND SD WY",
      "NE SD WY",             "NV OR UT",             "NH VT",                "NJ NY PA",
      "NM OK TX",             "NY PA VT",             "NC SC TN VA",          "ND SD",
      "OH PA WV",             "OK TX",                "OR WA",                "PA WV",
      "SD WY",                "TN VA",                "UT WY",                "VA WV DC"};
  std::string out(kStates);
  out += '\n';
  for (std::string_view row : kBorders) {
    const auto parts = split(row, ' ');
    for (std::size_t i = 1; i < parts.size(); ++i) {
      out += std::string(parts[0]) + ',' + std::string(parts[i]) + '\n';
    }
  }
  return out;
}

GeoGraph us_states_graph() { return parse_geo_graph(us_states_graph_file(), "<us-states>").with_unknown(); }

// ---------------------------------------------------------------------------
// Tasks and splits

std::string_view to_string(TaskMode m) { return m == TaskMode::cross_target ? "cross_target" : "zero_shot"; }

TaskMode parse_task_mode(std::string_view text) {
  if (text == "cross_target") return TaskMode::cross_target;
  if (text == "zero_shot") return TaskMode::zero_shot;
  throw ConfigError("invalid task mode '" + std::string(text) + "' (allowed: cross_target, zero_shot)");
}

void TaskSpec::validate() const {
  if (destination_topic.empty()) throw ConfigError("task has no destination topic");
  if (mode == TaskMode::cross_target && source_topics.size() != 1) {
    throw ConfigError("cross_target tasks need exactly one source topic, got " +
                      std::to_string(source_topics.size()));
  }
  if (mode == TaskMode::zero_shot && source_topics.size() < 2) {
    throw ConfigError("zero_shot tasks need at least two source topics, got " +
                      std::to_string(source_topics.size()));
  }
  std::set<std::string> seen;
  for (const auto& s : source_topics) {
    if (s == destination_topic) throw ConfigError("destination topic '" + s + "' is also a source");
    if (!seen.insert(s).second) throw ConfigError("duplicate source topic '" + s + "'");
  }
  if (seeds.empty()) throw ConfigError("task has an empty seed list");
}

std::vector<std::string> TaskSpec::topics() const {
  std::vector<std::string> out = source_topics;
  out.push_back(destination_topic);
  return out;
}

int TaskSpec::topic_index(std::string_view topic) const {
  for (std::size_t i = 0; i < source_topics.size(); ++i) {
    if (source_topics[i] == topic) return static_cast<int>(i);
  }
  if (destination_topic == topic) return static_cast<int>(source_topics.size());
  throw DataError("", 0, "topic", "topic '" + std::string(topic) + "' is not part of task " + name());
}

std::string TaskSpec::name() const {
  if (mode == TaskMode::zero_shot) return destination_topic;
  return (source_topics.empty() ? std::string("?") : source_topics.front()) + "->" + destination_topic;
}

LabeledCorpora group_by_topic(const std::vector<LabeledExample>& records) {
  LabeledCorpora out;
  for (const auto& r : records) out[r.topic].push_back(r);
  return out;
}

UnlabeledCorpora group_by_topic(const std::vector<UnlabeledExample>& records) {
  UnlabeledCorpora out;
  for (const auto& r : records) out[r.topic].push_back(r);
  return out;
}

SplitBundle build_splits(const TaskSpec& spec, const LabeledCorpora& labeled, const UnlabeledCorpora& unlabeled,
                         SplitRatios ratios, std::uint64_t seed) {
  spec.validate();
  if (!(ratios.train > 0.0 && ratios.train <= 1.0)) throw ConfigError("train ratio must be in (0, 1]");
  for (const auto& t : spec.topics()) {
    if (!labeled.contains(t)) throw DataError("", 0, "topic", "no labeled corpus for topic '" + t + "'");
  }

  std::vector<const LabeledExample*> source;
  for (const auto& t : spec.source_topics) {
    for (const auto& ex : labeled.at(t)) source.push_back(&ex);
  }

  Rng rng(seed);
  std::vector<char> is_dev(source.size(), 0);
  for (Stance s : kAllStances) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < source.size(); ++i) {
      if (source[i]->stance == s) idx.push_back(i);
    }
    rng.shuffle(idx);
    const auto n_dev = static_cast<std::size_t>(std::lround(static_cast<double>(idx.size()) * (1.0 - ratios.train)));
    for (std::size_t k = 0; k < n_dev && k < idx.size(); ++k) is_dev[idx[k]] = 1;
  }

  SplitBundle out;
  for (std::size_t i = 0; i < source.size(); ++i) {
    (is_dev[i] ? out.dev_labeled : out.train_labeled).push_back(*source[i]);
  }
  out.test_labeled = labeled.at(spec.destination_topic);

  for (const auto& t : spec.topics()) {
    auto it = unlabeled.find(t);
    if (it == unlabeled.end()) continue;
    out.discriminator_pool.insert(out.discriminator_pool.end(), it->second.begin(), it->second.end());
  }
  for (const auto& ex : out.train_labeled) out.discriminator_pool.push_back(strip_label(ex));

  for (const auto* set : {&out.train_labeled, &out.dev_labeled}) {
    for (const auto& ex : *set) {
      if (ex.topic == spec.destination_topic) {
        throw LeakageError("destination topic '" + spec.destination_topic + "' leaked into training data");
      }
    }
  }
  for (const auto& t : spec.topics()) {
    const bool present = std::any_of(out.discriminator_pool.begin(), out.discriminator_pool.end(),
                                     [&](const UnlabeledExample& ex) { return ex.topic == t; });
    if (!present) throw DataError("", 0, "topic", "discriminator pool has no example of topic '" + t + "'");
  }
  return out;
}

}  // namespace advstance
