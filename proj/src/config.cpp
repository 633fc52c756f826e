#include "advstance/config.hpp"

#include "advstance/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace advstance {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto end = comma == std::string_view::npos ? s.size() : comma;
    std::string item = trim(s.substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, std::string_view expected) {
  throw ConfigError("config key '" + key + "': invalid value '" + value + "' (expected " + std::string(expected) + ")");
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (value.empty() || ec != std::errc() || ptr != end) bad_value(key, value, "a nonnegative integer");
  return out;
}

std::size_t to_size(const std::string& key, const std::string& value) {
  return static_cast<std::size_t>(to_u64(key, value));
}

double to_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double out = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size()) bad_value(key, value, "a number");
  return out;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value, "true or false");
}

std::filesystem::path to_path(const std::string& value, const std::filesystem::path& base_dir) {
  if (value.empty()) return {};
  std::filesystem::path p(value);
  if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
  return p.lexically_normal();
}

/// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

std::string abs_path(const std::filesystem::path& p) {
  return p.empty() ? std::string() : std::filesystem::absolute(p).lexically_normal().string();
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&, const std::filesystem::path&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Key {
  Setter set;
  Getter get;
};

#define SIZE_KEY(field)                                                                          \
  Key {                                                                                          \
    [](RunConfig& c, const std::string& k, const std::string& v, const std::filesystem::path&) { \
      c.field = to_size(k, v);                                                                   \
    },                                                                                           \
        [](const RunConfig& c) { return std::to_string(c.field); }                               \
  }
#define DOUBLE_KEY(field)                                                                        \
  Key {                                                                                          \
    [](RunConfig& c, const std::string& k, const std::string& v, const std::filesystem::path&) { \
      c.field = to_double(k, v);                                                                 \
    },                                                                                           \
        [](const RunConfig& c) { return fmt_double(c.field); }                                   \
  }
#define BOOL_KEY(field)                                                                          \
  Key {                                                                                          \
    [](RunConfig& c, const std::string& k, const std::string& v, const std::filesystem::path&) { \
      c.field = to_bool(k, v);                                                                   \
    },                                                                                           \
        [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); }               \
  }

const std::map<std::string, Key>& key_table() {
  static const std::map<std::string, Key> table{
      {"task.mode", {[](RunConfig& c, const std::string&, const std::string& v, const std::filesystem::path&) {
                       c.task.mode = parse_task_mode(v);
                     },
                     [](const RunConfig& c) { return std::string(to_string(c.task.mode)); }}},
      {"task.sources", {[](RunConfig& c, const std::string&, const std::string& v, const std::filesystem::path&) {
                          c.task.source_topics = split_list(v);
                        },
                        [](const RunConfig& c) { return join(c.task.source_topics); }}},
      {"task.destination",
       {[](RunConfig& c, const std::string&, const std::string& v, const std::filesystem::path&) {
          c.task.destination_topic = v;
        },
        [](const RunConfig& c) { return c.task.destination_topic; }}},

      {"data.labeled", {[](RunConfig& c, const std::string&, const std::string& v, const std::filesystem::path& b) {
                          c.data.labeled.clear();
                          for (const auto& p : split_list(v)) c.data.labeled.push_back(to_path(p, b));
                        },
                        [](const RunConfig& c) {
                          std::vector<std::string> s;
                          for (const auto& p : c.data.labeled) s.push_back(abs_path(p));
                          return join(s);
                        }}},
      {"data.unlabeled", {[](RunConfig& c, const std::string&, const std::string& v, const std::filesystem::path& b) {
                            c.data.unlabeled.clear();
                            for (const auto& p : split_list(v)) c.data.unlabeled.push_back(to_path(p, b));
                          },
                          [](const RunConfig& c) {
                            std::vector<std::string> s;
                            for (const auto& p : c.data.unlabeled) s.push_back(abs_path(p));
                            return join(s);
                          }}},
      {"data.descriptions",
       {[](RunConfig& c, const std::string&, const std::string& v, const std::filesystem::path& b) {
          c.data.descriptions = to_path(v, b);
        },
        [](const RunConfig& c) { return abs_path(c.data.descriptions); }}},
      {"data.geo_graph", {[](RunConfig& c, const std::string&, const std::string& v, const std::filesystem::path& b) {
                            c.data.geo_graph = to_path(v, b);
                          },
                          [](const RunConfig& c) { return abs_path(c.data.geo_graph); }}},
      {"data.train_fraction", DOUBLE_KEY(ratios.train)},
      {"output.dir", {[](RunConfig& c, const std::string&, const std::string& v, const std::filesystem::path& b) {
                        c.output_dir = to_path(v, b);
                      },
                      [](const RunConfig& c) { return abs_path(c.output_dir); }}},

      {"encoder.kind", {[](RunConfig& c, const std::string&, const std::string& v, const std::filesystem::path&) {
                          const EncoderKind kind = parse_encoder_kind(v);
                          EncoderConfig fresh = kind == EncoderKind::pretrained ? EncoderConfig::base()
                                                                                : EncoderConfig::tiny();
                          fresh.weights_path = c.encoder.weights_path;
                          fresh.vocab_path = c.encoder.vocab_path;
                          c.encoder = fresh;
                        },
                        [](const RunConfig& c) { return std::string(to_string(c.encoder.kind)); }}},
      {"encoder.weights_path",
       {[](RunConfig& c, const std::string&, const std::string& v, const std::filesystem::path& b) {
          c.encoder.weights_path = to_path(v, b).string();
        },
        [](const RunConfig& c) { return abs_path(c.encoder.weights_path); }}},
      {"encoder.vocab_path", {[](RunConfig& c, const std::string&, const std::string& v, const std::filesystem::path& b) {
                                c.encoder.vocab_path = to_path(v, b).string();
                              },
                              [](const RunConfig& c) { return abs_path(c.encoder.vocab_path); }}},
      {"encoder.vocab_size", SIZE_KEY(encoder.vocab_size)},
      {"encoder.hidden_size", SIZE_KEY(encoder.hidden_size)},
      {"encoder.num_layers", SIZE_KEY(encoder.num_layers)},
      {"encoder.num_heads", SIZE_KEY(encoder.num_heads)},
      {"encoder.intermediate_size", SIZE_KEY(encoder.intermediate_size)},
      {"encoder.max_positions", SIZE_KEY(encoder.max_positions)},

      {"model.use_geo", BOOL_KEY(use_geo)},
      {"model.normalize_adjacency", BOOL_KEY(normalize_adjacency)},
      {"model.use_description", BOOL_KEY(use_description)},

      {"train.batch_size", SIZE_KEY(train.batch_size)},
      {"train.dropout", DOUBLE_KEY(train.dropout)},
      {"train.max_epochs", SIZE_KEY(train.max_epochs)},
      {"train.patience", SIZE_KEY(train.patience)},
      {"train.early_stopping", BOOL_KEY(train.early_stopping)},
      {"train.learning_rate", DOUBLE_KEY(train.learning_rate)},
      {"train.encoder_lr_scale", DOUBLE_KEY(train.encoder_lr_scale)},
      {"train.weight_decay", DOUBLE_KEY(train.weight_decay)},
      {"train.alpha", DOUBLE_KEY(train.alpha)},
      {"train.lambda", DOUBLE_KEY(train.lambda)},
      {"train.geo_hidden", SIZE_KEY(train.geo_hidden)},
      {"train.gcn_layers", SIZE_KEY(train.gcn_layers)},
      {"train.max_text_tokens", SIZE_KEY(train.max_text_tokens)},
      {"train.max_desc_tokens", SIZE_KEY(train.max_desc_tokens)},
      {"train.grad_clip", DOUBLE_KEY(train.grad_clip)},
      {"train.seeds", {[](RunConfig& c, const std::string& k, const std::string& v, const std::filesystem::path&) {
                         std::vector<std::uint64_t> seeds;
                         for (const auto& s : split_list(v)) seeds.push_back(to_u64(k, s));
                         c.train.seeds = seeds;
                         c.task.seeds = seeds;
                       },
                       [](const RunConfig& c) {
                         std::vector<std::string> s;
                         for (auto v : c.train.seeds) s.push_back(std::to_string(v));
                         return join(s);
                       }}},
      {"train.favg_classes",
       {[](RunConfig& c, const std::string&, const std::string& v, const std::filesystem::path&) {
          c.train.favg_classes = parse_favg_classes(v);
        },
        [](const RunConfig& c) { return std::string(c.train.favg_classes == FavgClasses::all ? "3" : "2"); }}},
  };
  return table;
}

#undef SIZE_KEY
#undef DOUBLE_KEY
#undef BOOL_KEY

/// encoder.kind first so explicit sizes given alongside it are kept.
void apply_all(RunConfig& cfg, const std::vector<std::pair<std::string, std::string>>& entries,
               const std::vector<std::filesystem::path>& base_dirs) {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].first == "encoder.kind") apply_setting(cfg, entries[i].first, entries[i].second, base_dirs[i]);
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].first != "encoder.kind") apply_setting(cfg, entries[i].first, entries[i].second, base_dirs[i]);
  }
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  task.validate();
  encoder.validate();
  if (!(ratios.train > 0.0 && ratios.train < 1.0)) throw ConfigError("data.train_fraction must be in (0, 1)");
  if (train.max_text_tokens > kMaxTextTokens || train.max_desc_tokens > kMaxDescriptionTokens) {
    throw ConfigError("train.max_text_tokens / train.max_desc_tokens exceed the pair format caps (100 / 50)");
  }
  if (train.seeds != task.seeds) throw ConfigError("train.seeds and the task seed list disagree");
}

std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text, const std::string& source) {
  std::vector<std::pair<std::string, std::string>> out;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    const auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    const std::string where = source + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    std::string key = trim(std::string_view(trimmed).substr(0, eq));
    std::string value = trim(std::string_view(trimmed).substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (!seen.insert(key).second) throw ConfigError(where + ": duplicate key '" + key + "'");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : key_table()) out.push_back(k);
  return out;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value,
                   const std::filesystem::path& base_dir) {
  const auto& table = key_table();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  try {
    it->second.set(cfg, key, value, base_dir);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

std::pair<std::string, std::string> split_override(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(text) + "' is not key=value");
  std::string key = trim(text.substr(0, eq));
  if (key.empty()) throw ConfigError("override '" + std::string(text) + "' has an empty key");
  return {key, trim(text.substr(eq + 1))};
}

RunConfig parse_run_config(std::string_view text, const std::string& source, const std::filesystem::path& base_dir) {
  const auto entries = parse_key_values(text, source);
  RunConfig cfg;
  apply_all(cfg, entries, std::vector<std::filesystem::path>(entries.size(), base_dir));
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  auto entries = parse_key_values(ss.str(), path.string());
  std::vector<std::filesystem::path> dirs(entries.size(), path.parent_path());
  for (const auto& o : overrides) {
    auto kv = split_override(o);
    auto it = std::find_if(entries.begin(), entries.end(), [&](const auto& e) { return e.first == kv.first; });
    if (it != entries.end()) {
      it->second = kv.second;
      dirs[static_cast<std::size_t>(it - entries.begin())] = std::filesystem::current_path();
    } else {
      entries.push_back(kv);
      dirs.push_back(std::filesystem::current_path());
    }
  }
  RunConfig cfg;
  apply_all(cfg, entries, dirs);
  return cfg;
}

std::string serialize_run_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [key, k] : key_table()) out += key + " = " + k.get(cfg) + "\n";
  return out;
}

std::filesystem::path resolve_encoder_file(const EncoderConfig& encoder, std::string_view file) {
  const bool weights = file == "weights";
  if (!weights && file != "vocab") throw ConfigError("resolve_encoder_file: unknown file kind");
  const std::string& explicit_path = weights ? encoder.weights_path : encoder.vocab_path;
  if (!explicit_path.empty()) return explicit_path;
  if (!weights && !encoder.weights_path.empty()) {
    return std::filesystem::path(encoder.weights_path).parent_path() / "vocab.txt";
  }
  const char* cache = std::getenv(kCacheDirEnv);
  if (cache == nullptr || *cache == '\0') {
    throw ConfigError(std::string("pretrained encoder needs encoder.") + (weights ? "weights_path" : "vocab_path") +
                      " or the " + kCacheDirEnv + " environment variable");
  }
  return std::filesystem::path(cache) / "bert-base-uncased" / (weights ? "weights.bin" : "vocab.txt");
}

}  // namespace advstance
