#include "advstance/checkpoint.hpp"

#include "advstance/errors.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace advstance {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'A', 'D', 'V', 'S', 'T', 'A', 'R', '1'};
constexpr std::uint64_t kMaxNameLength = 1 << 16;

void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); }

class Reader {
 public:
  Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  void bytes(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail("truncated archive");
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    bytes(&v, sizeof(v));
    return v;
  }
  std::string text(std::uint64_t n) {
    std::string s(n, '\0');
    if (n > 0) bytes(s.data(), n);
    return s;
  }
  [[noreturn]] void fail(const std::string& message) const { throw DataError(source_, 0, "archive", message); }

 private:
  std::istream& in_;
  std::string source_;
};

std::string shape_string(Eigen::Index r, Eigen::Index c) { return std::to_string(r) + "x" + std::to_string(c); }

std::string text_entry(const Archive& a, const std::string& key, const std::filesystem::path& path) {
  const auto it = a.texts.find(key);
  if (it == a.texts.end()) throw DataError(path.string(), 0, "archive", "checkpoint lacks the '" + key + "' entry");
  return it->second;
}

struct StoredContext {
  std::shared_ptr<const Tokenizer> tokenizer;
  std::map<std::string, std::string> descriptions;
  GeoGraph graph;
};

StoredContext stored_context(const Archive& a, const std::filesystem::path& path) {
  return {std::shared_ptr<const Tokenizer>(
              make_tokenizer(text_entry(a, "tokenizer.kind", path), text_entry(a, "tokenizer.vocab", path))),
          parse_descriptions(text_entry(a, "descriptions", path), path.string() + ":descriptions"),
          parse_geo_graph(text_entry(a, "graph", path), path.string() + ":graph")};
}

std::unique_ptr<StanceClassifier> build_from(const Archive& a, const RunConfig& config, std::uint64_t seed,
                                             const std::filesystem::path& path) {
  StoredContext ctx = stored_context(a, path);
  ClassifierOptions options;
  options.limits = PairLimits{config.train.max_desc_tokens, config.train.max_text_tokens};
  options.use_description = config.use_description;
  auto clf = std::make_unique<StanceClassifier>(
      make_model_config(config.train, config.encoder, config.use_geo, config.normalize_adjacency), config.task,
      ctx.tokenizer, std::move(ctx.descriptions), std::move(ctx.graph), seed, options);
  restore_parameters(clf->model(), a);
  return clf;
}

}  // namespace

void save_archive(const Archive& archive, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write archive " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put_u64(out, archive.tensors.size() + archive.texts.size());
  for (const auto& [name, m] : archive.tensors) {
    out.put(0);
    put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(out, static_cast<std::uint64_t>(m.rows()));
    put_u64(out, static_cast<std::uint64_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
  for (const auto& [name, text] : archive.texts) {
    out.put(1);
    put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
  }
  if (!out) throw Error("failed writing archive " + path.string());
}

Archive load_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string(), 0, "archive", "cannot open file");
  const auto file_size = static_cast<std::uint64_t>(std::filesystem::file_size(path));
  Reader r(in, path.string());
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) r.fail("not a tensor archive (bad magic)");
  Archive a;
  const std::uint64_t n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    char kind = 0;
    r.bytes(&kind, 1);
    const std::uint64_t name_len = r.u64();
    if (name_len == 0 || name_len > kMaxNameLength) r.fail("corrupt entry name length");
    std::string name = r.text(name_len);
    if (kind == 0) {
      const std::uint64_t rows = r.u64();
      const std::uint64_t cols = r.u64();
      if (rows != 0 && cols > file_size / sizeof(double) / rows) r.fail("tensor '" + name + "' larger than the file");
      Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
      if (m.size() > 0) r.bytes(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
      if (!a.tensors.emplace(name, std::move(m)).second) r.fail("duplicate tensor '" + name + "'");
    } else if (kind == 1) {
      const std::uint64_t len = r.u64();
      if (len > file_size) r.fail("text entry '" + name + "' larger than the file");
      if (!a.texts.emplace(name, r.text(len)).second) r.fail("duplicate text entry '" + name + "'");
    } else {
      r.fail("unknown entry kind " + std::to_string(static_cast<int>(kind)));
    }
  }
  return a;
}

void load_prefixed_parameters(ParameterStore& store, const Archive& archive, const std::string& prefix) {
  std::size_t loaded = 0;
  for (const auto& name : store.names()) {
    if (!name.starts_with(prefix)) continue;
    const auto it = archive.tensors.find(name);
    if (it == archive.tensors.end()) throw ShapeError("weights file lacks tensor '" + name + "'");
    Var& p = store.at(name);
    if (it->second.rows() != p.rows() || it->second.cols() != p.cols()) {
      throw ShapeError("tensor '" + name + "' has shape " + shape_string(it->second.rows(), it->second.cols()) +
                       ", the configuration expects " + shape_string(p.rows(), p.cols()));
    }
    p.mutable_value() = it->second;
    ++loaded;
  }
  if (loaded == 0) throw ShapeError("no parameters with prefix '" + prefix + "' to load");
}

void restore_parameters(StanceModel& model, const Archive& archive) {
  ParameterSnapshot snap;
  for (const auto& name : model.params().names()) {
    const auto it = archive.tensors.find(name);
    if (it == archive.tensors.end()) throw ShapeError("checkpoint lacks tensor '" + name + "'");
    snap.emplace(name, it->second);
  }
  for (const auto& [name, _] : archive.tensors) {
    if (!model.params().contains(name)) {
      throw ShapeError("checkpoint tensor '" + name + "' is not part of the configured model");
    }
  }
  model.params().restore(snap);
}

void save_checkpoint(const std::filesystem::path& path, const StanceClassifier& classifier, const RunConfig& config,
                     const CheckpointInfo& info) {
  Archive a;
  a.tensors = classifier.model().params().snapshot();
  a.texts["config"] = serialize_run_config(config);
  a.texts["seed"] = std::to_string(info.seed);
  a.texts["best_epoch"] = std::to_string(info.best_epoch);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", info.best_dev_f_avg);
  a.texts["best_dev_f_avg"] = buf;
  a.texts["tokenizer.kind"] = std::string(classifier.tokenizer().kind());
  a.texts["tokenizer.vocab"] = classifier.tokenizer().serialize_vocabulary();
  a.texts["descriptions"] = serialize_descriptions(classifier.descriptions());
  a.texts["graph"] = classifier.model().graph().serialize();
  save_archive(a, path);
}

namespace {

LoadedCheckpoint from_archive(const Archive& a, const std::filesystem::path& path, const RunConfig& config) {
  LoadedCheckpoint out;
  out.config = config;
  try {
    out.info.seed = std::stoull(text_entry(a, "seed", path));
    out.info.best_epoch = std::stoull(text_entry(a, "best_epoch", path));
    out.info.best_dev_f_avg = std::stod(text_entry(a, "best_dev_f_avg", path));
  } catch (const std::logic_error&) {
    throw DataError(path.string(), 0, "archive", "malformed checkpoint metadata");
  }
  out.classifier = build_from(a, out.config, out.info.seed, path);
  return out;
}

}  // namespace

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const Archive a = load_archive(path);
  return from_archive(a, path, parse_run_config(text_entry(a, "config", path), path.string() + ":config", {}));
}

LoadedCheckpoint load_checkpoint_with_config(const std::filesystem::path& path, const RunConfig& config) {
  return from_archive(load_archive(path), path, config);
}

}  // namespace advstance
