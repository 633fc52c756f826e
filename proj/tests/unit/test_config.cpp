#include "advstance/config.hpp"
#include "advstance/errors.hpp"

#include "doctest.h"

#include <cstdlib>
#include <fstream>

using namespace advstance;
namespace fs = std::filesystem;

namespace {

const char* kConfig = R"(# cross-target run
task.mode = cross_target
task.sources = SH
task.destination = WM
data.labeled = sh.tsv, wm.tsv
data.unlabeled = sh_u.tsv
data.descriptions = desc.tsv
train.alpha = 0.02      # doubled
train.seeds = 3,4
model.use_geo = false
)";

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "advstance_test_config" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("key-value parsing with comments") {
  const auto kv = parse_key_values(kConfig, "run.cfg");
  REQUIRE(kv.size() == 9);
  CHECK(kv[0] == std::pair<std::string, std::string>{"task.mode", "cross_target"});
  CHECK(kv[6] == std::pair<std::string, std::string>{"train.alpha", "0.02"});
}

TEST_CASE("malformed lines and duplicate keys name the line") {
  try {
    (void)parse_key_values("a = 1\njunk\n", "x.cfg");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("x.cfg:2") != std::string::npos);
  }
  try {
    (void)parse_key_values("a = 1\n\na = 2\n", "x.cfg");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("x.cfg:3") != std::string::npos);
  }
}

TEST_CASE("run config from text resolves paths against the file's directory") {
  const RunConfig cfg = parse_run_config(kConfig, "run.cfg", "/data/exp");
  CHECK(cfg.task.mode == TaskMode::cross_target);
  CHECK(cfg.task.source_topics == std::vector<std::string>{"SH"});
  CHECK(cfg.task.destination_topic == "WM");
  CHECK(cfg.data.labeled == std::vector<fs::path>{"/data/exp/sh.tsv", "/data/exp/wm.tsv"});
  CHECK(cfg.data.descriptions == fs::path("/data/exp/desc.tsv"));
  CHECK(cfg.data.geo_graph.empty());
  CHECK(cfg.train.alpha == 0.02);
  CHECK(cfg.train.seeds == std::vector<std::uint64_t>{3, 4});
  CHECK(cfg.task.seeds == cfg.train.seeds);
  CHECK_FALSE(cfg.use_geo);
  CHECK(cfg.train.lambda == 0.1);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("unknown keys and bad values are config errors") {
  RunConfig cfg;
  CHECK_THROWS_AS(apply_setting(cfg, "train.alhpa", "1"), ConfigError);
  CHECK_THROWS_AS(apply_setting(cfg, "train.alpha", "lots"), ConfigError);
  CHECK_THROWS_AS(apply_setting(cfg, "train.batch_size", "-4"), ConfigError);
  CHECK_THROWS_AS(apply_setting(cfg, "model.use_geo", "maybe"), ConfigError);
  CHECK_THROWS_AS(apply_setting(cfg, "task.mode", "few_shot"), ConfigError);
  CHECK_THROWS_AS((void)split_override("novalue"), ConfigError);
  CHECK(split_override("train.alpha = 0") == std::pair<std::string, std::string>{"train.alpha", "0"});
}

TEST_CASE("cross-field validation") {
  RunConfig cfg = parse_run_config(kConfig, "run.cfg", "/x");
  cfg.ratios.train = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = parse_run_config(kConfig, "run.cfg", "/x");
  cfg.train.max_text_tokens = 101;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = parse_run_config(kConfig, "run.cfg", "/x");
  cfg.task.destination_topic = "SH";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("every key survives a serialize/parse round trip") {
  RunConfig cfg = parse_run_config(kConfig, "run.cfg", "/data/exp");
  cfg.train.learning_rate = 1.0 / 3.0;
  cfg.encoder.hidden_size = 64;
  cfg.encoder.num_heads = 4;
  const std::string text = serialize_run_config(cfg);
  const RunConfig back = parse_run_config(text, "snapshot", "/elsewhere");
  CHECK(serialize_run_config(back) == text);
  CHECK(back.train.learning_rate == cfg.train.learning_rate);
  CHECK(back.data.labeled == cfg.data.labeled);
  for (const auto& key : config_keys()) CHECK(text.find(key + " =") != std::string::npos);
}

TEST_CASE("file loading with overrides") {
  const fs::path dir = scratch("load");
  {
    std::ofstream out(dir / "run.cfg");
    out << kConfig;
  }
  const RunConfig cfg = load_run_config(dir / "run.cfg", {"train.alpha=0", "encoder.kind=pretrained"});
  CHECK(cfg.train.alpha == 0.0);
  CHECK(cfg.encoder.kind == EncoderKind::pretrained);
  CHECK(cfg.encoder.hidden_size == 768);
  CHECK(cfg.data.labeled.front() == (dir / "sh.tsv").lexically_normal());
  CHECK_THROWS_AS((void)load_run_config(dir / "missing.cfg"), ConfigError);
}

TEST_CASE("pretrained files resolve from explicit paths or the cache directory") {
  const fs::path dir = scratch("cache");
  fs::create_directories(dir / "bert-base-uncased");
  std::ofstream(dir / "bert-base-uncased" / "weights.bin") << "x";
  std::ofstream(dir / "bert-base-uncased" / "vocab.txt") << "x";

  EncoderConfig enc = EncoderConfig::base();
  enc.weights_path = (dir / "w.bin").string();
  CHECK(resolve_encoder_file(enc, "weights") == dir / "w.bin");
  CHECK(resolve_encoder_file(enc, "vocab") == dir / "vocab.txt");

  enc = EncoderConfig::base();
  ::setenv(kCacheDirEnv, dir.c_str(), 1);
  CHECK(resolve_encoder_file(enc, "weights") == dir / "bert-base-uncased" / "weights.bin");
  CHECK(resolve_encoder_file(enc, "vocab") == dir / "bert-base-uncased" / "vocab.txt");
  ::unsetenv(kCacheDirEnv);
  CHECK_THROWS_AS((void)resolve_encoder_file(enc, "weights"), ConfigError);
}
