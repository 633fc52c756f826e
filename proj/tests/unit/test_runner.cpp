#include "advstance/checkpoint.hpp"
#include "advstance/errors.hpp"
#include "advstance/runner.hpp"
#include "advstance/synth.hpp"

#include "doctest.h"

#include <fstream>
#include <sstream>

using namespace advstance;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "advstance_test_runner" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// A synthetic corpus on disk with a matching run configuration.
struct Bundle {
  fs::path dir;
  SynthFiles files;
  RunConfig cfg;

  explicit Bundle(const std::string& name, int topics = 2) : dir(scratch(name)) {
    SynthConfig g;
    g.n_topics = topics;
    g.labeled_per_topic = 40;
    g.unlabeled_per_topic = 20;
    files = write_synth_corpus(synth_generate(g), dir / "corpus");
    cfg.data.labeled = files.labeled;
    cfg.data.unlabeled = files.unlabeled;
    cfg.data.descriptions = files.descriptions;
    cfg.data.geo_graph = files.geo_graph;
    cfg.task = TaskSpec{TaskMode::cross_target, {synth_topic_name(0)}, synth_topic_name(1), {1}};
    cfg.train.seeds = {1};
    cfg.train.max_epochs = 3;
    cfg.train.patience = 3;
    cfg.train.learning_rate = 1e-2;
    cfg.train.encoder_lr_scale = 0.1;
    cfg.output_dir = dir / "run";
  }
};

std::vector<std::string> rules(const std::vector<Finding>& findings) {
  std::vector<std::string> out;
  for (const auto& f : findings) out.push_back(f.rule);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Archives and checkpoints

TEST_CASE("archive round trip") {
  const fs::path dir = scratch("archive");
  Archive a;
  a.tensors["w"] = Matrix::Random(3, 2);
  a.tensors["empty"] = Matrix(0, 4);
  a.texts["note"] = std::string("line\nwith\0nul", 13);
  save_archive(a, dir / "a.bin");
  const Archive b = load_archive(dir / "a.bin");
  CHECK(b.tensors.at("w") == a.tensors.at("w"));
  CHECK(b.tensors.at("empty").cols() == 4);
  CHECK(b.texts.at("note") == a.texts.at("note"));
}

TEST_CASE("damaged archives are rejected") {
  const fs::path dir = scratch("damaged");
  std::ofstream(dir / "foreign.bin") << "not an archive";
  CHECK_THROWS_AS((void)load_archive(dir / "foreign.bin"), DataError);
  CHECK_THROWS_AS((void)load_archive(dir / "missing.bin"), DataError);

  Archive a;
  a.tensors["w"] = Matrix::Ones(4, 4);
  save_archive(a, dir / "full.bin");
  const std::string bytes = read_file(dir / "full.bin");
  std::ofstream(dir / "cut.bin", std::ios::binary) << bytes.substr(0, bytes.size() - 9);
  CHECK_THROWS_AS((void)load_archive(dir / "cut.bin"), DataError);
}

TEST_CASE("prefixed loading names the offending tensor") {
  ParameterStore store;
  store.add("encoder.a", Matrix::Zero(2, 2));
  store.add("head.b", Matrix::Zero(1, 2));
  Archive good;
  good.tensors["encoder.a"] = Matrix::Ones(2, 2);
  load_prefixed_parameters(store, good, "encoder.");
  CHECK(store.at("encoder.a").value() == Matrix::Ones(2, 2));
  CHECK(store.at("head.b").value() == Matrix::Zero(1, 2));

  Archive bad;
  bad.tensors["encoder.a"] = Matrix::Ones(3, 2);
  try {
    load_prefixed_parameters(store, bad, "encoder.");
    FAIL("expected a ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("encoder.a") != std::string::npos);
  }
  CHECK_THROWS_AS(load_prefixed_parameters(store, Archive{}, "encoder."), ShapeError);
}

// ---------------------------------------------------------------------------
// Validation

TEST_CASE("a generated bundle validates cleanly") {
  const Bundle b("validate_clean");
  CHECK(validate_run(b.cfg).empty());
}

TEST_CASE("validation findings carry rule ids and lines") {
  Bundle b("validate_rules");
  {
    std::ofstream out(b.files.labeled[0], std::ios::app);
    out << synth_topic_name(0) << "\tfavor\tMARS\tsome text\n";
    out << synth_topic_name(0) << "\tagree\t" << b.cfg.task.destination_topic << "\tsome text\n";
  }
  {
    std::ofstream out(b.files.descriptions);
    out << synth_topic_name(0) << "\tonly one topic described\n";
  }
  const auto findings = validate_run(b.cfg);
  const auto ids = rules(findings);
  CHECK(std::count(ids.begin(), ids.end(), "GEO_UNKNOWN") == 1);
  CHECK(std::count(ids.begin(), ids.end(), "STANCE_INVALID") == 1);
  CHECK(std::count(ids.begin(), ids.end(), "DESC_MISSING") >= 1);
  for (const auto& f : findings) {
    if (f.rule == "GEO_UNKNOWN") {
      CHECK(f.line == 41);
      CHECK(format_finding(f).find(":41: GEO_UNKNOWN: ") != std::string::npos);
    }
  }

  RunConfig missing = b.cfg;
  missing.data.labeled.push_back(b.dir / "nope.tsv");
  const auto more = rules(validate_run(missing));
  CHECK(std::count(more.begin(), more.end(), "PATH_MISSING") == 1);

  CHECK(std::count(ids.begin(), ids.end(), "TOPIC_UNKNOWN") == 0);
}

TEST_CASE("configuration errors are reported without touching the data") {
  Bundle b("validate_config");
  b.cfg.train.patience = 0;
  CHECK(rules(validate_run(b.cfg)) == std::vector<std::string>{"CONFIG_INVALID"});
}

// ---------------------------------------------------------------------------
// Runs

TEST_CASE("train writes the run layout and repeats byte for byte") {
  Bundle b("train");
  const LoadedData data = load_run_data(b.cfg);
  const TrainOutcome first = run_train(b.cfg, data);
  REQUIRE(first.checkpoints.size() == 1);
  CHECK(fs::exists(b.cfg.output_dir / "config.snapshot"));
  CHECK(fs::exists(b.cfg.output_dir / "reports" / "train.tsv"));
  CHECK(fs::exists(b.cfg.output_dir / "reports" / "train.txt"));
  CHECK(first.logs.front().filename() == run_stem(b.cfg.task.name(), 1) + ".log");
  CHECK(run_stem("T0->T1", 2) == "T0_to_T1.seed2");

  const std::string log = read_file(first.logs.front());
  std::istringstream lines(log);
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    ++n;
    CHECK(std::count(line.begin(), line.end(), '\t') == 3);
  }
  CHECK(n >= 1);

  RunConfig again = b.cfg;
  again.output_dir = b.dir / "run2";
  const TrainOutcome second = run_train(again, data);
  CHECK(read_file(second.logs.front()) == log);
  CHECK(read_file(again.output_dir / "reports" / "train.tsv") == read_file(b.cfg.output_dir / "reports" / "train.tsv"));
}

TEST_CASE("a checkpoint reproduces its best dev score and its test score") {
  Bundle b("eval");
  const LoadedData data = load_run_data(b.cfg);
  const TrainOutcome trained = run_train(b.cfg, data);
  const fs::path ckpt = trained.checkpoints.front();

  const LoadedCheckpoint loaded = load_checkpoint(ckpt);
  CHECK(loaded.info.seed == 1);
  const EvalOutcome eval = run_eval(b.cfg, data, ckpt);
  CHECK(eval.dev.mean.f_avg == loaded.info.best_dev_f_avg);
  CHECK(eval.test.mean.f_avg == trained.report.per_seed.front().report.f_avg);

  // The best dev score also appears in the epoch log.
  char buf[32];
  std::snprintf(buf, sizeof(buf), "\t%.6f\n", loaded.info.best_dev_f_avg);
  CHECK(read_file(trained.logs.front()).find(buf) != std::string::npos);
  CHECK(fs::exists(b.cfg.output_dir / "reports" / "eval_test.tsv"));
  CHECK(fs::exists(b.cfg.output_dir / "reports" / "eval_dev.tsv"));
}

TEST_CASE("checkpoint and configuration shape mismatches name the tensor") {
  Bundle b("mismatch");
  const LoadedData data = load_run_data(b.cfg);
  const TrainOutcome trained = run_train(b.cfg, data);
  RunConfig other = b.cfg;
  other.train.geo_hidden = 64;
  try {
    (void)load_checkpoint_with_config(trained.checkpoints.front(), other);
    FAIL("expected a ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("geo.") != std::string::npos);
  }
  CHECK_THROWS_AS((void)load_checkpoint(b.dir / "absent.ckpt"), DataError);
}

TEST_CASE("predictions keep order and sum to one") {
  Bundle b("predict");
  const LoadedData data = load_run_data(b.cfg);
  const TrainOutcome trained = run_train(b.cfg, data);
  const LoadedCheckpoint loaded = load_checkpoint(trained.checkpoints.front());
  const auto& records = data.corpora.unlabeled.at(synth_topic_name(1));
  const auto preds = predict_records(*loaded.classifier, records);
  REQUIRE(preds.size() == records.size());
  for (const auto& p : preds) {
    CHECK(std::abs(p.probabilities[0] + p.probabilities[1] + p.probabilities[2] - 1.0) < 1e-6);
  }
  const std::vector<UnlabeledExample> one{records[3]};
  // Batch composition changes only floating-point summation order.
  const auto alone = predict_records(*loaded.classifier, one).front();
  for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(alone.probabilities[k] - preds[3].probabilities[k]) < 1e-12);
  CHECK(alone.label == preds[3].label);
  CHECK(predict_records(*loaded.classifier, {}).empty());
  CHECK(format_predictions({}).empty());
  const std::string text = format_predictions({preds[0]});
  CHECK(std::count(text.begin(), text.end(), '\t') == 3);
}

TEST_CASE("suite on three topics writes six and three rows") {
  Bundle b("suite", 3);
  b.cfg.train.max_epochs = 1;
  b.cfg.train.patience = 1;
  const LoadedData data = load_run_data(b.cfg);
  const auto reports = run_suite_to_dir(b.cfg, data, {TaskMode::cross_target, TaskMode::zero_shot});
  CHECK(reports.size() == 9);
  const std::string tsv = read_file(b.cfg.output_dir / "reports" / "suite.tsv");
  CHECK(std::count(tsv.begin(), tsv.end(), '\n') == 1 + 9 * 2);
}
