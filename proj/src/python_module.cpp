// Python bindings: configuration, validation, training, evaluation,
// prediction, the synthetic generator, metrics, model pieces, the encoder
// and the acceptance criteria.

#include "advstance/checkpoint.hpp"
#include "advstance/errors.hpp"
#include "advstance/harness.hpp"
#include "advstance/metrics.hpp"
#include "advstance/model.hpp"
#include "advstance/runner.hpp"
#include "advstance/synth.hpp"
#include "advstance/tokenizer.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace advstance;

namespace {

std::vector<Stance> to_stances(const std::vector<std::string>& labels) {
  std::vector<Stance> out;
  out.reserve(labels.size());
  for (const auto& l : labels) out.push_back(parse_stance(l));
  return out;
}

py::dict metric_dict(const MetricReport& r) {
  py::dict d;
  d["f_favor"] = r.per_class_f1[0];
  d["f_against"] = r.per_class_f1[1];
  d["f_none"] = r.per_class_f1[2];
  d["f_avg"] = r.f_avg;
  d["f_m"] = r.f_m;
  d["micro_f1"] = r.micro_f1;
  d["macro_f1"] = r.macro_f1;
  d["n_examples"] = r.n_examples;
  return d;
}

py::dict report_dict(const TaskReport& r) {
  py::dict d;
  d["task"] = r.task;
  py::dict per_seed;
  for (const auto& s : r.per_seed) per_seed[py::int_(s.seed)] = metric_dict(s.report);
  d["per_seed"] = per_seed;
  d["mean"] = metric_dict(r.mean);
  return d;
}

py::list findings_list(const std::vector<Finding>& findings) {
  py::list out;
  for (const auto& f : findings) {
    py::dict d;
    d["file"] = f.file;
    d["line"] = f.line;
    d["rule"] = f.rule;
    d["message"] = f.message;
    out.append(d);
  }
  return out;
}

UnlabeledExample to_record(const py::handle& item) {
  const auto t = item.cast<py::tuple>();
  if (t.size() != 2 && t.size() != 3) throw ShapeError("records are (topic, text) or (topic, text, geo) tuples");
  UnlabeledExample ex;
  ex.topic = t[0].cast<std::string>();
  ex.text = t[1].cast<std::string>();
  if (t.size() == 3 && !t[2].is_none()) ex.geo = t[2].cast<std::string>();
  return ex;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Adversarial cross-target stance detection";

  auto base_error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base_error);
  py::register_exception<DataError>(m, "DataError", base_error);
  py::register_exception<ShapeError>(m, "ShapeError", base_error);
  py::register_exception<LeakageError>(m, "LeakageError", base_error);
  py::register_exception<TrainingError>(m, "TrainingError", base_error);

  // Configuration ----------------------------------------------------------

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def("set", [](RunConfig& c, const std::string& key, const std::string& value) { apply_setting(c, key, value); },
           py::arg("key"), py::arg("value"))
      .def("validate", &RunConfig::validate)
      .def("serialize", [](const RunConfig& c) { return serialize_run_config(c); })
      .def_property_readonly("output_dir", [](const RunConfig& c) { return c.output_dir; })
      .def_property_readonly("seeds", [](const RunConfig& c) { return c.train.seeds; })
      .def_property_readonly("task", [](const RunConfig& c) { return c.task.name(); });

  m.def("load_config", &load_run_config, py::arg("path"), py::arg("overrides") = std::vector<std::string>{},
        "Reads a key = value file and applies key=value overrides.");
  m.def("parse_config", &parse_run_config, py::arg("text"), py::arg("source") = "<string>",
        py::arg("base_dir") = std::filesystem::path{});
  m.def("config_keys", &config_keys);

  // Runs -------------------------------------------------------------------

  m.def(
      "validate", [](const RunConfig& cfg) { return findings_list(validate_run(cfg)); }, py::arg("config"),
      "Findings as dicts with file, line, rule and message; empty when clean.");
  m.def(
      "train",
      [](const RunConfig& cfg, const std::function<void(const std::string&)>& log) {
        const LoadedData data = load_run_data(cfg);
        TrainOutcome out;
        {
          py::gil_scoped_release release;
          out = run_train(cfg, data, log ? LogSink([&](const std::string& line) {
            py::gil_scoped_acquire acquire;
            log(line);
          })
                                         : LogSink{});
        }
        py::dict d = report_dict(out.report);
        d["checkpoints"] = out.checkpoints;
        d["logs"] = out.logs;
        return d;
      },
      py::arg("config"), py::arg("log") = std::function<void(const std::string&)>{});
  m.def(
      "evaluate",
      [](const RunConfig& cfg, const std::filesystem::path& checkpoint) {
        const LoadedData data = load_run_data(cfg);
        const EvalOutcome out = run_eval(cfg, data, checkpoint);
        py::dict d;
        d["test"] = report_dict(out.test);
        d["dev"] = report_dict(out.dev);
        return d;
      },
      py::arg("config"), py::arg("checkpoint"));
  m.def(
      "suite",
      [](const RunConfig& cfg, const std::vector<std::string>& mode_names) {
        std::vector<TaskMode> modes;
        for (const auto& name : mode_names) modes.push_back(parse_task_mode(name));
        const LoadedData data = load_run_data(cfg);
        std::vector<TaskReport> reports;
        {
          py::gil_scoped_release release;
          reports = run_suite_to_dir(cfg, data, modes);
        }
        py::list out;
        for (const auto& r : reports) out.append(report_dict(r));
        return out;
      },
      py::arg("config"), py::arg("modes") = std::vector<std::string>{"cross_target", "zero_shot"});

  py::class_<LoadedCheckpoint>(m, "Checkpoint")
      .def(py::init([](const std::filesystem::path& path) { return load_checkpoint(path); }), py::arg("path"))
      .def_property_readonly("seed", [](const LoadedCheckpoint& c) { return c.info.seed; })
      .def_property_readonly("best_epoch", [](const LoadedCheckpoint& c) { return c.info.best_epoch; })
      .def_property_readonly("best_dev_f_avg", [](const LoadedCheckpoint& c) { return c.info.best_dev_f_avg; })
      .def_property_readonly("config", [](const LoadedCheckpoint& c) { return c.config; })
      .def(
          "predict",
          [](const LoadedCheckpoint& c, const py::iterable& records) {
            std::vector<UnlabeledExample> examples;
            for (const auto& item : records) examples.push_back(to_record(item));
            py::list out;
            for (const auto& p : predict_records(*c.classifier, examples)) {
              out.append(py::make_tuple(std::string(to_string(p.label)), p.probabilities));
            }
            return out;
          },
          py::arg("records"), "Records are (topic, text[, geo]); returns (label, [p_favor, p_against, p_none]).");

  // Synthetic corpora ------------------------------------------------------

  m.def(
      "synth",
      [](const std::filesystem::path& out_dir, int n_topics, int labeled, int unlabeled, int n_regions,
         std::uint64_t seed) {
        SynthConfig g;
        g.n_topics = n_topics;
        g.labeled_per_topic = labeled;
        g.unlabeled_per_topic = unlabeled;
        g.n_regions = n_regions;
        g.seed = seed;
        const SynthCorpus corpus = synth_generate(g);
        const SynthFiles files = write_synth_corpus(corpus, out_dir);
        py::dict d;
        d["topics"] = corpus.topics;
        d["labeled"] = files.labeled;
        d["unlabeled"] = files.unlabeled;
        d["descriptions"] = files.descriptions;
        d["geo_graph"] = files.geo_graph;
        return d;
      },
      py::arg("out_dir"), py::arg("n_topics") = 3, py::arg("labeled") = 200, py::arg("unlabeled") = 300,
      py::arg("n_regions") = 8, py::arg("seed") = 7);
  m.def(
      "synth_oracle_label",
      [](const std::string& text) -> std::optional<std::string> {
        const auto label = synth_oracle_label(text);
        if (!label) return std::nullopt;
        return std::string(to_string(*label));
      },
      py::arg("text"));

  // Metrics ----------------------------------------------------------------

  m.def(
      "f1_per_class",
      [](const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
        return f1_per_class(to_stances(pred), to_stances(gold));
      },
      py::arg("predictions"), py::arg("golds"));
  m.def(
      "f_avg",
      [](const std::vector<std::string>& pred, const std::vector<std::string>& gold, const std::string& classes) {
        return f_avg(to_stances(pred), to_stances(gold), parse_favg_classes(classes));
      },
      py::arg("predictions"), py::arg("golds"), py::arg("classes") = "stance_bearing");
  m.def(
      "f_m",
      [](const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
        return f_m(to_stances(pred), to_stances(gold));
      },
      py::arg("predictions"), py::arg("golds"));

  // Model pieces -----------------------------------------------------------

  m.def(
      "separate",
      [](const Matrix& h, const Matrix& weight, const Matrix& bias) {
        return separate(h, SeparationParams{weight, bias});
      },
      py::arg("h"), py::arg("weight"), py::arg("bias"), "Returns (f_s, f_i) with f_s + f_i equal to h on the grid.");
  m.def("snap_to_feature_grid", py::overload_cast<const Matrix&>(&snap_to_feature_grid), py::arg("m"));
  m.def(
      "fit_logistic",
      [](const Matrix& x, const std::vector<int>& labels, int n_classes) {
        const LogisticFit fit = fit_logistic(x, labels, n_classes);
        py::dict d;
        d["weight"] = fit.weight;
        d["intercept"] = fit.intercept;
        d["iterations"] = fit.iterations;
        d["gradient_max_abs"] = fit.gradient_max_abs;
        return d;
      },
      py::arg("x"), py::arg("labels"), py::arg("n_classes"));
  m.def(
      "linear_probe",
      [](const Matrix& x, const std::vector<int>& labels, int n_classes, std::uint64_t seed) {
        const ProbeResult r = linear_probe(x, labels, n_classes, seed);
        py::dict d;
        d["accuracy"] = r.accuracy;
        d["chance"] = r.chance;
        d["n_train"] = r.n_train;
        d["n_test"] = r.n_test;
        return d;
      },
      py::arg("x"), py::arg("labels"), py::arg("n_classes"), py::arg("seed") = 1);

  // Encoder ----------------------------------------------------------------

  m.def(
      "wordpiece_encode",
      [](const std::filesystem::path& vocab, const std::string& text) {
        return WordPieceTokenizer::from_file(vocab).encode(text);
      },
      py::arg("vocab"), py::arg("text"), "Token ids without [CLS]/[SEP].");
  m.def(
      "encoder_cls",
      [](const RunConfig& cfg, const std::filesystem::path& weights, const std::vector<std::vector<int>>& token_ids,
         const std::vector<std::vector<int>>& segment_ids, int pad_id) {
        if (token_ids.size() != segment_ids.size()) throw ShapeError("one segment list per token list");
        std::vector<TokenPair> pairs(token_ids.size());
        for (std::size_t i = 0; i < pairs.size(); ++i) {
          if (token_ids[i].size() != segment_ids[i].size()) throw ShapeError("segment ids must match token ids");
          pairs[i].token_ids = token_ids[i];
          pairs[i].segment_ids = segment_ids[i];
          pairs[i].attention_mask.assign(token_ids[i].size(), 1);
        }
        ParameterStore store;
        Rng rng(0);
        const TransformerEncoder encoder(cfg.encoder, store, rng);
        load_prefixed_parameters(store, load_archive(weights), encoder.prefix());
        ForwardContext ctx;
        return Matrix(encoder.encode(collate(pairs, pad_id), ctx).value());
      },
      py::arg("config"), py::arg("weights"), py::arg("token_ids"), py::arg("segment_ids"), py::arg("pad_id") = 0,
      "Inference-mode final [CLS] states of the configured encoder with `encoder.*` weights from an archive.");

  // Acceptance -------------------------------------------------------------

  m.def(
      "accept",
      [](const std::filesystem::path& work_dir, const std::vector<int>& only) {
        std::vector<CriterionResult> results;
        {
          py::gil_scoped_release release;
          results = run_acceptance(work_dir, only);
        }
        py::list out;
        for (const auto& r : results) {
          py::dict d;
          d["id"] = r.id;
          d["name"] = r.name;
          d["passed"] = r.passed;
          d["detail"] = r.detail;
          d["seconds"] = r.seconds;
          d["line"] = format_criterion(r);
          out.append(d);
        }
        return out;
      },
      py::arg("work_dir"), py::arg("only") = std::vector<int>{});
}
