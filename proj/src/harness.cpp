#include "advstance/harness.hpp"

#include "advstance/errors.hpp"
#include "advstance/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace advstance {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), pattern, a);
  return buf;
}

Matrix random_uniform(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return m;
}

/// x -> sum_j c_j * gelu(x A)_j, a smooth scalar chain.
Var smooth_chain(const Var& x, const Matrix& a, const Matrix& c) {
  return matmul(gelu(matmul(x, Var::constant(a))), Var::constant(c));
}

double relative_error(const Matrix& got, const Matrix& want) {
  const double diff = (got - want).norm();
  if (diff == 0.0) return 0.0;
  return diff / std::max(want.norm(), 1e-300);
}

std::string read_file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Small two-topic classifier on a generated corpus, for mechanism checks.
struct TinyFixture {
  SynthCorpus corpus;
  TaskSpec task;
  std::shared_ptr<const Tokenizer> tokenizer;

  explicit TinyFixture(const SynthConfig& gen)
      : corpus(synth_generate(gen)),
        task{TaskMode::cross_target, {synth_topic_name(0)}, synth_topic_name(1), {1}},
        tokenizer(build_corpus_tokenizer(Corpora{corpus.labeled, corpus.unlabeled}, corpus.descriptions,
                                         EncoderConfig::tiny().vocab_size)) {}

  [[nodiscard]] StanceClassifier classifier(const TrainConfig& train, std::uint64_t init_seed) const {
    return StanceClassifier(make_model_config(train, EncoderConfig::tiny()), task, tokenizer, corpus.descriptions,
                            corpus.graph, init_seed);
  }
};

SynthConfig small_generator(int labeled, int unlabeled, int topics = 2) {
  SynthConfig g;
  g.n_topics = topics;
  g.labeled_per_topic = labeled;
  g.unlabeled_per_topic = unlabeled;
  return g;
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear probe

LogisticFit fit_logistic(const Matrix& features, std::span<const int> labels, int n_classes) {
  if (n_classes < 2) throw ConfigError("fit_logistic: needs at least two classes");
  if (static_cast<std::size_t>(features.rows()) != labels.size() || labels.empty()) {
    throw ShapeError("fit_logistic: one label per feature row required");
  }
  const Eigen::Index d = features.cols();
  const Eigen::Index k = n_classes;
  const Eigen::Index n = features.rows();
  Matrix x(n, d + 1);
  x.leftCols(d) = features;
  x.col(d).setOnes();
  Matrix y = Matrix::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= n_classes) throw ShapeError("fit_logistic: label outside [0, n_classes)");
    y(i, label) = 1.0;
  }

  // theta is (d + 1) x k; the last row is the intercept.
  Matrix theta = Matrix::Zero(d + 1, k);
  auto objective = [&](const Matrix& t) {
    const Matrix logits = x * t;
    double f = 0.5 * t.topRows(d).squaredNorm();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = logits.row(i).maxCoeff();
      f += m + std::log((logits.row(i).array() - m).exp().sum()) - (logits.row(i).array() * y.row(i).array()).sum();
    }
    return f;
  };

  LogisticFit fit;
  const Eigen::Index p = (d + 1) * k;
  for (int iter = 0; iter <= 100; ++iter) {
    const Matrix probs = softmax_rows(Matrix(x * theta));
    Matrix grad = x.transpose() * (probs - y);
    grad.topRows(d) += theta.topRows(d);
    fit.gradient_max_abs = grad.cwiseAbs().maxCoeff();
    if (fit.gradient_max_abs < 1e-9 || iter == 100) break;
    ++fit.iterations;

    Matrix hess = Matrix::Zero(p, p);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Matrix xx = x.row(i).transpose() * x.row(i);
      for (Eigen::Index a = 0; a < k; ++a) {
        for (Eigen::Index b = 0; b < k; ++b) {
          const double w = probs(i, a) * ((a == b ? 1.0 : 0.0) - probs(i, b));
          if (w != 0.0) hess.block(a * (d + 1), b * (d + 1), d + 1, d + 1) += w * xx;
        }
      }
    }
    Eigen::VectorXd g(p);
    for (Eigen::Index a = 0; a < k; ++a) {
      g.segment(a * (d + 1), d + 1) = grad.col(a);
      hess.block(a * (d + 1), a * (d + 1), d, d).diagonal().array() += 1.0;
    }
    // The intercepts are only determined up to a shared shift.
    hess.diagonal().array() += 1e-10;
    const Eigen::VectorXd step = hess.ldlt().solve(g);
    Matrix step_m(d + 1, k);
    for (Eigen::Index a = 0; a < k; ++a) step_m.col(a) = step.segment(a * (d + 1), d + 1);

    const double f0 = objective(theta);
    const double slope = g.dot(step);
    // Decreases below the rounding level of f count as sufficient.
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::abs(f0);
    double t = 1.0;
    while (t > 1e-12 && objective(theta - t * step_m) > f0 - 1e-4 * t * slope + noise) t *= 0.5;
    theta -= t * step_m;
  }
  fit.weight = theta.topRows(d);
  fit.intercept = theta.bottomRows(1);
  return fit;
}

ProbeResult linear_probe(const Matrix& features, std::span<const int> labels, int n_classes, std::uint64_t seed) {
  if (n_classes < 2) throw ConfigError("linear_probe: needs at least two classes");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw ShapeError("linear_probe: one label per feature row required");
  }
  std::vector<std::vector<Eigen::Index>> by_class(static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes) throw ShapeError("linear_probe: label outside [0, n_classes)");
    by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<Eigen::Index>(i));
  }
  std::size_t per_class = by_class[0].size();
  for (const auto& c : by_class) per_class = std::min(per_class, c.size());
  const std::size_t n_train_per_class = (per_class * 7 + 5) / 10;
  if (n_train_per_class == 0 || n_train_per_class == per_class) {
    throw ConfigError("linear_probe: too few examples in the smallest class");
  }

  Rng rng(seed);
  std::vector<Eigen::Index> train_rows;
  std::vector<Eigen::Index> test_rows;
  for (auto& rows : by_class) {
    rng.shuffle(rows);
    for (std::size_t j = 0; j < per_class; ++j) (j < n_train_per_class ? train_rows : test_rows).push_back(rows[j]);
  }

  Matrix x(static_cast<Eigen::Index>(train_rows.size()), features.cols());
  std::vector<int> y(train_rows.size());
  for (std::size_t i = 0; i < train_rows.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = features.row(train_rows[i]);
    y[i] = labels[static_cast<std::size_t>(train_rows[i])];
  }
  const LogisticFit fit = fit_logistic(x, y, n_classes);

  std::size_t correct = 0;
  for (Eigen::Index row : test_rows) {
    Eigen::Index best = 0;
    (features.row(row) * fit.weight + fit.intercept).maxCoeff(&best);
    if (best == labels[static_cast<std::size_t>(row)]) ++correct;
  }
  ProbeResult r;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(test_rows.size());
  r.chance = 1.0 / static_cast<double>(n_classes);
  r.n_train = train_rows.size();
  r.n_test = test_rows.size();
  return r;
}

// ---------------------------------------------------------------------------
// Transfer experiment

AblationSpec full_model_ablation() { return {"full", {}}; }
AblationSpec no_adversary_ablation() { return {"alpha=0", {{"train.alpha", "0"}}}; }
AblationSpec no_geo_ablation() { return {"no-geo", {{"model.use_geo", "false"}}}; }
AblationSpec no_description_ablation() { return {"no-description", {{"model.use_description", "false"}}}; }

RunConfig apply_ablation(const RunConfig& base, const AblationSpec& ablation) {
  RunConfig out = base;
  for (const auto& [k, v] : ablation.overrides) apply_setting(out, k, v);
  return out;
}

TransferConfig default_transfer_config() {
  TransferConfig c;
  c.generator = SynthConfig{};
  c.generator.n_topics = 2;
  c.run.task = TaskSpec{TaskMode::cross_target, {synth_topic_name(0)}, synth_topic_name(1), {1, 2, 3, 4, 5}};
  c.run.encoder = EncoderConfig::tiny();
  // Heads start from scratch while the encoder moves at a tenth of their rate.
  c.run.train.learning_rate = 1e-2;
  c.run.train.encoder_lr_scale = 0.1;
  c.run.train.seeds = c.run.task.seeds;
  return c;
}

const TransferSummary& TransferResult::summary(const std::string& ablation) const {
  for (const auto& s : summaries) {
    if (s.ablation == ablation) return s;
  }
  throw ConfigError("no ablation named '" + ablation + "' in the transfer result");
}

std::string TransferResult::table() const {
  std::string out = "ablation          seed  best_epoch  dest_F_avg  probe_f_i  probe_f_s\n";
  char buf[160];
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof(buf), "%-16s  %4llu  %10zu  %10.4f  %9.4f  %9.4f\n", c.ablation.c_str(),
                  static_cast<unsigned long long>(c.seed), c.best_epoch, c.test.f_avg, c.probe_f_i.accuracy,
                  c.probe_f_s.accuracy);
    out += buf;
  }
  for (const auto& s : summaries) {
    std::snprintf(buf, sizeof(buf), "%-16s  mean  %10s  %10.4f  %9.4f  %9.4f\n", s.ablation.c_str(), "",
                  s.mean_f_avg, s.mean_probe_f_i, s.mean_probe_f_s);
    out += buf;
  }
  return out;
}

TransferResult run_transfer_experiment(const TransferConfig& cfg, const std::vector<AblationSpec>& ablations,
                                       std::span<const std::uint64_t> seeds, const ProgressCallback& progress) {
  if (ablations.empty() || seeds.empty()) throw ConfigError("transfer experiment needs ablations and seeds");
  const SynthCorpus corpus = synth_generate(cfg.generator);
  const Corpora corpora{corpus.labeled, corpus.unlabeled};
  const LoadedData data{corpora, corpus.descriptions, corpus.graph};

  TransferResult result;
  for (const auto& ablation : ablations) {
    const RunConfig run_cfg = apply_ablation(cfg.run, ablation);
    const ModelSetup setup = make_model_setup(run_cfg, data);
    TransferSummary summary{ablation.name, 0.0, 0.0, 0.0};
    for (std::uint64_t seed : seeds) {
      SeedRun run = train_seed(run_cfg.task, run_cfg.train, setup, corpora, seed);
      const auto pool = run.classifier->encode_all(std::span<const UnlabeledExample>(run.splits.discriminator_pool));
      std::vector<int> topics;
      topics.reserve(pool.size());
      for (const auto& ex : pool) topics.push_back(ex.topic);
      const auto [f_s, f_i] = run.classifier->features(pool);
      const int k = static_cast<int>(run_cfg.task.topics().size());

      TransferCell cell;
      cell.ablation = ablation.name;
      cell.seed = seed;
      cell.test = run.test;
      cell.best_epoch = run.fit.best_epoch;
      cell.probe_f_i = linear_probe(f_i, topics, k, seed);
      cell.probe_f_s = linear_probe(f_s, topics, k, seed);
      summary.mean_f_avg += cell.test.f_avg;
      summary.mean_probe_f_i += cell.probe_f_i.accuracy;
      summary.mean_probe_f_s += cell.probe_f_s.accuracy;
      if (progress) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s seed %llu: dest F_avg %.4f, probe f_i %.4f, probe f_s %.4f (epoch %zu)",
                      ablation.name.c_str(), static_cast<unsigned long long>(seed), cell.test.f_avg,
                      cell.probe_f_i.accuracy, cell.probe_f_s.accuracy, cell.best_epoch);
        progress(buf);
      }
      result.cells.push_back(std::move(cell));
    }
    const auto n = static_cast<double>(seeds.size());
    summary.mean_f_avg /= n;
    summary.mean_probe_f_i /= n;
    summary.mean_probe_f_s /= n;
    result.summaries.push_back(summary);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Acceptance criteria

std::string format_criterion(const CriterionResult& r) {
  char head[96];
  std::snprintf(head, sizeof(head), "%s [%d] ", r.passed ? "PASS" : "FAIL", r.id);
  char tail[48];
  std::snprintf(tail, sizeof(tail), " (%.1fs) ", r.seconds);
  return head + r.name + tail + r.detail;
}

CriterionResult check_separation_identity(std::size_t passes) {
  const auto start = Clock::now();
  CriterionResult r{1, "separation identity f_s + f_i == h", true, "", 0.0};
  const TinyFixture fx(small_generator(20, 0));
  TrainConfig train;
  Rng rng(11);
  std::size_t mismatches = 0;
  std::size_t elements = 0;
  const std::size_t per_model = 50;
  std::optional<StanceClassifier> clf;
  for (std::size_t pass = 0; pass < passes; ++pass) {
    if (pass % per_model == 0) {
      clf.emplace(fx.classifier(train, 1000 + pass));
      // Wide separation weights so f_s and f_i are both far from h.
      const double scale = 0.1 * static_cast<double>(1 + pass / per_model);
      auto& store = clf->model().params();
      store.at("separation.weight").mutable_value() =
          random_uniform(rng, store.at("separation.weight").rows(), store.at("separation.weight").cols(), -scale, scale);
      store.at("separation.bias").mutable_value() =
          random_uniform(rng, 1, store.at("separation.bias").cols(), -scale, scale);
    }
    const std::size_t batch = 1 + rng.below(4);
    std::vector<TokenPair> pairs;
    std::vector<int> regions;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t len = 4 + rng.below(20);
      std::vector<int> ids(len);
      for (auto& id : ids) id = 4 + static_cast<int>(rng.below(fx.tokenizer->vocab_size() - 4));
      TokenPair tp;
      tp.token_ids = ids;
      tp.segment_ids.assign(len, 0);
      std::fill(tp.segment_ids.begin() + static_cast<std::ptrdiff_t>(len / 2), tp.segment_ids.end(), 1);
      tp.attention_mask.assign(len, 1);
      pairs.push_back(std::move(tp));
      regions.push_back(static_cast<int>(rng.below(fx.corpus.graph.size())));
    }
    ModelInput in{collate(pairs, fx.tokenizer->pad_id()), regions};
    Rng dropout_rng(pass);
    ForwardContext ctx{pass % 2 == 0, 0.1, &dropout_rng};
    const ModelOutputs out = clf->model().forward(in, ctx);
    const Matrix recon = out.f_s.value() + out.f_i.value();
    mismatches += static_cast<std::size_t>((recon.array() != out.h.value().array()).count());
    elements += static_cast<std::size_t>(recon.size());
  }
  r.seconds = seconds_since(start);
  r.passed = mismatches == 0 && r.seconds < 10.0;
  r.detail = std::to_string(passes) + " forward passes, " + std::to_string(elements) + " elements, " +
             std::to_string(mismatches) + " mismatches";
  return r;
}

CriterionResult check_grl_gradient_law(std::size_t points) {
  const auto start = Clock::now();
  CriterionResult r{2, "GRL gradient law", true, "", 0.0};
  Rng rng(21);
  double worst = 0.0;
  const double h = 1e-6;
  for (double lambda : {0.0, 0.1, 1.0}) {
    for (std::size_t i = 0; i < points; ++i) {
      const Matrix theta0 = random_uniform(rng, 1, 6, -2.0, 2.0);
      const Matrix a = random_uniform(rng, 6, 5, -1.0, 1.0);
      const Matrix c = random_uniform(rng, 5, 1, -1.0, 1.0);
      Var theta = Var::parameter(theta0);
      backward(smooth_chain(reverse_gradient(theta, lambda), a, c));
      const Matrix got = theta.grad();

      Matrix fd(1, 6);
      for (Eigen::Index j = 0; j < 6; ++j) {
        Matrix up = theta0;
        Matrix down = theta0;
        up(0, j) += h;
        down(0, j) -= h;
        fd(0, j) = (smooth_chain(Var::constant(up), a, c).scalar() - smooth_chain(Var::constant(down), a, c).scalar()) /
                   (2.0 * h);
      }
      worst = std::max(worst, relative_error(got, -lambda * fd));
    }
  }
  r.seconds = seconds_since(start);
  r.passed = worst < 1e-4 && r.seconds < 30.0;
  r.detail = "lambda in {0, 0.1, 1}, " + std::to_string(points) + " points each, max relative error " +
             fmt("%.3g", worst);
  return r;
}

CriterionResult check_combined_gradient(std::size_t states) {
  const auto start = Clock::now();
  CriterionResult r{3, "combined-objective gradient", true, "", 0.0};
  const TinyFixture fx(small_generator(24, 24));
  TrainConfig train;
  const double alpha = train.alpha;
  const double lambda = train.lambda;
  double worst = 0.0;
  double worst_disc = 0.0;
  for (std::size_t s = 0; s < states; ++s) {
    StanceClassifier clf = fx.classifier(train, 300 + s);
    Trainer trainer(clf, train, s);
    const auto splits = build_splits(fx.task, fx.corpus.labeled, fx.corpus.unlabeled, {}, s);
    const auto lab = clf.encode_all(std::span<const LabeledExample>(splits.train_labeled).subspan(0, 8));
    const auto pool = clf.encode_all(std::span<const UnlabeledExample>(splits.discriminator_pool).subspan(s * 7, 8));
    ParameterStore& store = clf.model().params();
    ForwardContext ctx;  // inference mode: every forward is identical

    auto grads = [&](const std::function<Var()>& loss) {
      store.zero_grad();
      backward(loss());
      std::map<std::string, Matrix> g;
      for (const auto& name : store.names()) {
        const Var& p = store.at(name);
        g[name] = p.has_grad() ? p.grad() : Matrix::Zero(p.rows(), p.cols());
      }
      return g;
    };
    const auto g_total = grads([&] {
      return add(trainer.stance_loss(lab, ctx), scale(trainer.topic_loss(pool, ctx, DiscriminatorPath::reversed), alpha));
    });
    const auto g_sc = grads([&] { return trainer.stance_loss(lab, ctx); });
    const auto g_td = grads([&] { return trainer.topic_loss(pool, ctx, DiscriminatorPath::plain); });

    double num = 0.0;
    double den = 0.0;
    double num_d = 0.0;
    double den_d = 0.0;
    for (const auto& [name, gt] : g_total) {
      if (StanceModel::is_discriminator_parameter(name)) {
        const Matrix want = alpha * g_td.at(name);
        num_d += (gt - want).squaredNorm();
        den_d += want.squaredNorm();
      } else {
        const Matrix want = g_sc.at(name) - alpha * lambda * g_td.at(name);
        num += (gt - want).squaredNorm();
        den += want.squaredNorm();
      }
    }
    worst = std::max(worst, std::sqrt(num / den));
    worst_disc = std::max(worst_disc, std::sqrt(num_d / den_d));
  }
  r.seconds = seconds_since(start);
  r.passed = worst < 1e-3 && worst_disc < 1e-3;
  r.detail = std::to_string(states) + " states, model relative error " + fmt("%.3g", worst) +
             ", discriminator relative error " + fmt("%.3g", worst_disc);
  return r;
}

namespace {

struct OracleScores {
  std::array<double, 3> f1{};
  double f_avg = 0.0;
  double micro = 0.0;
  double macro = 0.0;
  double f_m = 0.0;
};

/// Precision/recall from an explicit confusion matrix.
OracleScores confusion_oracle(const std::vector<Stance>& pred, const std::vector<Stance>& gold) {
  double conf[3][3] = {};
  for (std::size_t i = 0; i < gold.size(); ++i) conf[static_cast<int>(gold[i])][static_cast<int>(pred[i])] += 1.0;
  OracleScores o;
  double trace = 0.0;
  for (int c = 0; c < 3; ++c) {
    double col = 0.0;
    double row = 0.0;
    for (int k = 0; k < 3; ++k) {
      col += conf[k][c];
      row += conf[c][k];
    }
    trace += conf[c][c];
    const double precision = col > 0.0 ? conf[c][c] / col : 0.0;
    const double recall = row > 0.0 ? conf[c][c] / row : 0.0;
    o.f1[static_cast<std::size_t>(c)] =
        precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  }
  o.f_avg = (o.f1[0] + o.f1[1]) / 2.0;
  o.micro = trace / static_cast<double>(gold.size());
  o.macro = (o.f1[0] + o.f1[1] + o.f1[2]) / 3.0;
  o.f_m = (o.micro + o.macro) / 2.0;
  return o;
}

}  // namespace

CriterionResult check_metric_oracle(std::size_t sequences) {
  const auto start = Clock::now();
  CriterionResult r{4, "metric oracle", true, "", 0.0};
  Rng rng(41);
  double worst = 0.0;
  for (std::size_t s = 0; s < sequences; ++s) {
    const std::size_t n = 1 + rng.below(60);
    // Skewed class weights so some classes go missing.
    std::array<double, 3> w{rng.uniform(), rng.uniform(), rng.uniform()};
    auto draw = [&] {
      const double u = rng.uniform() * (w[0] + w[1] + w[2]);
      return u < w[0] ? Stance::favor : (u < w[0] + w[1] ? Stance::against : Stance::none);
    };
    std::vector<Stance> gold(n);
    std::vector<Stance> pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      gold[i] = draw();
      pred[i] = rng.bernoulli(0.5) ? gold[i] : draw();
    }
    const OracleScores o = confusion_oracle(pred, gold);
    const MetricReport m = score(pred, gold);
    for (double d : {m.f_avg - o.f_avg, m.f_m - o.f_m, m.micro_f1 - o.micro, m.macro_f1 - o.macro}) {
      worst = std::max(worst, std::abs(d));
    }
  }
  const std::vector<Stance> gold{Stance::favor, Stance::favor, Stance::against, Stance::none};
  const std::vector<Stance> pred{Stance::favor, Stance::against, Stance::against, Stance::none};
  const MetricReport hand = score(pred, gold);
  const double hand_err = std::max({std::abs(hand.micro_f1 - 3.0 / 4.0), std::abs(hand.macro_f1 - 7.0 / 9.0),
                                    std::abs(hand.f_m - 55.0 / 72.0), std::abs(hand.f_avg - 2.0 / 3.0)});
  r.seconds = seconds_since(start);
  r.passed = worst <= 1e-9 && hand_err <= 1e-9;
  r.detail = std::to_string(sequences) + " random sequences, max deviation " + fmt("%.3g", worst) +
             "; hand case micro=3/4 macro=7/9 f_m=55/72 deviation " + fmt("%.3g", hand_err);
  return r;
}

CriterionResult check_gcn_reach() {
  const auto start = Clock::now();
  CriterionResult r{5, "GCN reach", true, "", 0.0};
  // Path a - b - c plus an isolated d.
  const GeoGraph graph({"a", "b", "c", "d"}, {{"a", "b"}, {"b", "c"}});
  Rng rng(51);
  const Eigen::Index f = 4;
  Var e = Var::parameter(random_uniform(rng, 4, f, 0.1, 1.0));
  const std::vector<Var> ws{Var::constant(random_uniform(rng, f, f, 0.1, 1.0)),
                            Var::constant(random_uniform(rng, f, f, 0.1, 1.0))};
  double two_hop = 0.0;
  double isolated = 0.0;
  for (Eigen::Index out = 0; out < f; ++out) {
    e.zero_grad();
    const Var all = geo_propagate(graph.adjacency(), e, ws);
    backward(slice(all, graph.index_of("a"), 1, out, 1));
    two_hop += e.grad().row(graph.index_of("c")).cwiseAbs().sum();
    isolated += e.grad().row(graph.index_of("d")).cwiseAbs().sum();
  }
  r.seconds = seconds_since(start);
  r.passed = two_hop > 0.0 && isolated == 0.0;
  r.detail = "sum |dE'(a)/dE(c)| = " + fmt("%.4g", two_hop) + ", sum |dE'(a)/dE(d)| = " + fmt("%.4g", isolated);
  return r;
}

CriterionResult check_overfit(std::size_t max_epochs) {
  const auto start = Clock::now();
  CriterionResult r{6, "overfit sanity", false, "", 0.0};
  const TinyFixture fx(small_generator(40, 10));
  TrainConfig train = default_transfer_config().run.train;
  train.alpha = 0.0;
  train.early_stopping = false;
  train.max_epochs = max_epochs;
  StanceClassifier clf = fx.classifier(train, 61);
  Trainer trainer(clf, train, 61);

  const auto& source = fx.corpus.labeled.at(fx.task.source_topics[0]);
  const auto lab = clf.encode_all(std::span<const LabeledExample>(source).subspan(0, 32));
  const auto pool = clf.encode_all(std::span<const UnlabeledExample>(fx.corpus.unlabeled.at(fx.task.source_topics[0])));
  BatchScheduler scheduler(lab.size(), pool.size(), train.batch_size, 61);
  double loss = 0.0;
  std::size_t epoch = 0;
  std::vector<EncodedExample> lb;
  std::vector<EncodedExample> pb;
  while (epoch < max_epochs) {
    ++epoch;
    const auto steps = scheduler.next_epoch();
    loss = 0.0;
    for (const auto& step : steps) {
      lb.clear();
      pb.clear();
      for (auto i : step.labeled) lb.push_back(lab[i]);
      for (auto i : step.pooled) pb.push_back(pool[i]);
      loss += trainer.train_step(lb, pb).stance;
    }
    loss /= static_cast<double>(steps.size());
    if (loss < 0.05) break;
  }
  r.seconds = seconds_since(start);
  r.passed = loss < 0.05 && r.seconds < 120.0;
  r.detail = "32 examples, alpha=0: epoch-mean stance loss " + fmt("%.4f", loss) + " after " + std::to_string(epoch) +
             " epochs";
  return r;
}

CriterionResult check_adversarial_transfer(const TransferConfig& cfg, std::span<const std::uint64_t> seeds,
                                           const ProgressCallback& progress) {
  const auto start = Clock::now();
  CriterionResult r{7, "adversarial transfer", false, "", 0.0};
  const TransferResult res =
      run_transfer_experiment(cfg, {full_model_ablation(), no_adversary_ablation()}, seeds, progress);
  if (progress) progress("\n" + res.table());
  const TransferSummary& full = res.summary("full");
  const TransferSummary& ablated = res.summary("alpha=0");
  const double chance = res.cells.front().probe_f_i.chance;
  const bool transfer_ok = full.mean_f_avg >= ablated.mean_f_avg;
  const bool f_i_ok = full.mean_probe_f_i <= chance + 0.10;
  const bool f_s_ok = full.mean_probe_f_s >= chance + 0.20;
  r.seconds = seconds_since(start);
  r.passed = transfer_ok && f_i_ok && f_s_ok && r.seconds < 900.0;
  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "%zu seeds: dest F_avg full %.4f vs alpha=0 %.4f [%s]; probe f_i %.4f <= %.2f [%s]; "
                "probe f_s %.4f >= %.2f [%s]",
                seeds.size(), full.mean_f_avg, ablated.mean_f_avg, transfer_ok ? "ok" : "no", full.mean_probe_f_i,
                chance + 0.10, f_i_ok ? "ok" : "no", full.mean_probe_f_s, chance + 0.20, f_s_ok ? "ok" : "no");
  r.detail = buf;
  return r;
}

CriterionResult check_suite_determinism(const std::filesystem::path& work_dir) {
  const auto start = Clock::now();
  CriterionResult r{8, "suite cardinality and determinism", false, "", 0.0};
  std::filesystem::remove_all(work_dir);
  const SynthCorpus corpus = synth_generate(small_generator(40, 40, 3));
  const SynthFiles files = write_synth_corpus(corpus, work_dir / "corpus");

  RunConfig cfg;
  cfg.data.labeled = files.labeled;
  cfg.data.unlabeled = files.unlabeled;
  cfg.data.descriptions = files.descriptions;
  cfg.data.geo_graph = files.geo_graph;
  cfg.task = TaskSpec{TaskMode::cross_target, {synth_topic_name(0)}, synth_topic_name(1), {1}};
  cfg.train.seeds = {1};
  cfg.train.max_epochs = 2;
  cfg.train.patience = 2;
  cfg.train.learning_rate = 1e-3;
  const LoadedData data = load_run_data(cfg);

  cfg.output_dir = work_dir / "suite";
  const auto cross = run_suite_to_dir(cfg, data, {TaskMode::cross_target});
  const auto zero = run_suite_to_dir(cfg, data, {TaskMode::zero_shot});

  std::vector<std::string> outputs;
  for (const char* name : {"run_a", "run_b"}) {
    cfg.output_dir = work_dir / name;
    const TrainOutcome t = run_train(cfg, data);
    outputs.push_back(read_file_bytes(t.logs.front()) + "\n--\n" + read_file_bytes(cfg.output_dir / "reports" / "train.tsv"));
  }
  const bool identical = outputs[0] == outputs[1];
  r.seconds = seconds_since(start);
  r.passed = cross.size() == 6 && zero.size() == 3 && identical;
  r.detail = std::to_string(cross.size()) + " cross-target + " + std::to_string(zero.size()) +
             " zero-shot reports; repeated run logs " + (identical ? "byte-identical" : "differ");
  return r;
}

CriterionResult check_parameter_count() {
  const auto start = Clock::now();
  CriterionResult r{9, "parameter count", false, "", 0.0};
  ModelConfig cfg;
  cfg.encoder = EncoderConfig::base();
  cfg.geo_hidden = 256;
  cfg.num_topics = 3;
  const std::size_t n_regions = us_states_graph().size();
  const std::size_t count = count_parameters(StanceModel::layout(cfg, n_regions));
  const double reference = 110.1e6;
  const double deviation = (static_cast<double>(count) - reference) / reference;
  r.seconds = seconds_since(start);
  r.passed = std::abs(deviation) <= 0.02;
  r.detail = "base encoder, F=256, N=" + std::to_string(n_regions) + ", K=3: " + std::to_string(count) +
             " parameters, " + fmt("%+.2f%%", 100.0 * deviation) + " from 110.1M (static layout count)";
  return r;
}

std::vector<CriterionResult> run_acceptance(const std::filesystem::path& work_dir, const std::vector<int>& only,
                                            const ProgressCallback& progress, const TransferConfig& transfer) {
  auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
  std::vector<CriterionResult> out;
  auto record = [&](CriterionResult r) {
    if (progress) progress(format_criterion(r));
    out.push_back(std::move(r));
  };
  if (wanted(1)) record(check_separation_identity());
  if (wanted(2)) record(check_grl_gradient_law());
  if (wanted(3)) record(check_combined_gradient());
  if (wanted(4)) record(check_metric_oracle());
  if (wanted(5)) record(check_gcn_reach());
  if (wanted(6)) record(check_overfit());
  if (wanted(7)) record(check_adversarial_transfer(transfer, transfer.run.train.seeds, progress));
  if (wanted(8)) record(check_suite_determinism(work_dir / "suite_determinism"));
  if (wanted(9)) record(check_parameter_count());
  return out;
}

int run_acceptance_command(const AcceptanceOptions& options, std::ostream& out, std::ostream& log) {
  TransferConfig transfer = default_transfer_config();
  for (const auto& s : options.transfer_overrides) {
    const auto [key, value] = split_override(s);
    apply_setting(transfer.run, key, value);
  }
  transfer.run.validate();
  for (int id : options.only) {
    if (id < 1 || id > 9) throw ConfigError("no acceptance criterion " + std::to_string(id) + " (ids are 1-9)");
  }

  const ProgressCallback progress = [&](const std::string& line) {
    if (line.starts_with("PASS [") || line.starts_with("FAIL [")) {
      out << line << std::endl;
    } else if (options.verbose) {
      log << line << std::endl;
    }
  };
  const auto results = run_acceptance(options.work_dir, options.only, progress, transfer);
  std::set<int> failed;
  std::set<int> expected;
  for (const auto& r : results) {
    if (!r.passed) failed.insert(r.id);
    if (std::find(options.known_failures.begin(), options.known_failures.end(), r.id) != options.known_failures.end()) {
      expected.insert(r.id);
    }
  }
  out << results.size() - failed.size() << "/" << results.size() << " criteria passed" << std::endl;
  if (!expected.empty()) {
    out << "known failures:";
    for (int id : expected) out << " " << id;
    out << (failed == expected ? " (as recorded)" : " (mismatch)") << std::endl;
  }
  return failed == expected ? 0 : 1;
}

}  // namespace advstance
