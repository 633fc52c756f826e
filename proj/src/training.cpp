#include "advstance/training.hpp"

#include "advstance/errors.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace advstance {

void TrainConfig::validate() const {
  if (batch_size == 0 || max_epochs == 0 || geo_hidden == 0 || gcn_layers == 0 || max_text_tokens == 0) {
    throw ConfigError("train: batch_size, max_epochs, geo_hidden, gcn_layers and max_text_tokens must be positive");
  }
  if (early_stopping && (patience == 0 || patience > max_epochs)) {
    throw ConfigError("train: patience must be in [1, max_epochs]");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
  if (!(alpha >= 0.0)) throw ConfigError("train: alpha must be >= 0");
  if (!(lambda >= 0.0)) throw ConfigError("train: lambda must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("train: dropout must be in [0, 1)");
  if (!(encoder_lr_scale >= 0.0)) throw ConfigError("train: encoder_lr_scale must be >= 0");
  if (!(grad_clip >= 0.0)) throw ConfigError("train: grad_clip must be >= 0");
  if (seeds.empty()) throw ConfigError("train: seed list is empty");
}

ModelConfig make_model_config(const TrainConfig& train, const EncoderConfig& encoder, bool use_geo,
                              bool normalize_adjacency) {
  ModelConfig m;
  m.encoder = encoder;
  m.geo_hidden = train.geo_hidden;
  m.gcn_layers = train.gcn_layers;
  m.use_geo = use_geo;
  m.normalize_adjacency = normalize_adjacency;
  m.dropout = train.dropout;
  m.grl_lambda = train.lambda;
  return m;
}

// ---------------------------------------------------------------------------

BatchScheduler::BatchScheduler(std::size_t n_labeled, std::size_t n_pool, std::size_t batch_size, std::uint64_t seed)
    : n_labeled_(n_labeled), n_pool_(n_pool), batch_size_(batch_size), rng_(seed) {
  if (n_labeled == 0 || n_pool == 0) throw ConfigError("batch scheduling needs nonempty labeled and pooled sets");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
}

std::size_t BatchScheduler::next_pooled() {
  if (pool_cursor_ == pool_order_.size()) {
    pool_order_.resize(n_pool_);
    for (std::size_t i = 0; i < n_pool_; ++i) pool_order_[i] = i;
    rng_.shuffle(pool_order_);
    pool_cursor_ = 0;
  }
  return pool_order_[pool_cursor_++];
}

std::vector<BatchStep> BatchScheduler::next_epoch() {
  std::vector<std::size_t> order(n_labeled_);
  for (std::size_t i = 0; i < n_labeled_; ++i) order[i] = i;
  rng_.shuffle(order);
  std::vector<BatchStep> steps;
  for (std::size_t start = 0; start < n_labeled_; start += batch_size_) {
    BatchStep step;
    const std::size_t end = std::min(n_labeled_, start + batch_size_);
    step.labeled.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                        order.begin() + static_cast<std::ptrdiff_t>(end));
    for (std::size_t k = 0; k < batch_size_; ++k) step.pooled.push_back(next_pooled());
    steps.push_back(std::move(step));
  }
  return steps;
}

std::vector<BatchStep> schedule_batches(std::size_t n_labeled, std::size_t n_pool, std::size_t batch_size,
                                        std::uint64_t seed) {
  return BatchScheduler(n_labeled, n_pool, batch_size, seed).next_epoch();
}

std::string format_epoch_line(const EpochRecord& r) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%zu\t%.6f\t%.6f\t%.6f", r.epoch, r.stance_loss, r.topic_loss, r.dev_f_avg);
  return buf;
}

// ---------------------------------------------------------------------------

Trainer::Trainer(StanceClassifier& classifier, TrainConfig cfg, std::uint64_t seed)
    : classifier_(&classifier),
      cfg_(std::move(cfg)),
      seed_(seed),
      dropout_rng_(seed ^ 0x9e3779b97f4a7c15ULL),
      optimizer_(AdamWConfig{cfg_.learning_rate, 0.9, 0.999, 1e-8, cfg_.weight_decay, cfg_.grad_clip,
                             {{"encoder.", cfg_.encoder_lr_scale}}}) {
  cfg_.validate();
}

Var Trainer::stance_loss(std::span<const EncodedExample> batch, ForwardContext& ctx) const {
  if (batch.empty()) throw ConfigError("stance_loss: empty batch");
  std::vector<int> targets;
  targets.reserve(batch.size());
  for (const auto& ex : batch) {
    if (ex.topic == classifier_->destination_index()) {
      throw LeakageError("stance loss received a destination-topic example ('" +
                         classifier_->task().destination_topic + "')");
    }
    if (ex.stance < 0) throw ConfigError("stance_loss: example without a stance label");
    targets.push_back(ex.stance);
  }
  const ModelOutputs out = classifier_->model().forward(classifier_->make_input(batch), ctx);
  return cross_entropy(out.stance_logits, targets);
}

Var Trainer::topic_loss(std::span<const EncodedExample> batch, ForwardContext& ctx, DiscriminatorPath path) const {
  if (batch.empty()) throw ConfigError("topic_loss: empty batch");
  std::vector<int> targets;
  targets.reserve(batch.size());
  const auto k = static_cast<int>(classifier_->model().config().num_topics);
  for (const auto& ex : batch) {
    if (ex.topic < 0 || ex.topic >= k) throw DataError("", 0, "topic", "topic index outside the task");
    targets.push_back(ex.topic);
  }
  const ModelOutputs out = classifier_->model().forward(classifier_->make_input(batch), ctx, path);
  return cross_entropy(out.topic_logits, targets);
}

StepLosses Trainer::train_step(std::span<const EncodedExample> labeled, std::span<const EncodedExample> pooled) {
  if (labeled.empty() || pooled.empty()) throw ConfigError("train_step needs nonempty labeled and pooled batches");
  ForwardContext ctx{true, cfg_.dropout, &dropout_rng_};
  StanceModel& model = classifier_->model();
  model.params().zero_grad();

  StepLosses losses;
  const Var l_sc = stance_loss(labeled, ctx);
  losses.stance = l_sc.scalar();
  Var total = l_sc;
  if (cfg_.alpha > 0.0) {
    const Var l_td = topic_loss(pooled, ctx);
    losses.topic = l_td.scalar();
    total = add(l_sc, scale(l_td, cfg_.alpha));
  }
  losses.total = total.scalar();
  if (!std::isfinite(losses.total)) {
    throw TrainingError("non-finite loss at epoch " + std::to_string(epoch_) + ", batch " +
                        std::to_string(step_in_epoch_) + ": L_sc=" + std::to_string(losses.stance) +
                        " L_td=" + std::to_string(losses.topic) + " total=" + std::to_string(losses.total));
  }
  backward(total);
  optimizer_.step(model.params());
  ++step_in_epoch_;
  return losses;
}

double Trainer::evaluate_f_avg(std::span<const EncodedExample> examples) const {
  if (examples.empty()) return 0.0;
  const std::vector<Stance> pred = classifier_->predict(examples);
  std::vector<Stance> gold;
  gold.reserve(examples.size());
  for (const auto& ex : examples) gold.push_back(static_cast<Stance>(ex.stance));
  return f_avg(pred, gold, cfg_.favg_classes);
}

FitResult Trainer::fit(const SplitBundle& splits, const std::function<void(const EpochRecord&)>& on_epoch) {
  if (splits.train_labeled.empty()) throw ConfigError("fit: empty training set");
  if (splits.discriminator_pool.empty()) throw ConfigError("fit: empty discriminator pool");

  const auto train = classifier_->encode_all(std::span<const LabeledExample>(splits.train_labeled));
  const auto dev = classifier_->encode_all(std::span<const LabeledExample>(splits.dev_labeled));
  const auto pool = classifier_->encode_all(std::span<const UnlabeledExample>(splits.discriminator_pool));

  BatchScheduler scheduler(train.size(), pool.size(), cfg_.batch_size, seed_);
  FitResult result;
  double best = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::vector<EncodedExample> lab_batch;
  std::vector<EncodedExample> pool_batch;

  for (epoch_ = 1; epoch_ <= cfg_.max_epochs; ++epoch_) {
    step_in_epoch_ = 0;
    EpochRecord rec;
    rec.epoch = epoch_;
    const auto steps = scheduler.next_epoch();
    for (const auto& step : steps) {
      lab_batch.clear();
      pool_batch.clear();
      for (auto i : step.labeled) lab_batch.push_back(train[i]);
      for (auto i : step.pooled) pool_batch.push_back(pool[i]);
      const StepLosses l = train_step(lab_batch, pool_batch);
      rec.stance_loss += l.stance;
      rec.topic_loss += l.topic;
    }
    rec.stance_loss /= static_cast<double>(steps.size());
    rec.topic_loss /= static_cast<double>(steps.size());
    rec.dev_f_avg = evaluate_f_avg(dev);
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.dev_f_avg > best) {
      best = rec.dev_f_avg;
      result.best_epoch = epoch_;
      result.best_dev_f_avg = rec.dev_f_avg;
      result.best_params = classifier_->model().params().snapshot();
      since_best = 0;
    } else if (cfg_.early_stopping && ++since_best >= cfg_.patience) {
      break;
    }
  }
  classifier_->model().params().restore(result.best_params);
  return result;
}

}  // namespace advstance
