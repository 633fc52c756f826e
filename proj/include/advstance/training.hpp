#pragma once

// Adversarial training: stance loss on labeled source data plus the
// gradient-reversed topic loss on the pooled corpus, optimised jointly with
// one backward pass per step.

#include "advstance/classifier.hpp"
#include "advstance/data.hpp"
#include "advstance/metrics.hpp"
#include "advstance/parameters.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace advstance {

struct TrainConfig {
  std::size_t batch_size = 16;
  double dropout = 0.1;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  bool early_stopping = true;
  double learning_rate = 2e-5;
  double weight_decay = 5e-5;
  double alpha = 0.01;
  double lambda = 0.1;
  std::size_t geo_hidden = 128;
  std::size_t gcn_layers = 2;
  std::size_t max_text_tokens = kMaxTextTokens;
  std::size_t max_desc_tokens = kMaxDescriptionTokens;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double grad_clip = 0.0;  // 0 disables
  double encoder_lr_scale = 1.0;  // encoder learning rate = learning_rate * scale
  FavgClasses favg_classes = FavgClasses::stance_bearing;

  void validate() const;
};

/// Model settings carried by the training configuration (dropout, lambda,
/// region encoder size and depth) combined with an encoder choice.
ModelConfig make_model_config(const TrainConfig& train, const EncoderConfig& encoder, bool use_geo = true,
                              bool normalize_adjacency = false);

/// One optimisation step's worth of example indices.
struct BatchStep {
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> pooled;
};

/// Streams epochs of (labeled, pooled) batch pairs. An epoch is one shuffled
/// pass over the labeled set; the pool is consumed as an endless sequence of
/// shuffled passes, so it recycles within an epoch when it is the smaller set.
class BatchScheduler {
 public:
  BatchScheduler(std::size_t n_labeled, std::size_t n_pool, std::size_t batch_size, std::uint64_t seed);

  std::vector<BatchStep> next_epoch();

 private:
  std::size_t next_pooled();

  std::size_t n_labeled_;
  std::size_t n_pool_;
  std::size_t batch_size_;
  Rng rng_;
  std::vector<std::size_t> pool_order_;
  std::size_t pool_cursor_ = 0;
};

/// The first epoch of a fresh scheduler.
std::vector<BatchStep> schedule_batches(std::size_t n_labeled, std::size_t n_pool, std::size_t batch_size,
                                        std::uint64_t seed);

struct StepLosses {
  double stance = 0.0;
  double topic = 0.0;
  double total = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double stance_loss = 0.0;
  double topic_loss = 0.0;
  double dev_f_avg = 0.0;
};

/// `epoch<TAB>L_sc<TAB>L_td<TAB>dev_Favg`
std::string format_epoch_line(const EpochRecord& r);

struct FitResult {
  ParameterSnapshot best_params;
  std::size_t best_epoch = 0;
  double best_dev_f_avg = 0.0;
  std::vector<EpochRecord> history;
};

class Trainer {
 public:
  Trainer(StanceClassifier& classifier, TrainConfig cfg, std::uint64_t seed);

  /// Mean cross-entropy of the stance head. Rejects destination-topic data.
  [[nodiscard]] Var stance_loss(std::span<const EncodedExample> batch, ForwardContext& ctx) const;
  /// Mean cross-entropy of the topic discriminator; stance labels are ignored.
  [[nodiscard]] Var topic_loss(std::span<const EncodedExample> batch, ForwardContext& ctx,
                               DiscriminatorPath path = DiscriminatorPath::reversed) const;

  /// total = L_sc + alpha * L_td with L_td behind the gradient reversal layer,
  /// followed by one AdamW step. With alpha = 0 the pooled batch is skipped.
  StepLosses train_step(std::span<const EncodedExample> labeled, std::span<const EncodedExample> pooled);

  /// Trains until patience runs out or max_epochs, keeping the parameters of
  /// the best dev F_avg epoch; the classifier ends up holding them.
  FitResult fit(const SplitBundle& splits, const std::function<void(const EpochRecord&)>& on_epoch = {});

  /// Dev-set F_avg of the classifier's current parameters.
  [[nodiscard]] double evaluate_f_avg(std::span<const EncodedExample> examples) const;

  [[nodiscard]] const TrainConfig& config() const { return cfg_; }

 private:
  StanceClassifier* classifier_;
  TrainConfig cfg_;
  std::uint64_t seed_;
  Rng dropout_rng_;
  AdamW optimizer_;
  std::size_t epoch_ = 0;
  std::size_t step_in_epoch_ = 0;
};

}  // namespace advstance
