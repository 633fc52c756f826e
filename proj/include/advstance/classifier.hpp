#pragma once

// A trained-or-trainable stance classifier for one task: tokenizer, policy
// descriptions, region graph and model bundled together.

#include "advstance/data.hpp"
#include "advstance/encoder.hpp"
#include "advstance/model.hpp"
#include "advstance/tokenizer.hpp"

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace advstance {

/// A record turned into model input. `stance` is -1 for unlabeled records.
struct EncodedExample {
  TokenPair pair;
  int region = 0;
  int topic = 0;
  int stance = -1;
};

struct ClassifierOptions {
  PairLimits limits;
  bool use_description = true;
};

class StanceClassifier {
 public:
  StanceClassifier(ModelConfig model_cfg, TaskSpec task, std::shared_ptr<const Tokenizer> tokenizer,
                   std::map<std::string, std::string> descriptions, GeoGraph graph, std::uint64_t init_seed,
                   ClassifierOptions options = {});

  /// Throws DataError when the topic is outside the task or lacks a description.
  [[nodiscard]] EncodedExample encode(const LabeledExample& ex) const;
  [[nodiscard]] EncodedExample encode(const UnlabeledExample& ex) const;
  template <typename Record>
  [[nodiscard]] std::vector<EncodedExample> encode_all(std::span<const Record> records) const {
    std::vector<EncodedExample> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(encode(r));
    return out;
  }

  [[nodiscard]] ModelInput make_input(std::span<const EncodedExample> batch) const;

  /// Inference-mode stance probabilities, one row per example.
  [[nodiscard]] Matrix predict_proba(std::span<const EncodedExample> examples, std::size_t batch_size = 64) const;
  [[nodiscard]] std::vector<Stance> predict(std::span<const EncodedExample> examples) const;

  /// Inference-mode (f_s, f_i) rows for every example.
  [[nodiscard]] std::pair<Matrix, Matrix> features(std::span<const EncodedExample> examples,
                                                   std::size_t batch_size = 64) const;

  [[nodiscard]] StanceModel& model() { return model_; }
  [[nodiscard]] const StanceModel& model() const { return model_; }
  [[nodiscard]] const TaskSpec& task() const { return task_; }
  [[nodiscard]] const Tokenizer& tokenizer() const { return *tokenizer_; }
  [[nodiscard]] std::shared_ptr<const Tokenizer> shared_tokenizer() const { return tokenizer_; }
  [[nodiscard]] const std::map<std::string, std::string>& descriptions() const { return descriptions_; }
  [[nodiscard]] const ClassifierOptions& options() const { return options_; }
  [[nodiscard]] int destination_index() const { return static_cast<int>(task_.source_topics.size()); }

 private:
  [[nodiscard]] EncodedExample encode_text(const std::string& topic, const std::string& text, int region) const;

  TaskSpec task_;
  std::shared_ptr<const Tokenizer> tokenizer_;
  std::map<std::string, std::string> descriptions_;
  ClassifierOptions options_;
  StanceModel model_;
};

}  // namespace advstance
