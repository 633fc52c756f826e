#pragma once

#include "advstance/classifier.hpp"
#include "advstance/evaluation.hpp"
#include "advstance/synth.hpp"
#include "advstance/training.hpp"

#include <memory>

namespace advstance::testing {

/// A small generated corpus with a tokenizer, shared by the training tests.
struct SmallCorpus {
  SynthCorpus corpus;
  Corpora corpora;
  std::shared_ptr<const Tokenizer> tokenizer;

  explicit SmallCorpus(int topics = 2, int labeled = 40, int unlabeled = 30, std::uint64_t seed = 7)
      : corpus(synth_generate(generator(topics, labeled, unlabeled, seed))),
        corpora{corpus.labeled, corpus.unlabeled},
        tokenizer(build_corpus_tokenizer(corpora, corpus.descriptions, EncoderConfig::tiny().vocab_size)) {}

  static SynthConfig generator(int topics, int labeled, int unlabeled, std::uint64_t seed) {
    SynthConfig g;
    g.n_topics = topics;
    g.labeled_per_topic = labeled;
    g.unlabeled_per_topic = unlabeled;
    g.seed = seed;
    return g;
  }

  [[nodiscard]] TaskSpec cross_task() const {
    return TaskSpec{TaskMode::cross_target, {synth_topic_name(0)}, synth_topic_name(1), {1}};
  }

  [[nodiscard]] ModelSetup setup() const {
    ModelSetup s;
    s.encoder = EncoderConfig::tiny();
    s.tokenizer = tokenizer;
    s.descriptions = corpus.descriptions;
    s.graph = corpus.graph;
    return s;
  }

  [[nodiscard]] std::unique_ptr<StanceClassifier> classifier(const TrainConfig& train, const TaskSpec& task,
                                                             std::uint64_t init_seed = 1) const {
    return std::make_unique<StanceClassifier>(make_model_config(train, EncoderConfig::tiny()), task, tokenizer,
                                              corpus.descriptions, corpus.graph, init_seed);
  }
};

/// Short training runs for unit tests.
inline TrainConfig quick_train_config() {
  TrainConfig t;
  t.learning_rate = 1e-2;
  t.encoder_lr_scale = 0.1;
  t.max_epochs = 6;
  t.patience = 3;
  t.seeds = {1};
  return t;
}

}  // namespace advstance::testing
