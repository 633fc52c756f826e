#include "advstance/classifier.hpp"

#include "advstance/errors.hpp"

namespace advstance {

namespace {

ModelConfig with_topic_count(ModelConfig cfg, const TaskSpec& task) {
  cfg.num_topics = task.source_topics.size() + 1;
  return cfg;
}

}  // namespace

StanceClassifier::StanceClassifier(ModelConfig model_cfg, TaskSpec task, std::shared_ptr<const Tokenizer> tokenizer,
                                   std::map<std::string, std::string> descriptions, GeoGraph graph,
                                   std::uint64_t init_seed, ClassifierOptions options)
    : task_(std::move(task)),
      tokenizer_(std::move(tokenizer)),
      descriptions_(std::move(descriptions)),
      options_(options),
      model_(with_topic_count(std::move(model_cfg), task_), std::move(graph), init_seed) {
  task_.validate();
  if (!tokenizer_) throw ConfigError("classifier needs a tokenizer");
  if (tokenizer_->vocab_size() > model_.config().encoder.vocab_size) {
    throw ConfigError("tokenizer vocabulary (" + std::to_string(tokenizer_->vocab_size()) +
                      ") exceeds the encoder's (" + std::to_string(model_.config().encoder.vocab_size) + ")");
  }
  if (options_.use_description) {
    for (const auto& t : task_.topics()) {
      if (!descriptions_.contains(t)) throw DataError("", 0, "description", "no policy description for topic '" + t + "'");
    }
  }
}

EncodedExample StanceClassifier::encode_text(const std::string& topic, const std::string& text, int region) const {
  EncodedExample out;
  out.topic = task_.topic_index(topic);
  std::string_view desc;
  if (options_.use_description) {
    auto it = descriptions_.find(topic);
    if (it == descriptions_.end()) throw DataError("", 0, "description", "no policy description for topic '" + topic + "'");
    desc = it->second;
  }
  out.pair = build_pair(desc, text, *tokenizer_, options_.limits);
  out.region = region;
  return out;
}

EncodedExample StanceClassifier::encode(const LabeledExample& ex) const {
  EncodedExample out = encode_text(ex.topic, ex.text, model_.graph().index_of(ex.geo));
  out.stance = static_cast<int>(ex.stance);
  return out;
}

EncodedExample StanceClassifier::encode(const UnlabeledExample& ex) const {
  return encode_text(ex.topic, ex.text, model_.graph().index_or_unknown(ex.geo));
}

ModelInput StanceClassifier::make_input(std::span<const EncodedExample> batch) const {
  std::vector<TokenPair> pairs;
  ModelInput in;
  pairs.reserve(batch.size());
  in.regions.reserve(batch.size());
  for (const auto& ex : batch) {
    pairs.push_back(ex.pair);
    in.regions.push_back(ex.region);
  }
  in.tokens = collate(pairs, tokenizer_->pad_id());
  return in;
}

Matrix StanceClassifier::predict_proba(std::span<const EncodedExample> examples, std::size_t batch_size) const {
  Matrix out(static_cast<Eigen::Index>(examples.size()), kNumStances);
  ForwardContext ctx;
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    const auto chunk = examples.subspan(start, std::min(batch_size, examples.size() - start));
    const ModelOutputs o = model_.forward(make_input(chunk), ctx);
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(chunk.size())) =
        softmax_rows(o.stance_logits.value());
  }
  return out;
}

std::vector<Stance> StanceClassifier::predict(std::span<const EncodedExample> examples) const {
  const Matrix probs = predict_proba(examples);
  std::vector<Stance> out(examples.size());
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index best = 0;
    probs.row(r).maxCoeff(&best);
    out[static_cast<std::size_t>(r)] = static_cast<Stance>(best);
  }
  return out;
}

std::pair<Matrix, Matrix> StanceClassifier::features(std::span<const EncodedExample> examples,
                                                     std::size_t batch_size) const {
  const auto d = static_cast<Eigen::Index>(model_.config().encoder.hidden_size);
  Matrix fs(static_cast<Eigen::Index>(examples.size()), d);
  Matrix fi(static_cast<Eigen::Index>(examples.size()), d);
  ForwardContext ctx;
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    const auto chunk = examples.subspan(start, std::min(batch_size, examples.size() - start));
    const ModelOutputs o = model_.forward(make_input(chunk), ctx);
    const auto r = static_cast<Eigen::Index>(start);
    const auto n = static_cast<Eigen::Index>(chunk.size());
    fs.middleRows(r, n) = o.f_s.value();
    fi.middleRows(r, n) = o.f_i.value();
  }
  return {fs, fi};
}

}  // namespace advstance
