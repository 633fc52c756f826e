#include "advstance/model.hpp"

#include "advstance/errors.hpp"

#include <cmath>
#include <map>

namespace advstance {

Matrix snap_to_feature_grid(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double v = m.data()[i];
    if (!std::isfinite(v)) throw TrainingError("non-finite feature value");
    if (std::abs(v) >= kFeatureRange) throw TrainingError("feature magnitude outside the exact separation range");
    out.data()[i] = std::nearbyint(v / kFeatureGrid) * kFeatureGrid;
  }
  return out;
}

Var snap_to_feature_grid(const Var& v) { return straight_through(v, snap_to_feature_grid(v.value())); }

Separation separate(const Var& h, const Var& weight, const Var& bias) {
  if (weight.rows() != h.cols() || weight.cols() != h.cols()) {
    throw ShapeError("separate: weight must be d x d with d = " + std::to_string(h.cols()));
  }
  Var f_s = snap_to_feature_grid(add_row(matmul(h, weight), bias));
  Var f_i = sub(h, f_s);
  return {f_s, f_i};
}

Var geo_propagate(const Matrix& adjacency, const Var& embedding, std::span<const Var> layer_weights) {
  if (adjacency.rows() != embedding.rows() || adjacency.cols() != embedding.rows()) {
    throw ShapeError("geo_propagate: adjacency is " + std::to_string(adjacency.rows()) + "x" +
                     std::to_string(adjacency.cols()) + " but there are " + std::to_string(embedding.rows()) +
                     " region embeddings");
  }
  const Var a = Var::constant(adjacency);
  Var e = embedding;
  for (const Var& w : layer_weights) e = relu(matmul(a, matmul(e, w)));
  return e;
}

Matrix normalize_adjacency(const Matrix& adjacency) {
  Eigen::VectorXd inv_sqrt_deg = adjacency.rowwise().sum().cwiseSqrt().cwiseInverse();
  return inv_sqrt_deg.asDiagonal() * adjacency * inv_sqrt_deg.asDiagonal();
}

Var stance_logits(const Var& f_i, const Var& f_s, const Var& f_geo, const Var& weight, const Var& bias) {
  std::vector<Var> parts{f_i, f_s};
  if (f_geo.defined()) parts.push_back(f_geo);
  const Var joined = concat_cols(parts);
  if (joined.cols() != weight.rows()) {
    throw ShapeError("stance head expects " + std::to_string(weight.rows()) + " input features, got " +
                     std::to_string(joined.cols()));
  }
  return add_row(matmul(joined, weight), bias);
}

std::pair<Matrix, Matrix> separate(const Matrix& h, const SeparationParams& params) {
  const auto sep = separate(Var::constant(snap_to_feature_grid(h)), Var::constant(params.weight),
                            Var::constant(params.bias));
  return {sep.f_s.value(), sep.f_i.value()};
}

Matrix geo_encode(std::string_view region, const GeoGraph& graph, const GeoParams& params, bool normalize) {
  const int idx = graph.index_of(region);
  std::vector<Var> ws;
  for (const auto& w : params.layer_weights) {
    if (w.rows() != params.embedding.cols() || w.cols() != params.embedding.cols()) {
      throw ShapeError("geo_encode: layer weights must be F x F");
    }
    ws.push_back(Var::constant(w));
  }
  const Matrix a = normalize ? normalize_adjacency(graph.adjacency()) : graph.adjacency();
  return geo_propagate(a, Var::constant(params.embedding), ws).value().row(idx);
}

Matrix predict_stance(const FeatureBundle& bundle, const HeadParams& params) {
  const Var geo = bundle.f_geo.cols() > 0 ? Var::constant(bundle.f_geo) : Var();
  const Var logits = stance_logits(Var::constant(bundle.f_i), Var::constant(bundle.f_s), geo,
                                   Var::constant(params.stance_weight), Var::constant(params.stance_bias));
  return softmax_rows(logits.value());
}

Matrix discriminate_topic(const Matrix& f_i, const HeadParams& params) {
  if (f_i.cols() != params.topic_weight.rows() || params.topic_bias.cols() != params.topic_weight.cols()) {
    throw ShapeError("discriminate_topic: f_i has " + std::to_string(f_i.cols()) + " features, head expects " +
                     std::to_string(params.topic_weight.rows()));
  }
  Matrix logits = f_i * params.topic_weight;
  logits.rowwise() += params.topic_bias.row(0);
  return softmax_rows(logits);
}

// ---------------------------------------------------------------------------

void ModelConfig::validate() const {
  encoder.validate();
  if (use_geo && (geo_hidden == 0 || gcn_layers == 0)) {
    throw ConfigError("model: geo_hidden and gcn_layers must be positive");
  }
  if (num_topics < 2) throw ConfigError("model: the topic discriminator needs K >= 2 classes");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model: dropout must be in [0, 1)");
  if (!(grl_lambda >= 0.0)) throw ConfigError("model: grl lambda must be >= 0");
}

std::vector<ParameterShape> StanceModel::layout(const ModelConfig& cfg, std::size_t n_regions) {
  auto out = TransformerEncoder::layout(cfg.encoder);
  const auto d = static_cast<Eigen::Index>(cfg.encoder.hidden_size);
  const auto f = static_cast<Eigen::Index>(cfg.use_geo ? cfg.geo_hidden : 0);
  const auto k = static_cast<Eigen::Index>(cfg.num_topics);
  out.push_back({"separation.weight", d, d});
  out.push_back({"separation.bias", 1, d});
  if (cfg.use_geo) {
    out.push_back({"geo.embedding", static_cast<Eigen::Index>(n_regions), f});
    for (std::size_t l = 0; l < cfg.gcn_layers; ++l) out.push_back({"geo.layer" + std::to_string(l) + ".weight", f, f});
  }
  out.push_back({"stance_head.weight", 2 * d + f, kNumStances});
  out.push_back({"stance_head.bias", 1, kNumStances});
  out.push_back({"topic_head.weight", d, k});
  out.push_back({"topic_head.bias", 1, k});
  return out;
}

std::size_t count_parameters(const std::vector<ParameterShape>& layout) {
  std::size_t n = 0;
  for (const auto& s : layout) n += s.size();
  return n;
}

StanceModel::StanceModel(ModelConfig cfg, GeoGraph graph, std::uint64_t init_seed)
    : cfg_(std::move(cfg)), graph_(std::move(graph)), params_(std::make_unique<ParameterStore>()) {
  cfg_.validate();
  adjacency_ = cfg_.normalize_adjacency ? normalize_adjacency(graph_.adjacency()) : graph_.adjacency();

  Rng rng(init_seed);
  encoder_ = std::make_unique<TransformerEncoder>(cfg_.encoder, *params_, rng);

  auto uniform_fan_in = [&](Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
    return m;
  };
  const auto shapes = layout(cfg_, graph_.size());
  std::map<std::string, Eigen::Index> fan_in;
  for (const auto& s : shapes) fan_in[s.name] = s.rows;
  for (const auto& shape : shapes) {
    if (shape.name.starts_with("encoder.")) continue;
    Matrix init;
    if (shape.name == "geo.embedding") {
      init.resize(shape.rows, shape.cols);
      for (Eigen::Index i = 0; i < init.size(); ++i) init.data()[i] = rng.normal(0.0, 0.02);
    } else if (shape.name.ends_with(".bias")) {
      const std::string weight = shape.name.substr(0, shape.name.size() - 5) + ".weight";
      init = uniform_fan_in(shape.rows, shape.cols, fan_in.at(weight));
    } else {
      init = uniform_fan_in(shape.rows, shape.cols, shape.rows);
    }
    params_->add(shape.name, std::move(init));
  }
}

ModelOutputs StanceModel::forward(const ModelInput& input, ForwardContext& ctx, DiscriminatorPath path) const {
  if (input.regions.size() != input.tokens.batch) {
    throw ShapeError("forward: " + std::to_string(input.regions.size()) + " regions for a batch of " +
                     std::to_string(input.tokens.batch));
  }
  ForwardContext local = ctx;
  local.dropout = cfg_.dropout;

  ModelOutputs out;
  out.h = snap_to_feature_grid(dropout(encoder_->encode(input.tokens, local), local));
  const Separation sep = separate(out.h, params_->at("separation.weight"), params_->at("separation.bias"));
  out.f_s = sep.f_s;
  out.f_i = sep.f_i;

  if (cfg_.use_geo) {
    std::vector<Var> ws;
    for (std::size_t l = 0; l < cfg_.gcn_layers; ++l) ws.push_back(params_->at("geo.layer" + std::to_string(l) + ".weight"));
    const Var all = geo_propagate(adjacency_, params_->at("geo.embedding"), ws);
    out.f_geo = gather_rows(all, input.regions);
  }

  std::vector<Var> parts{out.f_i, out.f_s};
  if (out.f_geo.defined()) parts.push_back(out.f_geo);
  const Var joined = dropout(concat_cols(parts), local);
  out.stance_logits = add_row(matmul(joined, params_->at("stance_head.weight")), params_->at("stance_head.bias"));

  const Var topic_in = path == DiscriminatorPath::reversed ? reverse_gradient(out.f_i, cfg_.grl_lambda) : out.f_i;
  out.topic_logits = add_row(matmul(topic_in, params_->at("topic_head.weight")), params_->at("topic_head.bias"));
  return out;
}

}  // namespace advstance
