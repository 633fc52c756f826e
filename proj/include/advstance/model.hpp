#pragma once

// The heads around the encoder: feature separation, region graph encoder,
// stance classifier and the gradient-reversed topic discriminator.

#include "advstance/autodiff.hpp"
#include "advstance/data.hpp"
#include "advstance/encoder.hpp"
#include "advstance/parameters.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace advstance {

// ---------------------------------------------------------------------------
// Feature grid
//
// h and f_s are rounded to multiples of 2^-36 before f_i = h - f_s is formed.
// With both operands on that grid and below 2^17 in magnitude the
// subtraction is exact, so f_s + f_i reproduces h bit for bit. The rounding
// is invisible to gradients (straight-through).

inline constexpr double kFeatureGrid = 0x1.0p-36;
inline constexpr double kFeatureRange = 0x1.0p17;

Matrix snap_to_feature_grid(const Matrix& m);
Var snap_to_feature_grid(const Var& v);

// ---------------------------------------------------------------------------
// Head operations on autodiff values

struct Separation {
  Var f_s;
  Var f_i;
};

/// f_s = snap(h W + b), f_i = h - f_s. `h` must already lie on the grid.
Separation separate(const Var& h, const Var& weight, const Var& bias);

/// Runs the graph convolution E' = relu(A E W) once per weight and returns
/// the final node embeddings (all N rows).
Var geo_propagate(const Matrix& adjacency, const Var& embedding, std::span<const Var> layer_weights);

/// Symmetric degree normalisation D^-1/2 A D^-1/2.
Matrix normalize_adjacency(const Matrix& adjacency);

/// Logits of the stance head over the concatenation (f_i, f_s, f_geo).
Var stance_logits(const Var& f_i, const Var& f_s, const Var& f_geo, const Var& weight, const Var& bias);

// ---------------------------------------------------------------------------
// Plain-value versions, for inspection and tests

struct SeparationParams {
  Matrix weight;  // d x d, applied as h * weight
  Matrix bias;    // 1 x d
};

struct FeatureBundle {
  Matrix f_s;
  Matrix f_i;
  Matrix f_geo;
};

struct GeoParams {
  Matrix embedding;                   // N x F
  std::vector<Matrix> layer_weights;  // l matrices of F x F
};

struct HeadParams {
  Matrix stance_weight;  // (2d + F) x 3
  Matrix stance_bias;    // 1 x 3
  Matrix topic_weight;   // d x K
  Matrix topic_bias;     // 1 x K
};

/// Rows of `h` are separate examples.
std::pair<Matrix, Matrix> separate(const Matrix& h, const SeparationParams& params);
/// Final-layer embedding of one region.
Matrix geo_encode(std::string_view region, const GeoGraph& graph, const GeoParams& params, bool normalize = false);
/// Stance probabilities, one row per example.
Matrix predict_stance(const FeatureBundle& bundle, const HeadParams& params);
/// Topic probabilities, one row per example.
Matrix discriminate_topic(const Matrix& f_i, const HeadParams& params);

// ---------------------------------------------------------------------------
// Full model

struct ModelConfig {
  EncoderConfig encoder;
  std::size_t geo_hidden = 128;
  std::size_t gcn_layers = 2;
  bool normalize_adjacency = false;
  bool use_geo = true;
  std::size_t num_topics = 2;  // discriminator classes K
  double dropout = 0.1;
  double grl_lambda = 0.1;

  void validate() const;
};

struct ModelInput {
  TokenBatch tokens;
  std::vector<int> regions;  // one GeoGraph index per example
};

/// How the discriminator's gradient reaches f_i.
enum class DiscriminatorPath {
  reversed,  // through the gradient reversal layer
  plain,     // ordinary backpropagation, used to check the reversal
};

struct ModelOutputs {
  Var h;  // on the feature grid, after dropout
  Var f_s;
  Var f_i;
  Var f_geo;  // undefined when the region encoder is disabled
  Var stance_logits;
  Var topic_logits;
};

class StanceModel {
 public:
  StanceModel(ModelConfig cfg, GeoGraph graph, std::uint64_t init_seed);

  StanceModel(const StanceModel&) = delete;
  StanceModel& operator=(const StanceModel&) = delete;
  StanceModel(StanceModel&&) = default;
  StanceModel& operator=(StanceModel&&) = default;

  /// Parameter names and shapes the model is built from.
  static std::vector<ParameterShape> layout(const ModelConfig& cfg, std::size_t n_regions);

  [[nodiscard]] ModelOutputs forward(const ModelInput& input, ForwardContext& ctx,
                                     DiscriminatorPath path = DiscriminatorPath::reversed) const;

  [[nodiscard]] ParameterStore& params() { return *params_; }
  [[nodiscard]] const ParameterStore& params() const { return *params_; }
  [[nodiscard]] const ModelConfig& config() const { return cfg_; }
  [[nodiscard]] const GeoGraph& graph() const { return graph_; }

  /// Trainable scalar count.
  [[nodiscard]] std::size_t count_parameters() const { return params_->trainable_count(); }
  void freeze_encoder(bool frozen = true) { params_->set_trainable(encoder_->prefix(), !frozen); }

  /// Everything except the topic discriminator (the min player).
  [[nodiscard]] static bool is_discriminator_parameter(const std::string& name) {
    return name.starts_with("topic_head.");
  }

 private:
  ModelConfig cfg_;
  GeoGraph graph_;
  Matrix adjacency_;
  std::unique_ptr<ParameterStore> params_;
  std::unique_ptr<TransformerEncoder> encoder_;
};

/// Sum of parameter sizes in a layout, the static count for a configuration.
std::size_t count_parameters(const std::vector<ParameterShape>& layout);

}  // namespace advstance
