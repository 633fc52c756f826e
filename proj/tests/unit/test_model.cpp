#include "advstance/errors.hpp"
#include "advstance/model.hpp"
#include "support/gradcheck.hpp"

#include "doctest.h"

#include <cmath>

using namespace advstance;
using advstance::testing::random_matrix;
using advstance::testing::weighted_sum;

namespace {

Matrix softmax_oracle(const Eigen::RowVectorXd& logits) {
  Matrix out(1, logits.size());
  double denom = 0.0;
  for (Eigen::Index j = 0; j < logits.size(); ++j) denom += std::exp(logits(j));
  for (Eigen::Index j = 0; j < logits.size(); ++j) out(0, j) = std::exp(logits(j)) / denom;
  return out;
}

GeoGraph path_graph() { return GeoGraph({"n0", "n1", "n2"}, {{"n0", "n1"}, {"n1", "n2"}}); }

GeoParams positive_geo(Rng& rng, Eigen::Index n, Eigen::Index f, std::size_t layers) {
  GeoParams p;
  p.embedding = random_matrix(rng, n, f).cwiseAbs();
  for (std::size_t l = 0; l < layers; ++l) p.layer_weights.push_back(random_matrix(rng, f, f).cwiseAbs());
  return p;
}

ModelInput tiny_input(Rng& rng, std::size_t batch, std::size_t n_regions) {
  std::vector<TokenPair> pairs;
  std::vector<int> regions;
  for (std::size_t b = 0; b < batch; ++b) {
    TokenPair p;
    const std::size_t len = 5 + rng.below(8);
    for (std::size_t t = 0; t < len; ++t) p.token_ids.push_back(4 + static_cast<int>(rng.below(400)));
    p.segment_ids.assign(len, 0);
    std::fill(p.segment_ids.begin() + 2, p.segment_ids.end(), 1);
    p.attention_mask.assign(len, 1);
    pairs.push_back(p);
    regions.push_back(static_cast<int>(rng.below(n_regions)));
  }
  return {collate(pairs, 0), regions};
}

ModelConfig tiny_model_config(std::size_t topics = 2) {
  ModelConfig cfg;
  cfg.encoder = EncoderConfig::tiny();
  cfg.geo_hidden = 8;
  cfg.num_topics = topics;
  return cfg;
}

}  // namespace

// ---------------------------------------------------------------------------
// Separation

TEST_CASE("zero separation map keeps everything in f_i") {
  Rng rng(1);
  const Matrix h = snap_to_feature_grid(random_matrix(rng, 3, 4));
  const auto [f_s, f_i] = separate(h, SeparationParams{Matrix::Zero(4, 4), Matrix::Zero(1, 4)});
  CHECK(f_s == Matrix::Zero(3, 4));
  CHECK(f_i == h);
}

TEST_CASE("identity separation map moves everything to f_s") {
  Rng rng(2);
  const Matrix h = snap_to_feature_grid(random_matrix(rng, 3, 4));
  const auto [f_s, f_i] = separate(h, SeparationParams{Matrix::Identity(4, 4), Matrix::Zero(1, 4)});
  CHECK(f_s == h);
  CHECK(f_i == Matrix::Zero(3, 4));
}

TEST_CASE("f_s + f_i reproduces h exactly over random draws") {
  Rng rng(3);
  for (int draw = 0; draw < 100; ++draw) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(16));
    const Matrix h = snap_to_feature_grid(random_matrix(rng, 4, d, 3.0));
    const SeparationParams params{random_matrix(rng, d, d), random_matrix(rng, 1, d)};
    const auto [f_s, f_i] = separate(h, params);
    // Independent recomputation: affine map, grid rounding, residual.
    Matrix affine = h * params.weight;
    affine.rowwise() += params.bias.row(0);
    CHECK(f_s == snap_to_feature_grid(affine));
    CHECK((f_s + f_i).cwiseEqual(h).all());
  }
}

TEST_CASE("separation rejects mismatched shapes") {
  const Matrix h = Matrix::Zero(2, 4);
  CHECK_THROWS_AS((void)separate(h, SeparationParams{Matrix::Zero(3, 3), Matrix::Zero(1, 3)}), ShapeError);
}

TEST_CASE("feature grid limits") {
  CHECK(snap_to_feature_grid(Matrix::Constant(1, 1, 0.1))(0, 0) == std::nearbyint(0.1 / kFeatureGrid) * kFeatureGrid);
  CHECK_THROWS_AS((void)snap_to_feature_grid(Matrix::Constant(1, 1, kFeatureRange)), TrainingError);
  CHECK_THROWS_AS((void)snap_to_feature_grid(Matrix::Constant(1, 1, std::nan(""))), TrainingError);
}

// ---------------------------------------------------------------------------
// Region graph encoder

TEST_CASE("single self-looped node under identity weights is a fixed point") {
  const GeoGraph g({"r"}, {});
  Rng rng(4);
  GeoParams p;
  p.embedding = random_matrix(rng, 1, 5).cwiseAbs();
  p.layer_weights = {Matrix::Identity(5, 5), Matrix::Identity(5, 5)};
  CHECK(geo_encode("r", g, p) == p.embedding);
}

TEST_CASE("two hops reach the end of a 3-node path") {
  Rng rng(5);
  const GeoGraph g = path_graph();
  GeoParams p = positive_geo(rng, 3, 4, 2);
  const Matrix before = geo_encode("n0", g, p);
  p.embedding.row(2).array() += 1.0;
  CHECK((geo_encode("n0", g, p) - before).cwiseAbs().maxCoeff() > 0.0);

  p.layer_weights.pop_back();  // one hop no longer reaches n2
  const Matrix one_hop = geo_encode("n0", g, p);
  p.embedding.row(2).array() += 1.0;
  CHECK(geo_encode("n0", g, p) == one_hop);
}

TEST_CASE("disconnected nodes do not influence each other") {
  Rng rng(6);
  const GeoGraph g({"a", "b"}, {});
  GeoParams p = positive_geo(rng, 2, 3, 2);
  const Matrix before = geo_encode("a", g, p);
  p.embedding.row(1) = random_matrix(rng, 1, 3);
  CHECK(geo_encode("a", g, p) == before);
}

TEST_CASE("region encoder matches a literal recomputation") {
  Rng rng(7);
  const GeoGraph g = path_graph();
  const GeoParams p = positive_geo(rng, 3, 4, 2);
  Matrix e = p.embedding;
  for (const auto& w : p.layer_weights) e = (g.adjacency() * e * w).cwiseMax(0.0);
  CHECK((geo_encode("n1", g, p) - e.row(1)).cwiseAbs().maxCoeff() < 1e-12);

  Matrix en = p.embedding;
  const Matrix an = normalize_adjacency(g.adjacency());
  for (const auto& w : p.layer_weights) en = (an * en * w).cwiseMax(0.0);
  CHECK((geo_encode("n1", g, p, true) - en.row(1)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS((void)geo_encode("zz", g, p), DataError);
}

TEST_CASE("unreachable rows have an exactly zero Jacobian") {
  Rng rng(8);
  const GeoGraph g({"a", "b", "c", "d"}, {{"a", "b"}, {"b", "c"}});
  Var e = Var::parameter(random_matrix(rng, 4, 3).cwiseAbs());
  const std::vector<Var> ws{Var::constant(random_matrix(rng, 3, 3).cwiseAbs()),
                            Var::constant(random_matrix(rng, 3, 3).cwiseAbs())};
  backward(weighted_sum(slice(geo_propagate(g.adjacency(), e, ws), 0, 1, 0, 3)));
  CHECK(e.grad().row(2).cwiseAbs().maxCoeff() > 0.0);
  CHECK(e.grad().row(3) == Matrix::Zero(1, 3));
}

// ---------------------------------------------------------------------------
// Heads

TEST_CASE("stance head: zero weights give a uniform distribution") {
  FeatureBundle b{Matrix::Ones(2, 3), Matrix::Ones(2, 3), Matrix::Ones(2, 2)};
  HeadParams h{Matrix::Zero(8, 3), Matrix::Zero(1, 3), {}, {}};
  const Matrix p = predict_stance(b, h);
  CHECK((p.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);
  h.stance_bias(0, 0) = 50.0;
  CHECK(predict_stance(b, h)(0, 0) > 1.0 - 1e-12);
}

TEST_CASE("stance head matches an independent softmax over (f_i, f_s, f_geo)") {
  Rng rng(9);
  for (int draw = 0; draw < 20; ++draw) {
    FeatureBundle b{random_matrix(rng, 3, 4), random_matrix(rng, 3, 4), random_matrix(rng, 3, 2)};
    HeadParams h{random_matrix(rng, 10, 3), random_matrix(rng, 1, 3), {}, {}};
    const Matrix got = predict_stance(b, h);
    for (Eigen::Index i = 0; i < 3; ++i) {
      Eigen::RowVectorXd logits = h.stance_bias.row(0);
      for (Eigen::Index j = 0; j < 4; ++j) logits += b.f_i(i, j) * h.stance_weight.row(j);
      for (Eigen::Index j = 0; j < 4; ++j) logits += b.f_s(i, j) * h.stance_weight.row(4 + j);
      for (Eigen::Index j = 0; j < 2; ++j) logits += b.f_geo(i, j) * h.stance_weight.row(8 + j);
      CHECK((got.row(i) - softmax_oracle(logits)).cwiseAbs().maxCoeff() < 1e-6);
      CHECK(std::abs(got.row(i).sum() - 1.0) < 1e-6);
    }
  }
  FeatureBundle bad{Matrix::Ones(1, 4), Matrix::Ones(1, 4), Matrix::Ones(1, 1)};
  CHECK_THROWS_AS((void)predict_stance(bad, HeadParams{Matrix::Zero(10, 3), Matrix::Zero(1, 3), {}, {}}), ShapeError);
}

TEST_CASE("topic discriminator probabilities") {
  HeadParams h{{}, {}, Matrix::Zero(4, 3), Matrix::Zero(1, 3)};
  CHECK((discriminate_topic(Matrix::Ones(2, 4), h).array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);

  HeadParams two{{}, {}, Matrix::Zero(4, 2), Matrix::Zero(1, 2)};
  two.topic_bias(0, 1) = 60.0;
  CHECK(discriminate_topic(Matrix::Ones(1, 4), two)(0, 1) > 1.0 - 1e-12);

  Rng rng(10);
  for (int draw = 0; draw < 20; ++draw) {
    const Matrix f = random_matrix(rng, 2, 4);
    HeadParams r{{}, {}, random_matrix(rng, 4, 3), random_matrix(rng, 1, 3)};
    const Matrix got = discriminate_topic(f, r);
    for (Eigen::Index i = 0; i < 2; ++i) {
      Eigen::RowVectorXd logits = r.topic_bias.row(0);
      for (Eigen::Index j = 0; j < 4; ++j) logits += f(i, j) * r.topic_weight.row(j);
      CHECK((got.row(i) - softmax_oracle(logits)).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
  CHECK_THROWS_AS((void)discriminate_topic(Matrix::Ones(1, 5), h), ShapeError);
}

// ---------------------------------------------------------------------------
// Gradient reversal

TEST_CASE("gradient reversal: identity forward, -lambda backward") {
  Rng rng(11);
  const Matrix v = random_matrix(rng, 3, 4);
  CHECK(reverse_gradient(Var::constant(v), 0.1).value() == v);

  for (double lambda : {0.0, 0.1, 1.0}) {
    Var plain = Var::parameter(v);
    Var reversed = Var::parameter(v);
    backward(weighted_sum(gelu(plain)));
    backward(weighted_sum(gelu(reverse_gradient(reversed, lambda))));
    CHECK((reversed.grad() + lambda * plain.grad()).cwiseAbs().maxCoeff() < 1e-15);
    if (lambda == 0.0) CHECK(reversed.grad() == Matrix::Zero(3, 4));
  }
}

TEST_CASE("gradient reversal agrees with finite differences of the plain chain") {
  Rng rng(12);
  const double lambda = 0.1;
  const double step = 1e-6;
  for (int point = 0; point < 20; ++point) {
    const Matrix theta = random_matrix(rng, 1, 5);
    const Matrix a = random_matrix(rng, 5, 4);
    auto chain = [&](const Var& x) { return weighted_sum(gelu(matmul(x, Var::constant(a)))); };
    Var t = Var::parameter(theta);
    backward(chain(reverse_gradient(t, lambda)));
    Matrix fd(1, 5);
    for (Eigen::Index j = 0; j < 5; ++j) {
      Matrix up = theta;
      Matrix down = theta;
      up(0, j) += step;
      down(0, j) -= step;
      fd(0, j) = (chain(Var::constant(up)).scalar() - chain(Var::constant(down)).scalar()) / (2 * step);
    }
    CHECK((t.grad() - (-lambda) * fd).norm() / (lambda * fd).norm() < 1e-4);
  }
}

// ---------------------------------------------------------------------------
// Full model

TEST_CASE("every forward pass satisfies the reconstruction identity") {
  StanceModel model(tiny_model_config(), path_graph(), 13);
  Rng rng(13);
  for (int pass = 0; pass < 10; ++pass) {
    Rng drop(pass);
    ForwardContext ctx{pass % 2 == 0, 0.1, &drop};
    const auto out = model.forward(tiny_input(rng, 3, 3), ctx);
    CHECK((out.f_s.value() + out.f_i.value()).cwiseEqual(out.h.value()).all());
    const Matrix p = softmax_rows(out.stance_logits.value());
    CHECK((p.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-6);
    CHECK(p.minCoeff() >= 0.0);
  }
}

TEST_CASE("the discriminator sees only f_i") {
  StanceModel model(tiny_model_config(), path_graph(), 14);
  Rng rng(14);
  ForwardContext ctx;
  const ModelInput in = tiny_input(rng, 4, 3);
  const auto out = model.forward(in, ctx, DiscriminatorPath::plain);
  const std::vector<int> topics{0, 1, 1, 0};
  model.params().zero_grad();
  backward(cross_entropy(out.topic_logits, topics));
  for (const auto& name : model.params().names()) {
    const Var& p = model.params().at(name);
    const double g = p.has_grad() ? p.grad().cwiseAbs().maxCoeff() : 0.0;
    INFO(name);
    if (name.starts_with("geo.") || name.starts_with("stance_head.")) CHECK(g == 0.0);
  }
  CHECK(model.params().at("topic_head.weight").grad().cwiseAbs().maxCoeff() > 0.0);
  // f_s is reached only through f_i = h - f_s, so with f_i held fixed its gradient vanishes.
  REQUIRE(out.f_s.has_grad());
  CHECK(out.f_s.grad() == Matrix(-out.f_i.grad()));
}

TEST_CASE("forward rejects mismatched region lists") {
  StanceModel model(tiny_model_config(), path_graph(), 15);
  Rng rng(15);
  ModelInput in = tiny_input(rng, 2, 3);
  in.regions.pop_back();
  ForwardContext ctx;
  CHECK_THROWS_AS((void)model.forward(in, ctx), ShapeError);
}

TEST_CASE("parameter counts") {
  const ModelConfig cfg = tiny_model_config(3);
  // Hand sum for d = 32, ff = 128, vocab 500, 160 positions, F = 8, N = 3, K = 3.
  const std::size_t d = 32;
  const std::size_t ff = 128;
  const std::size_t embeddings = 500 * d + 160 * d + 2 * d + 2 * d;
  const std::size_t layer = 4 * (d * d + d) + 2 * d + (d * ff + ff) + (ff * d + d) + 2 * d;
  const std::size_t encoder = embeddings + 2 * layer;
  const std::size_t heads = (d * d + d) + (3 * 8 + 2 * 8 * 8) + ((2 * d + 8) * 3 + 3) + (d * 3 + 3);
  CHECK(count_parameters(TransformerEncoder::layout(cfg.encoder)) == encoder);
  CHECK(count_parameters(StanceModel::layout(cfg, 3)) == encoder + heads);

  StanceModel model(cfg, path_graph(), 16);
  CHECK(model.count_parameters() == encoder + heads);
  model.freeze_encoder();
  CHECK(model.count_parameters() == heads);
  model.freeze_encoder(false);
  CHECK(model.count_parameters() == encoder + heads);
}

TEST_CASE("base configuration has about 110.1 million parameters") {
  ModelConfig cfg;
  cfg.encoder = EncoderConfig::base();
  cfg.geo_hidden = 256;
  cfg.num_topics = 3;
  const auto count = static_cast<double>(count_parameters(StanceModel::layout(cfg, 52)));
  CHECK(std::abs(count - 110.1e6) / 110.1e6 <= 0.02);
}

TEST_CASE("model configuration checks") {
  ModelConfig cfg = tiny_model_config();
  cfg.num_topics = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_model_config();
  cfg.grl_lambda = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_model_config();
  cfg.dropout = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
