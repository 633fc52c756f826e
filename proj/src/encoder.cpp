#include "advstance/encoder.hpp"

#include "advstance/errors.hpp"

#include <cmath>

namespace advstance {

TokenPair build_pair(std::string_view description, std::string_view text, const Tokenizer& tokenizer,
                     PairLimits limits) {
  std::vector<int> desc = tokenizer.encode(description);
  std::vector<int> body = tokenizer.encode(text);
  if (body.empty()) throw DataError("", 0, "text", "text has no tokens after tokenization");
  if (desc.size() > limits.description) desc.resize(limits.description);
  if (body.size() > limits.text) body.resize(limits.text);

  TokenPair pair;
  pair.token_ids.reserve(desc.size() + body.size() + 3);
  pair.token_ids.push_back(tokenizer.cls_id());
  pair.token_ids.insert(pair.token_ids.end(), desc.begin(), desc.end());
  pair.token_ids.push_back(tokenizer.sep_id());
  const std::size_t first_text = pair.token_ids.size();
  pair.token_ids.insert(pair.token_ids.end(), body.begin(), body.end());
  pair.token_ids.push_back(tokenizer.sep_id());

  pair.segment_ids.assign(pair.token_ids.size(), 0);
  std::fill(pair.segment_ids.begin() + static_cast<std::ptrdiff_t>(first_text), pair.segment_ids.end(), 1);
  pair.attention_mask.assign(pair.token_ids.size(), 1);
  return pair;
}

TokenPair pad_pair(TokenPair pair, std::size_t length, int pad_id) {
  if (pair.size() > length) throw ShapeError("pad_pair: pair longer than target length");
  pair.token_ids.resize(length, pad_id);
  pair.segment_ids.resize(length, 0);
  pair.attention_mask.resize(length, 0);
  return pair;
}

TokenBatch collate(std::span<const TokenPair> pairs, int pad_id) {
  TokenBatch b;
  b.batch = pairs.size();
  for (const auto& p : pairs) b.length = std::max(b.length, p.size());
  b.ids.reserve(b.batch * b.length);
  b.segments.reserve(b.batch * b.length);
  b.mask.reserve(b.batch * b.length);
  for (const auto& p : pairs) {
    const TokenPair padded = pad_pair(p, b.length, pad_id);
    b.ids.insert(b.ids.end(), padded.token_ids.begin(), padded.token_ids.end());
    b.segments.insert(b.segments.end(), padded.segment_ids.begin(), padded.segment_ids.end());
    b.mask.insert(b.mask.end(), padded.attention_mask.begin(), padded.attention_mask.end());
  }
  return b;
}

std::string_view to_string(EncoderKind k) { return k == EncoderKind::tiny ? "tiny" : "pretrained"; }

EncoderKind parse_encoder_kind(std::string_view text) {
  if (text == "tiny") return EncoderKind::tiny;
  if (text == "pretrained") return EncoderKind::pretrained;
  throw ConfigError("invalid encoder kind '" + std::string(text) + "' (allowed: tiny, pretrained)");
}

EncoderConfig EncoderConfig::base() {
  EncoderConfig c;
  c.kind = EncoderKind::pretrained;
  c.vocab_size = 30522;
  c.hidden_size = 768;
  c.num_layers = 12;
  c.num_heads = 12;
  c.intermediate_size = 3072;
  c.max_positions = 512;
  return c;
}

EncoderConfig EncoderConfig::tiny() { return EncoderConfig{}; }

void EncoderConfig::validate() const {
  if (vocab_size < 5 || hidden_size == 0 || num_layers == 0 || num_heads == 0 || intermediate_size == 0 ||
      type_vocab_size < 2) {
    throw ConfigError("encoder: sizes must be positive (vocab >= 5, type vocab >= 2)");
  }
  if (hidden_size % num_heads != 0) throw ConfigError("encoder: hidden_size must be divisible by num_heads");
  if (max_positions < kMaxDescriptionTokens + kMaxTextTokens + 3) {
    throw ConfigError("encoder: max_positions must hold a full description/text pair (>= 153)");
  }
  if (!(layer_norm_eps > 0.0)) throw ConfigError("encoder: layer_norm_eps must be positive");
}

Var dropout(const Var& x, ForwardContext& ctx) {
  if (!ctx.training || ctx.dropout <= 0.0) return x;
  if (ctx.rng == nullptr) throw ConfigError("dropout in training mode needs a random stream");
  const double keep = 1.0 - ctx.dropout;
  Matrix mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = ctx.rng->uniform() < keep ? 1.0 / keep : 0.0;
  return mul_constant(x, mask);
}

std::vector<ParameterShape> TransformerEncoder::layout(const EncoderConfig& cfg, const std::string& prefix) {
  const auto d = static_cast<Eigen::Index>(cfg.hidden_size);
  const auto ff = static_cast<Eigen::Index>(cfg.intermediate_size);
  std::vector<ParameterShape> out{
      {prefix + "embeddings.word_embeddings.weight", static_cast<Eigen::Index>(cfg.vocab_size), d},
      {prefix + "embeddings.position_embeddings.weight", static_cast<Eigen::Index>(cfg.max_positions), d},
      {prefix + "embeddings.token_type_embeddings.weight", static_cast<Eigen::Index>(cfg.type_vocab_size), d},
      {prefix + "embeddings.LayerNorm.weight", 1, d},
      {prefix + "embeddings.LayerNorm.bias", 1, d},
  };
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const std::string lp = prefix + "layer." + std::to_string(l) + ".";
    for (const char* proj : {"query", "key", "value"}) {
      out.push_back({lp + "attention.self." + proj + ".weight", d, d});
      out.push_back({lp + "attention.self." + proj + ".bias", 1, d});
    }
    out.push_back({lp + "attention.output.dense.weight", d, d});
    out.push_back({lp + "attention.output.dense.bias", 1, d});
    out.push_back({lp + "attention.output.LayerNorm.weight", 1, d});
    out.push_back({lp + "attention.output.LayerNorm.bias", 1, d});
    out.push_back({lp + "intermediate.dense.weight", d, ff});
    out.push_back({lp + "intermediate.dense.bias", 1, ff});
    out.push_back({lp + "output.dense.weight", ff, d});
    out.push_back({lp + "output.dense.bias", 1, d});
    out.push_back({lp + "output.LayerNorm.weight", 1, d});
    out.push_back({lp + "output.LayerNorm.bias", 1, d});
  }
  return out;
}

TransformerEncoder::TransformerEncoder(EncoderConfig cfg, ParameterStore& store, Rng& init_rng, std::string prefix)
    : cfg_(std::move(cfg)), store_(&store), prefix_(std::move(prefix)) {
  cfg_.validate();
  for (const auto& shape : layout(cfg_, prefix_)) {
    Matrix init;
    if (shape.name.ends_with("LayerNorm.weight")) {
      init = Matrix::Ones(shape.rows, shape.cols);
    } else if (shape.name.ends_with(".bias")) {
      init = Matrix::Zero(shape.rows, shape.cols);
    } else {
      init.resize(shape.rows, shape.cols);
      for (Eigen::Index i = 0; i < init.size(); ++i) init.data()[i] = init_rng.normal(0.0, 0.02);
    }
    store.add(shape.name, std::move(init));
  }
}

Var TransformerEncoder::encode(const TokenBatch& batch, ForwardContext& ctx) const {
  if (batch.batch == 0) throw ShapeError("encode: empty batch");
  if (batch.length > cfg_.max_positions) {
    throw ShapeError("encode: sequence length " + std::to_string(batch.length) + " exceeds positional capacity " +
                     std::to_string(cfg_.max_positions));
  }
  const auto B = static_cast<Eigen::Index>(batch.batch);
  const auto T = static_cast<Eigen::Index>(batch.length);
  const auto d = static_cast<Eigen::Index>(cfg_.hidden_size);
  const auto heads = static_cast<Eigen::Index>(cfg_.num_heads);
  const Eigen::Index dh = d / heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<int> positions(batch.ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i % batch.length);
  for (int id : batch.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= cfg_.vocab_size) {
      throw ShapeError("encode: token id " + std::to_string(id) + " outside vocabulary");
    }
  }

  Var x = add(add(gather_rows(p("embeddings.word_embeddings.weight"), batch.ids),
                  gather_rows(p("embeddings.position_embeddings.weight"), positions)),
              gather_rows(p("embeddings.token_type_embeddings.weight"), batch.segments));
  x = layer_norm(x, p("embeddings.LayerNorm.weight"), p("embeddings.LayerNorm.bias"), cfg_.layer_norm_eps);
  x = dropout(x, ctx);

  // Additive key mask per example; masked keys get exactly zero weight.
  std::vector<Matrix> key_bias(batch.batch);
  for (Eigen::Index b = 0; b < B; ++b) {
    Matrix row(1, T);
    for (Eigen::Index t = 0; t < T; ++t) row(0, t) = batch.mask[static_cast<std::size_t>(b * T + t)] ? 0.0 : -1e30;
    key_bias[static_cast<std::size_t>(b)] = row.replicate(T, 1);
  }

  auto linear = [&](const Var& in, const std::string& name) {
    return add_row(matmul(in, p(name + ".weight")), p(name + ".bias"));
  };

  for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
    const std::string lp = "layer." + std::to_string(l) + ".";
    const Var q = linear(x, lp + "attention.self.query");
    const Var k = linear(x, lp + "attention.self.key");
    const Var v = linear(x, lp + "attention.self.value");

    std::vector<Var> per_example;
    per_example.reserve(batch.batch);
    for (Eigen::Index b = 0; b < B; ++b) {
      std::vector<Var> per_head;
      per_head.reserve(static_cast<std::size_t>(heads));
      for (Eigen::Index h = 0; h < heads; ++h) {
        const Var qh = slice(q, b * T, T, h * dh, dh);
        const Var kh = slice(k, b * T, T, h * dh, dh);
        const Var vh = slice(v, b * T, T, h * dh, dh);
        Var scores = add_constant(scale(matmul_nt(qh, kh), inv_sqrt_dh), key_bias[static_cast<std::size_t>(b)]);
        Var probs = dropout(softmax_rows(scores), ctx);
        per_head.push_back(matmul(probs, vh));
      }
      per_example.push_back(concat_cols(per_head));
    }
    Var context = concat_rows(per_example);

    Var attn = dropout(linear(context, lp + "attention.output.dense"), ctx);
    x = layer_norm(add(attn, x), p(lp + "attention.output.LayerNorm.weight"), p(lp + "attention.output.LayerNorm.bias"),
                   cfg_.layer_norm_eps);
    Var ff = gelu(linear(x, lp + "intermediate.dense"));
    ff = dropout(linear(ff, lp + "output.dense"), ctx);
    x = layer_norm(add(ff, x), p(lp + "output.LayerNorm.weight"), p(lp + "output.LayerNorm.bias"), cfg_.layer_norm_eps);
  }

  std::vector<Var> cls;
  cls.reserve(batch.batch);
  for (Eigen::Index b = 0; b < B; ++b) cls.push_back(slice(x, b * T, 1, 0, d));
  return concat_rows(cls);
}

}  // namespace advstance
