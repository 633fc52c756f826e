#pragma once

// Sentence-pair construction and the bidirectional transformer that turns a
// `[CLS] description [SEP] text [SEP]` pair into the aggregate vector h.

#include "advstance/autodiff.hpp"
#include "advstance/parameters.hpp"
#include "advstance/rng.hpp"
#include "advstance/tokenizer.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace advstance {

inline constexpr std::size_t kMaxDescriptionTokens = 50;
inline constexpr std::size_t kMaxTextTokens = 100;

struct TokenPair {
  std::vector<int> token_ids;
  std::vector<int> segment_ids;     // 0: [CLS] description [SEP], 1: text [SEP]
  std::vector<int> attention_mask;  // 1 on real tokens, 0 on padding

  [[nodiscard]] std::size_t size() const { return token_ids.size(); }
  bool operator==(const TokenPair&) const = default;
};

struct PairLimits {
  std::size_t description = kMaxDescriptionTokens;
  std::size_t text = kMaxTextTokens;
};

/// Truncates description and text independently, then joins them with the
/// special tokens. Throws DataError when the text has no tokens.
TokenPair build_pair(std::string_view description, std::string_view text, const Tokenizer& tokenizer,
                     PairLimits limits = {});

/// Right-pads with [PAD], segment 0 and mask 0.
TokenPair pad_pair(TokenPair pair, std::size_t length, int pad_id);

/// A padded batch, row-major batch x length.
struct TokenBatch {
  std::size_t batch = 0;
  std::size_t length = 0;
  std::vector<int> ids;
  std::vector<int> segments;
  std::vector<int> mask;
};

/// Pads every pair to the longest one.
TokenBatch collate(std::span<const TokenPair> pairs, int pad_id);

enum class EncoderKind { tiny, pretrained };

std::string_view to_string(EncoderKind k);
EncoderKind parse_encoder_kind(std::string_view text);

struct EncoderConfig {
  EncoderKind kind = EncoderKind::tiny;
  std::size_t vocab_size = 500;
  std::size_t hidden_size = 32;
  std::size_t num_layers = 2;
  std::size_t num_heads = 2;
  std::size_t intermediate_size = 128;
  std::size_t max_positions = 160;
  std::size_t type_vocab_size = 2;
  double layer_norm_eps = 1e-12;
  std::string weights_path;  // pretrained only
  std::string vocab_path;    // pretrained only; defaults to vocab.txt next to the weights

  /// Uncased BERT-base dimensions.
  static EncoderConfig base();
  /// 2 layers, d = 32, 2 heads, 500-word vocabulary.
  static EncoderConfig tiny();

  void validate() const;
};

/// Per-call execution state: dropout on/off and the stream that draws masks.
struct ForwardContext {
  bool training = false;
  double dropout = 0.0;
  Rng* rng = nullptr;
};

/// Inverted dropout; identity outside training.
Var dropout(const Var& x, ForwardContext& ctx);

/// BERT-style post-norm transformer encoder. Parameter names follow the
/// common `embeddings.*` / `encoder.layer.<i>.*` layout under a prefix.
class TransformerEncoder {
 public:
  TransformerEncoder(EncoderConfig cfg, ParameterStore& store, Rng& init_rng, std::string prefix = "encoder.");

  static std::vector<ParameterShape> layout(const EncoderConfig& cfg, const std::string& prefix = "encoder.");

  /// Final-layer hidden state at the first position of every pair, batch x d.
  [[nodiscard]] Var encode(const TokenBatch& batch, ForwardContext& ctx) const;

  [[nodiscard]] const EncoderConfig& config() const { return cfg_; }
  [[nodiscard]] const std::string& prefix() const { return prefix_; }

 private:
  [[nodiscard]] const Var& p(const std::string& name) const { return store_->at(prefix_ + name); }

  EncoderConfig cfg_;
  ParameterStore* store_;
  std::string prefix_;
};

}  // namespace advstance
