#include "advstance/encoder.hpp"
#include "advstance/errors.hpp"
#include "advstance/tokenizer.hpp"

#include "doctest.h"

#include <numeric>

using namespace advstance;

namespace {

WordTokenizer numbered_vocab(int words) {
  std::vector<std::string> vocab{"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
  for (int i = 0; i < words; ++i) vocab.push_back("w" + std::to_string(i));
  return WordTokenizer(vocab);
}

std::string words(int n, int offset = 0) {
  std::string out;
  for (int i = 0; i < n; ++i) out += "w" + std::to_string(offset + i) + " ";
  return out;
}

struct TinyEncoder {
  ParameterStore store;
  Rng rng{3};
  TransformerEncoder encoder{EncoderConfig::tiny(), store, rng};
};

TokenBatch batch_of(const std::vector<TokenPair>& pairs) { return collate(pairs, 0); }

}  // namespace

TEST_CASE("basic tokenization lowercases and splits punctuation") {
  CHECK(basic_tokenize("Stay-at-Home, NOW!") ==
        std::vector<std::string>{"stay", "-", "at", "-", "home", ",", "now", "!"});
  CHECK(basic_tokenize("  ").empty());
}

TEST_CASE("word tokenizer keeps the most frequent words") {
  const std::vector<std::string> texts{"b a a", "c a b", "d"};
  const auto tok = WordTokenizer::build(texts, 6);
  CHECK(tok.vocabulary() == std::vector<std::string>{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "a", "b"});
  CHECK(tok.encode("a c b") == std::vector<int>{4, tok.unk_id(), 5});
}

TEST_CASE("wordpiece is greedy longest-match-first") {
  const WordPieceTokenizer tok({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "un", "##aff", "##able", "runn", "##ing", ","});
  CHECK(tok.encode("unaffable, running") == std::vector<int>{4, 5, 6, 9, 7, 8});
  CHECK(tok.encode("xyz") == std::vector<int>{tok.unk_id()});
  const auto rebuilt = make_tokenizer(tok.kind(), tok.serialize_vocabulary());
  CHECK(rebuilt->encode("unaffable") == tok.encode("unaffable"));
}

TEST_CASE("pair layout: [CLS] description [SEP] text [SEP]") {
  const auto tok = numbered_vocab(300);
  const TokenPair p = build_pair("w1 w2", "w3", tok);
  CHECK(p.token_ids == std::vector<int>{tok.cls_id(), 5, 6, tok.sep_id(), 7, tok.sep_id()});
  CHECK(p.segment_ids == std::vector<int>{0, 0, 0, 0, 1, 1});
  CHECK(p.attention_mask == std::vector<int>(6, 1));
}

TEST_CASE("description and text are truncated independently") {
  const auto tok = numbered_vocab(300);
  const TokenPair p = build_pair(words(60), words(120, 100), tok);
  CHECK(p.size() == 50 + 100 + 3);
  CHECK(p.token_ids[50] == 4 + 49);  // last kept description word is w49
  CHECK(p.token_ids[51] == tok.sep_id());
  CHECK(p.token_ids[52] == 4 + 100);
  CHECK(std::count(p.token_ids.begin(), p.token_ids.end(), tok.sep_id()) == 2);
}

TEST_CASE("empty description with a one-token text has length 4") {
  const auto tok = numbered_vocab(10);
  CHECK(build_pair("", "w0", tok).size() == 4);
  CHECK_THROWS_AS((void)build_pair("w1", "  ", tok), DataError);
}

TEST_CASE("collate pads and masks") {
  const auto tok = numbered_vocab(10);
  const std::vector<TokenPair> pairs{build_pair("w1", "w2 w3 w4", tok), build_pair("", "w0", tok)};
  const TokenBatch b = collate(pairs, tok.pad_id());
  CHECK(b.batch == 2);
  CHECK(b.length == 7);
  CHECK(std::accumulate(b.mask.begin(), b.mask.end(), 0) == 7 + 4);
  CHECK(b.ids[7 + 4] == tok.pad_id());
  CHECK(b.segments[7 + 6] == 0);
}

TEST_CASE("encoder output shape and inference determinism") {
  TinyEncoder te;
  const auto tok = numbered_vocab(300);
  const TokenPair p = build_pair("w1 w2", "w5 w6 w7", tok);
  ForwardContext ctx;
  const Matrix h = te.encoder.encode(batch_of({p, p, build_pair("", "w9", tok)}), ctx).value();
  CHECK(h.rows() == 3);
  CHECK(h.cols() == 32);
  CHECK(h.row(0) == h.row(1));
  CHECK(h.allFinite());
}

TEST_CASE("encoder is permutation-equivariant over the batch") {
  TinyEncoder te;
  const auto tok = numbered_vocab(300);
  std::vector<TokenPair> pairs;
  for (int i = 0; i < 5; ++i) pairs.push_back(build_pair(words(i + 1, 10 * i), words(2 * i + 1, 50 + i), tok));
  ForwardContext ctx;
  const Matrix forward = te.encoder.encode(batch_of(pairs), ctx).value();
  std::vector<TokenPair> reversed(pairs.rbegin(), pairs.rend());
  const Matrix backward_order = te.encoder.encode(batch_of(reversed), ctx).value();
  for (Eigen::Index i = 0; i < 5; ++i) {
    CHECK((forward.row(i) - backward_order.row(4 - i)).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("padding does not change h") {
  TinyEncoder te;
  const auto tok = numbered_vocab(300);
  const TokenPair shortp = build_pair("w1", "w2", tok);
  ForwardContext ctx;
  const Matrix alone = te.encoder.encode(batch_of({shortp}), ctx).value();
  const Matrix padded = te.encoder.encode(batch_of({shortp, build_pair(words(20), words(30), tok)}), ctx).value();
  CHECK((alone.row(0) - padded.row(0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("h has a nonzero gradient for every encoder tensor") {
  TinyEncoder te;
  const auto tok = numbered_vocab(300);
  ForwardContext ctx;
  const Var h = te.encoder.encode(batch_of({build_pair("w1 w2", "w3 w4", tok), build_pair("w5", "w6", tok)}), ctx);
  Rng rng(9);
  Matrix w(h.cols(), 1);
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = rng.normal();
  backward(matmul(Var::constant(Matrix::Ones(1, h.rows())), matmul(h, Var::constant(w))));
  for (const auto& name : te.store.names()) {
    INFO(name);
    if (name.find("position_embeddings") != std::string::npos) continue;
    CHECK(te.store.at(name).grad().cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("training mode applies dropout from the context stream") {
  TinyEncoder te;
  const auto tok = numbered_vocab(300);
  const TokenBatch b = batch_of({build_pair("w1 w2", "w3 w4", tok)});
  Rng r1(1);
  Rng r2(1);
  Rng r3(2);
  ForwardContext c1{true, 0.1, &r1};
  ForwardContext c2{true, 0.1, &r2};
  ForwardContext c3{true, 0.1, &r3};
  const Matrix a = te.encoder.encode(b, c1).value();
  CHECK(a == te.encoder.encode(b, c2).value());
  CHECK(a != te.encoder.encode(b, c3).value());
  ForwardContext no_rng{true, 0.1, nullptr};
  CHECK_THROWS_AS((void)te.encoder.encode(b, no_rng), ConfigError);
}

TEST_CASE("sequences beyond the positional capacity are rejected") {
  ParameterStore store;
  Rng rng(1);
  EncoderConfig cfg = EncoderConfig::tiny();
  TransformerEncoder enc(cfg, store, rng);
  TokenPair p;
  p.token_ids.assign(cfg.max_positions + 1, 5);
  p.segment_ids.assign(p.token_ids.size(), 0);
  p.attention_mask.assign(p.token_ids.size(), 1);
  ForwardContext ctx;
  CHECK_THROWS_AS((void)enc.encode(batch_of({p}), ctx), ShapeError);
}

TEST_CASE("encoder configuration checks") {
  EncoderConfig cfg = EncoderConfig::tiny();
  cfg.num_heads = 3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = EncoderConfig::tiny();
  cfg.max_positions = 100;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK(parse_encoder_kind("pretrained") == EncoderKind::pretrained);
  CHECK_THROWS_AS((void)parse_encoder_kind("large"), ConfigError);
}
