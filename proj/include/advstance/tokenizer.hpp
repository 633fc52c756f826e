#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace advstance {

/// Lowercases ASCII, splits on whitespace and isolates ASCII punctuation,
/// the usual pre-tokenization for uncased transformer vocabularies.
std::vector<std::string> basic_tokenize(std::string_view text);

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;

  [[nodiscard]] virtual std::vector<int> encode(std::string_view text) const = 0;
  [[nodiscard]] virtual std::string_view kind() const = 0;

  [[nodiscard]] std::size_t vocab_size() const { return vocab_.size(); }
  [[nodiscard]] int pad_id() const { return pad_; }
  [[nodiscard]] int unk_id() const { return unk_; }
  [[nodiscard]] int cls_id() const { return cls_; }
  [[nodiscard]] int sep_id() const { return sep_; }
  [[nodiscard]] const std::vector<std::string>& vocabulary() const { return vocab_; }
  /// One token per line, in id order.
  [[nodiscard]] std::string serialize_vocabulary() const;

 protected:
  explicit Tokenizer(std::vector<std::string> vocab);
  [[nodiscard]] int lookup(std::string_view token) const;

 private:
  std::vector<std::string> vocab_;
  std::map<std::string, int, std::less<>> ids_;
  int pad_ = 0;
  int unk_ = 0;
  int cls_ = 0;
  int sep_ = 0;
};

/// Whole-word vocabulary, unknown words map to [UNK].
class WordTokenizer final : public Tokenizer {
 public:
  explicit WordTokenizer(std::vector<std::string> vocab) : Tokenizer(std::move(vocab)) {}

  /// Four specials followed by the most frequent words (ties broken
  /// lexicographically) up to `max_size` entries in total.
  static WordTokenizer build(std::span<const std::string> texts, std::size_t max_size);

  [[nodiscard]] std::vector<int> encode(std::string_view text) const override;
  [[nodiscard]] std::string_view kind() const override { return "word"; }
};

/// Greedy longest-match-first subword tokenizer over a BERT-style vocab.txt.
class WordPieceTokenizer final : public Tokenizer {
 public:
  explicit WordPieceTokenizer(std::vector<std::string> vocab, std::size_t max_chars_per_word = 100)
      : Tokenizer(std::move(vocab)), max_chars_(max_chars_per_word) {}

  static WordPieceTokenizer from_file(const std::filesystem::path& vocab_txt);

  [[nodiscard]] std::vector<int> encode(std::string_view text) const override;
  [[nodiscard]] std::string_view kind() const override { return "wordpiece"; }

 private:
  std::size_t max_chars_;
};

/// Rebuilds a tokenizer from `kind()` and `serialize_vocabulary()` output.
std::unique_ptr<Tokenizer> make_tokenizer(std::string_view kind, std::string_view vocabulary);

}  // namespace advstance
