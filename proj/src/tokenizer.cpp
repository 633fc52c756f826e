#include "advstance/tokenizer.hpp"

#include "advstance/errors.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace advstance {

std::vector<std::string> basic_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
    }
  }
  flush();
  return out;
}

Tokenizer::Tokenizer(std::vector<std::string> vocab) : vocab_(std::move(vocab)) {
  for (std::size_t i = 0; i < vocab_.size(); ++i) ids_.emplace(vocab_[i], static_cast<int>(i));
  auto special = [&](std::string_view name) {
    auto it = ids_.find(name);
    if (it == ids_.end()) throw ConfigError("vocabulary lacks special token " + std::string(name));
    return it->second;
  };
  pad_ = special("[PAD]");
  unk_ = special("[UNK]");
  cls_ = special("[CLS]");
  sep_ = special("[SEP]");
}

int Tokenizer::lookup(std::string_view token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? -1 : it->second;
}

std::string Tokenizer::serialize_vocabulary() const {
  std::string out;
  for (const auto& t : vocab_) out += t + '\n';
  return out;
}

WordTokenizer WordTokenizer::build(std::span<const std::string> texts, std::size_t max_size) {
  if (max_size < 5) throw ConfigError("word vocabulary needs room for specials plus one word");
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& t : texts) {
    for (auto& w : basic_tokenize(t)) ++freq[w];
  }
  std::vector<std::pair<std::string, std::size_t>> words(freq.begin(), freq.end());
  std::sort(words.begin(), words.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> vocab{"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
  for (auto& [w, n] : words) {
    if (vocab.size() >= max_size) break;
    if (w.front() == '[' && w.back() == ']') continue;
    vocab.push_back(w);
  }
  return WordTokenizer(std::move(vocab));
}

std::vector<int> WordTokenizer::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& w : basic_tokenize(text)) {
    const int id = lookup(w);
    ids.push_back(id < 0 ? unk_id() : id);
  }
  return ids;
}

WordPieceTokenizer WordPieceTokenizer::from_file(const std::filesystem::path& vocab_txt) {
  std::ifstream in(vocab_txt);
  if (!in) throw ConfigError("cannot open vocabulary " + vocab_txt.string());
  std::vector<std::string> vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    vocab.push_back(line);
  }
  return WordPieceTokenizer(std::move(vocab));
}

std::vector<int> WordPieceTokenizer::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& word : basic_tokenize(text)) {
    if (word.size() > max_chars_) {
      ids.push_back(unk_id());
      continue;
    }
    std::vector<int> pieces;
    std::size_t start = 0;
    bool bad = false;
    while (start < word.size()) {
      std::size_t end = word.size();
      int found = -1;
      while (start < end) {
        std::string piece = word.substr(start, end - start);
        if (start > 0) piece = "##" + piece;
        found = lookup(piece);
        if (found >= 0) break;
        --end;
      }
      if (found < 0) {
        bad = true;
        break;
      }
      pieces.push_back(found);
      start = end;
    }
    if (bad) {
      ids.push_back(unk_id());
    } else {
      ids.insert(ids.end(), pieces.begin(), pieces.end());
    }
  }
  return ids;
}

std::unique_ptr<Tokenizer> make_tokenizer(std::string_view kind, std::string_view vocabulary) {
  std::vector<std::string> vocab;
  std::istringstream in{std::string(vocabulary)};
  std::string line;
  while (std::getline(in, line)) vocab.push_back(line);
  if (kind == "word") return std::make_unique<WordTokenizer>(std::move(vocab));
  if (kind == "wordpiece") return std::make_unique<WordPieceTokenizer>(std::move(vocab));
  throw ConfigError("unknown tokenizer kind '" + std::string(kind) + "'");
}

}  // namespace advstance
