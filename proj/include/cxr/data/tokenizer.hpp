#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cxr::data {

struct DatasetSplit;

// Lowercases, splits on whitespace and emits each punctuation character as
// its own token: "The lungs are clear." -> [the, lungs, are, clear, .]
std::vector<std::string> tokenize(std::string_view text);

// Inverse layout for display: no space before closing punctuation.
std::string detokenize(std::span<const std::string> tokens);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  Vocabulary();  // reserved tokens only
  explicit Vocabulary(std::vector<std::string> tokens);  // must start with the reserved four

  int id(const std::string& token) const;  // kUnk when unseen
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(std::span<const std::string> tokens) const;
  // Stops at the first eos; skips pad/bos.
  std::vector<std::string> decode(std::span<const int> ids) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Reserved tokens at 0..3, then every gold-sentence token of the split in
// lexicographic order.
Vocabulary build_vocab(const DatasetSplit& split);

}  // namespace cxr::data
