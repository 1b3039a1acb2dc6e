#include "cxr/data/tokenizer.hpp"

#include <cctype>
#include <set>

#include "cxr/data/dataset.hpp"
#include "cxr/error.hpp"

namespace cxr::data {

namespace {
const std::vector<std::string> kReserved = {"<pad>", "<bos>", "<eos>", "<unk>"};
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  bool glue_next = false;
  for (const auto& t : tokens) {
    const bool closing = t.size() == 1 && std::string_view(".,;:!?)%").find(t[0]) != std::string_view::npos;
    if (!out.empty() && !closing && !glue_next) out.push_back(' ');
    out += t;
    glue_next = (t == "(");
  }
  return out;
}

Vocabulary::Vocabulary() : Vocabulary(kReserved) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < kReserved.size() ||
      !std::equal(kReserved.begin(), kReserved.end(), tokens_.begin())) {
    throw ValidationError("vocabulary must begin with the reserved tokens <pad> <bos> <eos> <unk>");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw ValidationError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

std::vector<int> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocabulary::decode(std::span<const int> ids) const {
  std::vector<std::string> out;
  for (int id : ids) {
    if (id == kEos) break;
    if (id == kPad || id == kBos) continue;
    out.push_back(token(id));
  }
  return out;
}

Vocabulary build_vocab(const DatasetSplit& split) {
  std::set<std::string> seen;
  for (const auto& sample : split.samples) {
    for (const auto& region : sample.regions) {
      if (!region.gold_sentence) continue;
      for (auto& t : tokenize(*region.gold_sentence)) seen.insert(std::move(t));
    }
  }
  std::vector<std::string> tokens = kReserved;
  for (const auto& t : seen) {
    if (std::find(kReserved.begin(), kReserved.end(), t) == kReserved.end()) tokens.push_back(t);
  }
  return Vocabulary(std::move(tokens));
}

}  // namespace cxr::data
