#include "cxr/data/regions.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

#include "cxr/error.hpp"

#ifndef CXR_DATA_DIR
#define CXR_DATA_DIR "data"
#endif

namespace cxr::data {

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("CXR_DATA_DIR"); env && *env) return env;
  return CXR_DATA_DIR;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

RegionVocabulary::RegionVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.size() != kNumRegions) {
    throw ValidationError("region vocabulary must have " + std::to_string(kNumRegions) + " names, got " +
                          std::to_string(names_.size()));
  }
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw ValidationError("region vocabulary contains an empty name");
    if (!seen.insert(lower(n)).second) throw ValidationError("duplicate region name '" + n + "'");
  }
}

RegionVocabulary RegionVocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open region vocabulary " + path.string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) names.push_back(line);
  }
  return RegionVocabulary(std::move(names));
}

const RegionVocabulary& RegionVocabulary::builtin() {
  static const RegionVocabulary vocab = load(default_data_dir() / "regions.txt");
  return vocab;
}

std::optional<std::size_t> RegionVocabulary::index_of(std::string_view name) const {
  const std::string key = lower(name);
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (lower(names_[i]) == key) return i;
  }
  return std::nullopt;
}

std::string RegionVocabulary::hash() const {
  std::string joined;
  for (const auto& n : names_) joined += n + '\n';
  return fnv1a_hex(joined);
}

}  // namespace cxr::data
