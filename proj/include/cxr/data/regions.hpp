#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cxr::data {

inline constexpr std::size_t kNumRegions = 29;
inline constexpr std::size_t kFeatureDim = 1024;

// Directory holding the shipped data files. Honors $CXR_DATA_DIR, otherwise the
// source tree's data/ directory baked in at build time.
std::filesystem::path default_data_dir();

// FNV-1a 64-bit over the bytes, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

// The 29 anatomical region names; index = line number in regions.txt.
class RegionVocabulary {
 public:
  RegionVocabulary() = default;
  explicit RegionVocabulary(std::vector<std::string> names);

  static RegionVocabulary load(const std::filesystem::path& path);
  static const RegionVocabulary& builtin();  // default_data_dir()/regions.txt, loaded once

  const std::string& name(std::size_t index) const { return names_.at(index); }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  std::optional<std::size_t> index_of(std::string_view name) const;  // case-insensitive
  std::string hash() const;

 private:
  std::vector<std::string> names_;
};

}  // namespace cxr::data
