#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cxr/metrics/counts.hpp"

namespace cxr::metrics {

inline constexpr std::size_t kNumDiseaseLabels = 14;
inline constexpr std::size_t kNoFinding = 13;

extern const std::array<std::string_view, kNumDiseaseLabels> kDiseaseLabels;

enum class Mention { unmentioned, negative, positive };

std::string_view to_string(Mention m);

struct DiseaseLabelSet {
  std::array<Mention, kNumDiseaseLabels> labels{};

  bool positive(std::size_t i) const { return labels.at(i) == Mention::positive; }
  bool operator==(const DiseaseLabelSet&) const = default;
};

class LabelExtractor {
 public:
  static LabelExtractor load(const std::filesystem::path& path);
  static LabelExtractor builtin();  // keyword table from the data directory

  DiseaseLabelSet extract(std::string_view text) const;
  const std::string& version() const { return version_; }

 private:
  using Phrase = std::vector<std::string>;
  std::string version_;
  std::vector<Phrase> negation_cues_;
  std::vector<Phrase> normality_;
  std::array<std::vector<Phrase>, kNumDiseaseLabels - 1> keywords_;
};

struct CeScores {
  PrecisionRecall micro;
  PrecisionRecall macro;
  ConfusionCounts counts;
  std::array<ConfusionCounts, kNumDiseaseLabels> per_label{};
  std::size_t macro_labels = 0;  // labels with any gold or predicted positive
};

// Positive-class counting over (report, label) pairs; unmentioned and
// negative both count as not positive.
CeScores ce_scores(const std::vector<DiseaseLabelSet>& predicted, const std::vector<DiseaseLabelSet>& gold);

}  // namespace cxr::metrics
