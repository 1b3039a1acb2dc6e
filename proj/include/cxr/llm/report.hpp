#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cxr/data/regions.hpp"

namespace cxr::llm {

inline const std::string kUnstructuredRegion = "unstructured";

struct ReportSection {
  std::string region_name;
  std::string text;
  bool abnormal = false;
  bool operator==(const ReportSection&) const = default;
};

struct StructuredReport {
  std::vector<ReportSection> sections;
  std::optional<std::string> context_summary;
  std::string raw_text;
  bool unstructured = false;  // no region heading recognised; needs human review

  const ReportSection* find(const std::string& region) const;
  bool operator==(const StructuredReport&) const = default;
};

// "Clinical context: ..." first when present, then one "Region name: text"
// line per section; abnormal sections read "Region name [abnormal]: text".
std::string render_report(const StructuredReport& report);

// Splits on region-name headings (case-insensitive, longest match). Leading
// unmatched text becomes the context summary; text with no heading at all
// becomes a single "unstructured" section.
StructuredReport parse_report(const std::string& raw,
                              const data::RegionVocabulary& regions = data::RegionVocabulary::builtin());

}  // namespace cxr::llm
