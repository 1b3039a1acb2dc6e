#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cxr/data/regions.hpp"

namespace cxr::data {

// Corner convention, pixels, continuous coordinates.
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  bool valid() const { return x1 < x2 && y1 < y2; }
  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  bool operator==(const Box&) const = default;
};

struct ClinicalContext {
  std::string history;
  std::string indication;
  std::string reason_for_exam;

  bool empty() const { return history.empty() && indication.empty() && reason_for_exam.empty(); }
  bool operator==(const ClinicalContext&) const = default;
};

struct RegionRecord {
  std::size_t region_id = 0;
  std::string region_name;
  std::vector<float> feature;
  bool projected = true;  // feature already in the 1024-dim space
  std::optional<Box> box;
  std::optional<std::string> gold_sentence;
  bool has_sentence = false;
  bool is_abnormal = false;
  bool operator==(const RegionRecord&) const = default;
};

struct Sample {
  std::string sample_id;
  std::vector<RegionRecord> regions;  // exactly 29, ids a permutation of 0..28
  ClinicalContext clinical_context;
  std::string reference_report;

  // Region record with the given id; throws if absent.
  const RegionRecord& region(std::size_t region_id) const;
  bool operator==(const Sample&) const = default;
};

enum class SplitName { train, validation, test };
std::string to_string(SplitName s);
SplitName split_from_string(const std::string& s);

struct DatasetSplit {
  SplitName name = SplitName::train;
  std::vector<Sample> samples;

  const Sample* find(const std::string& sample_id) const;
  bool operator==(const DatasetSplit&) const = default;
};

// Checks every record invariant; throws ValidationError.
void validate_sample(const Sample& sample, const RegionVocabulary& regions);

// One JSON object per line. Features are written with float32 round-trip precision.
std::string serialize_sample(const Sample& sample, SplitName split);
void save_dataset(const std::filesystem::path& path, const DatasetSplit& split);

// Parses and validates line-delimited records; errors carry line numbers.
// An empty file yields an empty split named `fallback_name`.
DatasetSplit load_dataset(const std::filesystem::path& path,
                          const RegionVocabulary& regions = RegionVocabulary::builtin(),
                          SplitName fallback_name = SplitName::train);

// Fails if any sample_id appears in more than one split.
void check_disjoint(const std::vector<const DatasetSplit*>& splits);

struct SyntheticOptions {
  double noise_sigma = 0.1;
  SplitName split = SplitName::train;
  std::string id_prefix;  // empty: "S" train, "V" validation, "T" test
  double image_size = 512.0;
};

// Latent state per region, drawn independently.
enum class RegionState { silent, normal, abnormal };

// Seeded stand-in for a Chest ImaGenome-shaped corpus. Each region gets a
// latent state (abnormal with probability abnormal_rate; otherwise silent with
// probability silent_rate; else normal) and a template variant. Features are
// region basis + state direction + variant direction + N(0, sigma^2) noise, so
// state and variant are linearly recoverable. Deterministic in its arguments.
DatasetSplit generate_synthetic(std::size_t n, std::uint64_t seed, double abnormal_rate, double silent_rate,
                                const SyntheticOptions& options = {},
                                const RegionVocabulary& regions = RegionVocabulary::builtin());

// Sentence templates for the region's family; "{region}" is substituted.
const std::vector<std::string>& normal_templates(const std::string& region_name);
const std::vector<std::string>& abnormal_templates(const std::string& region_name);
std::string fill_template(const std::string& tmpl, const std::string& region_name);

}  // namespace cxr::data
