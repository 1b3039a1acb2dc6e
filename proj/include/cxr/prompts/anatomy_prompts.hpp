#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cxr/data/regions.hpp"
#include "cxr/features/region_features.hpp"
#include "cxr/metrics/counts.hpp"
#include "cxr/nn/layers.hpp"

namespace cxr::prompts {

// 1024 -> 512 -> 128 -> 1 with relu on the hidden layers; emits one logit per row.
class ClassifierHead {
 public:
  static constexpr std::array<Eigen::Index, 4> kDims = {1024, 512, 128, 1};

  ClassifierHead() = default;
  ClassifierHead(const std::string& name, std::uint64_t seed);

  Eigen::VectorXd logits(const nn::Tensor& x) const;
  Eigen::VectorXd forward(const nn::Tensor& x);
  void backward(const Eigen::VectorXd& d_logits);

  nn::ParameterList parameters();
  std::vector<nn::TensorEntry> describe() const;
  const std::string& name() const { return name_; }

 private:
  std::string name_;
  std::array<nn::Dense, 3> layers_;
};

struct RegionFlag {
  double p_sentence = 0;
  double p_abnormal = 0;
  bool selected = false;
  bool abnormal = false;
};

struct RegionFlags {
  std::vector<RegionFlag> regions;  // region-id order
  double threshold = 0.5;
};

inline constexpr double kDefaultThreshold = 0.5;

// selected = p_sentence >= threshold, abnormal = p_abnormal >= threshold.
RegionFlags flags_from_probabilities(std::span<const double> p_sentence, std::span<const double> p_abnormal,
                                     double threshold = kDefaultThreshold);

RegionFlags classify_regions(const features::RegionFeatureSet& set, const ClassifierHead& sentence_head,
                             const ClassifierHead& abnormal_head, double threshold = kDefaultThreshold);

struct DetectionLoss {
  double sentence = 0;  // L1: mean BCE over sentence labels
  double abnormal = 0;  // L2: mean BCE over abnormality labels
  Eigen::VectorXd d_sentence_logits;
  Eigen::VectorXd d_abnormal_logits;
  double total() const { return sentence + abnormal; }
};

DetectionLoss detection_loss(const Eigen::VectorXd& sentence_logits, const Eigen::VectorXd& abnormal_logits,
                             std::span<const int> has_sentence, std::span<const int> is_abnormal);

struct PromptTemplates {
  std::string location = "Include a finding for the {region}.";
  std::string abnormal = "The {region} is definitely abnormal.";
  std::string normal = "The {region} appears normal.";

  static PromptTemplates load(const std::filesystem::path& path);
  static const PromptTemplates& builtin();  // default_data_dir()/prompt_templates.json

  std::string render_location(const std::string& region) const;
  std::string render_abnormal(const std::string& region) const;
  std::string render_normal(const std::string& region) const;
};

struct AnatomyPromptSet {
  std::vector<std::string> location;     // P1
  std::vector<std::string> abnormality;  // P2
  bool operator==(const AnatomyPromptSet&) const = default;
};

struct PromptConversion {
  AnatomyPromptSet prompts;
  std::vector<bool> selected;           // after coercion, region-id order
  std::vector<bool> abnormal;
  std::vector<std::size_t> coerced;     // abnormal regions that were not selected
};

// Selected regions get a P1 line; among them abnormal ones get the abnormal P2
// line and the rest the normal P2 line. An abnormal region that was not
// selected is selected anyway and listed in `coerced`.
PromptConversion convert_prompts(const RegionFlags& flags, const data::RegionVocabulary& regions,
                                 const PromptTemplates& templates = PromptTemplates::builtin());

struct RegionLabel {
  bool has_sentence = false;
  bool is_abnormal = false;
};

struct GroupScores {
  metrics::ConfusionCounts counts;
  metrics::PrecisionRecall scores;
};

struct TaskScores {
  GroupScores all;
  GroupScores abnormal_gold;  // (sample, region) pairs whose gold region is abnormal
  GroupScores normal_gold;
};

struct DetectionEvaluation {
  TaskScores sentence;
  TaskScores abnormality;
};

// Micro-averaged over every (sample, region) pair.
DetectionEvaluation eval_detection(const std::vector<RegionFlags>& predicted,
                                   const std::vector<std::vector<RegionLabel>>& gold);

}  // namespace cxr::prompts
