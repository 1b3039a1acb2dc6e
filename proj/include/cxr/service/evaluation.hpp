#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cxr/features/region_features.hpp"
#include "cxr/service/pipeline.hpp"

namespace cxr::service {

struct EvalOptions {
  AblationSpec ablation = AblationSpec::preset("f");
  double jitter = 0.05;
  std::uint64_t detector_seed = 7;
  std::size_t limit = 0;  // 0: every sample
};

struct CorpusEvaluation {
  std::size_t samples = 0;
  metrics::NlgScores nlg;
  metrics::CeScores ce;
  prompts::DetectionEvaluation detection;
  features::RegionIouTable iou;
  std::vector<std::pair<std::string, double>> key_region_meteor;
  double token_accuracy = 0;

  nlohmann::json to_json() const;
  std::string table() const;
};

CorpusEvaluation evaluate_corpus(const Pipeline& pipeline, const data::DatasetSplit& split, const EvalOptions& options = {});

struct AblationRow {
  AblationSpec spec;
  metrics::NlgScores nlg;
  metrics::CeScores ce;
  double mean_sections = 0;
};

// Mock backend, one report per sample and preset.
std::vector<AblationRow> run_ablation(const Pipeline& pipeline, const data::DatasetSplit& split,
                                      const std::vector<AblationSpec>& specs, std::size_t limit = 0);
std::string ablation_table(const std::vector<AblationRow>& rows);
nlohmann::json ablation_json(const std::vector<AblationRow>& rows);

nlohmann::json nlg_json(const metrics::NlgScores& s);
nlohmann::json pr_json(const metrics::PrecisionRecall& s);

}  // namespace cxr::service
