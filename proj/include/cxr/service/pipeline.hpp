#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "cxr/llm/backend.hpp"
#include "cxr/metrics/clinical.hpp"
#include "cxr/metrics/nlg.hpp"
#include "cxr/service/ablation.hpp"
#include "cxr/train/model.hpp"

namespace cxr::service {

enum class Backend { mock, remote };
std::string to_string(Backend b);
Backend backend_from_string(const std::string& s);

struct GenerateRequest {
  std::string sample_id;
  std::optional<data::ClinicalContext> context;   // replaces the sample's context
  std::optional<std::vector<bool>> region_mask;   // 29 entries; overrides the sentence head
  AblationSpec ablation = AblationSpec::preset("f");
  Backend backend = Backend::mock;
};

struct SampleMetrics {
  metrics::NlgScores nlg;
  metrics::DiseaseLabelSet predicted;
  metrics::DiseaseLabelSet reference;
};

struct GenerateResult {
  std::string sample_id;
  AblationSpec ablation;
  Backend backend = Backend::mock;
  decoder::RegionSentences sentences;
  prompts::RegionFlags flags;        // after the region mask
  prompts::PromptConversion conversion;
  llm::PromptDocument document;      // exactly what the backend received
  llm::StructuredReport report;
  std::optional<SampleMetrics> metrics;
};

// Text the CE labeler and NLG metrics see: section findings only.
std::string report_findings(const llm::StructuredReport& report);

// Inference over a frozen model: sentences and flags per sample, prompt
// conversion, prompt assembly and the report backend. Safe for concurrent callers.
class Pipeline {
 public:
  Pipeline(train::ModelBundle model, const data::RegionVocabulary& regions = data::RegionVocabulary::builtin(),
           const prompts::PromptTemplates& templates = prompts::PromptTemplates::builtin(),
           std::optional<llm::RemoteConfig> remote = std::nullopt);

  GenerateResult generate(const data::Sample& sample, const GenerateRequest& request) const;

  // Cached per sample id.
  decoder::RegionSentences sentences(const data::Sample& sample) const;
  prompts::RegionFlags flags(const data::Sample& sample) const;

  const train::ModelBundle& model() const { return model_; }
  const data::RegionVocabulary& regions() const { return regions_; }
  bool has_remote() const { return remote_ != nullptr; }

 private:
  train::ModelBundle model_;
  const data::RegionVocabulary& regions_;
  const prompts::PromptTemplates& templates_;
  llm::MockLlm mock_;
  std::unique_ptr<llm::RemoteLlm> remote_;

  mutable std::mutex cache_mutex_;
  mutable std::map<std::string, decoder::RegionSentences> sentence_cache_;
};

}  // namespace cxr::service
