#include "cxr/service/pipeline.hpp"

#include "cxr/error.hpp"
#include "cxr/features/region_features.hpp"

namespace cxr::service {

std::string to_string(Backend b) { return b == Backend::mock ? "mock" : "remote"; }

Backend backend_from_string(const std::string& s) {
  if (s == "mock") return Backend::mock;
  if (s == "remote") return Backend::remote;
  throw ValidationError("unknown backend '" + s + "' (expected mock or remote)");
}

std::string report_findings(const llm::StructuredReport& report) {
  std::string out;
  for (const auto& s : report.sections) {
    if (!out.empty()) out += ' ';
    out += s.text;
  }
  return out;
}

Pipeline::Pipeline(train::ModelBundle model, const data::RegionVocabulary& regions,
                   const prompts::PromptTemplates& templates, std::optional<llm::RemoteConfig> remote)
    : model_(std::move(model)), regions_(regions), templates_(templates), mock_(regions, templates) {
  if (!model_.decoder) throw ConfigError("model has no sentence decoder; train stage 3 first");
  if (regions_.size() != data::kNumRegions) throw ConfigError("region vocabulary must list 29 regions");
  if (remote) remote_ = std::make_unique<llm::RemoteLlm>(*remote);
}

decoder::RegionSentences Pipeline::sentences(const data::Sample& sample) const {
  {
    std::lock_guard lock(cache_mutex_);
    auto it = sentence_cache_.find(sample.sample_id);
    if (it != sentence_cache_.end()) return it->second;
  }
  auto out = model_.decoder->generate_all(features::from_sample(sample), model_.vocab);
  std::lock_guard lock(cache_mutex_);
  sentence_cache_.emplace(sample.sample_id, out);
  return out;
}

prompts::RegionFlags Pipeline::flags(const data::Sample& sample) const {
  return prompts::classify_regions(features::from_sample(sample), model_.sentence_head, model_.abnormal_head);
}

GenerateResult Pipeline::generate(const data::Sample& sample, const GenerateRequest& request) const {
  if (request.region_mask && request.region_mask->size() != data::kNumRegions) {
    throw ValidationError("region_mask must have 29 entries, got " + std::to_string(request.region_mask->size()));
  }
  if (request.backend == Backend::remote && !remote_) throw ConfigError("remote backend is not configured");

  GenerateResult r;
  r.sample_id = sample.sample_id;
  r.ablation = request.ablation;
  r.backend = request.backend;
  r.sentences = sentences(sample);
  r.flags = flags(sample);

  std::vector<bool> available(data::kNumRegions, true);
  if (request.region_mask) {
    for (std::size_t i = 0; i < data::kNumRegions; ++i) {
      const bool on = (*request.region_mask)[i];
      available[i] = on;
      r.flags.regions[i].selected = on;
      if (!on) r.flags.regions[i].abnormal = false;
    }
  }
  r.conversion = prompts::convert_prompts(r.flags, regions_, templates_);

  llm::AssemblyInput in;
  in.sentences = r.sentences.texts();
  in.selected = r.conversion.selected;
  in.available = available;
  in.anatomy = r.conversion.prompts;
  in.context = request.context ? *request.context : sample.clinical_context;
  r.document = llm::assemble_prompt(in, request.ablation.prompt_mask(), regions_);

  if (request.backend == Backend::mock) {
    r.report = mock_.generate(r.document);
  } else {
    r.report = llm::parse_report(remote_->complete(r.document), regions_);
  }

  if (!sample.reference_report.empty()) {
    SampleMetrics m;
    const std::string findings = report_findings(r.report);
    m.nlg = metrics::score_corpus({findings}, {sample.reference_report});
    const auto& labeler = metrics::LabelExtractor::builtin();
    m.predicted = labeler.extract(findings);
    m.reference = labeler.extract(sample.reference_report);
    r.metrics = m;
  }
  return r;
}

}  // namespace cxr::service
