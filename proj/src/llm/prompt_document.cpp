#include "cxr/llm/prompt_document.hpp"

#include "cxr/error.hpp"

namespace cxr::llm {

std::string PromptDocument::text() const {
  std::string out;
  for (const auto& s : sections) {
    if (!out.empty()) out += '\n';
    out += s.header + '\n';
    for (const auto& l : s.lines) out += l + '\n';
  }
  return out;
}

const PromptSection* PromptDocument::find(const std::string& header) const {
  for (const auto& s : sections) {
    if (s.header == header) return &s;
  }
  return nullptr;
}

std::string PromptDocument::instruction_text() const {
  const PromptSection* s = find(kInstructionHeader);
  if (!s) return {};
  std::string out;
  for (const auto& l : s->lines) {
    if (!out.empty()) out += '\n';
    out += l;
  }
  return out;
}

std::string PromptDocument::body_text() const {
  PromptDocument rest;
  for (const auto& s : sections) {
    if (s.header != kInstructionHeader) rest.sections.push_back(s);
  }
  return rest.text();
}

std::vector<std::string> context_lines(const data::ClinicalContext& c) {
  std::vector<std::string> lines;
  if (!c.history.empty()) lines.push_back("History: " + c.history);
  if (!c.indication.empty()) lines.push_back("Indication: " + c.indication);
  if (!c.reason_for_exam.empty()) lines.push_back("Reason for examination: " + c.reason_for_exam);
  return lines;
}

PromptDocument assemble_prompt(const AssemblyInput& in, const PromptMask& mask,
                               const data::RegionVocabulary& regions) {
  if (in.sentences.size() != regions.size()) {
    throw ValidationError("assemble_prompt: expected " + std::to_string(regions.size()) + " region sentences, got " +
                          std::to_string(in.sentences.size()));
  }
  if (in.selected.size() != regions.size()) {
    throw ValidationError("assemble_prompt: selection mask must cover all 29 regions");
  }
  if (!in.available.empty() && in.available.size() != regions.size()) {
    throw ValidationError("assemble_prompt: region mask must have 29 entries");
  }
  PromptDocument doc;
  doc.mask = mask;
  auto add = [&](const std::string& header, std::vector<std::string> lines) {
    if (!lines.empty()) doc.sections.push_back({header, std::move(lines)});
  };

  if (mask.instruction && !in.instruction.empty()) add(kInstructionHeader, {in.instruction});

  std::vector<std::string> sentence_lines;
  for (std::size_t r = 0; r < regions.size(); ++r) {
    const bool available = in.available.empty() || in.available[r];
    const bool wanted = mask.location ? in.selected[r] : true;
    if (available && wanted && !in.sentences[r].empty()) {
      sentence_lines.push_back("- " + regions.name(r) + ": " + in.sentences[r]);
    }
  }
  add(kSentencesHeader, std::move(sentence_lines));

  std::vector<std::string> anatomy;
  if (mask.location) anatomy.insert(anatomy.end(), in.anatomy.location.begin(), in.anatomy.location.end());
  if (mask.abnormality) {
    anatomy.insert(anatomy.end(), in.anatomy.abnormality.begin(), in.anatomy.abnormality.end());
  }
  add(kAnatomyHeader, std::move(anatomy));

  if (mask.context) add(kContextHeader, context_lines(in.context));
  return doc;
}

}  // namespace cxr::llm
