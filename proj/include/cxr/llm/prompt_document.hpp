#pragma once

#include <span>
#include <string>
#include <vector>

#include "cxr/data/dataset.hpp"
#include "cxr/prompts/anatomy_prompts.hpp"

namespace cxr::llm {

inline const std::string kDefaultInstruction =
    "Generate a structured report based on the anatomical and clinical details.";

inline const std::string kInstructionHeader = "## Instruction";
inline const std::string kSentencesHeader = "## Region sentences";
inline const std::string kAnatomyHeader = "## Anatomy prompts";
inline const std::string kContextHeader = "## Clinical context";

// Which prompt inputs reach the model (instruction C, location P1,
// abnormality P2, clinical context P3). Region sentences are always sent.
struct PromptMask {
  bool instruction = true;
  bool location = true;
  bool abnormality = true;
  bool context = true;
  bool operator==(const PromptMask&) const = default;
};

struct PromptSection {
  std::string header;
  std::vector<std::string> lines;
  bool operator==(const PromptSection&) const = default;
};

// Sections in fixed order; a section is absent when masked or empty.
struct PromptDocument {
  std::vector<PromptSection> sections;
  PromptMask mask;

  std::string text() const;
  const PromptSection* find(const std::string& header) const;
  std::string instruction_text() const;  // the C lines, empty when absent
  std::string body_text() const;         // every section except the instruction
};

struct AssemblyInput {
  std::string instruction = kDefaultInstruction;
  std::vector<std::string> sentences;        // 29 region sentences, region-id order
  std::vector<bool> selected;                // post-coercion P1 selection
  std::vector<bool> available;               // physician region mask; empty = all available
  prompts::AnatomyPromptSet anatomy;         // P1 and P2 lines
  data::ClinicalContext context;             // P3
};

// Region sentence lines read "- {region}: {sentence}". With the location
// prompts active only selected regions contribute sentences; without them the
// model sees every available region's sentence.
PromptDocument assemble_prompt(const AssemblyInput& input, const PromptMask& mask,
                               const data::RegionVocabulary& regions = data::RegionVocabulary::builtin());

std::vector<std::string> context_lines(const data::ClinicalContext& context);

}  // namespace cxr::llm
