#pragma once

#include <chrono>
#include <memory>
#include <semaphore>
#include <string>

#include "cxr/llm/prompt_document.hpp"
#include "cxr/llm/report.hpp"

namespace cxr::llm {

// Rule-based offline stand-in for the report-writing LLM. It reads only the
// rendered prompt sections: keeps one finding per region named in the
// location prompts (every region with a sentence when those are absent),
// removes verbatim repeated sentences, orders by region index, marks regions
// the abnormality prompts call abnormal and prepends the clinical context.
class MockLlm {
 public:
  explicit MockLlm(const data::RegionVocabulary& regions = data::RegionVocabulary::builtin(),
                   const prompts::PromptTemplates& templates = prompts::PromptTemplates::builtin())
      : regions_(regions), templates_(templates) {}

  StructuredReport generate(const PromptDocument& doc) const;

 private:
  const data::RegionVocabulary& regions_;
  const prompts::PromptTemplates& templates_;
};

// Splits text into sentences at ". ", "! ", "? " and drops verbatim repeats.
std::string deduplicate_sentences(const std::string& text);

inline constexpr const char* kApiKeyEnv = "ANAT_LLM_API_KEY";

// Appended to the system message so replies come back as region headings.
inline const std::string kFormatHint =
    "Write one line per anatomical region in the form '<region name>: <finding>'. "
    "Append ' [abnormal]' after the region name for abnormal regions. "
    "Put any clinical context summary on a first line starting with 'Clinical context:'.";

struct RemoteConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4";
  std::chrono::milliseconds timeout{60000};
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};  // doubled after every failed attempt
  int max_in_flight = 4;
};

// Chat-completion client: one request per document (system = instruction +
// format hint, user = remaining sections), temperature 0. Transient failures
// (connection errors, timeouts, 429, 5xx) are retried with exponential backoff.
class RemoteLlm {
 public:
  explicit RemoteLlm(RemoteConfig config);

  // Throws ConfigError when ANAT_LLM_API_KEY is unset (before any network
  // traffic), TimeoutError or TransportError once retries are exhausted.
  std::string complete(const PromptDocument& doc) const;

  // JSON body that `complete` posts.
  std::string request_body(const PromptDocument& doc) const;
  const RemoteConfig& config() const { return config_; }

 private:
  RemoteConfig config_;
  std::string base_url_;
  std::string path_;
  std::unique_ptr<std::counting_semaphore<>> in_flight_;
};

std::string remote_llm(const PromptDocument& doc, const std::string& endpoint, const std::string& model,
                       std::chrono::milliseconds timeout);

}  // namespace cxr::llm
