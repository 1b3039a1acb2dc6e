#include "cxr/llm/backend.hpp"

#include <map>
#include <set>

namespace cxr::llm {

std::string deduplicate_sentences(const std::string& text) {
  std::vector<std::string> kept;
  std::set<std::string> seen;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = start;
    while (end < text.size()) {
      const char c = text[end];
      if ((c == '.' || c == '!' || c == '?') && (end + 1 == text.size() || text[end + 1] == ' ')) break;
      ++end;
    }
    std::string sentence = text.substr(start, std::min(end + 1, text.size()) - start);
    while (!sentence.empty() && sentence.front() == ' ') sentence.erase(sentence.begin());
    if (!sentence.empty() && seen.insert(sentence).second) kept.push_back(sentence);
    start = end + 1;
  }
  std::string out;
  for (const auto& s : kept) out += (out.empty() ? "" : " ") + s;
  return out;
}

StructuredReport MockLlm::generate(const PromptDocument& doc) const {
  std::map<std::size_t, std::string> sentences;
  if (const auto* s = doc.find(kSentencesHeader)) {
    for (const auto& line : s->lines) {
      if (line.rfind("- ", 0) != 0) continue;
      const auto colon = line.find(": ");
      if (colon == std::string::npos) continue;
      if (auto r = regions_.index_of(line.substr(2, colon - 2))) sentences[*r] = line.substr(colon + 2);
    }
  }

  std::set<std::size_t> located;
  std::map<std::size_t, bool> abnormality;  // region -> abnormal per P2
  bool has_location_prompts = false;
  if (const auto* s = doc.find(kAnatomyHeader)) {
    for (const auto& line : s->lines) {
      for (std::size_t r = 0; r < regions_.size(); ++r) {
        const auto& name = regions_.name(r);
        if (line == templates_.render_location(name)) {
          located.insert(r);
          has_location_prompts = true;
        } else if (line == templates_.render_abnormal(name)) {
          abnormality[r] = true;
        } else if (line == templates_.render_normal(name)) {
          abnormality.emplace(r, false);
        }
      }
    }
  }

  std::set<std::size_t> chosen;
  if (has_location_prompts) {
    chosen = located;
  } else {
    for (const auto& [r, _] : sentences) chosen.insert(r);
  }

  StructuredReport report;
  for (std::size_t r : chosen) {
    const auto& name = regions_.name(r);
    const bool abnormal = abnormality.count(r) ? abnormality.at(r) : false;
    std::string text = sentences.count(r) ? deduplicate_sentences(sentences.at(r)) : std::string{};
    if (text.empty()) text = abnormal ? templates_.render_abnormal(name) : templates_.render_normal(name);
    report.sections.push_back({name, std::move(text), abnormal});
  }
  if (const auto* s = doc.find(kContextHeader)) {
    std::string summary;
    for (const auto& l : s->lines) {
      std::string line = l;
      if (!line.empty() && line.back() != '.' && line.back() != '?' && line.back() != '!') line += '.';
      summary += (summary.empty() ? "" : " ") + line;
    }
    if (!summary.empty()) report.context_summary = summary;
  }
  report.raw_text = render_report(report);
  return report;
}

}  // namespace cxr::llm
