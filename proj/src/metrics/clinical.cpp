#include "cxr/metrics/clinical.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>

#include "cxr/data/regions.hpp"
#include "cxr/data/tokenizer.hpp"
#include "cxr/error.hpp"

namespace cxr::metrics {

const std::array<std::string_view, kNumDiseaseLabels> kDiseaseLabels = {
    "Atelectasis",     "Cardiomegaly", "Consolidation",   "Edema",        "Enlarged Cardiomediastinum",
    "Fracture",        "Lung Lesion",  "Lung Opacity",    "Pleural Effusion", "Pleural Other",
    "Pneumonia",       "Pneumothorax", "Support Devices", "No Finding"};

std::string_view to_string(Mention m) {
  switch (m) {
    case Mention::positive: return "positive";
    case Mention::negative: return "negative";
    default: return "unmentioned";
  }
}

namespace {

using Tokens = std::vector<std::string>;

// First start index of phrase within [begin, end), or npos.
std::size_t find_phrase(const Tokens& t, std::size_t begin, std::size_t end, const Tokens& phrase) {
  if (phrase.empty() || end - begin < phrase.size()) return std::string::npos;
  for (std::size_t i = begin; i + phrase.size() <= end; ++i) {
    bool hit = true;
    for (std::size_t k = 0; k < phrase.size() && hit; ++k) hit = t[i + k] == phrase[k];
    if (hit) return i;
  }
  return std::string::npos;
}

bool is_boundary(const std::string& tok) { return tok == "." || tok == "!" || tok == "?" || tok == ";"; }

}  // namespace

LabelExtractor LabelExtractor::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open keyword table " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("keyword table " + path.string() + ": " + e.what());
  }
  LabelExtractor x;
  try {
    x.version_ = j.at("version").get<std::string>();
    for (const auto& c : j.at("negation_cues")) x.negation_cues_.push_back(data::tokenize(c.get<std::string>()));
    for (const auto& c : j.at("normality_phrases")) x.normality_.push_back(data::tokenize(c.get<std::string>()));
    const auto& labels = j.at("labels");
    for (std::size_t i = 0; i + 1 < kNumDiseaseLabels; ++i) {
      const std::string name(kDiseaseLabels[i]);
      if (!labels.contains(name)) throw ConfigError("keyword table lacks label " + name);
      for (const auto& p : labels.at(name)) x.keywords_[i].push_back(data::tokenize(p.get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("keyword table " + path.string() + ": " + e.what());
  }
  return x;
}

LabelExtractor LabelExtractor::builtin() {
  static const LabelExtractor x = load(data::default_data_dir() / "chexpert_keywords.json");
  return x;
}

DiseaseLabelSet LabelExtractor::extract(std::string_view text) const {
  DiseaseLabelSet out;
  const Tokens t = data::tokenize(text);
  bool normal_phrase = false;
  std::size_t begin = 0;
  while (begin < t.size()) {
    std::size_t end = begin;
    while (end < t.size() && !is_boundary(t[end])) ++end;

    std::size_t first_cue = std::string::npos;
    for (const auto& cue : negation_cues_) first_cue = std::min(first_cue, find_phrase(t, begin, end, cue));
    for (const auto& p : normality_) normal_phrase = normal_phrase || find_phrase(t, begin, end, p) != std::string::npos;

    for (std::size_t label = 0; label < keywords_.size(); ++label) {
      for (const auto& kw : keywords_[label]) {
        const std::size_t at = find_phrase(t, begin, end, kw);
        if (at == std::string::npos) continue;
        const Mention m = first_cue < at ? Mention::negative : Mention::positive;
        // positive anywhere in the report wins over a negation elsewhere
        if (m == Mention::positive || out.labels[label] == Mention::unmentioned) out.labels[label] = m;
      }
    }
    begin = end + 1;
  }
  bool any_positive = false;
  for (std::size_t i = 0; i < kNoFinding; ++i) any_positive = any_positive || out.positive(i);
  if (!any_positive && normal_phrase) out.labels[kNoFinding] = Mention::positive;
  else if (any_positive) out.labels[kNoFinding] = Mention::negative;
  return out;
}

CeScores ce_scores(const std::vector<DiseaseLabelSet>& predicted, const std::vector<DiseaseLabelSet>& gold) {
  if (predicted.empty()) throw ValidationError("ce_scores: empty corpus");
  if (predicted.size() != gold.size()) throw DimensionError("ce_scores: predicted/gold report count mismatch");
  CeScores s;
  for (std::size_t r = 0; r < predicted.size(); ++r) {
    for (std::size_t i = 0; i < kNumDiseaseLabels; ++i) s.per_label[i].add(predicted[r].positive(i), gold[r].positive(i));
  }
  for (const auto& c : s.per_label) s.counts += c;
  s.micro = score(s.counts);
  for (const auto& c : s.per_label) {
    if (c.tp + c.fp + c.fn == 0) continue;
    const auto pr = score(c);
    s.macro.precision += pr.precision;
    s.macro.recall += pr.recall;
    s.macro.f1 += pr.f1;
    ++s.macro_labels;
  }
  if (s.macro_labels > 0) {
    const auto n = static_cast<double>(s.macro_labels);
    s.macro.precision /= n;
    s.macro.recall /= n;
    s.macro.f1 /= n;
  } else {
    s.macro = s.micro;
  }
  return s;
}

}  // namespace cxr::metrics
