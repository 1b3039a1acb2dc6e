#include "cxr/prompts/anatomy_prompts.hpp"

#include <fstream>

#include <json.hpp>

#include "cxr/data/dataset.hpp"
#include "cxr/error.hpp"
#include "cxr/nn/loss.hpp"

namespace cxr::prompts {

// ---- ClassifierHead --------------------------------------------------------

ClassifierHead::ClassifierHead(const std::string& name, std::uint64_t seed) : name_(name) {
  nn::Rng rng(seed);
  layers_[0] = nn::Dense(name + ".fc0", kDims[0], kDims[1], nn::Activation::relu, rng);
  layers_[1] = nn::Dense(name + ".fc1", kDims[1], kDims[2], nn::Activation::relu, rng);
  layers_[2] = nn::Dense(name + ".fc2", kDims[2], kDims[3], nn::Activation::identity, rng);
}

Eigen::VectorXd ClassifierHead::logits(const nn::Tensor& x) const {
  nn::Tensor h = layers_[0].apply(x);
  h = layers_[1].apply(h);
  return layers_[2].apply(h).col(0);
}

Eigen::VectorXd ClassifierHead::forward(const nn::Tensor& x) {
  nn::Tensor h = layers_[0].forward(x);
  h = layers_[1].forward(h);
  return layers_[2].forward(h).col(0);
}

void ClassifierHead::backward(const Eigen::VectorXd& d_logits) {
  nn::Tensor d = d_logits;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) d = it->backward(d);
}

nn::ParameterList ClassifierHead::parameters() {
  nn::ParameterList out;
  for (auto& l : layers_) l.collect(out);
  return out;
}

std::vector<nn::TensorEntry> ClassifierHead::describe() const {
  std::vector<nn::TensorEntry> out;
  for (const auto& l : layers_) l.describe(out);
  return out;
}

// ---- flags -----------------------------------------------------------------

RegionFlags flags_from_probabilities(std::span<const double> p_sentence, std::span<const double> p_abnormal,
                                     double threshold) {
  if (p_sentence.size() != p_abnormal.size()) {
    throw DimensionError("flags: " + std::to_string(p_sentence.size()) + " sentence probabilities vs " +
                         std::to_string(p_abnormal.size()) + " abnormality probabilities");
  }
  RegionFlags flags;
  flags.threshold = threshold;
  for (std::size_t i = 0; i < p_sentence.size(); ++i) {
    flags.regions.push_back({p_sentence[i], p_abnormal[i], p_sentence[i] >= threshold, p_abnormal[i] >= threshold});
  }
  return flags;
}

RegionFlags classify_regions(const features::RegionFeatureSet& set, const ClassifierHead& sentence_head,
                             const ClassifierHead& abnormal_head, double threshold) {
  set.validate();
  const Eigen::VectorXd ls = sentence_head.logits(set.features);
  const Eigen::VectorXd la = abnormal_head.logits(set.features);
  std::vector<double> ps(static_cast<std::size_t>(ls.size()));
  std::vector<double> pa(static_cast<std::size_t>(la.size()));
  for (Eigen::Index i = 0; i < ls.size(); ++i) {
    ps[static_cast<std::size_t>(i)] = nn::sigmoid(ls(i));
    pa[static_cast<std::size_t>(i)] = nn::sigmoid(la(i));
  }
  return flags_from_probabilities(ps, pa, threshold);
}

DetectionLoss detection_loss(const Eigen::VectorXd& sentence_logits, const Eigen::VectorXd& abnormal_logits,
                             std::span<const int> has_sentence, std::span<const int> is_abnormal) {
  const auto n = static_cast<std::size_t>(sentence_logits.size());
  if (n == 0 || static_cast<std::size_t>(abnormal_logits.size()) != n || has_sentence.size() != n ||
      is_abnormal.size() != n) {
    throw DimensionError("detection_loss: logits and labels must be aligned and nonempty");
  }
  DetectionLoss out;
  out.d_sentence_logits.resize(static_cast<Eigen::Index>(n));
  out.d_abnormal_logits.resize(static_cast<Eigen::Index>(n));
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const auto s = nn::binary_cross_entropy(sentence_logits(k), has_sentence[i]);
    const auto a = nn::binary_cross_entropy(abnormal_logits(k), is_abnormal[i]);
    out.sentence += s.loss * inv;
    out.abnormal += a.loss * inv;
    out.d_sentence_logits(k) = s.grad * inv;
    out.d_abnormal_logits(k) = a.grad * inv;
  }
  return out;
}

// ---- prompt converter ------------------------------------------------------

PromptTemplates PromptTemplates::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open prompt templates " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    PromptTemplates t;
    t.location = j.at("location").get<std::string>();
    t.abnormal = j.at("abnormal").get<std::string>();
    t.normal = j.at("normal").get<std::string>();
    for (const auto* s : {&t.location, &t.abnormal, &t.normal}) {
      if (s->find("{region}") == std::string::npos) {
        throw ConfigError("prompt template '" + *s + "' lacks a {region} placeholder");
      }
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed prompt templates " + path.string() + ": " + e.what());
  }
}

const PromptTemplates& PromptTemplates::builtin() {
  static const PromptTemplates t = load(data::default_data_dir() / "prompt_templates.json");
  return t;
}

std::string PromptTemplates::render_location(const std::string& region) const {
  return data::fill_template(location, region);
}
std::string PromptTemplates::render_abnormal(const std::string& region) const {
  return data::fill_template(abnormal, region);
}
std::string PromptTemplates::render_normal(const std::string& region) const {
  return data::fill_template(normal, region);
}

PromptConversion convert_prompts(const RegionFlags& flags, const data::RegionVocabulary& regions,
                                 const PromptTemplates& templates) {
  if (flags.regions.size() > regions.size()) {
    throw ValidationError("convert_prompts: flag for region " + std::to_string(regions.size()) +
                          " has no name in the region vocabulary");
  }
  PromptConversion out;
  out.selected.assign(flags.regions.size(), false);
  out.abnormal.assign(flags.regions.size(), false);
  for (std::size_t r = 0; r < flags.regions.size(); ++r) {
    const RegionFlag& f = flags.regions[r];
    bool selected = f.selected;
    if (f.abnormal && !selected) {
      selected = true;
      out.coerced.push_back(r);
    }
    out.selected[r] = selected;
    out.abnormal[r] = f.abnormal;
  }
  for (std::size_t r = 0; r < flags.regions.size(); ++r) {
    if (out.selected[r]) out.prompts.location.push_back(templates.render_location(regions.name(r)));
  }
  for (std::size_t r = 0; r < flags.regions.size(); ++r) {
    if (!out.selected[r]) continue;
    out.prompts.abnormality.push_back(out.abnormal[r] ? templates.render_abnormal(regions.name(r))
                                                      : templates.render_normal(regions.name(r)));
  }
  return out;
}

// ---- detection evaluation --------------------------------------------------

DetectionEvaluation eval_detection(const std::vector<RegionFlags>& predicted,
                                   const std::vector<std::vector<RegionLabel>>& gold) {
  if (predicted.empty()) throw ValidationError("eval_detection: empty input");
  if (predicted.size() != gold.size()) {
    throw DimensionError("eval_detection: " + std::to_string(predicted.size()) + " predictions vs " +
                         std::to_string(gold.size()) + " gold samples");
  }
  DetectionEvaluation ev;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i].regions.size() != gold[i].size()) {
      throw DimensionError("eval_detection: sample " + std::to_string(i) + " region counts differ");
    }
    for (std::size_t r = 0; r < gold[i].size(); ++r) {
      const auto& p = predicted[i].regions[r];
      const auto& g = gold[i][r];
      ev.sentence.all.counts.add(p.selected, g.has_sentence);
      ev.abnormality.all.counts.add(p.abnormal, g.is_abnormal);
      auto& s_group = g.is_abnormal ? ev.sentence.abnormal_gold : ev.sentence.normal_gold;
      auto& a_group = g.is_abnormal ? ev.abnormality.abnormal_gold : ev.abnormality.normal_gold;
      s_group.counts.add(p.selected, g.has_sentence);
      a_group.counts.add(p.abnormal, g.is_abnormal);
    }
  }
  for (TaskScores* t : {&ev.sentence, &ev.abnormality}) {
    for (GroupScores* g : {&t->all, &t->abnormal_gold, &t->normal_gold}) g->scores = metrics::score(g->counts);
  }
  return ev;
}

}  // namespace cxr::prompts
