#include "cxr/data/dataset.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <fstream>
#include <map>
#include <set>

#include "cxr/data/layout.hpp"
#include "cxr/error.hpp"
#include "cxr/nn/tensor.hpp"

namespace cxr::data {

namespace {

// Number type pinned to float so features print with float32 round-trip digits.
using RecordJson = nlohmann::basic_json<std::map, std::vector, std::string, bool, std::int64_t,
                                        std::uint64_t, float>;

}  // namespace

const RegionRecord& Sample::region(std::size_t region_id) const {
  for (const auto& r : regions) {
    if (r.region_id == region_id) return r;
  }
  throw ValidationError("sample " + sample_id + " has no region " + std::to_string(region_id));
}

std::string to_string(SplitName s) {
  switch (s) {
    case SplitName::train: return "train";
    case SplitName::validation: return "validation";
    case SplitName::test: return "test";
  }
  return "train";
}

SplitName split_from_string(const std::string& s) {
  if (s == "train") return SplitName::train;
  if (s == "validation" || s == "val") return SplitName::validation;
  if (s == "test") return SplitName::test;
  throw ValidationError("unknown split '" + s + "'");
}

const Sample* DatasetSplit::find(const std::string& sample_id) const {
  for (const auto& s : samples) {
    if (s.sample_id == sample_id) return &s;
  }
  return nullptr;
}

void validate_sample(const Sample& sample, const RegionVocabulary& regions) {
  if (sample.sample_id.empty()) throw ValidationError("empty sample_id");
  if (sample.regions.size() != kNumRegions) {
    throw ValidationError("sample " + sample.sample_id + " has " + std::to_string(sample.regions.size()) +
                          " regions, expected " + std::to_string(kNumRegions));
  }
  std::vector<bool> seen(kNumRegions, false);
  for (const auto& r : sample.regions) {
    if (r.region_id >= kNumRegions || seen[r.region_id]) {
      throw ValidationError("sample " + sample.sample_id + ": region ids must be a permutation of 0..28 (bad id " +
                            std::to_string(r.region_id) + ")");
    }
    seen[r.region_id] = true;
    if (r.region_name != regions.name(r.region_id)) {
      throw ValidationError("sample " + sample.sample_id + ": region " + std::to_string(r.region_id) + " is named '" +
                            r.region_name + "', vocabulary says '" + regions.name(r.region_id) + "'");
    }
    if (r.projected && r.feature.size() != kFeatureDim) {
      throw ValidationError("sample " + sample.sample_id + ", region '" + r.region_name + "': projected feature has " +
                            std::to_string(r.feature.size()) + " dims, expected " + std::to_string(kFeatureDim));
    }
    if (r.feature.empty()) throw ValidationError("region '" + r.region_name + "' has an empty feature");
    for (float f : r.feature) {
      if (!std::isfinite(f)) throw NonFiniteError("region '" + r.region_name + "' feature has non-finite values");
    }
    if (r.box && !r.box->valid()) {
      throw ValidationError("region '" + r.region_name + "' box must satisfy x1<x2 and y1<y2");
    }
    if (r.has_sentence != r.gold_sentence.has_value()) {
      throw ValidationError("region '" + r.region_name + "': has_sentence disagrees with gold_sentence presence");
    }
  }
}

std::string serialize_sample(const Sample& s, SplitName split) {
  RecordJson regions = RecordJson::array();
  for (const auto& r : s.regions) {
    RecordJson jr = {{"region_id", r.region_id},
                     {"region_name", r.region_name},
                     {"feature", r.feature},
                     {"projected", r.projected},
                     {"has_sentence", r.has_sentence},
                     {"is_abnormal", r.is_abnormal}};
    jr["box"] = r.box ? RecordJson{r.box->x1, r.box->y1, r.box->x2, r.box->y2}
                      : RecordJson(nullptr);
    jr["gold_sentence"] = r.gold_sentence ? RecordJson(*r.gold_sentence) : RecordJson(nullptr);
    regions.push_back(std::move(jr));
  }
  RecordJson j = {{"split", to_string(split)},
                  {"sample_id", s.sample_id},
                  {"clinical_context",
                   {{"history", s.clinical_context.history},
                    {"indication", s.clinical_context.indication},
                    {"reason_for_exam", s.clinical_context.reason_for_exam}}},
                  {"reference_report", s.reference_report},
                  {"regions", std::move(regions)}};
  return j.dump();
}

void save_dataset(const std::filesystem::path& path, const DatasetSplit& split) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  for (const auto& s : split.samples) out << serialize_sample(s, split.name) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

namespace {

Sample parse_sample(const RecordJson& j) {
  Sample s;
  s.sample_id = j.at("sample_id").get<std::string>();
  const auto& ctx = j.at("clinical_context");
  s.clinical_context = {ctx.value("history", std::string{}), ctx.value("indication", std::string{}),
                        ctx.value("reason_for_exam", std::string{})};
  s.reference_report = j.value("reference_report", std::string{});
  for (const auto& jr : j.at("regions")) {
    RegionRecord r;
    const auto id = jr.at("region_id").get<std::int64_t>();
    if (id < 0) throw ValidationError("negative region_id");
    r.region_id = static_cast<std::size_t>(id);
    r.region_name = jr.at("region_name").get<std::string>();
    r.feature = jr.at("feature").get<std::vector<float>>();
    r.projected = jr.value("projected", true);
    if (jr.contains("box") && !jr.at("box").is_null()) {
      const auto& b = jr.at("box");
      if (b.size() != 4) throw ValidationError("box must have four coordinates");
      r.box = Box{b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()};
    }
    if (jr.contains("gold_sentence") && !jr.at("gold_sentence").is_null()) {
      r.gold_sentence = jr.at("gold_sentence").get<std::string>();
    }
    r.has_sentence = jr.at("has_sentence").get<bool>();
    r.is_abnormal = jr.at("is_abnormal").get<bool>();
    s.regions.push_back(std::move(r));
  }
  return s;
}

}  // namespace

DatasetSplit load_dataset(const std::filesystem::path& path, const RegionVocabulary& regions,
                          SplitName fallback_name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open dataset " + path.string());
  DatasetSplit split{fallback_name, {}};
  std::optional<SplitName> declared;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = RecordJson::parse(line);
      const SplitName name = split_from_string(j.value("split", to_string(fallback_name)));
      if (declared && *declared != name) throw ValidationError("records from several splits in one file");
      declared = name;
      Sample s = parse_sample(j);
      validate_sample(s, regions);
      if (!ids.insert(s.sample_id).second) throw ValidationError("duplicate sample_id '" + s.sample_id + "'");
      split.samples.push_back(std::move(s));
    } catch (const ParseError&) {
      throw;
    } catch (const RecordJson::exception& e) {
      throw ParseError(line_no, std::string("malformed record: ") + e.what());
    } catch (const ValidationError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  if (declared) split.name = *declared;
  return split;
}

void check_disjoint(const std::vector<const DatasetSplit*>& splits) {
  std::map<std::string, std::string> owner;
  for (const auto* split : splits) {
    for (const auto& s : split->samples) {
      auto [it, inserted] = owner.emplace(s.sample_id, to_string(split->name));
      if (!inserted) {
        throw ValidationError("sample_id '" + s.sample_id + "' appears in both " + it->second + " and " +
                              to_string(split->name));
      }
    }
  }
}

// ---- synthetic corpus ------------------------------------------------------

namespace {

enum class Family { lung, hilar, pleural, mediastinal, cardiac, bony, abdomen };

Family family_of(const std::string& region) {
  auto has = [&](const char* s) { return region.find(s) != std::string::npos; };
  if (has("hilar")) return Family::hilar;
  if (has("costophrenic") || has("hemidiaphragm")) return Family::pleural;
  if (has("lung") || has("apical")) return Family::lung;
  if (has("cardiac") || has("atri") || has("cavoatrial")) return Family::cardiac;
  if (has("spine") || has("clavicle")) return Family::bony;
  if (has("abdomen")) return Family::abdomen;
  return Family::mediastinal;
}

struct FamilyTemplates {
  std::vector<std::string> normal;
  std::vector<std::string> abnormal;
};

const std::map<Family, FamilyTemplates>& template_table() {
  static const std::map<Family, FamilyTemplates> table = {
      {Family::lung,
       {{"The {region} is clear.", "No focal consolidation in the {region}.",
         "The {region} is well expanded and clear."},
        {"There is consolidation in the {region}.", "Patchy opacity is seen in the {region}, concerning for pneumonia.",
         "Mild pulmonary edema involves the {region}.", "Subsegmental atelectasis is present in the {region}."}}},
      {Family::hilar,
       {{"The {region} are within normal limits.", "No abnormality of the {region}.",
         "The {region} are unremarkable."},
        {"There is enlargement of the {region}.", "The {region} are prominent, suggesting vascular congestion.",
         "A lung lesion projects over the {region}."}}},
      {Family::pleural,
       {{"No pleural effusion at the {region}.", "The {region} is sharp.", "The {region} is unremarkable."},
        {"Small pleural effusion blunts the {region}.", "There is a moderate pleural effusion at the {region}.",
         "Pleural thickening is noted at the {region}."}}},
      {Family::mediastinal,
       {{"The {region} is within normal limits.", "The {region} is unremarkable.",
         "The {region} is midline and normal in contour."},
        {"The {region} is widened, suggesting enlarged cardiomediastinum.",
         "There is calcification of the {region}.", "An endotracheal tube terminates near the {region}."}}},
      {Family::cardiac,
       {{"The {region} is normal in size.", "The {region} is unremarkable.", "No enlargement of the {region}."},
        {"The {region} is enlarged, consistent with cardiomegaly.",
         "There is moderate cardiomegaly involving the {region}.", "A pacemaker lead projects over the {region}."}}},
      {Family::bony,
       {{"The {region} is intact.", "No acute fracture of the {region}.", "The {region} is unremarkable."},
        {"There is an acute fracture of the {region}.", "Degenerative changes are seen in the {region}.",
         "A healed fracture deformity of the {region} is noted."}}},
      {Family::abdomen,
       {{"The {region} is unremarkable.", "No free air in the {region}.", "The visualized {region} is normal."},
        {"There is free air under the diaphragm in the {region}.", "Dilated bowel loops are seen in the {region}.",
         "A feeding tube terminates in the {region}."}}},
  };
  return table;
}

const std::vector<ClinicalContext>& context_pool() {
  static const std::vector<ClinicalContext> pool = {
      {"", "Cough and shortness of breath.", "Evaluate for pneumonia."},
      {"History of congestive heart failure.", "Worsening dyspnea.", "Assess for pulmonary edema."},
      {"Status post fall.", "Chest wall pain.", "Evaluate for rib fracture."},
      {"Recent intubation.", "Line placement.", "Confirm tube position."},
      {"Smoker with chronic cough.", "Weight loss.", "Evaluate for lung lesion."},
      {"Fever.", "Leukocytosis.", "Rule out infection."},
      {"", "Pre-operative evaluation.", "Routine preoperative chest radiograph."},
  };
  return pool;
}

constexpr std::size_t kMaxVariants = 4;
constexpr std::uint64_t kGeometrySeed = 0x5eedc0deULL;
constexpr double kSignalNorm = 2.0;

// Fixed feature-space geometry shared by every split and seed.
struct Geometry {
  Eigen::VectorXd sentence_dir;
  Eigen::VectorXd abnormal_dir;
  std::array<std::vector<Eigen::VectorXd>, 2> variant_dirs;  // [normal, abnormal][variant]
  std::vector<Eigen::VectorXd> region_basis;
};

Eigen::VectorXd random_unit(nn::Rng& rng) {
  Eigen::VectorXd v(kFeatureDim);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
  return v.normalized();
}

void remove_projection(Eigen::VectorXd& v, const std::vector<const Eigen::VectorXd*>& basis) {
  for (const auto* b : basis) v -= v.dot(*b) * *b;
}

const Geometry& geometry() {
  static const Geometry g = [] {
    nn::Rng rng(kGeometrySeed);
    Geometry g;
    std::vector<const Eigen::VectorXd*> taken;
    auto orthogonal_unit = [&](Eigen::VectorXd& out) {
      out = random_unit(rng);
      remove_projection(out, taken);
      out.normalize();
      taken.push_back(&out);
    };
    orthogonal_unit(g.sentence_dir);
    orthogonal_unit(g.abnormal_dir);
    for (auto& dirs : g.variant_dirs) {
      dirs.resize(kMaxVariants);
      for (auto& d : dirs) orthogonal_unit(d);
    }
    // Region bases only need to avoid the two state directions; they stay
    // nearly orthogonal to each other by dimension.
    g.region_basis.resize(kNumRegions);
    for (auto& b : g.region_basis) {
      b = random_unit(rng);
      remove_projection(b, {&g.sentence_dir, &g.abnormal_dir});
      b = b.normalized() * kSignalNorm;
    }
    g.sentence_dir *= kSignalNorm;
    g.abnormal_dir *= kSignalNorm;
    for (auto& dirs : g.variant_dirs) {
      for (auto& d : dirs) d *= kSignalNorm;
    }
    return g;
  }();
  return g;
}

}  // namespace

const std::vector<std::string>& normal_templates(const std::string& region_name) {
  return template_table().at(family_of(region_name)).normal;
}

const std::vector<std::string>& abnormal_templates(const std::string& region_name) {
  return template_table().at(family_of(region_name)).abnormal;
}

std::string fill_template(const std::string& tmpl, const std::string& region_name) {
  std::string out = tmpl;
  const std::string key = "{region}";
  for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + region_name.size())) {
    out.replace(pos, key.size(), region_name);
  }
  return out;
}

DatasetSplit generate_synthetic(std::size_t n, std::uint64_t seed, double abnormal_rate, double silent_rate,
                                const SyntheticOptions& options, const RegionVocabulary& regions) {
  if (n < 1) throw ValidationError("generate_synthetic: n must be at least 1");
  if (!(abnormal_rate >= 0.0 && abnormal_rate <= 1.0) || !(silent_rate >= 0.0 && silent_rate <= 1.0)) {
    throw ValidationError("generate_synthetic: rates must lie in [0, 1]");
  }
  if (!(options.noise_sigma >= 0.0)) throw ValidationError("generate_synthetic: noise sigma must be >= 0");

  const Geometry& geo = geometry();
  const AnatomicalLayout& layout = AnatomicalLayout::builtin();
  std::string prefix = options.id_prefix;
  if (prefix.empty()) {
    prefix = options.split == SplitName::train ? "S" : options.split == SplitName::validation ? "V" : "T";
  }

  nn::Rng rng(seed);
  DatasetSplit split{options.split, {}};
  split.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.sample_id = prefix + std::to_string(i + 1);
    s.clinical_context = context_pool()[rng.below(context_pool().size())];
    std::string report;
    bool any_abnormal = false;
    for (std::size_t r = 0; r < kNumRegions; ++r) {
      RegionRecord rec;
      rec.region_id = r;
      rec.region_name = regions.name(r);
      rec.projected = true;
      RegionState state = RegionState::normal;
      if (rng.uniform() < abnormal_rate) {
        state = RegionState::abnormal;
      } else if (rng.uniform() < silent_rate) {
        state = RegionState::silent;
      }
      Eigen::VectorXd feature = geo.region_basis[r];
      if (state != RegionState::silent) {
        const bool abnormal = state == RegionState::abnormal;
        const auto& templates = abnormal ? abnormal_templates(rec.region_name) : normal_templates(rec.region_name);
        const std::size_t variant = rng.below(templates.size());
        feature += geo.sentence_dir + geo.variant_dirs[abnormal ? 1 : 0][variant];
        if (abnormal) feature += geo.abnormal_dir;
        rec.gold_sentence = fill_template(templates[variant], rec.region_name);
        rec.has_sentence = true;
        rec.is_abnormal = abnormal;
        any_abnormal = any_abnormal || abnormal;
        if (!report.empty()) report += ' ';
        report += *rec.gold_sentence;
      }
      rec.feature.resize(kFeatureDim);
      for (std::size_t d = 0; d < kFeatureDim; ++d) {
        rec.feature[d] = static_cast<float>(feature(static_cast<Eigen::Index>(d)) + options.noise_sigma * rng.normal());
      }
      const Box px = layout.pixels(r, options.image_size);
      rec.box = Box{static_cast<float>(px.x1), static_cast<float>(px.y1), static_cast<float>(px.x2),
                    static_cast<float>(px.y2)};
      s.regions.push_back(std::move(rec));
    }
    if (!any_abnormal) {
      if (!report.empty()) report += ' ';
      report += "No acute cardiopulmonary process.";
    }
    s.reference_report = std::move(report);
    split.samples.push_back(std::move(s));
  }
  return split;
}

}  // namespace cxr::data
