#include "cxr/service/evaluation.hpp"

#include <cstdio>

#include "cxr/data/tokenizer.hpp"
#include "cxr/decoder/sentence_decoder.hpp"
#include "cxr/error.hpp"

namespace cxr::service {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

std::size_t sample_count(const data::DatasetSplit& split, std::size_t limit) {
  return limit == 0 ? split.samples.size() : std::min(limit, split.samples.size());
}

}  // namespace

nlohmann::json nlg_json(const metrics::NlgScores& s) {
  return {{"bleu1", s.bleu1}, {"bleu2", s.bleu2}, {"bleu3", s.bleu3}, {"bleu4", s.bleu4},
          {"meteor", s.meteor}, {"rouge_l", s.rouge_l}};
}

nlohmann::json pr_json(const metrics::PrecisionRecall& s) {
  return {{"f1", s.f1}, {"precision", s.precision}, {"recall", s.recall}};
}

CorpusEvaluation evaluate_corpus(const Pipeline& pipeline, const data::DatasetSplit& split, const EvalOptions& options) {
  const std::size_t n = sample_count(split, options.limit);
  if (n == 0) throw ValidationError("evaluate: split is empty");
  const auto& regions = pipeline.regions();
  const auto& labeler = metrics::LabelExtractor::builtin();
  const auto& vocab = pipeline.model().vocab;
  const int max_len = pipeline.model().decoder->config().max_len;

  CorpusEvaluation ev;
  ev.samples = n;
  std::vector<std::string> candidates, references;
  std::vector<metrics::DiseaseLabelSet> pred_labels, gold_labels;
  std::vector<prompts::RegionFlags> flags;
  std::vector<std::vector<prompts::RegionLabel>> gold_flags;
  std::vector<std::vector<data::Box>> pred_boxes, gold_boxes;
  std::vector<double> meteor_sum(data::kNumRegions, 0.0);
  std::vector<std::size_t> meteor_n(data::kNumRegions, 0);
  std::size_t matched = 0, positions = 0;

  for (std::size_t i = 0; i < n; ++i) {
    const auto& sample = split.samples[i];
    GenerateRequest req;
    req.sample_id = sample.sample_id;
    req.ablation = options.ablation;
    const GenerateResult r = pipeline.generate(sample, req);
    const std::string findings = report_findings(r.report);
    candidates.push_back(findings);
    references.push_back(sample.reference_report);
    pred_labels.push_back(labeler.extract(findings));
    gold_labels.push_back(labeler.extract(sample.reference_report));
    flags.push_back(pipeline.flags(sample));

    std::vector<prompts::RegionLabel> g;
    bool boxes_complete = true;
    std::vector<data::Box> gb;
    for (std::size_t id = 0; id < data::kNumRegions; ++id) {
      const auto& rec = sample.region(id);
      g.push_back({rec.has_sentence, rec.is_abnormal});
      if (rec.box) gb.push_back(*rec.box);
      else boxes_complete = false;
      if (rec.has_sentence && rec.gold_sentence) {
        const auto gold_tokens = data::tokenize(*rec.gold_sentence);
        meteor_sum[id] += metrics::meteor(data::tokenize(r.sentences.sentences[id].text), gold_tokens);
        ++meteor_n[id];
        std::vector<int> target = decoder::encode_sentence(*rec.gold_sentence, vocab, max_len);
        target.push_back(data::Vocabulary::kEos);
        const auto& ids = r.sentences.sentences[id].ids;
        for (std::size_t t = 0; t < target.size(); ++t) matched += t < ids.size() && ids[t] == target[t];
        positions += target.size();
      }
    }
    gold_flags.push_back(std::move(g));
    if (boxes_complete) {
      gold_boxes.push_back(std::move(gb));
      pred_boxes.push_back(*features::mock_detect(sample, options.jitter, options.detector_seed).boxes);
    }
  }

  ev.nlg = metrics::score_corpus(candidates, references);
  ev.ce = metrics::ce_scores(pred_labels, gold_labels);
  ev.detection = prompts::eval_detection(flags, gold_flags);
  if (!gold_boxes.empty()) ev.iou = features::region_iou_report(pred_boxes, gold_boxes, regions);
  for (const auto& name : features::kKeyRegions) {
    const auto id = regions.index_of(name);
    if (!id) continue;
    const double m = meteor_n[*id] ? meteor_sum[*id] / static_cast<double>(meteor_n[*id]) : 0.0;
    ev.key_region_meteor.emplace_back(std::string(name), m);
  }
  ev.token_accuracy = positions ? static_cast<double>(matched) / static_cast<double>(positions) : 0.0;
  return ev;
}

nlohmann::json CorpusEvaluation::to_json() const {
  auto task = [](const prompts::TaskScores& t) {
    return nlohmann::json{{"all", pr_json(t.all.scores)},
                          {"abnormal_gold", pr_json(t.abnormal_gold.scores)},
                          {"normal_gold", pr_json(t.normal_gold.scores)}};
  };
  nlohmann::json iou_regions = nlohmann::json::object();
  for (std::size_t i = 0; i < iou.region_names.size(); ++i) iou_regions[iou.region_names[i]] = iou.mean_iou[i];
  nlohmann::json key = nlohmann::json::array();
  for (const auto& [name, m] : key_region_meteor) {
    key.push_back({{"region", name}, {"meteor", m}, {"iou", iou.images ? iou.for_region(name) : 0.0}});
  }
  nlohmann::json per_label = nlohmann::json::object();
  for (std::size_t i = 0; i < metrics::kNumDiseaseLabels; ++i) {
    per_label[std::string(metrics::kDiseaseLabels[i])] = pr_json(metrics::score(ce.per_label[i]));
  }
  return {{"schema_version", 1},
          {"samples", samples},
          {"nlg", nlg_json(nlg)},
          {"ce", {{"micro", pr_json(ce.micro)}, {"macro", pr_json(ce.macro)}, {"per_label", per_label}}},
          {"detection", {{"sentence", task(detection.sentence)}, {"abnormality", task(detection.abnormality)}}},
          {"iou", {{"images", iou.images}, {"mean_of_image_means", iou.mean_of_image_means}, {"regions", iou_regions}}},
          {"key_regions", key},
          {"token_accuracy", token_accuracy}};
}

std::string CorpusEvaluation::table() const {
  std::string out;
  out += "samples: " + std::to_string(samples) + "\n\n";
  out += "BLEU-1  BLEU-2  BLEU-3  BLEU-4  METEOR  ROUGE-L | CE F1   CE P    CE R\n";
  out += fmt(nlg.bleu1) + "  " + fmt(nlg.bleu2) + "  " + fmt(nlg.bleu3) + "  " + fmt(nlg.bleu4) + "  " +
         fmt(nlg.meteor) + "  " + fmt(nlg.rouge_l) + "  | " + fmt(ce.micro.f1) + "  " + fmt(ce.micro.precision) +
         "  " + fmt(ce.micro.recall) + "\n\n";
  out += pad("region", 22) + "IoU     METEOR\n";
  for (const auto& [name, m] : key_region_meteor) {
    out += pad(name, 22) + fmt(iou.images ? iou.for_region(name) : 0.0) + "  " + fmt(m) + "\n";
  }
  out += "\n" + pad("detection", 22) + pad("group", 15) + "F1      P       R\n";
  auto rows = [&](const std::string& task, const prompts::TaskScores& t) {
    const std::pair<const char*, const prompts::GroupScores*> groups[] = {
        {"all", &t.all}, {"abnormal", &t.abnormal_gold}, {"normal", &t.normal_gold}};
    for (const auto& [g, s] : groups) {
      out += pad(task, 22) + pad(g, 15) + fmt(s->scores.f1) + "  " + fmt(s->scores.precision) + "  " +
             fmt(s->scores.recall) + "\n";
    }
  };
  rows("sentence", detection.sentence);
  rows("abnormality", detection.abnormality);
  out += "\ntoken accuracy: " + fmt(token_accuracy) + "\n";
  return out;
}

std::vector<AblationRow> run_ablation(const Pipeline& pipeline, const data::DatasetSplit& split,
                                      const std::vector<AblationSpec>& specs, std::size_t limit) {
  const std::size_t n = sample_count(split, limit);
  if (n == 0) throw ValidationError("ablate: split is empty");
  const auto& labeler = metrics::LabelExtractor::builtin();
  std::vector<metrics::DiseaseLabelSet> gold_labels;
  std::vector<std::string> references;
  for (std::size_t i = 0; i < n; ++i) {
    references.push_back(split.samples[i].reference_report);
    gold_labels.push_back(labeler.extract(references.back()));
  }
  std::vector<AblationRow> rows;
  for (const auto& spec : specs) {
    AblationRow row;
    row.spec = spec;
    std::vector<std::string> candidates;
    std::vector<metrics::DiseaseLabelSet> pred;
    std::size_t sections = 0;
    for (std::size_t i = 0; i < n; ++i) {
      GenerateRequest req;
      req.sample_id = split.samples[i].sample_id;
      req.ablation = spec;
      const auto r = pipeline.generate(split.samples[i], req);
      candidates.push_back(report_findings(r.report));
      pred.push_back(labeler.extract(candidates.back()));
      sections += r.report.sections.size();
    }
    row.nlg = metrics::score_corpus(candidates, references);
    row.ce = metrics::ce_scores(pred, gold_labels);
    row.mean_sections = static_cast<double>(sections) / static_cast<double>(n);
    rows.push_back(row);
  }
  return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  auto mark = [](bool b) { return std::string(b ? "x " : "- "); };
  std::string out = "model  L1 L2 P1 P2 P3 C  | BLEU-1  BLEU-4  METEOR  ROUGE-L | CE F1   | sections\n";
  for (const auto& r : rows) {
    const auto& s = r.spec;
    out += pad("(" + s.name + ")", 7) + mark(s.l1) + " " + mark(s.l2) + " " + mark(s.p1) + " " + mark(s.p2) + " " +
           mark(s.p3) + " " + mark(s.c) + "| " + fmt(r.nlg.bleu1) + "  " + fmt(r.nlg.bleu4) + "  " +
           fmt(r.nlg.meteor) + "  " + fmt(r.nlg.rouge_l) + "  | " + fmt(r.ce.micro.f1) + "  | " +
           fmt(r.mean_sections) + "\n";
  }
  return out;
}

nlohmann::json ablation_json(const std::vector<AblationRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"ablation", r.spec.to_json()},
                   {"nlg", nlg_json(r.nlg)},
                   {"ce", {{"micro", pr_json(r.ce.micro)}, {"macro", pr_json(r.ce.macro)}}},
                   {"mean_sections", r.mean_sections}});
  }
  return {{"schema_version", 1}, {"rows", out}};
}

}  // namespace cxr::service
