#include "cxr/service/api.hpp"

#include <cmath>
#include <cstdio>

#include "cxr/error.hpp"
#include "cxr/features/region_features.hpp"
#include "cxr/service/evaluation.hpp"

#include <httplib.h>

namespace cxr::service {

std::string region_color(std::size_t region_id) {
  const double h = std::fmod(static_cast<double>(region_id) * 137.508, 360.0) / 60.0;
  const double s = 0.65, l = 0.5;
  const double c = (1 - std::abs(2 * l - 1)) * s;
  const double x = c * (1 - std::abs(std::fmod(h, 2.0) - 1));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = l - c / 2;
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround((r + m) * 255)),
                static_cast<int>(std::lround((g + m) * 255)), static_cast<int>(std::lround((b + m) * 255)));
  return buf;
}

namespace {

nlohmann::json box_json(const data::Box& b) { return {{"x1", b.x1}, {"y1", b.y1}, {"x2", b.x2}, {"y2", b.y2}}; }

nlohmann::json context_json(const data::ClinicalContext& c) {
  return {{"history", c.history}, {"indication", c.indication}, {"reason_for_exam", c.reason_for_exam}};
}

data::ClinicalContext parse_context(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("clinical_context must be an object");
  data::ClinicalContext c;
  auto field = [&](const char* key, std::string& out) {
    if (!j.contains(key) || j.at(key).is_null()) return;
    if (!j.at(key).is_string()) throw ValidationError(std::string("clinical_context.") + key + " must be a string");
    out = j.at(key).get<std::string>();
  };
  field("history", c.history);
  field("indication", c.indication);
  field("reason_for_exam", c.reason_for_exam);
  return c;
}

ApiResponse ok(const nlohmann::json& body) { return {200, body.dump()}; }

}  // namespace

ApiResponse error_response(int status, const std::string& code, const std::string& message) {
  return {status, nlohmann::json{{"schema_version", kApiSchemaVersion},
                                 {"error", {{"code", code}, {"message", message}}}}
                      .dump()};
}

nlohmann::json report_json(const llm::StructuredReport& report) {
  nlohmann::json sections = nlohmann::json::array();
  for (const auto& s : report.sections) {
    sections.push_back({{"region_name", s.region_name}, {"text", s.text}, {"abnormal", s.abnormal}});
  }
  return {{"sections", sections},
          {"context_summary", report.context_summary ? nlohmann::json(*report.context_summary) : nlohmann::json()},
          {"raw_text", report.raw_text},
          {"unstructured", report.unstructured}};
}

nlohmann::json labels_json(const metrics::DiseaseLabelSet& labels) {
  nlohmann::json out = nlohmann::json::object();
  for (std::size_t i = 0; i < metrics::kNumDiseaseLabels; ++i) {
    out[std::string(metrics::kDiseaseLabels[i])] = std::string(metrics::to_string(labels.labels[i]));
  }
  return out;
}

nlohmann::json generate_json(const GenerateResult& r, const data::RegionVocabulary& regions) {
  nlohmann::json sentences = nlohmann::json::array();
  nlohmann::json flags = nlohmann::json::array();
  std::vector<bool> coerced(data::kNumRegions, false);
  for (auto id : r.conversion.coerced) coerced[id] = true;
  for (std::size_t id = 0; id < r.sentences.sentences.size(); ++id) {
    sentences.push_back({{"region_id", id},
                         {"region_name", regions.name(id)},
                         {"color", region_color(id)},
                         {"text", r.sentences.sentences[id].text}});
    const auto& f = r.flags.regions[id];
    flags.push_back({{"region_id", id},
                     {"p_sentence", f.p_sentence},
                     {"p_abnormal", f.p_abnormal},
                     {"selected", static_cast<bool>(r.conversion.selected[id])},
                     {"abnormal", static_cast<bool>(r.conversion.abnormal[id])},
                     {"coerced", static_cast<bool>(coerced[id])}});
  }
  nlohmann::json doc_sections = nlohmann::json::array();
  for (const auto& s : r.document.sections) doc_sections.push_back({{"header", s.header}, {"lines", s.lines}});
  nlohmann::json out = {{"schema_version", kApiSchemaVersion},
                        {"sample_id", r.sample_id},
                        {"ablation", r.ablation.to_json()},
                        {"backend", to_string(r.backend)},
                        {"threshold", r.flags.threshold},
                        {"region_sentences", sentences},
                        {"flags", flags},
                        {"prompts", {{"P1", r.conversion.prompts.location}, {"P2", r.conversion.prompts.abnormality}}},
                        {"prompt_document", {{"text", r.document.text()}, {"sections", doc_sections}}},
                        {"report", report_json(r.report)}};
  if (r.metrics) {
    out["metrics"] = {{"nlg", nlg_json(r.metrics->nlg)},
                      {"labels", {{"report", labels_json(r.metrics->predicted)},
                                  {"reference", labels_json(r.metrics->reference)}}}};
  } else {
    out["metrics"] = nullptr;
  }
  return out;
}

GenerateRequest parse_generate_request(const nlohmann::json& body, Backend default_backend) {
  if (!body.is_object()) throw ValidationError("request body must be a JSON object");
  GenerateRequest req;
  req.backend = default_backend;
  if (!body.contains("sample_id") || !body["sample_id"].is_string()) throw ValidationError("sample_id (string) is required");
  req.sample_id = body["sample_id"].get<std::string>();
  if (body.contains("clinical_context") && !body["clinical_context"].is_null()) {
    req.context = parse_context(body["clinical_context"]);
  }
  if (body.contains("region_mask") && !body["region_mask"].is_null()) {
    const auto& m = body["region_mask"];
    if (!m.is_array()) throw ValidationError("region_mask must be an array of 29 booleans");
    if (m.size() != data::kNumRegions) {
      throw ValidationError("region_mask must have 29 entries, got " + std::to_string(m.size()));
    }
    std::vector<bool> mask;
    for (const auto& v : m) {
      if (!v.is_boolean()) throw ValidationError("region_mask entries must be booleans");
      mask.push_back(v.get<bool>());
    }
    req.region_mask = std::move(mask);
  }
  if (body.contains("ablation") && !body["ablation"].is_null()) {
    try {
      req.ablation = AblationSpec::from_json(body["ablation"]);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("ablation: ") + e.what());
    }
  }
  if (body.contains("backend") && !body["backend"].is_null()) {
    if (!body["backend"].is_string()) throw ValidationError("backend must be \"mock\" or \"remote\"");
    req.backend = backend_from_string(body["backend"].get<std::string>());
  }
  return req;
}

Api::Api(const Pipeline& pipeline, std::vector<data::DatasetSplit> splits, ApiOptions options)
    : pipeline_(pipeline), splits_(std::move(splits)), options_(options) {
  std::vector<const data::DatasetSplit*> ptrs;
  for (const auto& s : splits_) ptrs.push_back(&s);
  data::check_disjoint(ptrs);
}

const data::Sample* Api::find(const std::string& id, std::string* split_name) const {
  for (const auto& s : splits_) {
    if (const auto* sample = s.find(id)) {
      if (split_name) *split_name = data::to_string(s.name);
      return sample;
    }
  }
  return nullptr;
}

ApiResponse Api::health() const {
  std::size_t n = 0;
  nlohmann::json splits = nlohmann::json::object();
  for (const auto& s : splits_) {
    n += s.samples.size();
    splits[data::to_string(s.name)] = s.samples.size();
  }
  const auto& m = pipeline_.model();
  return ok({{"schema_version", kApiSchemaVersion},
             {"status", "ok"},
             {"samples", n},
             {"splits", splits},
             {"model", {{"stage", m.stage}, {"region_vocab_hash", m.region_vocab_hash}}},
             {"backends", pipeline_.has_remote() ? nlohmann::json{"mock", "remote"} : nlohmann::json{"mock"}},
             {"default_backend", to_string(options_.default_backend)}});
}

ApiResponse Api::samples(const std::optional<std::string>& split) const {
  std::optional<data::SplitName> want;
  if (split) {
    try {
      want = data::split_from_string(*split);
    } catch (const ValidationError& e) {
      return error_response(422, "invalid_request", e.what());
    }
  }
  nlohmann::json list = nlohmann::json::array();
  for (const auto& s : splits_) {
    if (want && s.name != *want) continue;
    for (const auto& sample : s.samples) {
      list.push_back({{"sample_id", sample.sample_id}, {"split", data::to_string(s.name)}});
    }
  }
  nlohmann::json body = {{"schema_version", kApiSchemaVersion}, {"samples", list}};
  body["split"] = split ? nlohmann::json(*split) : nlohmann::json();
  return ok(body);
}

ApiResponse Api::sample(const std::string& id) const {
  std::string split;
  const data::Sample* s = find(id, &split);
  if (!s) return error_response(404, "unknown_sample", "no sample with id '" + id + "'");
  const auto detected = features::mock_detect(*s, options_.jitter, options_.detector_seed);
  nlohmann::json regions = nlohmann::json::array();
  for (std::size_t rid = 0; rid < data::kNumRegions; ++rid) {
    const auto& rec = s->region(rid);
    regions.push_back({{"region_id", rid},
                       {"region_name", rec.region_name},
                       {"color", region_color(rid)},
                       {"box", rec.box ? box_json(*rec.box) : nlohmann::json()},
                       {"detected_box", box_json((*detected.boxes)[rid])},
                       {"gold_sentence", rec.gold_sentence ? nlohmann::json(*rec.gold_sentence) : nlohmann::json()},
                       {"has_sentence", rec.has_sentence},
                       {"is_abnormal", rec.is_abnormal}});
  }
  return ok({{"schema_version", kApiSchemaVersion},
             {"sample_id", s->sample_id},
             {"split", split},
             {"clinical_context", context_json(s->clinical_context)},
             {"reference_report", s->reference_report},
             {"regions", regions}});
}

ApiResponse Api::generate(const std::string& body) const {
  GenerateRequest req;
  try {
    req = parse_generate_request(nlohmann::json::parse(body), options_.default_backend);
  } catch (const nlohmann::json::exception& e) {
    return error_response(422, "invalid_request", std::string("malformed JSON: ") + e.what());
  } catch (const ValidationError& e) {
    return error_response(422, "invalid_request", e.what());
  }
  const data::Sample* s = find(req.sample_id);
  if (!s) return error_response(404, "unknown_sample", "no sample with id '" + req.sample_id + "'");
  if (req.backend == Backend::remote && !pipeline_.has_remote()) {
    return error_response(422, "invalid_request", "remote backend is not configured on this server");
  }
  try {
    return ok(generate_json(pipeline_.generate(*s, req), pipeline_.regions()));
  } catch (const TransportError& e) {
    return error_response(502, "backend_failure", e.what());
  } catch (const TimeoutError& e) {
    return error_response(502, "backend_failure", e.what());
  } catch (const ConfigError& e) {
    return error_response(502, "backend_failure", e.what());
  } catch (const ValidationError& e) {
    return error_response(422, "invalid_request", e.what());
  }
}

ApiResponse Api::evaluate(const std::string& body) const {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    return error_response(422, "invalid_request", std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("candidate") || !j.contains("reference") || !j["candidate"].is_string() ||
      !j["reference"].is_string()) {
    return error_response(422, "invalid_request", "candidate and reference strings are required");
  }
  const auto candidate = j["candidate"].get<std::string>();
  const auto reference = j["reference"].get<std::string>();
  const auto& labeler = metrics::LabelExtractor::builtin();
  const auto pl = labeler.extract(candidate);
  const auto gl = labeler.extract(reference);
  const auto ce = metrics::ce_scores({pl}, {gl});
  return ok({{"schema_version", kApiSchemaVersion},
             {"nlg", nlg_json(metrics::score_corpus({candidate}, {reference}))},
             {"labels", {{"candidate", labels_json(pl)}, {"reference", labels_json(gl)}}},
             {"ce", {{"micro", pr_json(ce.micro)}, {"macro", pr_json(ce.macro)}}},
             {"labeler_version", labeler.version()}});
}

void Api::mount(httplib::Server& server) const {
  auto send = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server.Get("/api/health", [this, send](const httplib::Request&, httplib::Response& res) { send(res, health()); });
  server.Get("/api/samples", [this, send](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> split;
    if (req.has_param("split")) split = req.get_param_value("split");
    send(res, samples(split));
  });
  server.Get(R"(/api/samples/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, sample(req.matches[1]));
  });
  server.Post("/api/generate", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, generate(req.body));
  });
  server.Post("/api/evaluate", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, evaluate(req.body));
  });
  server.set_error_handler([send](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      const int status = res.status;
      send(res, error_response(status, status == 404 ? "not_found" : "http_error", "no such endpoint"));
    }
  });
  server.set_exception_handler([send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    send(res, error_response(500, "internal_error", what));
  });
}

}  // namespace cxr::service
