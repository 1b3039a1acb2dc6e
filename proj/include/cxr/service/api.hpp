#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cxr/service/pipeline.hpp"

namespace httplib {
class Server;
}

namespace cxr::service {

inline constexpr int kApiSchemaVersion = 1;

// "#rrggbb", spread around the hue circle by region index.
std::string region_color(std::size_t region_id);

nlohmann::json report_json(const llm::StructuredReport& report);
nlohmann::json labels_json(const metrics::DiseaseLabelSet& labels);
nlohmann::json generate_json(const GenerateResult& result, const data::RegionVocabulary& regions);

// Parses a POST /api/generate body; throws ValidationError.
GenerateRequest parse_generate_request(const nlohmann::json& body, Backend default_backend);

struct ApiOptions {
  Backend default_backend = Backend::mock;
  double jitter = 0.05;
  std::uint64_t detector_seed = 7;
};

struct ApiResponse {
  int status = 200;
  std::string body;
};

// JSON API over immutable loaded state. Handlers are callable directly;
// `mount` wires them into an httplib server.
class Api {
 public:
  Api(const Pipeline& pipeline, std::vector<data::DatasetSplit> splits, ApiOptions options = {});

  ApiResponse health() const;
  ApiResponse samples(const std::optional<std::string>& split) const;
  ApiResponse sample(const std::string& id) const;
  ApiResponse generate(const std::string& body) const;
  ApiResponse evaluate(const std::string& body) const;

  void mount(httplib::Server& server) const;

 private:
  const data::Sample* find(const std::string& id, std::string* split_name = nullptr) const;

  const Pipeline& pipeline_;
  std::vector<data::DatasetSplit> splits_;
  ApiOptions options_;
};

ApiResponse error_response(int status, const std::string& code, const std::string& message);

}  // namespace cxr::service
