#include "cxr/service/config.hpp"

#include <fstream>

#include <json.hpp>

#include "cxr/error.hpp"

namespace cxr::service {

ServiceConfig ServiceConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path q(p);
    return q.is_absolute() ? q : base / q;
  };
  ServiceConfig c;
  try {
    if (j.contains("checkpoint")) c.checkpoint = resolve(j["checkpoint"].get<std::string>());
    for (const auto& d : j.value("datasets", nlohmann::json::array())) c.datasets.push_back(resolve(d.get<std::string>()));
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.backend = j.value("backend", c.backend);
    if (j.contains("remote")) {
      const auto& r = j["remote"];
      c.remote_configured = true;
      c.remote.endpoint = r.value("endpoint", c.remote.endpoint);
      c.remote.model = r.value("model", c.remote.model);
      c.remote.timeout = std::chrono::milliseconds(r.value("timeout_ms", static_cast<long>(c.remote.timeout.count())));
      c.remote.max_attempts = r.value("max_attempts", c.remote.max_attempts);
      c.remote.max_in_flight = r.value("max_in_flight", c.remote.max_in_flight);
    }
    if (j.contains("detector")) {
      c.jitter = j["detector"].value("jitter", c.jitter);
      c.detector_seed = j["detector"].value("seed", c.detector_seed);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  if (c.port < 0 || c.port > 65535) throw ConfigError("config: port out of range");
  return c;
}

}  // namespace cxr::service
