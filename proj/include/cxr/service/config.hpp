#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cxr/llm/backend.hpp"

namespace cxr::service {

// JSON file shared by the CLI and the service; command-line flags override it.
// {
//   "checkpoint": "model.ckpt",
//   "datasets": ["train.jsonl", "val.jsonl", "test.jsonl"],
//   "host": "127.0.0.1", "port": 8080,
//   "backend": "mock",
//   "remote": {"endpoint": "...", "model": "gpt-4", "timeout_ms": 60000,
//              "max_attempts": 3, "max_in_flight": 4},
//   "detector": {"jitter": 0.05, "seed": 7}
// }
struct ServiceConfig {
  std::filesystem::path checkpoint;
  std::vector<std::filesystem::path> datasets;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string backend = "mock";
  llm::RemoteConfig remote;
  bool remote_configured = false;
  double jitter = 0.05;
  std::uint64_t detector_seed = 7;

  // Relative paths are resolved against the config file's directory.
  static ServiceConfig load(const std::filesystem::path& path);
};

}  // namespace cxr::service
