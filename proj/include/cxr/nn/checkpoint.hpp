#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "cxr/nn/tensor.hpp"

namespace cxr::nn {

// On-disk layout:
//   line 1: JSON header {schema_version, layers:[{name, shape:[r,c], activation}],
//           region_vocab_hash, payload_bytes, payload_crc32, metadata}
//   rest:   little-endian float32 arrays, row-major, concatenated in header order.
inline constexpr int kCheckpointSchemaVersion = 1;

struct TensorRecord {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::string activation;
};

struct CheckpointHeader {
  int schema_version = kCheckpointSchemaVersion;
  std::vector<TensorRecord> layers;
  std::string region_vocab_hash;
  nlohmann::json metadata = nlohmann::json::object();
};

struct CheckpointData {
  CheckpointHeader header;
  std::map<std::string, Tensor> tensors;
};

// Writes to a sibling temporary file and renames over `path`.
void write_checkpoint(const std::filesystem::path& path, const std::string& region_vocab_hash,
                      const nlohmann::json& metadata, const std::vector<TensorEntry>& tensors);

// Reads and validates the whole file before returning; throws CheckpointError on
// any truncation, header corruption or checksum mismatch.
CheckpointData read_checkpoint(const std::filesystem::path& path);

// Copies checkpoint tensors into `params` after checking that every entry of
// `layout` is present with the same shape and activation tag. Nothing is
// assigned unless every check passes.
void restore_parameters(const CheckpointData& data, const std::vector<TensorEntry>& layout,
                        const ParameterList& params);

// Rounds every entry to the nearest float32, matching what a save/load cycle yields.
Tensor round_to_float32(const Tensor& t);

}  // namespace cxr::nn
