#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cxr/data/regions.hpp"
#include "cxr/data/tokenizer.hpp"
#include "cxr/decoder/sentence_decoder.hpp"
#include "cxr/prompts/anatomy_prompts.hpp"

namespace cxr::train {

// Everything a pipeline needs at inference time.
struct ModelBundle {
  int stage = 2;
  prompts::ClassifierHead sentence_head;
  prompts::ClassifierHead abnormal_head;
  std::optional<decoder::SentenceDecoder> decoder;  // present from stage 3 on
  data::Vocabulary vocab;
  std::string region_vocab_hash;

  static ModelBundle fresh(std::uint64_t seed, const data::RegionVocabulary& regions);

  nn::ParameterList head_parameters();
  nn::ParameterList parameters();
  std::vector<nn::TensorEntry> describe() const;
};

void save_model(const std::filesystem::path& path, const ModelBundle& model);

enum class HashPolicy { warn, error };

struct LoadedModel {
  ModelBundle model;
  std::vector<std::string> warnings;
};

// A region-vocabulary hash mismatch is reported in `warnings` under
// HashPolicy::warn and thrown as CheckpointError under HashPolicy::error.
LoadedModel load_model(const std::filesystem::path& path, const data::RegionVocabulary& regions,
                       HashPolicy policy = HashPolicy::warn);

}  // namespace cxr::train
