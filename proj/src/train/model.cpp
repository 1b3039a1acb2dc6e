#include "cxr/train/model.hpp"

#include "cxr/error.hpp"
#include "cxr/nn/checkpoint.hpp"

namespace cxr::train {

namespace {
constexpr const char* kKind = "cxr-model";
}

ModelBundle ModelBundle::fresh(std::uint64_t seed, const data::RegionVocabulary& regions) {
  ModelBundle m;
  m.sentence_head = prompts::ClassifierHead("sentence_head", seed);
  m.abnormal_head = prompts::ClassifierHead("abnormal_head", seed + 1);
  m.region_vocab_hash = regions.hash();
  return m;
}

nn::ParameterList ModelBundle::head_parameters() {
  nn::ParameterList out = sentence_head.parameters();
  for (auto* p : abnormal_head.parameters()) out.push_back(p);
  return out;
}

nn::ParameterList ModelBundle::parameters() {
  nn::ParameterList out = head_parameters();
  if (decoder) {
    for (auto* p : decoder->parameters()) out.push_back(p);
  }
  return out;
}

std::vector<nn::TensorEntry> ModelBundle::describe() const {
  std::vector<nn::TensorEntry> out = sentence_head.describe();
  for (auto& e : abnormal_head.describe()) out.push_back(e);
  if (decoder) {
    for (auto& e : decoder->describe()) out.push_back(e);
  }
  return out;
}

void save_model(const std::filesystem::path& path, const ModelBundle& model) {
  nlohmann::json meta;
  meta["kind"] = kKind;
  meta["stage"] = model.stage;
  meta["token_vocab"] = model.vocab.tokens();
  if (model.decoder) meta["decoder_config"] = model.decoder->config().to_json();
  nn::write_checkpoint(path, model.region_vocab_hash, meta, model.describe());
}

LoadedModel load_model(const std::filesystem::path& path, const data::RegionVocabulary& regions, HashPolicy policy) {
  const nn::CheckpointData data = nn::read_checkpoint(path);
  const auto& meta = data.header.metadata;
  if (!meta.is_object() || meta.value("kind", "") != kKind) {
    throw CheckpointError(path.string() + " is not a model checkpoint");
  }
  LoadedModel out;
  if (data.header.region_vocab_hash != regions.hash()) {
    const std::string msg = "region vocabulary hash mismatch: checkpoint " + data.header.region_vocab_hash +
                            ", current " + regions.hash();
    if (policy == HashPolicy::error) throw CheckpointError(msg);
    out.warnings.push_back(msg);
  }
  ModelBundle& m = out.model;
  try {
    m = ModelBundle::fresh(0, regions);
    m.stage = meta.at("stage").get<int>();
    m.vocab = data::Vocabulary(meta.at("token_vocab").get<std::vector<std::string>>());
    if (meta.contains("decoder_config")) {
      m.decoder.emplace(decoder::DecoderConfig::from_json(meta.at("decoder_config")), 0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": bad model metadata: " + e.what());
  } catch (const ValidationError& e) {
    throw CheckpointError(path.string() + ": bad model metadata: " + e.what());
  }
  m.region_vocab_hash = data.header.region_vocab_hash;
  nn::restore_parameters(data, m.describe(), m.parameters());
  return out;
}

}  // namespace cxr::train
