#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cxr/data/dataset.hpp"
#include "cxr/decoder/sentence_decoder.hpp"
#include "cxr/train/model.hpp"

namespace cxr::train {

struct LossMask {
  bool sentence = true;  // L1
  bool abnormal = true;  // L2
  bool operator==(const LossMask&) const = default;
};

struct TrainConfig {
  int stage = 2;
  int epochs = 50;
  int batch_size = 32;
  double head_learning_rate = 1e-3;
  double decoder_learning_rate = 3e-4;
  double weight_decay = 0.01;
  double decay_factor = 0.5;
  int plateau_epochs = 2;  // non-improving epochs before the rate is decayed
  int patience = 5;
  double min_delta = 1e-5;
  std::uint64_t seed = 7;
  LossMask losses;
  double threshold = 0.5;
  decoder::DecoderConfig decoder;  // vocab_size is taken from the training split

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// Epochs since the last decrease of at least `min_delta` below the running best.
int epochs_without_improvement(std::span<const double> history, double min_delta = 1e-5);

// True once the last `patience` entries brought no decrease of at least
// `min_delta` below the best value seen before them.
bool early_stop(std::span<const double> history, int patience, double min_delta = 1e-5);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0;
  double validation_loss = 0;
  double decoder_validation_loss = 0;  // stage 3 only
  double sentence_f1 = 0;
  double abnormal_f1 = 0;
  double head_learning_rate = 0;
  double decoder_learning_rate = 0;
  bool operator==(const EpochRecord&) const = default;
};

struct TrainLog {
  int stage = 0;
  std::vector<EpochRecord> epochs;
  std::string stop_reason;  // "max_epochs" | "early_stop"
  int best_epoch = 0;
  std::string notice;

  std::string to_jsonl() const;
  bool operator==(const TrainLog&) const = default;
};

struct StageResult {
  ModelBundle model;  // parameters from the best validation epoch
  TrainLog log;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Stage 1 only returns a notice (detection is served by fixtures). Stage 2
// trains both classifier heads; stage 3 continues them from `prior` and trains
// the sentence decoder jointly (decoder CE + L1 + L2). A head whose loss is
// masked off is never updated.
StageResult run_stage(const TrainConfig& config, const data::DatasetSplit& train, const data::DatasetSplit& validation,
                      const std::optional<ModelBundle>& prior = std::nullopt,
                      const data::RegionVocabulary& regions = data::RegionVocabulary::builtin(),
                      const EpochCallback& on_epoch = {});

// (feature, sentence tokens) pairs for every region with a gold sentence.
std::vector<decoder::TrainingExample> decoder_examples(const data::DatasetSplit& split, const data::Vocabulary& vocab,
                                                       int max_len);

struct HeadEvaluation {
  double sentence_loss = 0;
  double abnormal_loss = 0;
  prompts::DetectionEvaluation detection;
};

HeadEvaluation evaluate_heads(const ModelBundle& model, const data::DatasetSplit& split, double threshold = 0.5);

}  // namespace cxr::train
