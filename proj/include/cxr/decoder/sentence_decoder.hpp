#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cxr/data/tokenizer.hpp"
#include "cxr/features/region_features.hpp"
#include "cxr/nn/layers.hpp"

namespace cxr::decoder {

struct DecoderConfig {
  int layers = 3;
  int heads = 8;
  int model_dim = 512;
  int feedforward_dim = 2048;
  int max_len = 64;  // generated tokens per sentence, eos included
  int vocab_size = 0;
  int feature_dim = static_cast<int>(data::kFeatureDim);

  void validate() const;
  nlohmann::json to_json() const;
  static DecoderConfig from_json(const nlohmann::json& j);
  bool operator==(const DecoderConfig&) const = default;
};

// One region's conditioning feature and its gold content token ids (no bos/eos).
struct TrainingExample {
  Eigen::VectorXd feature;
  std::vector<int> tokens;
};

struct RegionSentence {
  std::vector<int> ids;  // generated ids, eos included when emitted
  std::string text;      // detokenized, eos stripped
};

// One sentence per region, in region-id order.
struct RegionSentences {
  std::vector<RegionSentence> sentences;
  std::vector<std::string> texts() const;
};

// Pre-norm transformer block: x + attn(ln(x)), then h + ffn(ln(h)).
class DecoderBlock {
 public:
  DecoderBlock() = default;
  DecoderBlock(const std::string& name, const DecoderConfig& config, nn::Rng& rng);

  nn::Tensor apply(const nn::Tensor& x, std::span<const Eigen::Index> segments) const;
  nn::Tensor forward(const nn::Tensor& x, std::span<const Eigen::Index> segments);
  nn::Tensor backward(const nn::Tensor& dy);
  void collect(nn::ParameterList& out);
  void describe(std::vector<nn::TensorEntry>& out) const;

 private:
  nn::LayerNorm norm1_;
  nn::MultiHeadAttention attention_;
  nn::LayerNorm norm2_;
  nn::Dense expand_;
  nn::Dense contract_;
};

// Region-conditioned sentence generator. The region feature is mapped to
// model width and placed at position 0 as a visual prefix token, followed by
// bos and the sentence tokens; sinusoidal positions are added to all rows.
class SentenceDecoder {
 public:
  SentenceDecoder() = default;
  SentenceDecoder(const DecoderConfig& config, std::uint64_t seed);

  // Mean token cross-entropy over all target positions of the batch (the
  // tokens plus eos of every example). Caches activations for `backward`.
  double forward_loss(std::span<const TrainingExample> batch);
  // Accumulates gradients of the last forward_loss into parameters().
  void backward();
  // Same value as forward_loss without caching; safe for concurrent callers.
  double evaluate_loss(std::span<const TrainingExample> batch) const;
  // Cross-entropy at each target position (the tokens, then eos).
  std::vector<double> token_losses(const TrainingExample& example) const;

  // Greedy decoding; ties go to the lowest token id. Stops after eos or
  // `max_len` tokens.
  std::vector<int> decode(const Eigen::VectorXd& feature, int max_len) const;
  RegionSentence decode_region(const Eigen::VectorXd& feature, const data::Vocabulary& vocab, int max_len) const;
  RegionSentences generate_all(const features::RegionFeatureSet& set, const data::Vocabulary& vocab) const;

  nn::ParameterList parameters();
  std::vector<nn::TensorEntry> describe() const;
  const DecoderConfig& config() const { return config_; }

 private:
  struct Packed {
    nn::Tensor features;                 // [B x feature_dim]
    std::vector<int> input_ids;          // bos + tokens, concatenated
    std::vector<Eigen::Index> segments;  // 1 + 1 + n_b per example
    std::vector<Eigen::Index> target_rows;
    std::vector<int> targets;
  };
  Packed pack(std::span<const TrainingExample> batch) const;
  nn::Tensor assemble(const nn::Tensor& prefix, const nn::Tensor& embedded, const Packed& p) const;
  nn::Tensor positions(Eigen::Index n) const;
  nn::Tensor target_logits(const Packed& p) const;

  DecoderConfig config_;
  nn::Dense prefix_;
  nn::Embedding embedding_;
  std::vector<DecoderBlock> blocks_;
  nn::LayerNorm final_norm_;
  nn::Dense output_;

  Packed cache_;
  nn::Tensor loss_grad_cache_;
};

// Gold ids for a sentence, truncated to leave room for eos within max_len.
std::vector<int> encode_sentence(const std::string& sentence, const data::Vocabulary& vocab, int max_len);

// Greedy-decode each example and compare position-wise to tokens+eos.
// Returns matched / total gold positions over the whole set.
double greedy_token_accuracy(const SentenceDecoder& decoder, std::span<const TrainingExample> examples, int max_len);

}  // namespace cxr::decoder
