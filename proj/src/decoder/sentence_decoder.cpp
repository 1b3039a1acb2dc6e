#include "cxr/decoder/sentence_decoder.hpp"

#include <cctype>
#include <cmath>

#include "cxr/error.hpp"
#include "cxr/nn/loss.hpp"

namespace cxr::decoder {

using nn::Tensor;

void DecoderConfig::validate() const {
  if (layers < 1 || heads < 1 || model_dim < 1 || feedforward_dim < 1 || feature_dim < 1) {
    throw ValidationError("decoder config: sizes must be positive");
  }
  if (model_dim % heads != 0) {
    throw ValidationError("decoder config: model_dim " + std::to_string(model_dim) + " not divisible by " +
                          std::to_string(heads) + " heads");
  }
  if (max_len < 1) throw ValidationError("decoder config: max_len must be >= 1");
  if (vocab_size <= data::Vocabulary::kUnk) throw ValidationError("decoder config: vocabulary too small");
}

nlohmann::json DecoderConfig::to_json() const {
  return {{"layers", layers},   {"heads", heads},           {"model_dim", model_dim},
          {"feedforward_dim", feedforward_dim}, {"max_len", max_len}, {"vocab_size", vocab_size},
          {"feature_dim", feature_dim}};
}

DecoderConfig DecoderConfig::from_json(const nlohmann::json& j) {
  DecoderConfig c;
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.model_dim = j.at("model_dim").get<int>();
  c.feedforward_dim = j.at("feedforward_dim").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.feature_dim = j.value("feature_dim", static_cast<int>(data::kFeatureDim));
  c.validate();
  return c;
}

std::vector<std::string> RegionSentences::texts() const {
  std::vector<std::string> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(s.text);
  return out;
}

// ---- DecoderBlock ----------------------------------------------------------

DecoderBlock::DecoderBlock(const std::string& name, const DecoderConfig& c, nn::Rng& rng)
    : norm1_(name + ".norm1", c.model_dim),
      attention_(name + ".attention", c.model_dim, c.heads, rng),
      norm2_(name + ".norm2", c.model_dim),
      expand_(name + ".expand", c.model_dim, c.feedforward_dim, nn::Activation::relu, rng),
      contract_(name + ".contract", c.feedforward_dim, c.model_dim, nn::Activation::identity, rng) {}

Tensor DecoderBlock::apply(const Tensor& x, std::span<const Eigen::Index> segments) const {
  Tensor h = x + attention_.apply(norm1_.apply(x), segments);
  return h + contract_.apply(expand_.apply(norm2_.apply(h)));
}

Tensor DecoderBlock::forward(const Tensor& x, std::span<const Eigen::Index> segments) {
  Tensor h = x + attention_.forward(norm1_.forward(x), segments);
  return h + contract_.forward(expand_.forward(norm2_.forward(h)));
}

Tensor DecoderBlock::backward(const Tensor& dy) {
  Tensor dh = dy + norm2_.backward(expand_.backward(contract_.backward(dy)));
  return dh + norm1_.backward(attention_.backward(dh));
}

void DecoderBlock::collect(nn::ParameterList& out) {
  norm1_.collect(out);
  attention_.collect(out);
  norm2_.collect(out);
  expand_.collect(out);
  contract_.collect(out);
}

void DecoderBlock::describe(std::vector<nn::TensorEntry>& out) const {
  norm1_.describe(out);
  attention_.describe(out);
  norm2_.describe(out);
  expand_.describe(out);
  contract_.describe(out);
}

// ---- SentenceDecoder -------------------------------------------------------

namespace {
// The output projection starts small so an untrained model predicts a
// near-uniform distribution.
constexpr double kOutputInitGain = 0.1;
}  // namespace

SentenceDecoder::SentenceDecoder(const DecoderConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  nn::Rng rng(seed);
  prefix_ = nn::Dense("decoder.prefix", config_.feature_dim, config_.model_dim, nn::Activation::identity, rng);
  embedding_ = nn::Embedding("decoder.embedding", config_.vocab_size, config_.model_dim, rng);
  for (int l = 0; l < config_.layers; ++l) {
    blocks_.emplace_back("decoder.block" + std::to_string(l), config_, rng);
  }
  final_norm_ = nn::LayerNorm("decoder.final_norm", config_.model_dim);
  output_ = nn::Dense("decoder.output", config_.model_dim, config_.vocab_size, nn::Activation::identity, rng,
                      kOutputInitGain);
}

nn::ParameterList SentenceDecoder::parameters() {
  nn::ParameterList out;
  prefix_.collect(out);
  embedding_.collect(out);
  for (auto& b : blocks_) b.collect(out);
  final_norm_.collect(out);
  output_.collect(out);
  return out;
}

std::vector<nn::TensorEntry> SentenceDecoder::describe() const {
  std::vector<nn::TensorEntry> out;
  prefix_.describe(out);
  embedding_.describe(out);
  for (const auto& b : blocks_) b.describe(out);
  final_norm_.describe(out);
  output_.describe(out);
  return out;
}

Tensor SentenceDecoder::positions(Eigen::Index n) const {
  const Eigen::Index d = config_.model_dim;
  Tensor pe(n, d);
  for (Eigen::Index pos = 0; pos < n; ++pos) {
    for (Eigen::Index i = 0; i < d; i += 2) {
      const double angle = static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
      pe(pos, i) = std::sin(angle);
      if (i + 1 < d) pe(pos, i + 1) = std::cos(angle);
    }
  }
  return pe;
}

SentenceDecoder::Packed SentenceDecoder::pack(std::span<const TrainingExample> batch) const {
  if (batch.empty()) throw ValidationError("decoder: empty batch");
  Packed p;
  p.features.resize(static_cast<Eigen::Index>(batch.size()), config_.feature_dim);
  Eigen::Index row = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& ex = batch[b];
    if (ex.feature.size() != config_.feature_dim) {
      throw DimensionError("decoder: feature has " + std::to_string(ex.feature.size()) + " dims, expected " +
                           std::to_string(config_.feature_dim));
    }
    if (static_cast<int>(ex.tokens.size()) > config_.max_len - 1) {
      throw ValidationError("decoder: gold sentence of " + std::to_string(ex.tokens.size()) +
                            " tokens exceeds max_len - 1 = " + std::to_string(config_.max_len - 1));
    }
    p.features.row(static_cast<Eigen::Index>(b)) = ex.feature.transpose();
    const auto n = static_cast<Eigen::Index>(ex.tokens.size());
    p.input_ids.push_back(data::Vocabulary::kBos);
    p.input_ids.insert(p.input_ids.end(), ex.tokens.begin(), ex.tokens.end());
    p.segments.push_back(n + 2);
    // Row `row` is the prefix; rows row+1 .. row+n+1 predict tokens then eos.
    for (Eigen::Index t = 0; t <= n; ++t) {
      p.target_rows.push_back(row + 1 + t);
      p.targets.push_back(t < n ? ex.tokens[static_cast<std::size_t>(t)] : data::Vocabulary::kEos);
    }
    row += n + 2;
  }
  return p;
}

Tensor SentenceDecoder::assemble(const Tensor& prefix, const Tensor& embedded, const Packed& p) const {
  Eigen::Index total = 0;
  Eigen::Index longest = 0;
  for (auto s : p.segments) {
    total += s;
    longest = std::max(longest, s);
  }
  const Tensor pe = positions(longest);
  Tensor x(total, config_.model_dim);
  Eigen::Index row = 0;
  Eigen::Index emb_row = 0;
  for (std::size_t b = 0; b < p.segments.size(); ++b) {
    const Eigen::Index len = p.segments[b];
    x.row(row) = prefix.row(static_cast<Eigen::Index>(b));
    x.block(row + 1, 0, len - 1, config_.model_dim) = embedded.block(emb_row, 0, len - 1, config_.model_dim);
    x.block(row, 0, len, config_.model_dim) += pe.topRows(len);
    row += len;
    emb_row += len - 1;
  }
  return x;
}

namespace {

Tensor gather_rows(const Tensor& x, const std::vector<Eigen::Index>& rows) {
  Tensor out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

}  // namespace

double SentenceDecoder::forward_loss(std::span<const TrainingExample> batch) {
  cache_ = pack(batch);
  const Tensor prefix = prefix_.forward(cache_.features);
  const Tensor embedded = embedding_.forward(cache_.input_ids);
  Tensor h = assemble(prefix, embedded, cache_);
  for (auto& b : blocks_) h = b.forward(h, cache_.segments);
  h = final_norm_.forward(h);
  const Tensor logits = output_.forward(gather_rows(h, cache_.target_rows));
  auto loss = nn::cross_entropy_rows(logits, cache_.targets);
  loss_grad_cache_ = std::move(loss.grad);
  return loss.loss;
}

void SentenceDecoder::backward() {
  const Tensor d_selected = output_.backward(loss_grad_cache_);
  Eigen::Index total = 0;
  for (auto s : cache_.segments) total += s;
  Tensor dh = Tensor::Zero(total, config_.model_dim);
  for (std::size_t i = 0; i < cache_.target_rows.size(); ++i) {
    dh.row(cache_.target_rows[i]) = d_selected.row(static_cast<Eigen::Index>(i));
  }
  dh = final_norm_.backward(dh);
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) dh = it->backward(dh);

  Tensor d_prefix(static_cast<Eigen::Index>(cache_.segments.size()), config_.model_dim);
  Tensor d_embedded(static_cast<Eigen::Index>(cache_.input_ids.size()), config_.model_dim);
  Eigen::Index row = 0;
  Eigen::Index emb_row = 0;
  for (std::size_t b = 0; b < cache_.segments.size(); ++b) {
    const Eigen::Index len = cache_.segments[b];
    d_prefix.row(static_cast<Eigen::Index>(b)) = dh.row(row);
    d_embedded.block(emb_row, 0, len - 1, config_.model_dim) = dh.block(row + 1, 0, len - 1, config_.model_dim);
    row += len;
    emb_row += len - 1;
  }
  prefix_.backward(d_prefix);
  embedding_.backward(d_embedded);
}

Tensor SentenceDecoder::target_logits(const Packed& p) const {
  Tensor h = assemble(prefix_.apply(p.features), embedding_.apply(p.input_ids), p);
  for (const auto& b : blocks_) h = b.apply(h, p.segments);
  h = final_norm_.apply(h);
  return output_.apply(gather_rows(h, p.target_rows));
}

double SentenceDecoder::evaluate_loss(std::span<const TrainingExample> batch) const {
  const Packed p = pack(batch);
  return nn::cross_entropy_rows(target_logits(p), p.targets).loss;
}

std::vector<double> SentenceDecoder::token_losses(const TrainingExample& example) const {
  const Packed p = pack(std::span<const TrainingExample>(&example, 1));
  const Tensor logits = target_logits(p);
  std::vector<double> out;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    out.push_back(nn::cross_entropy(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())),
                                    p.targets[static_cast<std::size_t>(r)])
                      .loss);
  }
  return out;
}

std::vector<int> SentenceDecoder::decode(const Eigen::VectorXd& feature, int max_len) const {
  if (feature.size() != config_.feature_dim) {
    throw DimensionError("decode: feature has " + std::to_string(feature.size()) + " dims, expected " +
                         std::to_string(config_.feature_dim));
  }
  if (max_len < 1) throw ValidationError("decode: max_len must be >= 1");
  const Tensor prefix = prefix_.apply(Tensor(feature.transpose()));
  const Tensor pe = positions(max_len + 1);
  std::vector<int> input = {data::Vocabulary::kBos};
  std::vector<int> generated;
  while (static_cast<int>(generated.size()) < max_len) {
    const Eigen::Index len = static_cast<Eigen::Index>(input.size()) + 1;
    Tensor x(len, config_.model_dim);
    x.row(0) = prefix.row(0);
    x.bottomRows(len - 1) = embedding_.apply(input);
    x += pe.topRows(len);
    const std::array<Eigen::Index, 1> seg = {len};
    for (const auto& b : blocks_) x = b.apply(x, seg);
    const Tensor last = final_norm_.apply(x.bottomRows(1));
    const Tensor logits = output_.apply(last);
    int best = 0;
    for (Eigen::Index v = 1; v < logits.cols(); ++v) {
      if (logits(0, v) > logits(0, best)) best = static_cast<int>(v);
    }
    generated.push_back(best);
    if (best == data::Vocabulary::kEos) break;
    input.push_back(best);
  }
  return generated;
}

RegionSentence SentenceDecoder::decode_region(const Eigen::VectorXd& feature, const data::Vocabulary& vocab,
                                              int max_len) const {
  RegionSentence s;
  s.ids = decode(feature, max_len);
  const auto tokens = vocab.decode(s.ids);
  s.text = data::detokenize(tokens);
  if (!s.text.empty()) s.text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s.text[0])));
  return s;
}

RegionSentences SentenceDecoder::generate_all(const features::RegionFeatureSet& set,
                                              const data::Vocabulary& vocab) const {
  set.validate();
  RegionSentences out;
  out.sentences.reserve(data::kNumRegions);
  for (std::size_t r = 0; r < data::kNumRegions; ++r) {
    out.sentences.push_back(decode_region(set.row(r), vocab, config_.max_len));
  }
  return out;
}

std::vector<int> encode_sentence(const std::string& sentence, const data::Vocabulary& vocab, int max_len) {
  auto ids = vocab.encode(data::tokenize(sentence));
  const auto cap = static_cast<std::size_t>(std::max(0, max_len - 1));
  if (ids.size() > cap) ids.resize(cap);
  return ids;
}

double greedy_token_accuracy(const SentenceDecoder& decoder, std::span<const TrainingExample> examples, int max_len) {
  std::size_t matched = 0;
  std::size_t total = 0;
  for (const auto& ex : examples) {
    const auto pred = decoder.decode(ex.feature, max_len);
    std::vector<int> gold = ex.tokens;
    gold.push_back(data::Vocabulary::kEos);
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (i < pred.size() && pred[i] == gold[i]) ++matched;
    }
    total += gold.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(total);
}

}  // namespace cxr::decoder
