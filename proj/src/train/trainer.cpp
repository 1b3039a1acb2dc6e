#include "cxr/train/trainer.hpp"

#include <algorithm>
#include <limits>

#include "cxr/error.hpp"
#include "cxr/nn/loss.hpp"
#include "cxr/nn/optimizer.hpp"

namespace cxr::train {

void TrainConfig::validate() const {
  if (stage < 1 || stage > 3) throw ConfigError("train: stage must be 1, 2 or 3");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(head_learning_rate > 0) || !(decoder_learning_rate > 0)) throw ConfigError("train: learning rates must be > 0");
  if (!(weight_decay >= 0)) throw ConfigError("train: weight_decay must be >= 0");
  if (!(decay_factor > 0 && decay_factor <= 1)) throw ConfigError("train: decay_factor must lie in (0, 1]");
  if (patience < 1) throw ConfigError("train: patience must be >= 1");
  if (plateau_epochs < 1) throw ConfigError("train: plateau_epochs must be >= 1");
  if (!(threshold >= 0 && threshold <= 1)) throw ConfigError("train: threshold must lie in [0, 1]");
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json d = decoder.to_json();
  return {{"stage", stage},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"head_learning_rate", head_learning_rate},
          {"decoder_learning_rate", decoder_learning_rate},
          {"weight_decay", weight_decay},
          {"decay_factor", decay_factor},
          {"plateau_epochs", plateau_epochs},
          {"patience", patience},
          {"min_delta", min_delta},
          {"seed", seed},
          {"losses", {{"L1", losses.sentence}, {"L2", losses.abnormal}}},
          {"threshold", threshold},
          {"decoder", d}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.stage = j.value("stage", c.stage);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.head_learning_rate = j.value("head_learning_rate", c.head_learning_rate);
    c.decoder_learning_rate = j.value("decoder_learning_rate", c.decoder_learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.decay_factor = j.value("decay_factor", c.decay_factor);
    c.plateau_epochs = j.value("plateau_epochs", c.plateau_epochs);
    c.patience = j.value("patience", c.patience);
    c.min_delta = j.value("min_delta", c.min_delta);
    c.seed = j.value("seed", c.seed);
    c.threshold = j.value("threshold", c.threshold);
    if (j.contains("losses")) {
      c.losses.sentence = j["losses"].value("L1", true);
      c.losses.abnormal = j["losses"].value("L2", true);
    }
    if (j.contains("decoder")) {
      const auto& d = j["decoder"];
      c.decoder.layers = d.value("layers", c.decoder.layers);
      c.decoder.heads = d.value("heads", c.decoder.heads);
      c.decoder.model_dim = d.value("model_dim", c.decoder.model_dim);
      c.decoder.feedforward_dim = d.value("feedforward_dim", c.decoder.feedforward_dim);
      c.decoder.max_len = d.value("max_len", c.decoder.max_len);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

int epochs_without_improvement(std::span<const double> history, double min_delta) {
  if (history.empty()) throw ValidationError("early_stop: empty history");
  double best = history[0];
  int since = 0;
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i] <= best - min_delta) {
      best = history[i];
      since = 0;
    } else {
      ++since;
    }
  }
  return since;
}

bool early_stop(std::span<const double> history, int patience, double min_delta) {
  if (patience < 1) throw ValidationError("early_stop: patience must be >= 1");
  return epochs_without_improvement(history, min_delta) >= patience;
}

std::string TrainLog::to_jsonl() const {
  std::string out;
  for (const auto& e : epochs) {
    nlohmann::json j = {{"stage", stage},
                        {"epoch", e.epoch},
                        {"train_loss", e.train_loss},
                        {"validation_loss", e.validation_loss},
                        {"sentence_f1", e.sentence_f1},
                        {"abnormal_f1", e.abnormal_f1},
                        {"head_learning_rate", e.head_learning_rate}};
    if (stage == 3) {
      j["decoder_validation_loss"] = e.decoder_validation_loss;
      j["decoder_learning_rate"] = e.decoder_learning_rate;
    }
    out += j.dump() + "\n";
  }
  nlohmann::json end = {{"stage", stage}, {"stop_reason", stop_reason}, {"best_epoch", best_epoch}};
  if (!notice.empty()) end["notice"] = notice;
  out += end.dump() + "\n";
  return out;
}

namespace {

struct HeadData {
  nn::Tensor x;
  std::vector<int> has_sentence;
  std::vector<int> is_abnormal;
};

HeadData head_data(const data::DatasetSplit& split) {
  HeadData d;
  const auto rows = static_cast<Eigen::Index>(split.samples.size() * data::kNumRegions);
  d.x.resize(rows, static_cast<Eigen::Index>(data::kFeatureDim));
  Eigen::Index r = 0;
  for (const auto& s : split.samples) {
    for (std::size_t id = 0; id < data::kNumRegions; ++id, ++r) {
      const auto& rec = s.region(id);
      if (rec.feature.size() != data::kFeatureDim) {
        throw DimensionError("sample " + s.sample_id + ": region feature length " + std::to_string(rec.feature.size()) +
                             ", expected 1024");
      }
      for (std::size_t c = 0; c < rec.feature.size(); ++c) d.x(r, static_cast<Eigen::Index>(c)) = rec.feature[c];
      d.has_sentence.push_back(rec.has_sentence ? 1 : 0);
      d.is_abnormal.push_back(rec.is_abnormal ? 1 : 0);
    }
  }
  return d;
}

nn::Tensor gather_rows(const nn::Tensor& x, std::span<const std::size_t> idx) {
  nn::Tensor out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

template <typename T>
std::vector<T> gather(const std::vector<T>& v, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

std::vector<nn::Tensor> snapshot(const nn::ParameterList& params) {
  std::vector<nn::Tensor> out;
  out.reserve(params.size());
  for (auto* p : params) out.push_back(p->value);
  return out;
}

void restore(const nn::ParameterList& params, const std::vector<nn::Tensor>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

nn::ParameterList active_head_parameters(ModelBundle& m, const LossMask& mask) {
  nn::ParameterList out;
  if (mask.sentence) out = m.sentence_head.parameters();
  if (mask.abnormal) {
    for (auto* p : m.abnormal_head.parameters()) out.push_back(p);
  }
  return out;
}

// One head update on the rows `idx`; returns the masked loss.
double head_step(ModelBundle& m, const HeadData& d, std::span<const std::size_t> idx, const LossMask& mask) {
  const nn::Tensor xb = gather_rows(d.x, idx);
  const auto hs = gather(d.has_sentence, idx);
  const auto ab = gather(d.is_abnormal, idx);
  const Eigen::VectorXd s_logits = mask.sentence ? m.sentence_head.forward(xb) : m.sentence_head.logits(xb);
  const Eigen::VectorXd a_logits = mask.abnormal ? m.abnormal_head.forward(xb) : m.abnormal_head.logits(xb);
  const auto loss = prompts::detection_loss(s_logits, a_logits, hs, ab);
  double total = 0;
  if (mask.sentence) {
    m.sentence_head.backward(loss.d_sentence_logits);
    total += loss.sentence;
  }
  if (mask.abnormal) {
    m.abnormal_head.backward(loss.d_abnormal_logits);
    total += loss.abnormal;
  }
  return total;
}

double masked(const HeadEvaluation& e, const LossMask& mask) {
  return (mask.sentence ? e.sentence_loss : 0.0) + (mask.abnormal ? e.abnormal_loss : 0.0);
}

double decoder_loss(const decoder::SentenceDecoder& dec, const std::vector<decoder::TrainingExample>& ex) {
  if (ex.empty()) return 0.0;
  constexpr std::size_t kChunk = 256;
  double weighted = 0;
  double positions = 0;
  for (std::size_t i = 0; i < ex.size(); i += kChunk) {
    const std::size_t n = std::min(kChunk, ex.size() - i);
    std::span<const decoder::TrainingExample> chunk(ex.data() + i, n);
    double w = 0;
    for (const auto& e : chunk) w += static_cast<double>(e.tokens.size() + 1);
    weighted += dec.evaluate_loss(chunk) * w;
    positions += w;
  }
  return weighted / positions;
}

}  // namespace

std::vector<decoder::TrainingExample> decoder_examples(const data::DatasetSplit& split, const data::Vocabulary& vocab,
                                                       int max_len) {
  std::vector<decoder::TrainingExample> out;
  for (const auto& s : split.samples) {
    for (std::size_t id = 0; id < data::kNumRegions; ++id) {
      const auto& rec = s.region(id);
      if (!rec.has_sentence || !rec.gold_sentence) continue;
      decoder::TrainingExample ex;
      ex.feature = Eigen::Map<const Eigen::VectorXf>(rec.feature.data(), static_cast<Eigen::Index>(rec.feature.size()))
                       .cast<double>();
      ex.tokens = decoder::encode_sentence(*rec.gold_sentence, vocab, max_len);
      out.push_back(std::move(ex));
    }
  }
  return out;
}

HeadEvaluation evaluate_heads(const ModelBundle& model, const data::DatasetSplit& split, double threshold) {
  if (split.samples.empty()) throw ValidationError("evaluate_heads: empty split");
  const HeadData d = head_data(split);
  const Eigen::VectorXd s = model.sentence_head.logits(d.x);
  const Eigen::VectorXd a = model.abnormal_head.logits(d.x);
  const auto loss = prompts::detection_loss(s, a, d.has_sentence, d.is_abnormal);
  HeadEvaluation out;
  out.sentence_loss = loss.sentence;
  out.abnormal_loss = loss.abnormal;

  std::vector<prompts::RegionFlags> flags;
  std::vector<std::vector<prompts::RegionLabel>> gold;
  const auto n = static_cast<Eigen::Index>(data::kNumRegions);
  for (std::size_t i = 0; i < split.samples.size(); ++i) {
    const auto off = static_cast<Eigen::Index>(i) * n;
    std::vector<double> ps(data::kNumRegions), pa(data::kNumRegions);
    std::vector<prompts::RegionLabel> g(data::kNumRegions);
    for (Eigen::Index r = 0; r < n; ++r) {
      ps[static_cast<std::size_t>(r)] = nn::sigmoid(s(off + r));
      pa[static_cast<std::size_t>(r)] = nn::sigmoid(a(off + r));
      g[static_cast<std::size_t>(r)] = {d.has_sentence[static_cast<std::size_t>(off + r)] != 0,
                                        d.is_abnormal[static_cast<std::size_t>(off + r)] != 0};
    }
    flags.push_back(prompts::flags_from_probabilities(ps, pa, threshold));
    gold.push_back(std::move(g));
  }
  out.detection = prompts::eval_detection(flags, gold);
  return out;
}

StageResult run_stage(const TrainConfig& config, const data::DatasetSplit& train, const data::DatasetSplit& validation,
                      const std::optional<ModelBundle>& prior, const data::RegionVocabulary& regions,
                      const EpochCallback& on_epoch) {
  config.validate();
  StageResult result;
  result.log.stage = config.stage;

  if (config.stage == 1) {
    if (prior) result.model = *prior;
    else result.model = ModelBundle::fresh(config.seed, regions);
    result.log.stop_reason = "max_epochs";
    result.log.notice = "stage 1 (anatomy detection) is served by the fixture detector; nothing to train";
    return result;
  }
  if (train.samples.empty()) throw ValidationError("train: training split is empty");
  if (validation.samples.empty()) throw ValidationError("train: validation split is empty");

  if (config.stage == 3) {
    if (!prior || prior->stage < 2) throw ConfigError("stage 3 requires a stage-2 checkpoint");
  }
  if (prior && prior->region_vocab_hash != regions.hash()) {
    throw CheckpointError("region vocabulary hash mismatch: checkpoint " + prior->region_vocab_hash + ", dataset " +
                          regions.hash());
  }

  ModelBundle& m = result.model;
  m = prior ? *prior : ModelBundle::fresh(config.seed, regions);
  m.stage = std::max(m.stage, config.stage);

  std::vector<decoder::TrainingExample> train_dec, val_dec;
  if (config.stage == 3) {
    const data::Vocabulary vocab = data::build_vocab(train);
    decoder::DecoderConfig dc = config.decoder;
    dc.vocab_size = static_cast<int>(vocab.size());
    if (!m.decoder || m.vocab.tokens() != vocab.tokens() || !(m.decoder->config() == dc)) {
      m.decoder.emplace(dc, config.seed + 2);
    }
    m.vocab = vocab;
    train_dec = decoder_examples(train, vocab, dc.max_len);
    val_dec = decoder_examples(validation, vocab, dc.max_len);
    if (train_dec.empty()) throw ValidationError("stage 3: training split has no gold sentences");
  }

  const HeadData train_heads = head_data(train);
  const nn::ParameterList head_params = active_head_parameters(m, config.losses);
  const nn::ParameterList dec_params = m.decoder && config.stage == 3 ? m.decoder->parameters() : nn::ParameterList{};
  if (head_params.empty() && dec_params.empty()) {
    result.log.stop_reason = "max_epochs";
    result.log.notice = "no active losses; parameters left at initialization";
    return result;
  }

  nn::AdamW head_opt({config.head_learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
  nn::AdamW dec_opt({config.decoder_learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
  nn::Rng rng(config.seed ^ 0x5eed5eedULL);

  const nn::ParameterList all = m.parameters();
  std::vector<nn::Tensor> best = snapshot(all);
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<double> history;

  std::vector<std::size_t> head_order(static_cast<std::size_t>(train_heads.x.rows()));
  for (std::size_t i = 0; i < head_order.size(); ++i) head_order[i] = i;
  std::vector<std::size_t> dec_order(train_dec.size());
  for (std::size_t i = 0; i < dec_order.size(); ++i) dec_order[i] = i;
  const auto batch = static_cast<std::size_t>(config.batch_size);

  result.log.stop_reason = "max_epochs";
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(head_order);
    double train_sum = 0;
    std::size_t steps = 0;

    if (config.stage == 2) {
      for (std::size_t b = 0; b < head_order.size(); b += batch) {
        std::span<const std::size_t> idx(head_order.data() + b, std::min(batch, head_order.size() - b));
        nn::zero_grads(head_params);
        train_sum += head_step(m, train_heads, idx, config.losses);
        head_opt.step(head_params);
        ++steps;
      }
    } else {
      rng.shuffle(dec_order);
      std::size_t head_cursor = 0;
      std::vector<decoder::TrainingExample> dbatch;
      for (std::size_t b = 0; b < dec_order.size(); b += batch) {
        const std::size_t n = std::min(batch, dec_order.size() - b);
        dbatch.clear();
        for (std::size_t i = 0; i < n; ++i) dbatch.push_back(train_dec[dec_order[b + i]]);
        nn::zero_grads(dec_params);
        double loss = m.decoder->forward_loss(dbatch);
        m.decoder->backward();
        if (!head_params.empty()) {
          if (head_cursor + batch > head_order.size()) {
            rng.shuffle(head_order);
            head_cursor = 0;
          }
          std::span<const std::size_t> idx(head_order.data() + head_cursor, std::min(batch, head_order.size()));
          head_cursor += idx.size();
          nn::zero_grads(head_params);
          loss += head_step(m, train_heads, idx, config.losses);
          head_opt.step(head_params);
        }
        dec_opt.step(dec_params);
        train_sum += loss;
        ++steps;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_sum / static_cast<double>(std::max<std::size_t>(steps, 1));
    const HeadEvaluation ev = evaluate_heads(m, validation, config.threshold);
    rec.validation_loss = masked(ev, config.losses);
    if (config.stage == 3) {
      rec.decoder_validation_loss = decoder_loss(*m.decoder, val_dec);
      rec.validation_loss += rec.decoder_validation_loss;
      rec.decoder_learning_rate = dec_opt.learning_rate();
    }
    rec.sentence_f1 = ev.detection.sentence.all.scores.f1;
    rec.abnormal_f1 = ev.detection.abnormality.all.scores.f1;
    rec.head_learning_rate = head_opt.learning_rate();
    result.log.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    history.push_back(rec.validation_loss);
    if (rec.validation_loss < best_loss) {
      best_loss = rec.validation_loss;
      best = snapshot(all);
      result.log.best_epoch = epoch;
    }
    const int since_improvement = epochs_without_improvement(history, config.min_delta);
    if (early_stop(history, config.patience, config.min_delta)) {
      result.log.stop_reason = "early_stop";
      break;
    }
    if (since_improvement > 0 && since_improvement % config.plateau_epochs == 0) {
      head_opt.set_learning_rate(head_opt.learning_rate() * config.decay_factor);
      dec_opt.set_learning_rate(dec_opt.learning_rate() * config.decay_factor);
    }
  }
  restore(all, best);
  return result;
}

}  // namespace cxr::train
