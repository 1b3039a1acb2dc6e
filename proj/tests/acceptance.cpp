// One PASS/FAIL line per acceptance criterion; exit status is the number of
// failures.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cxr/data/dataset.hpp"
#include "cxr/data/tokenizer.hpp"
#include "cxr/decoder/sentence_decoder.hpp"
#include "cxr/error.hpp"
#include "cxr/features/region_features.hpp"
#include "cxr/llm/prompt_document.hpp"
#include "cxr/metrics/clinical.hpp"
#include "cxr/metrics/nlg.hpp"
#include "cxr/nn/checkpoint.hpp"
#include "cxr/nn/grad_check.hpp"
#include "cxr/nn/layers.hpp"
#include "cxr/nn/loss.hpp"
#include "cxr/prompts/anatomy_prompts.hpp"
#include "cxr/service/ablation.hpp"
#include "cxr/service/api.hpp"
#include "cxr/service/pipeline.hpp"
#include "cxr/train/model.hpp"
#include "cxr/train/trainer.hpp"
#include "prompt_fixture.hpp"

using namespace cxr;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("failed: " + what);
    }
  }
  void note(const std::string& s) { notes.push_back(s); }
};

int failures = 0;

void report(const std::string& name, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.notes.push_back(std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  std::ostringstream line;
  line << (o.pass ? "PASS" : "FAIL") << "  " << name << "  [" << std::fixed;
  line.precision(1);
  line << secs << " s]";
  for (const auto& n : o.notes) line << "  " << n;
  std::cout << line.str() << std::endl;
  if (!o.pass) ++failures;
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << std::fixed << v;
  return s.str();
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

nn::Tensor random_tensor(Eigen::Index rows, Eigen::Index cols, nn::Rng& rng, double scale = 1.0) {
  nn::Tensor t(rows, cols);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = scale * rng.normal();
  return t;
}

double ce_head(const nn::Tensor& y, const std::vector<int>& targets, nn::Tensor* dy) {
  const auto l = nn::cross_entropy_rows(y, targets);
  if (dy) *dy = l.grad;
  return l.loss;
}

// ---- gradient suite ----

void gradient_suite(Outcome& o) {
  const auto t0 = Clock::now();
  auto check = [&](const std::string& name, const nn::GradCheckResult& r) {
    o.require(r.max_rel_error <= 1e-4, name + " rel err " + std::to_string(r.max_rel_error));
    return r.max_rel_error;
  };
  double worst = 0;
  nn::Rng rng(21);

  for (auto act : {nn::Activation::identity, nn::Activation::relu, nn::Activation::sigmoid}) {
    nn::Dense d("d", 5, 4, act, rng);
    d.bias().value = random_tensor(1, 4, rng, 0.3);
    nn::Parameter x("x", random_tensor(6, 5, rng));
    const std::vector<int> targets = {0, 3, 1, 2, 2, 0};
    nn::ParameterList params;
    d.collect(params);
    params.push_back(&x);
    worst = std::max(worst, check("dense+ce", nn::grad_check(
                                                  [&](bool grad) {
                                                    nn::Tensor dy;
                                                    const double l = ce_head(grad ? d.forward(x.value) : d.apply(x.value),
                                                                             targets, grad ? &dy : nullptr);
                                                    if (grad) x.grad += d.backward(dy);
                                                    return l;
                                                  },
                                                  params)));
  }

  {
    nn::LayerNorm ln("ln", 6);
    ln.gain().value = random_tensor(1, 6, rng, 0.5).array() + 1.0;
    ln.shift().value = random_tensor(1, 6, rng, 0.1);
    nn::Parameter x("x", random_tensor(4, 6, rng, 2.0));
    const std::vector<int> targets = {5, 0, 2, 3};
    nn::ParameterList params;
    ln.collect(params);
    params.push_back(&x);
    worst = std::max(worst, check("layer norm", nn::grad_check(
                                                    [&](bool grad) {
                                                      nn::Tensor dy;
                                                      const double l =
                                                          ce_head(grad ? ln.forward(x.value) : ln.apply(x.value), targets,
                                                                  grad ? &dy : nullptr);
                                                      if (grad) x.grad += ln.backward(dy);
                                                      return l;
                                                    },
                                                    params)));
  }

  {
    nn::Embedding e("e", 7, 5, rng);
    const std::vector<int> ids = {3, 1, 3, 6, 0};
    const std::vector<int> targets = {1, 4, 0, 2, 3};
    nn::ParameterList params;
    e.collect(params);
    worst = std::max(worst, check("embedding", nn::grad_check(
                                                   [&](bool grad) {
                                                     nn::Tensor dy;
                                                     const double l = ce_head(grad ? e.forward(ids) : e.apply(ids), targets,
                                                                              grad ? &dy : nullptr);
                                                     if (grad) e.backward(dy);
                                                     return l;
                                                   },
                                                   params)));
  }

  for (bool causal : {false, true}) {
    nn::Parameter q("q", random_tensor(4, 3, rng)), k("k", random_tensor(4, 3, rng)), v("v", random_tensor(4, 5, rng));
    const std::vector<int> targets = {0, 4, 2, 1};
    worst = std::max(worst, check("attention", nn::grad_check(
                                                   [&](bool grad) {
                                                     const auto out = nn::attention(q.value, k.value, v.value, causal);
                                                     nn::Tensor dy;
                                                     const double l = ce_head(out.out, targets, grad ? &dy : nullptr);
                                                     if (grad) {
                                                       const auto g = nn::attention_backward(q.value, k.value, v.value,
                                                                                             out.weights, dy);
                                                       q.grad += g.dq;
                                                       k.grad += g.dk;
                                                       v.grad += g.dv;
                                                     }
                                                     return l;
                                                   },
                                                   {&q, &k, &v})));
  }

  {
    nn::MultiHeadAttention mha("mha", 8, 2, rng);
    nn::Parameter x("x", random_tensor(7, 8, rng));
    const std::vector<Eigen::Index> segments = {3, 4};
    const std::vector<int> targets = {0, 7, 3, 2, 5, 1, 6};
    nn::ParameterList params;
    mha.collect(params);
    params.push_back(&x);
    worst = std::max(worst, check("multi-head attention",
                                  nn::grad_check(
                                      [&](bool grad) {
                                        nn::Tensor dy;
                                        const double l = ce_head(grad ? mha.forward(x.value, segments)
                                                                      : mha.apply(x.value, segments),
                                                                 targets, grad ? &dy : nullptr);
                                        if (grad) x.grad += mha.backward(dy);
                                        return l;
                                      },
                                      params)));
  }

  {
    nn::Dense d("d", 4, 1, nn::Activation::identity, rng);
    const nn::Tensor x = random_tensor(6, 4, rng);
    const std::vector<int> labels = {1, 0, 0, 1, 1, 0};
    nn::ParameterList params;
    d.collect(params);
    worst = std::max(worst, check("bce", nn::grad_check(
                                             [&](bool grad) {
                                               const nn::Tensor z = grad ? d.forward(x) : d.apply(x);
                                               nn::Tensor dz(z.rows(), 1);
                                               double l = 0;
                                               for (Eigen::Index i = 0; i < z.rows(); ++i) {
                                                 const auto b =
                                                     nn::binary_cross_entropy(z(i, 0), labels[std::size_t(i)]);
                                                 l += b.loss / 6.0;
                                                 dz(i, 0) = b.grad / 6.0;
                                               }
                                               if (grad) d.backward(dz);
                                               return l;
                                             },
                                             params)));
  }

  {
    decoder::DecoderConfig c;
    c.layers = 2;
    c.heads = 2;
    c.model_dim = 8;
    c.feedforward_dim = 16;
    c.max_len = 8;
    c.vocab_size = 11;
    decoder::SentenceDecoder dec(c, 5);
    std::vector<decoder::TrainingExample> batch;
    nn::Rng erng(6);
    for (int i = 0; i < 3; ++i) {
      decoder::TrainingExample ex;
      ex.feature = Eigen::VectorXd(c.feature_dim);
      for (int j = 0; j < c.feature_dim; ++j) ex.feature[j] = erng.normal();
      for (int t = 0, n = 1 + int(erng.below(4)); t < n; ++t) ex.tokens.push_back(4 + int(erng.below(7)));
      batch.push_back(std::move(ex));
    }
    nn::GradCheckOptions opt;
    opt.max_coordinates_per_parameter = 24;
    worst = std::max(worst, check("tiny decoder", nn::grad_check(
                                                      [&](bool grad) {
                                                        if (!grad) return dec.evaluate_loss(batch);
                                                        const double l = dec.forward_loss(batch);
                                                        dec.backward();
                                                        return l;
                                                      },
                                                      dec.parameters(), opt)));
  }

  const double secs = seconds_since(t0);
  o.require(secs < 60, "runtime " + fmt(secs, 1) + " s");
  o.note("worst rel err " + std::to_string(worst));
}

// ---- training ----

struct Corpus {
  data::DatasetSplit train, validation, test;
};

Corpus make_corpus() {
  Corpus c;
  data::SyntheticOptions o;
  c.train = data::generate_synthetic(500, 7, 0.2, 0.3, o);
  o.split = data::SplitName::validation;
  o.id_prefix = "V";
  c.validation = data::generate_synthetic(100, 8, 0.2, 0.3, o);
  o.split = data::SplitName::test;
  o.id_prefix = "T";
  c.test = data::generate_synthetic(100, 9, 0.2, 0.3, o);
  return c;
}

struct Trained {
  std::optional<train::ModelBundle> stage2, stage3;
  prompts::DetectionEvaluation heads2, heads3;
};

void stage_two(const Corpus& c, Trained& t, Outcome& o) {
  train::TrainConfig cfg;
  cfg.stage = 2;
  cfg.epochs = 50;
  const auto t0 = Clock::now();
  auto r = train::run_stage(cfg, c.train, c.validation);
  const double secs = seconds_since(t0);
  t.heads2 = train::evaluate_heads(r.model, c.test).detection;
  const double f1s = t.heads2.sentence.all.scores.f1, f1a = t.heads2.abnormality.all.scores.f1;
  o.require(f1s >= 0.95, "sentence F1 " + fmt(f1s));
  o.require(f1a >= 0.95, "abnormal F1 " + fmt(f1a));
  o.require(int(r.log.epochs.size()) <= 50, "epochs");
  o.require(secs < 300, "runtime " + fmt(secs, 1) + " s");
  o.note("held-out F1 sentence " + fmt(f1s) + " abnormal " + fmt(f1a) + ", " + std::to_string(r.log.epochs.size()) +
         " epochs (" + r.log.stop_reason + ")");
  t.stage2 = std::move(r.model);
}

constexpr int kStageThreeEpochs = 2;

void stage_three(const Corpus& c, Trained& t, Outcome& o) {
  o.require(t.stage2.has_value(), "stage-2 model available");
  if (!t.stage2) return;
  train::TrainConfig cfg;
  cfg.stage = 3;
  cfg.epochs = kStageThreeEpochs;
  auto r = train::run_stage(cfg, c.train, c.validation, t.stage2);
  const auto& model = r.model;
  const int max_len = model.decoder->config().max_len;
  const auto examples = train::decoder_examples(c.test, model.vocab, max_len);
  const double acc = decoder::greedy_token_accuracy(*model.decoder, examples, max_len);
  t.heads3 = train::evaluate_heads(model, c.test).detection;
  const double ds = t.heads2.sentence.all.scores.f1 - t.heads3.sentence.all.scores.f1;
  const double da = t.heads2.abnormality.all.scores.f1 - t.heads3.abnormality.all.scores.f1;
  o.require(acc >= 0.90, "token accuracy " + fmt(acc));
  o.require(ds <= 0.02, "sentence F1 drop " + fmt(ds));
  o.require(da <= 0.02, "abnormal F1 drop " + fmt(da));
  o.note("token accuracy " + fmt(acc) + " over " + std::to_string(examples.size()) + " held-out sentences");
  o.note("F1 change sentence " + fmt(-ds) + " abnormal " + fmt(-da));
  o.note(std::to_string(r.log.epochs.size()) + " epochs, decoder " + std::to_string(model.decoder->config().layers) +
         "x" + std::to_string(model.decoder->config().model_dim));
  t.stage3 = std::move(r.model);
}

// ---- metrics ----

void metric_oracles(Outcome& o) {
  using metrics::Tokens;
  auto toks = [](const std::string& s) { return data::tokenize(s); };
  auto near = [&](double got, double want, const std::string& what) {
    o.require(std::abs(got - want) <= 1e-6, what + " = " + std::to_string(got) + " want " + std::to_string(want));
  };
  near(metrics::bleu(toks("the cat"), {toks("the cat sat")}, 1)[0], std::exp(1.0 - 1.5), "BLEU-1");
  near(metrics::rouge_l(toks("a b c d"), toks("a c d")), 6.0 / 7.0, "ROUGE-L");
  near(metrics::meteor(toks("the heart is not enlarged"), toks("the heart is not enlarged")), 0.996, "METEOR identity");
  const auto t = toks("a b c d e f");
  const Tokens rev(t.rbegin(), t.rend());
  const auto d = metrics::meteor_detail(rev, t);
  near(d.penalty, 0.5, "METEOR reversed penalty");
  near(d.score, d.fmean / 2, "METEOR reversed score");

  metrics::DiseaseLabelSet p, g;
  std::vector<metrics::DiseaseLabelSet> pred, gold;
  for (auto [pp, gg] : std::vector<std::pair<bool, bool>>{{1, 1}, {1, 1}, {1, 1}, {1, 0}, {0, 1}, {0, 1}}) {
    p = {};
    g = {};
    p.labels[0] = pp ? metrics::Mention::positive : metrics::Mention::negative;
    g.labels[0] = gg ? metrics::Mention::positive : metrics::Mention::unmentioned;
    pred.push_back(p);
    gold.push_back(g);
  }
  const auto counted = metrics::ce_scores(pred, gold);
  near(counted.micro.precision, 0.75, "CE precision");
  near(counted.micro.recall, 0.6, "CE recall");
  near(counted.micro.f1, 2.0 / 3.0, "CE F1");

  nn::Rng rng(21);
  int exact = 0;
  for (int corpus = 0; corpus < 50; ++corpus) {
    std::vector<metrics::DiseaseLabelSet> pr(20), gl(20);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < 20; ++i)
      for (std::size_t l = 0; l < metrics::kNumDiseaseLabels; ++l) {
        pr[i].labels[l] = static_cast<metrics::Mention>(rng.below(3));
        gl[i].labels[l] = static_cast<metrics::Mention>(rng.below(3));
        const bool a = pr[i].labels[l] == metrics::Mention::positive, b = gl[i].labels[l] == metrics::Mention::positive;
        tp += a && b;
        fp += a && !b;
        fn += !a && b;
      }
    const double precision = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    const double recall = tp + fn ? double(tp) / double(tp + fn) : 0.0;
    const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    exact += metrics::ce_scores(pr, gl).micro.f1 == f1;
  }
  o.require(exact == 50, "CE brute force " + std::to_string(exact) + "/50");
  o.note("CE micro-F1 exact on " + std::to_string(exact) + "/50 random corpora");
}

// ---- IoU ----

void iou_exhaustive(Outcome& o) {
  constexpr int N = 16;
  struct Interval {
    int lo, hi;
  };
  std::vector<Interval> iv;
  for (int lo = 0; lo <= N; ++lo)
    for (int hi = lo + 1; hi <= N; ++hi) iv.push_back({lo, hi});
  const std::size_t n = iv.size();

  // unit cells shared by two intervals, counted cell by cell
  std::vector<int> shared(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      int c = 0;
      for (int cell = 0; cell < N; ++cell)
        c += cell >= iv[i].lo && cell < iv[i].hi && cell >= iv[j].lo && cell < iv[j].hi;
      shared[i * n + j] = c;
    }

  // literal 2-D pixel counting on a sample of pairs cross-checks the table
  nn::Rng rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto ax = iv[rng.below(n)], ay = iv[rng.below(n)], bx = iv[rng.below(n)], by = iv[rng.below(n)];
    int inter = 0, uni = 0;
    for (int x = 0; x < N; ++x)
      for (int y = 0; y < N; ++y) {
        const bool in_a = x >= ax.lo && x < ax.hi && y >= ay.lo && y < ay.hi;
        const bool in_b = x >= bx.lo && x < bx.hi && y >= by.lo && y < by.hi;
        inter += in_a && in_b;
        uni += in_a || in_b;
      }
    const double got = features::iou({double(ax.lo), double(ay.lo), double(ax.hi), double(ay.hi)},
                                     {double(bx.lo), double(by.lo), double(bx.hi), double(by.hi)});
    o.require(std::abs(got - double(inter) / uni) <= 1e-9, "pixel sample");
    if (!o.pass) return;
  }

  std::vector<data::Box> boxes;
  std::vector<std::pair<std::size_t, std::size_t>> index;
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y) {
      boxes.push_back({double(iv[x].lo), double(iv[y].lo), double(iv[x].hi), double(iv[y].hi)});
      index.emplace_back(x, y);
    }
  double worst = 0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < boxes.size(); ++a) {
    const auto [ax, ay] = index[a];
    const int area_a = (iv[ax].hi - iv[ax].lo) * (iv[ay].hi - iv[ay].lo);
    for (std::size_t b = 0; b < boxes.size(); ++b) {
      const auto [bx, by] = index[b];
      const int inter = shared[ax * n + bx] * shared[ay * n + by];
      const int area_b = (iv[bx].hi - iv[bx].lo) * (iv[by].hi - iv[by].lo);
      const double want = double(inter) / double(area_a + area_b - inter);
      worst = std::max(worst, std::abs(features::iou(boxes[a], boxes[b]) - want));
    }
    pairs += boxes.size();
  }
  o.require(worst <= 1e-9, "max abs error " + std::to_string(worst));
  o.note(std::to_string(pairs) + " box pairs, max abs error " + std::to_string(worst));
}

// ---- prompts ----

void prompt_goldens(Outcome& o) {
  prompts::RegionFlags flags;
  flags.regions.assign(data::kNumRegions, {});
  auto& arch = flags.regions[*data::RegionVocabulary::builtin().index_of("aortic arch")];
  arch.selected = arch.abnormal = true;
  const auto c = prompts::convert_prompts(flags, data::RegionVocabulary::builtin());
  o.require(c.prompts.abnormality == std::vector<std::string>{"The aortic arch is definitely abnormal."},
            "aortic arch abnormality prompt");

  const auto f = cxr::testing::fixture();
  int matched = 0;
  for (const char* preset : service::kPresetNames) {
    const auto doc = llm::assemble_prompt(f.input, service::AblationSpec::preset(preset).prompt_mask());
    const auto golden = cxr::testing::read_file(cxr::testing::golden_path(preset));
    const bool ok = !golden.empty() && doc.text() == golden;
    o.require(ok, std::string("golden ") + preset);
    matched += ok;
  }
  o.note(std::to_string(matched) + "/6 golden documents match");
}

// ---- end to end ----

void end_to_end(const Corpus& c, const Trained& t, Outcome& o) {
  o.require(t.stage3.has_value(), "stage-3 model available");
  if (!t.stage3) return;
  const service::Pipeline pipeline(*t.stage3);
  const auto& regions = data::RegionVocabulary::builtin();

  auto run_all = [&](const char* preset) {
    std::vector<service::GenerateResult> out;
    for (const auto& s : c.test.samples) {
      service::GenerateRequest req;
      req.sample_id = s.sample_id;
      req.ablation = service::AblationSpec::preset(preset);
      out.push_back(pipeline.generate(s, req));
    }
    return out;
  };
  auto serialize = [&](const std::vector<service::GenerateResult>& rs) {
    std::string s;
    for (const auto& r : rs) s += service::generate_json(r, regions).dump() + "\n";
    return s;
  };

  const auto f1 = run_all("f");
  const auto f2 = run_all("f");
  o.require(serialize(f1) == serialize(f2), "byte-identical rerun");

  std::size_t set_ok = 0, filtered = 0;
  for (const auto& r : f1) {
    std::set<std::string> sections, selected;
    for (const auto& s : r.report.sections) sections.insert(s.region_name);
    std::size_t n_selected = 0;
    for (std::size_t i = 0; i < data::kNumRegions; ++i)
      if (r.conversion.selected[i]) {
        selected.insert(regions.name(i));
        ++n_selected;
      }
    set_ok += sections == selected;
    const auto* sent = r.document.find(llm::kSentencesHeader);
    filtered += r.document.find(llm::kAnatomyHeader) != nullptr && sent && sent->lines.size() == n_selected;
  }
  o.require(set_ok == f1.size(), "section set = P1 set on " + std::to_string(set_ok) + "/" + std::to_string(f1.size()));
  o.require(filtered == f1.size(), "preset f prompt-filtered on " + std::to_string(filtered));

  const auto b = run_all("b");
  std::size_t full = 0;
  for (const auto& r : b) {
    const auto* sent = r.document.find(llm::kSentencesHeader);
    full += r.report.sections.size() == data::kNumRegions && sent && sent->lines.size() == data::kNumRegions &&
            r.document.find(llm::kAnatomyHeader) == nullptr;
  }
  o.require(full == b.size(), "preset b carries all 29 on " + std::to_string(full));
  o.note(std::to_string(f1.size()) + " test samples; section set = P1 set on " + std::to_string(set_ok) +
         "; b full on " + std::to_string(full));
}

// ---- checkpoint ----

std::vector<nn::Tensor> values(train::ModelBundle& m) {
  std::vector<nn::Tensor> out;
  for (auto* p : m.parameters()) out.push_back(p->value);
  return out;
}

bool same_bits(const nn::Tensor& a, const nn::Tensor& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * std::size_t(a.size())) == 0;
}

void checkpoint_contract(Trained& t, Outcome& o) {
  auto model = t.stage3 ? *t.stage3 : train::ModelBundle::fresh(3, data::RegionVocabulary::builtin());
  const auto dir = std::filesystem::temp_directory_path() / "cxr_acceptance";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto& regions = data::RegionVocabulary::builtin();

  train::save_model(dir / "m.ckpt", model);
  auto loaded = train::load_model(dir / "m.ckpt", regions, train::HashPolicy::error).model;
  const auto a = values(model), b = values(loaded);
  std::size_t exact = 0, scalars = 0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    exact += same_bits(nn::round_to_float32(a[i]), b[i]);
    scalars += std::size_t(a[i].size());
  }
  o.require(a.size() == b.size() && exact == a.size(), "float32-exact tensors " + std::to_string(exact));
  train::save_model(dir / "m2.ckpt", loaded);
  const auto bytes = cxr::testing::read_file(dir / "m.ckpt");
  o.require(bytes == cxr::testing::read_file(dir / "m2.ckpt"), "re-save byte identical");

  auto rejected = [&](const std::string& name, const std::string& content) {
    std::ofstream(dir / name, std::ios::binary) << content;
    try {
      (void)train::load_model(dir / name, regions);
    } catch (const CheckpointError&) {
      return true;
    }
    return false;
  };
  int corrupt = 0;
  std::string flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x10;
  corrupt += rejected("trunc.ckpt", bytes.substr(0, bytes.size() - 9));
  corrupt += rejected("flip.ckpt", flipped);
  corrupt += rejected("header.ckpt", "{oops\n" + bytes.substr(bytes.find('\n') + 1));
  corrupt += rejected("empty.ckpt", "");
  o.require(corrupt == 4, "corrupt files rejected " + std::to_string(corrupt) + "/4");

  // a layout the file cannot satisfy leaves the target untouched
  auto target = train::ModelBundle::fresh(99, regions);
  nn::write_checkpoint(dir / "h.ckpt", "x", {}, target.sentence_head.describe());
  const auto data = nn::read_checkpoint(dir / "h.ckpt");
  auto other = train::ModelBundle::fresh(98, regions);
  auto layout = other.sentence_head.describe();
  auto params = other.sentence_head.parameters();
  layout.push_back(other.abnormal_head.describe()[0]);
  params.push_back(other.abnormal_head.parameters()[0]);
  const auto before = values(other);
  bool threw = false;
  try {
    nn::restore_parameters(data, layout, params);
  } catch (const CheckpointError&) {
    threw = true;
  }
  const auto after = values(other);
  bool untouched = before.size() == after.size();
  for (std::size_t i = 0; untouched && i < before.size(); ++i) untouched = same_bits(before[i], after[i]);
  o.require(threw && untouched, "partial restore rejected without side effects");
  o.note(std::to_string(scalars) + " scalars round-tripped; " + std::to_string(corrupt) + "/4 corrupt files rejected");
  std::filesystem::remove_all(dir);
}

}  // namespace

int main() {
  std::cout << "acceptance run" << std::endl;
  report("gradient suite", gradient_suite);

  Corpus corpus;
  Trained trained;
  report("stage-2 heads", [&](Outcome& o) {
    corpus = make_corpus();
    stage_two(corpus, trained, o);
  });
  report("stage-3 decoder", [&](Outcome& o) { stage_three(corpus, trained, o); });
  report("metric oracles", metric_oracles);
  report("iou exhaustive", iou_exhaustive);
  report("prompt goldens", prompt_goldens);
  report("end-to-end mock pipeline", [&](Outcome& o) { end_to_end(corpus, trained, o); });
  report("checkpoint round trip", [&](Outcome& o) { checkpoint_contract(trained, o); });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures;
}
