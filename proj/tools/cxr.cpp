#include <csignal>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "cxr/error.hpp"
#include "cxr/service/api.hpp"
#include "cxr/service/config.hpp"
#include "cxr/service/evaluation.hpp"

#include <httplib.h>

using namespace cxr;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::string checkpoint;
  std::vector<std::string> data;
  std::string preset = "f";
  std::string backend;
  std::string endpoint;
  std::string model;
  long timeout_ms = 0;
};

service::ServiceConfig resolve(const Common& c) {
  service::ServiceConfig cfg;
  if (!c.config.empty()) cfg = service::ServiceConfig::load(c.config);
  if (!c.checkpoint.empty()) cfg.checkpoint = c.checkpoint;
  if (!c.data.empty()) {
    cfg.datasets.clear();
    for (const auto& d : c.data) cfg.datasets.emplace_back(d);
  }
  if (!c.backend.empty()) cfg.backend = c.backend;
  if (!c.endpoint.empty()) {
    cfg.remote.endpoint = c.endpoint;
    cfg.remote_configured = true;
  }
  if (!c.model.empty()) {
    cfg.remote.model = c.model;
    cfg.remote_configured = true;
  }
  if (c.timeout_ms > 0) cfg.remote.timeout = std::chrono::milliseconds(c.timeout_ms);
  if (cfg.backend == "remote") cfg.remote_configured = true;
  if (cfg.checkpoint.empty()) throw UsageError("no checkpoint given (use --checkpoint or a config file)");
  if (cfg.datasets.empty()) throw UsageError("no dataset given (use --data or a config file)");
  return cfg;
}

void add_common(CLI::App* app, Common& c, bool with_backend) {
  app->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("--checkpoint", c.checkpoint, "model checkpoint");
  app->add_option("--data", c.data, "dataset file(s)");
  if (with_backend) {
    app->add_option("--backend", c.backend, "mock or remote")->check(CLI::IsMember({"mock", "remote"}));
    app->add_option("--endpoint", c.endpoint, "chat-completion URL for the remote backend");
    app->add_option("--model", c.model, "remote model name");
    app->add_option("--timeout-ms", c.timeout_ms, "remote request timeout");
  }
}

train::ModelBundle load_bundle(const std::filesystem::path& path) {
  auto loaded = train::load_model(path, data::RegionVocabulary::builtin(), train::HashPolicy::warn);
  for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << "\n";
  return std::move(loaded.model);
}

std::vector<data::DatasetSplit> load_splits(const std::vector<std::filesystem::path>& paths) {
  std::vector<data::DatasetSplit> out;
  for (const auto& p : paths) {
    if (!std::filesystem::exists(p)) throw Error("dataset not found: " + p.string());
    out.push_back(data::load_dataset(p));
  }
  return out;
}

std::optional<llm::RemoteConfig> remote_of(const service::ServiceConfig& cfg) {
  if (!cfg.remote_configured) return std::nullopt;
  return cfg.remote;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Region-guided chest X-ray report generation"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "write a synthetic dataset split");
  std::size_t n = 0;
  std::uint64_t seed = 7;
  double abnormal_rate = 0.2, silent_rate = 0.3, noise = 0.1;
  std::string split_name = "train", prefix, out_path;
  synth->add_option("--n", n, "number of samples")->required()->check(CLI::PositiveNumber);
  synth->add_option("--seed", seed, "generator seed");
  synth->add_option("--abnormal-rate", abnormal_rate)->check(CLI::Range(0.0, 1.0));
  synth->add_option("--silent-rate", silent_rate)->check(CLI::Range(0.0, 1.0));
  synth->add_option("--noise", noise, "feature noise sigma");
  synth->add_option("--split", split_name)->check(CLI::IsMember({"train", "validation", "test"}));
  synth->add_option("--prefix", prefix, "sample id prefix");
  synth->add_option("--out", out_path, "output JSONL")->required();

  // train
  auto* trainc = app.add_subcommand("train", "run one training stage");
  train::TrainConfig tc;
  std::string train_path, val_path, init_path, ckpt_out, log_path, train_config, loss_preset;
  bool no_l1 = false, no_l2 = false;
  trainc->add_option("--stage", tc.stage)->required()->check(CLI::Range(1, 3));
  trainc->add_option("--train", train_path, "training split");
  trainc->add_option("--val", val_path, "validation split");
  trainc->add_option("--init", init_path, "checkpoint to continue from (required for stage 3)");
  trainc->add_option("--out", ckpt_out, "checkpoint to write")->required();
  trainc->add_option("--train-config", train_config, "JSON training config")->check(CLI::ExistingFile);
  trainc->add_option("--epochs", tc.epochs);
  trainc->add_option("--batch-size", tc.batch_size);
  trainc->add_option("--head-lr", tc.head_learning_rate);
  trainc->add_option("--decoder-lr", tc.decoder_learning_rate);
  trainc->add_option("--weight-decay", tc.weight_decay);
  trainc->add_option("--decay", tc.decay_factor, "learning-rate factor on plateau");
  trainc->add_option("--patience", tc.patience);
  trainc->add_option("--seed", tc.seed);
  trainc->add_option("--preset", loss_preset, "take L1/L2 from an ablation preset")
      ->check(CLI::IsMember({"a", "b", "c", "d", "e", "f"}));
  trainc->add_flag("--no-l1", no_l1, "disable the sentence-detection loss");
  trainc->add_flag("--no-l2", no_l2, "disable the abnormality loss");
  trainc->add_option("--decoder-layers", tc.decoder.layers);
  trainc->add_option("--decoder-heads", tc.decoder.heads);
  trainc->add_option("--decoder-dim", tc.decoder.model_dim);
  trainc->add_option("--decoder-ff", tc.decoder.feedforward_dim);
  trainc->add_option("--max-len", tc.decoder.max_len);
  trainc->add_option("--log", log_path, "write the training log as JSONL");

  // eval
  auto* evalc = app.add_subcommand("eval", "score generated reports against references");
  Common ec;
  service::EvalOptions eo;
  std::string eval_out;
  add_common(evalc, ec, false);
  evalc->add_option("--preset", ec.preset)->check(CLI::IsMember({"a", "b", "c", "d", "e", "f"}));
  evalc->add_option("--jitter", eo.jitter, "detector box jitter");
  evalc->add_option("--detector-seed", eo.detector_seed);
  evalc->add_option("--limit", eo.limit, "score only the first N samples");
  evalc->add_option("--out", eval_out, "write the summary JSON here");

  // generate
  auto* gen = app.add_subcommand("generate", "generate a report for one sample");
  Common gc;
  std::string sample_id, history, indication, reason;
  std::vector<std::string> keep_regions;
  bool as_json = false;
  add_common(gen, gc, true);
  gen->add_option("--sample", sample_id)->required();
  gen->add_option("--preset", gc.preset)->check(CLI::IsMember({"a", "b", "c", "d", "e", "f"}));
  auto* h = gen->add_option("--history", history);
  auto* ind = gen->add_option("--indication", indication);
  auto* rsn = gen->add_option("--reason", reason);
  gen->add_option("--regions", keep_regions, "only these regions may appear (overrides the sentence head)");
  gen->add_flag("--json", as_json, "print the full response document");

  // serve
  auto* serve = app.add_subcommand("serve", "run the HTTP API");
  Common sc;
  std::string host;
  int port = -1;
  add_common(serve, sc, true);
  serve->add_option("--host", host);
  serve->add_option("--port", port)->check(CLI::Range(0, 65535));

  // ablate
  auto* ablate = app.add_subcommand("ablate", "compare ablation presets");
  Common ac;
  std::vector<std::string> presets;
  std::string ablate_sample, ablate_out;
  std::size_t ablate_limit = 0;
  add_common(ablate, ac, true);
  ablate->add_option("--preset", presets, "presets to run (default a..f)")
      ->check(CLI::IsMember({"a", "b", "c", "d", "e", "f"}));
  ablate->add_option("--sample", ablate_sample, "print each preset's report for this sample");
  ablate->add_option("--limit", ablate_limit, "use only the first N samples");
  ablate->add_option("--out", ablate_out, "write the comparison JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) {
      data::SyntheticOptions o;
      o.noise_sigma = noise;
      o.split = data::split_from_string(split_name);
      o.id_prefix = prefix;
      data::save_dataset(out_path, data::generate_synthetic(n, seed, abnormal_rate, silent_rate, o));
      std::cout << "wrote " << n << " samples to " << out_path << "\n";
      return 0;
    }

    if (trainc->parsed()) {
      if (!train_config.empty()) {
        std::ifstream in(train_config);
        auto from_file = train::TrainConfig::from_json(nlohmann::json::parse(in));
        from_file.stage = tc.stage;
        tc = from_file;
      }
      if (!loss_preset.empty()) tc.losses = service::AblationSpec::preset(loss_preset).loss_mask();
      if (no_l1) tc.losses.sentence = false;
      if (no_l2) tc.losses.abnormal = false;
      data::DatasetSplit tr, va;
      if (tc.stage > 1) {
        if (train_path.empty() || val_path.empty()) throw UsageError("--train and --val are required for stages 2 and 3");
        tr = data::load_dataset(train_path, data::RegionVocabulary::builtin(), data::SplitName::train);
        va = data::load_dataset(val_path, data::RegionVocabulary::builtin(), data::SplitName::validation);
        data::check_disjoint({&tr, &va});
      }
      std::optional<train::ModelBundle> prior;
      if (!init_path.empty()) prior = load_bundle(init_path);
      if (tc.stage == 3 && !prior) throw UsageError("stage 3 needs --init with a stage-2 checkpoint");
      const auto result = train::run_stage(tc, tr, va, prior, data::RegionVocabulary::builtin(),
                                           [](const train::EpochRecord& e) {
                                             std::cerr << "epoch " << e.epoch << "  train " << e.train_loss << "  val "
                                                       << e.validation_loss << "  F1 " << e.sentence_f1 << "/"
                                                       << e.abnormal_f1 << "  lr " << e.head_learning_rate << "\n";
                                           });
      if (!result.log.notice.empty()) std::cerr << result.log.notice << "\n";
      train::save_model(ckpt_out, result.model);
      if (!log_path.empty()) write_file(log_path, result.log.to_jsonl());
      std::cout << "stage " << tc.stage << " done (" << result.log.stop_reason << ", best epoch "
                << result.log.best_epoch << "); checkpoint " << ckpt_out << "\n";
      return 0;
    }

    if (evalc->parsed()) {
      const auto cfg = resolve(ec);
      service::Pipeline pipeline(load_bundle(cfg.checkpoint));
      eo.ablation = service::AblationSpec::preset(ec.preset);
      if (!ec.config.empty() && evalc->count("--jitter") == 0) eo.jitter = cfg.jitter;
      if (!ec.config.empty() && evalc->count("--detector-seed") == 0) eo.detector_seed = cfg.detector_seed;
      for (const auto& split : load_splits(cfg.datasets)) {
        std::cout << "== " << data::to_string(split.name) << "\n";
        const auto ev = service::evaluate_corpus(pipeline, split, eo);
        std::cout << ev.table();
        if (!eval_out.empty()) write_file(eval_out, ev.to_json().dump(2) + "\n");
      }
      return 0;
    }

    if (gen->parsed()) {
      const auto cfg = resolve(gc);
      service::Pipeline pipeline(load_bundle(cfg.checkpoint), data::RegionVocabulary::builtin(),
                                 prompts::PromptTemplates::builtin(), remote_of(cfg));
      const auto splits = load_splits(cfg.datasets);
      const data::Sample* sample = nullptr;
      for (const auto& s : splits) {
        if ((sample = s.find(sample_id))) break;
      }
      if (!sample) throw Error("unknown sample '" + sample_id + "'");
      service::GenerateRequest req;
      req.sample_id = sample_id;
      req.ablation = service::AblationSpec::preset(gc.preset);
      req.backend = service::backend_from_string(cfg.backend);
      if (h->count() || ind->count() || rsn->count()) {
        data::ClinicalContext ctx = sample->clinical_context;
        if (h->count()) ctx.history = history;
        if (ind->count()) ctx.indication = indication;
        if (rsn->count()) ctx.reason_for_exam = reason;
        req.context = ctx;
      }
      if (!keep_regions.empty()) {
        std::vector<bool> mask(data::kNumRegions, false);
        for (const auto& name : keep_regions) {
          const auto id = data::RegionVocabulary::builtin().index_of(name);
          if (!id) throw UsageError("unknown region '" + name + "'");
          mask[*id] = true;
        }
        req.region_mask = mask;
      }
      const auto result = pipeline.generate(*sample, req);
      if (as_json) std::cout << service::generate_json(result, pipeline.regions()).dump(2) << "\n";
      else std::cout << result.report.raw_text;
      return 0;
    }

    if (serve->parsed()) {
      auto cfg = resolve(sc);
      if (!host.empty()) cfg.host = host;
      if (port >= 0) cfg.port = port;
      service::Pipeline pipeline(load_bundle(cfg.checkpoint), data::RegionVocabulary::builtin(),
                                 prompts::PromptTemplates::builtin(), remote_of(cfg));
      service::Api api(pipeline, load_splits(cfg.datasets),
                       {service::backend_from_string(cfg.backend), cfg.jitter, cfg.detector_seed});
      httplib::Server server;
      api.mount(server);
      std::cerr << "listening on http://" << cfg.host << ":" << cfg.port << "\n";
      if (!server.listen(cfg.host, cfg.port)) throw Error("cannot listen on " + cfg.host + ":" + std::to_string(cfg.port));
      return 0;
    }

    if (ablate->parsed()) {
      const auto cfg = resolve(ac);
      service::Pipeline pipeline(load_bundle(cfg.checkpoint), data::RegionVocabulary::builtin(),
                                 prompts::PromptTemplates::builtin(), remote_of(cfg));
      std::vector<service::AblationSpec> specs;
      if (presets.empty()) {
        for (const auto* p : service::kPresetNames) specs.push_back(service::AblationSpec::preset(p));
      } else {
        for (const auto& p : presets) specs.push_back(service::AblationSpec::preset(p));
      }
      const auto splits = load_splits(cfg.datasets);
      if (!ablate_sample.empty()) {
        const data::Sample* sample = nullptr;
        for (const auto& s : splits) {
          if ((sample = s.find(ablate_sample))) break;
        }
        if (!sample) throw Error("unknown sample '" + ablate_sample + "'");
        nlohmann::json all = nlohmann::json::array();
        for (const auto& spec : specs) {
          service::GenerateRequest req;
          req.sample_id = ablate_sample;
          req.ablation = spec;
          req.backend = service::backend_from_string(cfg.backend);
          const auto r = pipeline.generate(*sample, req);
          std::cout << "== preset " << spec.name << " (" << r.report.sections.size() << " sections)\n"
                    << r.report.raw_text;
          all.push_back(service::generate_json(r, pipeline.regions()));
        }
        if (!ablate_out.empty()) write_file(ablate_out, all.dump(2) + "\n");
        return 0;
      }
      if (cfg.backend == "remote") throw UsageError("corpus ablation runs on the mock backend; pass --sample for remote");
      const auto& split = splits.back();
      const auto rows = service::run_ablation(pipeline, split, specs, ablate_limit);
      std::cout << service::ablation_table(rows);
      if (!ablate_out.empty()) write_file(ablate_out, service::ablation_json(rows).dump(2) + "\n");
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
