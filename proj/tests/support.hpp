#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>

#include "cxr/data/dataset.hpp"
#include "cxr/nn/tensor.hpp"
#include "cxr/train/trainer.hpp"

namespace cxr::testing {

inline nn::Tensor mat(std::initializer_list<std::initializer_list<double>> rows) {
  nn::Tensor t(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) t(r, c++) = v;
    ++r;
  }
  return t;
}

inline nn::Tensor random_tensor(Eigen::Index rows, Eigen::Index cols, nn::Rng& rng, double scale = 1.0) {
  nn::Tensor t(rows, cols);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = scale * rng.normal();
  return t;
}

inline std::filesystem::path test_dir() { return CXR_TEST_DIR; }

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("cxr_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

struct TinyCorpus {
  data::DatasetSplit train;
  data::DatasetSplit validation;
  data::DatasetSplit test;
};

inline const TinyCorpus& tiny_corpus() {
  static const TinyCorpus c = [] {
    TinyCorpus out;
    data::SyntheticOptions o;
    out.train = data::generate_synthetic(40, 7, 0.2, 0.3, o);
    o.split = data::SplitName::validation;
    out.validation = data::generate_synthetic(10, 8, 0.2, 0.3, o);
    o.split = data::SplitName::test;
    out.test = data::generate_synthetic(6, 9, 0.2, 0.3, o);
    return out;
  }();
  return c;
}

// Small stage-3 model trained once per test binary; narrow decoder so it
// trains in seconds.
inline const train::ModelBundle& tiny_model() {
  static const train::ModelBundle m = [] {
    const auto& c = tiny_corpus();
    train::TrainConfig cfg;
    cfg.stage = 2;
    cfg.epochs = 3;
    auto s2 = train::run_stage(cfg, c.train, c.validation);
    cfg.stage = 3;
    cfg.epochs = 12;
    cfg.decoder.model_dim = 32;
    cfg.decoder.heads = 4;
    cfg.decoder.feedforward_dim = 64;
    cfg.decoder.max_len = 24;
    cfg.decoder_learning_rate = 3e-3;
    return train::run_stage(cfg, c.train, c.validation, s2.model).model;
  }();
  return m;
}

}  // namespace cxr::testing
