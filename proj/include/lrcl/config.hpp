#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "lrcl/data.hpp"
#include "lrcl/eval.hpp"
#include "lrcl/training.hpp"

namespace lrcl {

/// Where experiment data comes from. With source "synth" the unlabeled and
/// train sets share one generated dataset and validation/test are generated
/// with their own seeds from the same class prototypes. With source "files"
/// each set is read from a canonical dataset file.
struct DataConfig {
  std::string source = "synth";
  SynthConfig synth;
  std::uint64_t seed = 0;
  std::size_t validation_windows_per_class = 30;
  std::size_t test_windows_per_class = 100;
  std::string unlabeled_path;
  std::string train_path;
  std::string validation_path;
  std::string test_path;
  bool standardize = false;
  std::size_t labels_per_class = 0;  // 0 keeps every label
};

struct EvalConfig {
  InputPolicy side = InputPolicy::Left;
  std::vector<std::size_t> counts{1, 5, 10, 50, 100};
  std::size_t repeats = 5;
  std::vector<std::size_t> batch_sizes{16, 32, 64, 128};
  std::vector<std::size_t> latent_sizes{32, 64, 96, 128};
  std::size_t jobs = 1;
};

struct OutputConfig {
  std::string dir = "lrcl_out";
};

struct RunConfig {
  DataConfig data;
  PretrainConfig pretrain;
  FinetuneConfig finetune;
  EvalConfig eval;
  OutputConfig output;
};

/// Strict parse: unknown sections or keys and wrongly typed values throw
/// ConfigError naming the offending key. Missing keys keep their defaults.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
/// Every key with its effective value.
nlohmann::json to_json(const RunConfig& c);

/// One line per key, "section.key = default".
std::string config_help();

/// Builds the four experiment sets described by the data section.
ExperimentData load_experiment_data(const DataConfig& c);

}  // namespace lrcl
