#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "data/synth.hpp"
#include "eval/fidelity.hpp"
#include "train/trainer.hpp"

namespace vitalattn {

inline constexpr const char* kToolVersion = "0.1.0";

struct DataSpec {
  enum class Source { Synth, Csv } source = Source::Synth;
  SynthSpec synth;
  std::string csv_path;
};

struct ExperimentConfig {
  DataSpec data;

  int mice_rounds = 10;
  bool undersample = true;
  bool per_fold_preprocessing = true;

  std::vector<ModelKind> models = {ModelKind::Attention, ModelKind::Logistic};
  MortalityConfig attention_model;
  LstmConfig lstm_model;

  PretrainConfig pretrain;
  TrainConfig train;
  LogisticTrainConfig logistic_train;
  LstmTrainConfig lstm_train;

  std::vector<std::string> explain_methods = {"attention", "weight"};
  int shap_samples = 4096;

  bool fidelity_enabled = true;
  std::vector<double> fidelity_fractions = {0.05, 0.10, 0.20};
  int fidelity_draws = 10;
  SubstitutionMode fidelity_substitution = SubstitutionMode::Uniform;

  bool case_study_enabled = false;
  bool case_study_first_positive = false;
  std::vector<std::string> case_study_stays;
  int case_study_top_k = 20;

  uint64_t seed = 7;
};

// Strict parse: unknown keys anywhere are rejected, all fields validated
// before any work happens. Errors carry the offending key path.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc);
ExperimentConfig load_experiment_config(const std::string& path);

// FNV-1a 64 over the canonical dump of the parsed config document.
std::string config_hash(const nlohmann::json& doc);

nlohmann::json artifact_stamp(const std::string& hash, uint64_t seed);

}  // namespace vitalattn
