#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "data/cohort.hpp"
#include "model/baselines.hpp"
#include "model/mortality.hpp"
#include "train/pretrain.hpp"

namespace vitalattn {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 32;
  double learning_rate = 1e-3;
  uint64_t seed = 7;
  bool fine_tune_encoder = true;
  int folds = 10;
};

struct LogisticTrainConfig {
  int epochs = 300;
  double learning_rate = 0.05;  // full-batch adaptive steps
  uint64_t seed = 7;
};

struct LstmTrainConfig {
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 1e-3;
  uint64_t seed = 7;
};

// Stage two: cross-entropy training of the mortality model on a normalized
// cohort; the encoder is updated only when cfg.fine_tune_encoder is set.
LossCurve train_stage2(MortalityModel& model, const Cohort& train, const TrainConfig& cfg);

LossCurve train_logistic(LogisticModel& model, const Cohort& train,
                         const LogisticTrainConfig& cfg);
LossCurve train_lstm(LstmFusionModel& model, const Cohort& train, const LstmTrainConfig& cfg);

// Batch inference over a cohort (no tape).
std::vector<double> predict_cohort(const MortalityModel& model, const Cohort& cohort);
std::vector<double> predict_cohort(const LogisticModel& model, const Cohort& cohort);
std::vector<double> predict_cohort(const LstmFusionModel& model, const Cohort& cohort);

enum class ModelKind { Attention, Logistic, LstmFusion };

std::string model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

struct FoldResult {
  int fold = 0;
  std::vector<std::string> stay_ids;
  std::vector<double> probabilities;
  std::vector<int> labels;
  double auroc = 0.0;
  double auprc = 0.0;
  std::string checkpoint_ref;  // set when CvOptions::checkpoint_dir is given
};

struct CvOptions {
  uint64_t seed = 7;
  // when false, the cohort must arrive globally preprocessed (Normalized) and
  // no per-fold refit happens — the global variant for comparison studies
  bool per_fold_preprocessing = true;
  int mice_rounds = 10;
  std::string checkpoint_dir;  // per-fold model checkpoints, empty = skip
  MortalityConfig attention_model;
  LstmConfig lstm_model;
  PretrainConfig pretrain;
  TrainConfig stage2;
  LogisticTrainConfig logistic;
  LstmTrainConfig lstm;
};

struct CvResult {
  ModelKind kind = ModelKind::Attention;
  std::vector<FoldResult> folds;
  double auroc_mean = 0.0, auroc_std = 0.0;
  double auprc_mean = 0.0, auprc_std = 0.0;
};

// 10-fold protocol: stratified folds, per-fold imputation/scaling fit on the
// train split only, pretraining windows from the train split (attention),
// then supervised training and held-out scoring. Nothing derived from a test
// record reaches the trained model.
CvResult run_cv(const Cohort& cohort, ModelKind kind, const CvOptions& opts);

}  // namespace vitalattn
