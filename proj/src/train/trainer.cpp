#include "train/trainer.hpp"

#include <numeric>

#include "common/errors.hpp"
#include "core/optimizer.hpp"
#include "core/rng.hpp"
#include "data/preprocess.hpp"
#include "eval/metrics.hpp"
#include "model/checkpoint.hpp"
#include "train/kfold.hpp"

namespace vitalattn {

namespace {

Tensor batch_labels(const std::vector<const PatientRecord*>& batch) {
  std::vector<double> values(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) values[i] = batch[i]->label;
  return Tensor::from_values({static_cast<int64_t>(batch.size())}, std::move(values));
}

void check_two_classes(const Cohort& train) {
  // a single record is a legitimate overfit-sanity input; larger one-class
  // splits are degenerate
  if (train.records.size() > 1 && (train.count_label(0) == 0 || train.count_label(1) == 0))
    throw ContractError("training split contains a single class");
  if (train.records.empty()) throw ContractError("training split is empty");
}

std::vector<const PatientRecord*> gather_batch(const Cohort& cohort,
                                               const std::vector<int64_t>& order, size_t begin,
                                               size_t count) {
  std::vector<const PatientRecord*> batch(count);
  for (size_t i = 0; i < count; ++i) batch[i] = &cohort.records[order[begin + i]];
  return batch;
}

template <typename ForwardFn>
LossCurve minibatch_bce_training(const Cohort& train, int epochs, int batch_size, uint64_t seed,
                                 Adam& optimizer, ForwardFn&& forward_fn) {
  std::vector<int64_t> order(train.records.size());
  std::iota(order.begin(), order.end(), 0);
  LossCurve curve;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    Rng rng(Rng::mix(seed, static_cast<uint64_t>(epoch)));
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (size_t begin = 0; begin < order.size(); begin += batch_size) {
      const size_t count = std::min<size_t>(batch_size, order.size() - begin);
      const auto batch = gather_batch(train, order, begin, count);
      Tensor prob = forward_fn(batch);
      Tensor loss = bce_loss(prob, batch_labels(batch));
      backward(loss);
      optimizer.step();
      Tape::active().clear();
      epoch_loss += loss.item() * static_cast<double>(count);
    }
    curve.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return curve;
}

}  // namespace

LossCurve train_stage2(MortalityModel& model, const Cohort& train, const TrainConfig& cfg) {
  if (train.stage != CohortStage::Normalized)
    throw StateError("stage-two training requires a normalized cohort");
  check_two_classes(train);
  // frozen encoder params leave the tape entirely, skipping their backward
  std::vector<Tensor> encoder_params = model.encoder().params().tensors();
  if (!cfg.fine_tune_encoder)
    for (auto& t : encoder_params) t.set_requires_grad(false);
  Adam optimizer(model.trainable_params(cfg.fine_tune_encoder),
                 {.learning_rate = cfg.learning_rate});
  LossCurve curve = minibatch_bce_training(
      train, cfg.epochs, cfg.batch_size, cfg.seed, optimizer,
      [&](const std::vector<const PatientRecord*>& batch) { return model.forward(batch).prob; });
  if (!cfg.fine_tune_encoder)
    for (auto& t : encoder_params) t.set_requires_grad(true);
  return curve;
}

LossCurve train_logistic(LogisticModel& model, const Cohort& train,
                         const LogisticTrainConfig& cfg) {
  if (train.stage != CohortStage::Normalized)
    throw StateError("logistic training requires a normalized cohort");
  check_two_classes(train);
  Adam optimizer(model.params().tensors(), {.learning_rate = cfg.learning_rate});

  std::vector<const PatientRecord*> all(train.records.size());
  for (size_t i = 0; i < train.records.size(); ++i) all[i] = &train.records[i];
  Tensor x = batch_token_tensor(all);
  Tensor y = batch_labels(all);

  LossCurve curve;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Tensor prob = model.forward_values(x);
    Tensor penalty = mul_scalar(sum(mul(model.weight_tensor(), model.weight_tensor())),
                                model.l2_strength());
    Tensor loss = add(bce_loss(prob, y), penalty);
    backward(loss);
    optimizer.step();
    Tape::active().clear();
    curve.epoch_loss.push_back(loss.item());
  }
  return curve;
}

LossCurve train_lstm(LstmFusionModel& model, const Cohort& train, const LstmTrainConfig& cfg) {
  if (train.stage != CohortStage::Normalized)
    throw StateError("lstm training requires a normalized cohort");
  check_two_classes(train);
  Adam optimizer(model.params().tensors(), {.learning_rate = cfg.learning_rate});
  return minibatch_bce_training(
      train, cfg.epochs, cfg.batch_size, cfg.seed, optimizer,
      [&](const std::vector<const PatientRecord*>& batch) { return model.forward(batch); });
}

namespace {

template <typename Model>
std::vector<double> predict_cohort_impl(const Model& model, const Cohort& cohort) {
  NoGradGuard guard;
  std::vector<double> probs;
  probs.reserve(cohort.records.size());
  constexpr size_t kChunk = 256;
  for (size_t begin = 0; begin < cohort.records.size(); begin += kChunk) {
    const size_t count = std::min(kChunk, cohort.records.size() - begin);
    std::vector<const PatientRecord*> batch(count);
    for (size_t i = 0; i < count; ++i) batch[i] = &cohort.records[begin + i];
    if constexpr (std::is_same_v<Model, MortalityModel>) {
      Tensor prob = model.forward(batch).prob;
      for (size_t i = 0; i < count; ++i) probs.push_back(prob.value_at(i));
    } else {
      Tensor prob = model.forward(batch);
      for (size_t i = 0; i < count; ++i) probs.push_back(prob.value_at(i));
    }
  }
  return probs;
}

}  // namespace

std::vector<double> predict_cohort(const MortalityModel& model, const Cohort& cohort) {
  return predict_cohort_impl(model, cohort);
}
std::vector<double> predict_cohort(const LogisticModel& model, const Cohort& cohort) {
  return predict_cohort_impl(model, cohort);
}
std::vector<double> predict_cohort(const LstmFusionModel& model, const Cohort& cohort) {
  return predict_cohort_impl(model, cohort);
}

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Attention:
      return "attention";
    case ModelKind::Logistic:
      return "logistic";
    case ModelKind::LstmFusion:
      return "lstm_fusion";
  }
  return "unknown";
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "attention") return ModelKind::Attention;
  if (name == "logistic") return ModelKind::Logistic;
  if (name == "lstm_fusion") return ModelKind::LstmFusion;
  throw ConfigError("unknown model kind '" + name + "'");
}

CvResult run_cv(const Cohort& cohort, ModelKind kind, const CvOptions& opts) {
  if (opts.stage2.folds < 2) throw ContractError("cross-validation needs at least 2 folds");
  if (!opts.per_fold_preprocessing && cohort.stage != CohortStage::Normalized)
    throw StateError("global-preprocessing mode expects an already normalized cohort");
  if (opts.per_fold_preprocessing && cohort.stage != CohortStage::Raw)
    throw StateError("per-fold preprocessing expects a raw cohort");

  const auto folds = stratified_kfold(cohort, opts.stage2.folds, opts.seed);

  CvResult result;
  result.kind = kind;
  for (size_t f = 0; f < folds.size(); ++f) {
    const uint64_t fold_seed = Rng::mix(opts.seed, 0xf01d, f);
    Cohort train = subset_cohort(cohort, folds[f].train);
    Cohort test = subset_cohort(cohort, folds[f].test);

    if (opts.per_fold_preprocessing) {
      MiceImputer imputer(opts.mice_rounds);
      train = imputer.fit_transform(train);
      MinMaxScaler scaler;
      train = scaler.fit_transform(train);
      test = scaler.transform(imputer.transform(test));
    }

    FoldResult fold_result;
    fold_result.fold = static_cast<int>(f);
    for (const auto& rec : test.records) {
      fold_result.stay_ids.push_back(rec.stay_id);
      fold_result.labels.push_back(rec.label);
    }
    const auto checkpoint_path = [&]() -> std::string {
      if (opts.checkpoint_dir.empty()) return {};
      return opts.checkpoint_dir + "/" + model_kind_name(kind) + "_fold" + std::to_string(f) +
             ".ckpt.json";
    };

    switch (kind) {
      case ModelKind::Attention: {
        const auto windows = make_windows(train);
        VitalEncoder encoder(opts.attention_model.encoder, Rng::mix(fold_seed, 0xe2c));
        VitalDecoder decoder(opts.attention_model.encoder.dim, Rng::mix(fold_seed, 0xdec));
        PretrainConfig pre_cfg = opts.pretrain;
        pre_cfg.seed = Rng::mix(fold_seed, 0x97e);
        pretrain_stage1(encoder, decoder, windows, pre_cfg);

        MortalityModel model(opts.attention_model, Rng::mix(fold_seed, 0x30de1));
        model.encoder().params().load_values(encoder.params().entries());
        TrainConfig s2_cfg = opts.stage2;
        s2_cfg.seed = Rng::mix(fold_seed, 0x5743);
        train_stage2(model, train, s2_cfg);
        fold_result.probabilities = predict_cohort(model, test);
        if (const std::string path = checkpoint_path(); !path.empty()) {
          save_mortality_model(path, model);
          fold_result.checkpoint_ref = path;
        }
        break;
      }
      case ModelKind::Logistic: {
        LogisticModel model(Rng::mix(fold_seed, 0x1051));
        LogisticTrainConfig cfg = opts.logistic;
        cfg.seed = Rng::mix(fold_seed, 0x1052);
        train_logistic(model, train, cfg);
        fold_result.probabilities = predict_cohort(model, test);
        if (const std::string path = checkpoint_path(); !path.empty()) {
          save_logistic_model(path, model);
          fold_result.checkpoint_ref = path;
        }
        break;
      }
      case ModelKind::LstmFusion: {
        LstmFusionModel model(opts.lstm_model, Rng::mix(fold_seed, 0x15b3));
        LstmTrainConfig cfg = opts.lstm;
        cfg.seed = Rng::mix(fold_seed, 0x15b4);
        train_lstm(model, train, cfg);
        fold_result.probabilities = predict_cohort(model, test);
        if (const std::string path = checkpoint_path(); !path.empty()) {
          save_lstm_model(path, model);
          fold_result.checkpoint_ref = path;
        }
        break;
      }
    }

    fold_result.auroc = auroc(fold_result.probabilities, fold_result.labels);
    fold_result.auprc = auprc(fold_result.probabilities, fold_result.labels);
    result.folds.push_back(std::move(fold_result));
  }

  std::vector<double> aurocs, auprcs;
  for (const auto& fr : result.folds) {
    aurocs.push_back(fr.auroc);
    auprcs.push_back(fr.auprc);
  }
  result.auroc_mean = mean_of(aurocs);
  result.auroc_std = sample_std(aurocs);
  result.auprc_mean = mean_of(auprcs);
  result.auprc_std = sample_std(auprcs);
  return result;
}

}  // namespace vitalattn
