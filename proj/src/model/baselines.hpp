#pragma once

#include <cstdint>
#include <vector>

#include "data/cohort.hpp"
#include "model/layers.hpp"
#include "model/mortality.hpp"

namespace vitalattn {

// sigmoid(w . x + b) over the flattened 364-token vector.
class LogisticModel {
 public:
  explicit LogisticModel(uint64_t seed, double l2 = 1e-4);

  Tensor forward_values(const Tensor& x) const;  // x [B,364] -> probs [B]
  Tensor forward(const std::vector<const PatientRecord*>& batch) const;
  double predict_one(const PatientRecord& record) const;

  double l2_strength() const { return l2_; }
  std::vector<double> weight_values() const;  // flat 364
  Tensor weight_tensor() const { return w_; }
  uint64_t seed() const { return seed_; }

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

 private:
  uint64_t seed_;
  double l2_;
  ParamSet params_;
  Tensor w_;  // [364, 1]
  Tensor b_;  // [1]
};

Tensor batch_token_tensor(const std::vector<const PatientRecord*>& batch);

struct LstmConfig {
  int64_t hidden = 32;
};

// Recurrent cell over the 24 hourly 7-vectors fused with a static two-layer
// perceptron over the aggregated features; sigmoid head on the concatenation.
class LstmFusionModel {
 public:
  LstmFusionModel(LstmConfig config, uint64_t seed);

  Tensor forward_values(const Tensor& vitals, const Tensor& agg) const;  // -> probs [B]
  Tensor forward(const std::vector<const PatientRecord*>& batch) const;
  double predict_one(const PatientRecord& record) const;

  // final hidden state per record, for inspection/tests
  Tensor last_hidden(const Tensor& vitals) const;

  const LstmConfig& config() const { return config_; }
  uint64_t seed() const { return seed_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

 private:
  Tensor run_cell(const Tensor& vitals) const;

  LstmConfig config_;
  uint64_t seed_;
  ParamSet params_;
  Tensor wx_;  // [7, 4h] gate order: input, forget, output, candidate
  Tensor wh_;  // [h, 4h]
  Tensor bg_;  // [4h]
  Linear static1_, static2_;  // 196 -> h -> h with LeakyReLU between
  Linear head_;               // 2h -> 1
};

BatchScorer make_token_scorer(const LogisticModel& model);
BatchScorer make_token_scorer(const LstmFusionModel& model);

}  // namespace vitalattn
