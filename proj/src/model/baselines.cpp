#include "model/baselines.hpp"

#include "common/errors.hpp"

namespace vitalattn {

LogisticModel::LogisticModel(uint64_t seed, double l2) : seed_(seed), l2_(l2) {
  Rng rng(Rng::mix(seed, 0x109157));
  w_ = params_.make_uniform("logistic.w", {kTokens, 1}, rng, -0.01, 0.01);
  b_ = params_.make_zeros("logistic.b", {1});
}

Tensor LogisticModel::forward_values(const Tensor& x) const {
  if (x.rank() != 2 || x.shape()[1] != kTokens)
    throw ShapeError("logistic model expects [B,364], got " + shape_str(x.shape()));
  const int64_t batch = x.shape()[0];
  return reshape(sigmoid(add(matmul(x, w_), b_)), {batch});
}

Tensor LogisticModel::forward(const std::vector<const PatientRecord*>& batch) const {
  return forward_values(batch_token_tensor(batch));
}

double LogisticModel::predict_one(const PatientRecord& record) const {
  NoGradGuard guard;
  return forward({&record}).value_at(0);
}

std::vector<double> LogisticModel::weight_values() const {
  return {w_.values().begin(), w_.values().end()};
}

Tensor batch_token_tensor(const std::vector<const PatientRecord*>& batch) {
  const int64_t b = static_cast<int64_t>(batch.size());
  std::vector<double> values(b * kTokens);
  for (int64_t i = 0; i < b; ++i)
    for (int t = 0; t < kTokens; ++t) values[i * kTokens + t] = batch[i]->token(t);
  return Tensor::from_values({b, kTokens}, std::move(values));
}

LstmFusionModel::LstmFusionModel(LstmConfig config, uint64_t seed)
    : config_(config), seed_(seed) {
  Rng rng(Rng::mix(seed, 0x157f));
  const int64_t h = config_.hidden;
  wx_ = params_.make_glorot("lstm.wx", {kChannels, 4 * h}, kChannels, 4 * h, rng);
  wh_ = params_.make_glorot("lstm.wh", {h, 4 * h}, h, 4 * h, rng);
  bg_ = params_.make_zeros("lstm.bg", {4 * h});
  static1_ = Linear(kAggFeatures, h, "static.l1", params_, rng);
  static2_ = Linear(h, h, "static.l2", params_, rng);
  head_ = Linear(2 * h, 1, "head", params_, rng);
}

Tensor LstmFusionModel::run_cell(const Tensor& vitals) const {
  if (vitals.rank() != 3 || vitals.shape()[1] != kChannels || vitals.shape()[2] != kHours)
    throw ShapeError("lstm expects vitals [B,7,24], got " + shape_str(vitals.shape()));
  const int64_t batch = vitals.shape()[0];
  const int64_t h = config_.hidden;

  // [B,7,24] -> [24, B*7] so each step is one contiguous row gather
  Tensor by_hour = reshape(permute(vitals, {2, 0, 1}), {kHours, batch * kChannels});

  Tensor hidden = Tensor::zeros({batch, h});
  Tensor cell = Tensor::zeros({batch, h});
  for (int64_t t = 0; t < kHours; ++t) {
    Tensor x_t = reshape(gather_rows(by_hour, {t}), {batch, kChannels});
    Tensor gates = add(add(matmul(x_t, wx_), matmul(hidden, wh_)), bg_);
    Tensor in_gate = sigmoid(slice_cols(gates, 0, h));
    Tensor forget_gate = sigmoid(slice_cols(gates, h, h));
    Tensor out_gate = sigmoid(slice_cols(gates, 2 * h, h));
    Tensor candidate = tanh(slice_cols(gates, 3 * h, h));
    cell = add(mul(forget_gate, cell), mul(in_gate, candidate));
    hidden = mul(out_gate, tanh(cell));
  }
  return hidden;
}

Tensor LstmFusionModel::last_hidden(const Tensor& vitals) const { return run_cell(vitals); }

Tensor LstmFusionModel::forward_values(const Tensor& vitals, const Tensor& agg) const {
  const int64_t batch = vitals.shape()[0];
  Tensor hidden = run_cell(vitals);
  Tensor stat = static2_.forward(leaky_relu(static1_.forward(agg)));
  Tensor fused = concat({hidden, stat}, 1);  // [B, 2h]
  return reshape(sigmoid(head_.forward(fused)), {batch});
}

Tensor LstmFusionModel::forward(const std::vector<const PatientRecord*>& batch) const {
  return forward_values(batch_vitals_tensor(batch), batch_agg_tensor(batch));
}

double LstmFusionModel::predict_one(const PatientRecord& record) const {
  NoGradGuard guard;
  return forward({&record}).value_at(0);
}

namespace {

template <typename Model>
BatchScorer token_scorer_for(const Model& model) {
  return [&model](const std::vector<std::array<double, kTokens>>& inputs) {
    NoGradGuard guard;
    std::vector<double> probs;
    probs.reserve(inputs.size());
    constexpr size_t kChunk = 512;
    for (size_t begin = 0; begin < inputs.size(); begin += kChunk) {
      const size_t count = std::min(kChunk, inputs.size() - begin);
      std::vector<PatientRecord> records(count);
      std::vector<const PatientRecord*> ptrs(count);
      for (size_t i = 0; i < count; ++i) {
        for (int t = 0; t < kTokens; ++t) records[i].set_token(t, inputs[begin + i][t]);
        ptrs[i] = &records[i];
      }
      Tensor prob = model.forward(ptrs);
      for (size_t i = 0; i < count; ++i) probs.push_back(prob.value_at(i));
    }
    return probs;
  };
}

}  // namespace

BatchScorer make_token_scorer(const LogisticModel& model) { return token_scorer_for(model); }
BatchScorer make_token_scorer(const LstmFusionModel& model) { return token_scorer_for(model); }

}  // namespace vitalattn
