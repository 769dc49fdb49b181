#include "train/pretrain.hpp"

#include <numeric>

#include "common/errors.hpp"
#include "core/optimizer.hpp"
#include "core/rng.hpp"

namespace vitalattn {

namespace {

constexpr int kWindowHours = 20;

void validate_config(const PretrainConfig& cfg) {
  if (cfg.past_hours + cfg.future_hours > kHours)
    throw ContractError("pretrain window exceeds the 24-hour grid");
  if (cfg.past_hours != 12 || cfg.future_hours != 8)
    throw ContractError("window samples are built as 12 past + 8 future hours");
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw ContractError("invalid pretrain budget");
}

}  // namespace

PretrainBatch assemble_pretrain_batch(const std::vector<WindowSample>& windows,
                                      const std::vector<int64_t>& indices,
                                      const PretrainConfig& cfg) {
  const int64_t b = static_cast<int64_t>(indices.size());
  std::vector<double> values(b * kWindowHours), targets(b * kWindowHours);
  std::vector<double> past_mask(b * kWindowHours, 0.0), future_mask(b * kWindowHours, 0.0);
  PretrainBatch batch;
  batch.channel_ids.resize(b);
  batch.hour_ids.resize(b * kWindowHours);
  for (int64_t i = 0; i < b; ++i) {
    const WindowSample& w = windows[indices[i]];
    batch.channel_ids[i] = w.channel;
    for (int t = 0; t < kWindowHours; ++t)
      batch.hour_ids[i * kWindowHours + t] = w.start_hour - 1 + t;
    for (int t = 0; t < cfg.past_hours; ++t) {
      values[i * kWindowHours + t] = w.past[t];
      targets[i * kWindowHours + t] = w.past[t];
      past_mask[i * kWindowHours + t] = 1.0;
    }
    for (int t = 0; t < cfg.future_hours; ++t) {
      const int pos = cfg.past_hours + t;
      values[i * kWindowHours + pos] = cfg.mask_value;  // the model never sees future data
      targets[i * kWindowHours + pos] = w.future[t];
      future_mask[i * kWindowHours + pos] = 1.0;
    }
  }
  batch.values = Tensor::from_values({b, 1, kWindowHours}, std::move(values));
  batch.targets = Tensor::from_values({b, 1, kWindowHours}, std::move(targets));
  batch.past_mask = Tensor::from_values({b, 1, kWindowHours}, std::move(past_mask));
  batch.future_mask = Tensor::from_values({b, 1, kWindowHours}, std::move(future_mask));
  return batch;
}

LossCurve pretrain_stage1(VitalEncoder& encoder, VitalDecoder& decoder,
                          const std::vector<WindowSample>& windows, const PretrainConfig& cfg) {
  validate_config(cfg);
  if (windows.empty()) throw ContractError("pretraining needs a non-empty window set");

  std::vector<Tensor> params = encoder.params().tensors();
  for (const auto& t : decoder.params().tensors()) params.push_back(t);
  Adam optimizer(std::move(params), {.learning_rate = cfg.learning_rate});

  std::vector<int64_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);

  LossCurve curve;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(Rng::mix(cfg.seed, static_cast<uint64_t>(epoch)));
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const size_t count = std::min<size_t>(cfg.batch_size, order.size() - begin);
      std::vector<int64_t> idx(order.begin() + begin, order.begin() + begin + count);
      PretrainBatch batch = assemble_pretrain_batch(windows, idx, cfg);

      std::vector<int64_t> hour_ids = batch.hour_ids;
      Tensor tokens = encoder.encode(batch.values, batch.channel_ids, hour_ids);
      Tensor decoded = decoder.decode(tokens, 1, kWindowHours);
      Tensor loss = add(mse_loss(decoded, batch.targets, batch.future_mask),
                        mse_loss(decoded, batch.targets, batch.past_mask));
      backward(loss);
      optimizer.step();
      Tape::active().clear();
      epoch_loss += loss.item() * static_cast<double>(count);
    }
    curve.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return curve;
}

double future_prediction_mse(const VitalEncoder& encoder, const VitalDecoder& decoder,
                             const std::vector<WindowSample>& windows, const PretrainConfig& cfg) {
  if (windows.empty()) throw ContractError("no windows to evaluate");
  NoGradGuard guard;
  double acc = 0.0;
  int64_t count = 0;
  constexpr size_t kChunk = 512;
  std::vector<int64_t> idx;
  for (size_t begin = 0; begin < windows.size(); begin += kChunk) {
    const size_t n = std::min(kChunk, windows.size() - begin);
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), static_cast<int64_t>(begin));
    PretrainBatch batch = assemble_pretrain_batch(windows, idx, cfg);
    Tensor tokens = encoder.encode(batch.values, batch.channel_ids, batch.hour_ids);
    Tensor decoded = decoder.decode(tokens, 1, kWindowHours);
    const auto pred = decoded.values();
    const auto target = batch.targets.values();
    const auto mask = batch.future_mask.values();
    for (int64_t i = 0; i < decoded.size(); ++i) {
      if (mask[i] == 1.0) {
        const double diff = pred[i] - target[i];
        acc += diff * diff;
        ++count;
      }
    }
  }
  return acc / static_cast<double>(count);
}

double persistence_future_mse(const std::vector<WindowSample>& windows) {
  if (windows.empty()) throw ContractError("no windows to evaluate");
  double acc = 0.0;
  int64_t count = 0;
  for (const auto& w : windows) {
    const double last = w.past.back();
    for (double f : w.future) {
      acc += (f - last) * (f - last);
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

}  // namespace vitalattn
