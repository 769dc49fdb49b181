#pragma once

#include <cstdint>
#include <vector>

#include "data/preprocess.hpp"
#include "model/encoder.hpp"

namespace vitalattn {

struct PretrainConfig {
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 1e-3;
  uint64_t seed = 7;
  int past_hours = 12;
  int future_hours = 8;
  double mask_value = 0.0;  // literal written over future entries at the input
};

struct PretrainBatch {
  Tensor values;   // [B, 1, 20] with future positions overwritten by mask_value
  Tensor targets;  // [B, 1, 20] actual values
  Tensor past_mask, future_mask;
  std::vector<int64_t> channel_ids;  // B
  std::vector<int64_t> hour_ids;     // B * 20, absolute 0-based hours
};

// Input assembly is exposed so tests can probe the masking contract directly.
PretrainBatch assemble_pretrain_batch(const std::vector<WindowSample>& windows,
                                      const std::vector<int64_t>& indices,
                                      const PretrainConfig& cfg);

struct LossCurve {
  std::vector<double> epoch_loss;
};

// Stage one: masked-future prediction plus reconstruction, equally weighted
// MSE terms, trained jointly over encoder and decoder.
LossCurve pretrain_stage1(VitalEncoder& encoder, VitalDecoder& decoder,
                          const std::vector<WindowSample>& windows, const PretrainConfig& cfg);

// Mean squared error of the model on future positions over all windows.
double future_prediction_mse(const VitalEncoder& encoder, const VitalDecoder& decoder,
                             const std::vector<WindowSample>& windows, const PretrainConfig& cfg);

// Baseline that predicts the last observed past value for every future hour.
double persistence_future_mse(const std::vector<WindowSample>& windows);

}  // namespace vitalattn
