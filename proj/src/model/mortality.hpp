#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "data/cohort.hpp"
#include "model/encoder.hpp"
#include "model/layers.hpp"

namespace vitalattn {

// 196 independent two-layer perceptrons (scalar -> d, LeakyReLU between the
// layers), evaluated for all features and records in a handful of batched ops.
class FeatureEmbedderBank {
 public:
  FeatureEmbedderBank() = default;
  FeatureEmbedderBank(int64_t dim, ParamSet& params, Rng& rng);

  // agg [B, 196] -> tokens [B, 196, dim]; feature f sees only its own params
  Tensor forward(const Tensor& agg) const;

 private:
  int64_t dim_ = 0;
  Tensor w1_, b1_;  // [196, d]
  Tensor w2_;       // [196, d, d]
  Tensor b2_;       // [196, d]
};

struct FusionOut {
  Tensor context;  // [B, d]
  Tensor weights;  // [B, H, N] — one attention row over the token sequence per head
};

// Combines the token sequence into one prediction vector. Default: a learned
// classification query attends over the tokens, giving exactly one importance
// score per token. Config option: full token-to-token self-attention with mean
// pooling (weights then report the mean attention received per token).
class FusionAttention {
 public:
  FusionAttention() = default;
  FusionAttention(int64_t dim, int64_t heads, bool full_self_attention, ParamSet& params,
                  Rng& rng);

  FusionOut forward(const Tensor& tokens) const;  // tokens [B, N, d]

  int64_t heads() const { return heads_; }

 private:
  FusionOut forward_query(const Tensor& tokens) const;
  FusionOut forward_full(const Tensor& tokens) const;

  int64_t dim_ = 0, heads_ = 0, head_dim_ = 0;
  bool full_self_attention_ = false;
  Tensor query_;  // [1, d] learned classification query
  Tensor wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_;
  MultiHeadSelfAttention full_;
};

struct MortalityConfig {
  EncoderConfig encoder;
  bool fusion_full_self_attention = false;
};

struct PredictOut {
  Tensor prob;            // [B]
  Tensor fusion_weights;  // [B, H, 364]
};

// The hierarchical model: pretrained vital encoder, per-feature embedders,
// fusion attention, sigmoid head. Token order is the repo-wide contract:
// 168 vital tokens (channel-major) then 196 aggregated tokens.
class MortalityModel {
 public:
  MortalityModel(MortalityConfig config, uint64_t seed);

  PredictOut forward_values(const Tensor& vitals, const Tensor& agg) const;  // [B,7,24], [B,196]
  PredictOut forward(const std::vector<const PatientRecord*>& batch) const;
  double predict_one(const PatientRecord& record) const;  // inference, no tape

  const MortalityConfig& config() const { return config_; }
  uint64_t seed() const { return seed_; }
  VitalEncoder& encoder() { return *encoder_; }
  const VitalEncoder& encoder() const { return *encoder_; }
  ParamSet& head_params() { return head_params_; }
  const ParamSet& head_params() const { return head_params_; }

  // encoder params + head params, optionally excluding the encoder (frozen)
  std::vector<Tensor> trainable_params(bool include_encoder) const;
  // named (name, tensor) pairs across both sets, for checkpoints
  std::vector<std::pair<std::string, Tensor>> named_params() const;
  void load_named_params(const std::vector<std::pair<std::string, Tensor>>& src);

 private:
  MortalityConfig config_;
  uint64_t seed_ = 0;
  std::unique_ptr<VitalEncoder> encoder_;
  ParamSet head_params_;  // embedders + fusion + head
  FeatureEmbedderBank embedders_;
  FusionAttention fusion_;
  Linear head_;
};

// Tensor assembly helpers shared by trainers and scorers.
Tensor batch_vitals_tensor(const std::vector<const PatientRecord*>& batch);
Tensor batch_agg_tensor(const std::vector<const PatientRecord*>& batch);
std::array<double, kTokens> record_tokens(const PatientRecord& record);

// Black-box batch scorer over the 364-token space, used by SHAP and fidelity.
using BatchScorer =
    std::function<std::vector<double>(const std::vector<std::array<double, kTokens>>&)>;

BatchScorer make_token_scorer(const MortalityModel& model);

}  // namespace vitalattn
