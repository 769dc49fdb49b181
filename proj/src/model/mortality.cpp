#include "model/mortality.hpp"

#include <cmath>

#include "common/errors.hpp"

namespace vitalattn {

FeatureEmbedderBank::FeatureEmbedderBank(int64_t dim, ParamSet& params, Rng& rng) : dim_(dim) {
  w1_ = params.make_glorot("feat.w1", {kAggFeatures, dim}, 1, dim, rng);
  b1_ = params.make_zeros("feat.b1", {kAggFeatures, dim});
  w2_ = params.make_glorot("feat.w2", {kAggFeatures, dim, dim}, dim, dim, rng);
  b2_ = params.make_zeros("feat.b2", {kAggFeatures, dim});
}

Tensor FeatureEmbedderBank::forward(const Tensor& agg) const {
  if (agg.rank() != 2 || agg.shape()[1] != kAggFeatures)
    throw ShapeError("feature embedder expects [B,196], got " + shape_str(agg.shape()));
  const int64_t batch = agg.shape()[0];
  Tensor x = reshape(agg, {batch, kAggFeatures, 1});
  Tensor hidden = leaky_relu(add(mul(x, reshape(w1_, {1, kAggFeatures, dim_})),
                                 reshape(b1_, {1, kAggFeatures, dim_})));
  // second layer has a d x d matrix per feature: batch the 196 matmuls
  Tensor by_feature = permute(hidden, {1, 0, 2});          // [196, B, d]
  Tensor projected = bmm(by_feature, w2_);                 // [196, B, d]
  Tensor out = permute(projected, {1, 0, 2});              // [B, 196, d]
  return add(out, reshape(b2_, {1, kAggFeatures, dim_}));
}

FusionAttention::FusionAttention(int64_t dim, int64_t heads, bool full_self_attention,
                                 ParamSet& params, Rng& rng)
    : dim_(dim), heads_(heads), head_dim_(dim / heads), full_self_attention_(full_self_attention) {
  if (dim % heads != 0)
    throw ContractError("fusion dim " + std::to_string(dim) + " not divisible by " +
                        std::to_string(heads) + " heads");
  if (full_self_attention_) {
    full_ = MultiHeadSelfAttention(dim, heads, "fusion.attn", params, rng);
    return;
  }
  query_ = params.make_uniform("fusion.query", {1, dim}, rng, -0.05, 0.05);
  wq_ = params.make_glorot("fusion.wq", {dim, dim}, dim, dim, rng);
  bq_ = params.make_zeros("fusion.bq", {dim});
  wk_ = params.make_glorot("fusion.wk", {dim, dim}, dim, dim, rng);
  bk_ = params.make_zeros("fusion.bk", {dim});
  wv_ = params.make_glorot("fusion.wv", {dim, dim}, dim, dim, rng);
  bv_ = params.make_zeros("fusion.bv", {dim});
  wo_ = params.make_glorot("fusion.wo", {dim, dim}, dim, dim, rng);
  bo_ = params.make_zeros("fusion.bo", {dim});
}

FusionOut FusionAttention::forward(const Tensor& tokens) const {
  if (tokens.rank() != 3 || tokens.shape()[2] != dim_)
    throw ShapeError("fusion expects [B,N," + std::to_string(dim_) + "] tokens, got " +
                     shape_str(tokens.shape()));
  return full_self_attention_ ? forward_full(tokens) : forward_query(tokens);
}

FusionOut FusionAttention::forward_query(const Tensor& tokens) const {
  const int64_t batch = tokens.shape()[0], n = tokens.shape()[1];

  // one shared query per head: [H, 1, dh]
  Tensor q = add(matmul(query_, wq_), bq_);
  Tensor q_heads = permute(reshape(q, {1, heads_, head_dim_}), {1, 0, 2});

  Tensor flat = reshape(tokens, {batch * n, dim_});
  Tensor k = add(matmul(flat, wk_), bk_);
  // arrange keys as [H, B*N, dh] so the shared query can bmm across all records
  Tensor k_heads = reshape(permute(reshape(k, {batch, n, heads_, head_dim_}), {2, 0, 1, 3}),
                           {heads_, batch * n, head_dim_});
  Tensor logits = mul_scalar(bmm_nt(k_heads, q_heads),
                             1.0 / std::sqrt(static_cast<double>(head_dim_)));  // [H, B*N, 1]
  Tensor logits_bhn = permute(reshape(logits, {heads_, batch, n}), {1, 0, 2});  // [B, H, N]
  Tensor weights = softmax(logits_bhn, 2);

  Tensor v = add(matmul(flat, wv_), bv_);
  Tensor v_heads = reshape(permute(reshape(v, {batch, n, heads_, head_dim_}), {0, 2, 1, 3}),
                           {batch * heads_, n, head_dim_});
  Tensor w_rows = reshape(weights, {batch * heads_, 1, n});
  Tensor ctx = reshape(bmm(w_rows, v_heads), {batch, dim_});  // head-concat layout
  Tensor context = add(matmul(ctx, wo_), bo_);
  return {context, weights};
}

FusionOut FusionAttention::forward_full(const Tensor& tokens) const {
  const int64_t batch = tokens.shape()[0], n = tokens.shape()[1];
  AttentionOut attn = full_.forward(tokens);  // output [B,N,d], weights [B,H,N,N]

  // mean-pool token outputs into the context vector
  Tensor pool = Tensor::full({batch, 1, n}, 1.0 / static_cast<double>(n));
  Tensor context = reshape(bmm(pool, attn.output), {batch, dim_});

  // per-token importance: mean attention received over heads' query rows
  Tensor w_flat = reshape(attn.weights, {batch * heads_, n, n});
  Tensor row_pool = Tensor::full({batch * heads_, 1, n}, 1.0 / static_cast<double>(n));
  Tensor received = reshape(bmm(row_pool, w_flat), {batch, heads_, n});
  return {context, received};
}

MortalityModel::MortalityModel(MortalityConfig config, uint64_t seed)
    : config_(config), seed_(seed) {
  encoder_ = std::make_unique<VitalEncoder>(config_.encoder, Rng::mix(seed, 0x5ec0de));
  Rng rng(Rng::mix(seed, 0x6ead));
  const int64_t d = config_.encoder.dim;
  embedders_ = FeatureEmbedderBank(d, head_params_, rng);
  fusion_ = FusionAttention(d, config_.encoder.heads, config_.fusion_full_self_attention,
                            head_params_, rng);
  head_ = Linear(d, 1, "head", head_params_, rng);
}

PredictOut MortalityModel::forward_values(const Tensor& vitals, const Tensor& agg) const {
  if (vitals.rank() != 3 || vitals.shape()[1] != kChannels || vitals.shape()[2] != kHours)
    throw ShapeError("mortality model expects vitals [B,7,24], got " + shape_str(vitals.shape()));
  const int64_t batch = vitals.shape()[0];
  if (agg.rank() != 2 || agg.shape()[0] != batch || agg.shape()[1] != kAggFeatures)
    throw ShapeError("mortality model expects aggregated [B,196], got " + shape_str(agg.shape()));
  for (double v : agg.values())
    if (is_missing(v)) throw DataError("aggregated input contains missing values");

  Tensor vital_tokens =
      encoder_->encode(vitals, full_grid_channel_ids(batch), full_grid_hour_ids(batch));
  Tensor agg_tokens = embedders_.forward(agg);
  Tensor tokens = concat({vital_tokens, agg_tokens}, 1);  // [B, 364, d]

  FusionOut fused = fusion_.forward(tokens);
  Tensor prob = reshape(sigmoid(head_.forward(fused.context)), {batch});
  return {prob, fused.weights};
}

PredictOut MortalityModel::forward(const std::vector<const PatientRecord*>& batch) const {
  return forward_values(batch_vitals_tensor(batch), batch_agg_tensor(batch));
}

double MortalityModel::predict_one(const PatientRecord& record) const {
  NoGradGuard guard;
  return forward({&record}).prob.value_at(0);
}

std::vector<Tensor> MortalityModel::trainable_params(bool include_encoder) const {
  std::vector<Tensor> out;
  if (include_encoder)
    for (const auto& [_, t] : encoder_->params().entries()) out.push_back(t);
  for (const auto& [_, t] : head_params_.entries()) out.push_back(t);
  return out;
}

std::vector<std::pair<std::string, Tensor>> MortalityModel::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out = encoder_->params().entries();
  const auto& head = head_params_.entries();
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

void MortalityModel::load_named_params(const std::vector<std::pair<std::string, Tensor>>& src) {
  encoder_->params().load_values(src);
  head_params_.load_values(src);
}

Tensor batch_vitals_tensor(const std::vector<const PatientRecord*>& batch) {
  const int64_t b = static_cast<int64_t>(batch.size());
  std::vector<double> values(b * kVitalTokens);
  for (int64_t i = 0; i < b; ++i)
    for (int t = 0; t < kVitalTokens; ++t) values[i * kVitalTokens + t] = batch[i]->vitals[t];
  return Tensor::from_values({b, kChannels, kHours}, std::move(values));
}

Tensor batch_agg_tensor(const std::vector<const PatientRecord*>& batch) {
  const int64_t b = static_cast<int64_t>(batch.size());
  std::vector<double> values(b * kAggFeatures);
  for (int64_t i = 0; i < b; ++i)
    for (int f = 0; f < kAggFeatures; ++f) values[i * kAggFeatures + f] = batch[i]->aggregated[f];
  return Tensor::from_values({b, kAggFeatures}, std::move(values));
}

std::array<double, kTokens> record_tokens(const PatientRecord& record) {
  std::array<double, kTokens> out{};
  for (int t = 0; t < kTokens; ++t) out[t] = record.token(t);
  return out;
}

BatchScorer make_token_scorer(const MortalityModel& model) {
  return [&model](const std::vector<std::array<double, kTokens>>& inputs) {
    NoGradGuard guard;
    std::vector<double> probs;
    probs.reserve(inputs.size());
    constexpr size_t kChunk = 256;
    for (size_t begin = 0; begin < inputs.size(); begin += kChunk) {
      const size_t count = std::min(kChunk, inputs.size() - begin);
      std::vector<double> vit(count * kVitalTokens), agg(count * kAggFeatures);
      for (size_t i = 0; i < count; ++i) {
        const auto& x = inputs[begin + i];
        for (int t = 0; t < kVitalTokens; ++t) vit[i * kVitalTokens + t] = x[t];
        for (int f = 0; f < kAggFeatures; ++f) agg[i * kAggFeatures + f] = x[kVitalTokens + f];
      }
      Tensor vt = Tensor::from_values({static_cast<int64_t>(count), kChannels, kHours},
                                      std::move(vit));
      Tensor at = Tensor::from_values({static_cast<int64_t>(count), kAggFeatures}, std::move(agg));
      Tensor prob = model.forward_values(vt, at).prob;
      for (size_t i = 0; i < count; ++i) probs.push_back(prob.value_at(i));
    }
    return probs;
  };
}

}  // namespace vitalattn
