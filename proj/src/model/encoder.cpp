#include "model/encoder.hpp"

#include <cmath>

#include "common/errors.hpp"

namespace vitalattn {

VitalEncoder::VitalEncoder(EncoderConfig config, uint64_t seed) : config_(config) {
  Rng rng(seed);
  const int64_t d = config_.dim;
  token_w_ = params_.make_glorot("enc.token.w", {1, d}, 1, d, rng);
  token_b_ = params_.make_zeros("enc.token.b", {d});
  channel_emb_ = params_.make_uniform("enc.channel_emb", {kChannels, d}, rng, -0.05, 0.05);
  hour_emb_ = params_.make_uniform("enc.hour_emb", {kHours, d}, rng, -0.05, 0.05);
  blocks_.reserve(config_.blocks);
  for (int64_t b = 0; b < config_.blocks; ++b) {
    const std::string p = "enc.block" + std::to_string(b);
    Block block;
    if (config_.full_attention) {
      block.ln_temporal = LayerNorm(d, p + ".ln_attn", params_);
      block.full = MultiHeadSelfAttention(d, config_.heads, p + ".attn", params_, rng);
    } else {
      block.ln_temporal = LayerNorm(d, p + ".ln_temporal", params_);
      block.temporal = MultiHeadSelfAttention(d, config_.heads, p + ".temporal", params_, rng);
      block.ln_spatial = LayerNorm(d, p + ".ln_spatial", params_);
      block.spatial = MultiHeadSelfAttention(d, config_.heads, p + ".spatial", params_, rng);
    }
    block.ln_ffn = LayerNorm(d, p + ".ln_ffn", params_);
    block.ffn = FeedForward(d, d * config_.ffn_mult, p + ".ffn", params_, rng);
    blocks_.push_back(std::move(block));
  }
  final_ln_ = LayerNorm(d, "enc.final_ln", params_);
}

Tensor VitalEncoder::encode(const Tensor& values, const std::vector<int64_t>& channel_ids,
                            const std::vector<int64_t>& hour_ids) const {
  if (values.rank() != 3)
    throw ShapeError("encoder expects a [B,C,T] grid, got " + shape_str(values.shape()));
  const int64_t batch = values.shape()[0], c = values.shape()[1], t = values.shape()[2];
  if (static_cast<int64_t>(channel_ids.size()) != batch * c)
    throw ShapeError("channel id count does not match the grid");
  if (static_cast<int64_t>(hour_ids.size()) != batch * t)
    throw ShapeError("hour id count does not match the grid");
  for (double v : values.values())
    if (is_missing(v)) throw DataError("encoder input contains missing values");

  const int64_t d = config_.dim;
  const int64_t tokens = batch * c * t;

  std::vector<int64_t> chan_idx(tokens), hour_idx(tokens);
  for (int64_t b = 0; b < batch; ++b)
    for (int64_t ci = 0; ci < c; ++ci)
      for (int64_t ti = 0; ti < t; ++ti) {
        const int64_t pos = (b * c + ci) * t + ti;
        chan_idx[pos] = channel_ids[b * c + ci];
        hour_idx[pos] = hour_ids[b * t + ti];
      }

  Tensor x = add(matmul(reshape(values, {tokens, 1}), token_w_), token_b_);
  x = add(x, gather_rows(channel_emb_, std::move(chan_idx)));
  x = add(x, gather_rows(hour_emb_, std::move(hour_idx)));

  for (const auto& block : blocks_) {
    if (config_.full_attention) {
      Tensor grouped = reshape(x, {batch, c * t, d});
      Tensor attn = block.full.forward(block.ln_temporal.forward(grouped)).output;
      x = reshape(add(grouped, attn), {tokens, d});
    } else {
      // temporal: attend across the T hours inside each (batch, channel) group
      Tensor grouped = reshape(x, {batch * c, t, d});
      Tensor attn = block.temporal.forward(block.ln_temporal.forward(grouped)).output;
      Tensor after_temporal = add(grouped, attn);

      // spatial: attend across the C channels inside each (batch, hour) group
      Tensor by_hour = permute(reshape(after_temporal, {batch, c, t, d}), {0, 2, 1, 3});
      Tensor spatial_in = reshape(by_hour, {batch * t, c, d});
      Tensor spatial_attn = block.spatial.forward(block.ln_spatial.forward(spatial_in)).output;
      Tensor after_spatial = add(spatial_in, spatial_attn);
      x = reshape(permute(reshape(after_spatial, {batch, t, c, d}), {0, 2, 1, 3}), {tokens, d});
    }
    Tensor ffn_out = block.ffn.forward(block.ln_ffn.forward(x));
    x = add(x, ffn_out);
  }
  return reshape(final_ln_.forward(x), {batch, c * t, d});
}

VitalDecoder::VitalDecoder(int64_t dim, uint64_t seed) : dim_(dim) {
  Rng rng(seed);
  proj_ = Linear(dim, 1, "dec.proj", params_, rng);
}

Tensor VitalDecoder::decode(const Tensor& tokens, int64_t channels, int64_t hours) const {
  if (tokens.rank() != 3 || tokens.shape()[2] != dim_)
    throw ShapeError("decoder expects [B,N," + std::to_string(dim_) + "] tokens, got " +
                     shape_str(tokens.shape()));
  const int64_t batch = tokens.shape()[0], n = tokens.shape()[1];
  if (n != channels * hours)
    throw ShapeError("decoder token count " + std::to_string(n) + " does not form a " +
                     std::to_string(channels) + "x" + std::to_string(hours) + " grid");
  return reshape(proj_.forward(tokens), {batch, channels, hours});
}

std::vector<int64_t> full_grid_channel_ids(int64_t batch) {
  std::vector<int64_t> ids(batch * kChannels);
  for (int64_t b = 0; b < batch; ++b)
    for (int64_t c = 0; c < kChannels; ++c) ids[b * kChannels + c] = c;
  return ids;
}

std::vector<int64_t> full_grid_hour_ids(int64_t batch) {
  std::vector<int64_t> ids(batch * kHours);
  for (int64_t b = 0; b < batch; ++b)
    for (int64_t h = 0; h < kHours; ++h) ids[b * kHours + h] = h;
  return ids;
}

}  // namespace vitalattn
