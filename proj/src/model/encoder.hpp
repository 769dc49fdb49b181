#pragma once

#include <cstdint>
#include <vector>

#include "data/cohort.hpp"
#include "model/layers.hpp"

namespace vitalattn {

struct EncoderConfig {
  int64_t dim = 32;
  int64_t blocks = 2;
  int64_t heads = 4;
  int64_t ffn_mult = 2;
  // When set, each block runs one attention over all C*T tokens instead of the
  // temporal-then-spatial factorization.
  bool full_attention = false;
};

// Transformer over the vitals grid. Tokens are (channel, hour) cells embedded
// by a shared scalar->d map plus learned channel and hour embeddings; each
// block applies temporal attention (across hours within a channel), spatial
// attention (across channels within an hour) and a feed-forward, all pre-norm
// residual. Works on any C x T subgrid so the self-supervised stage can feed
// single-channel 20-hour windows.
class VitalEncoder {
 public:
  VitalEncoder(EncoderConfig config, uint64_t seed);

  // values:      [B, C, T] grid, no missing entries
  // channel_ids: B*C entries in [0, kChannels)
  // hour_ids:    B*T entries in [0, kHours), absolute hour index of column t
  // returns      [B, C*T, dim] token matrix, channel-major hour-minor
  Tensor encode(const Tensor& values, const std::vector<int64_t>& channel_ids,
                const std::vector<int64_t>& hour_ids) const;

  const EncoderConfig& config() const { return config_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

 private:
  struct Block {
    LayerNorm ln_temporal, ln_spatial, ln_ffn;
    MultiHeadSelfAttention temporal, spatial, full;
    FeedForward ffn;
  };

  EncoderConfig config_;
  ParamSet params_;
  Tensor token_w_, token_b_;  // scalar -> d
  Tensor channel_emb_;        // [kChannels, d]
  Tensor hour_emb_;           // [kHours, d]
  std::vector<Block> blocks_;
  LayerNorm final_ln_;
};

// Per-token linear projection back to the scalar grid.
class VitalDecoder {
 public:
  VitalDecoder(int64_t dim, uint64_t seed);

  // tokens [B, C*T, dim] -> grid [B, C, T]
  Tensor decode(const Tensor& tokens, int64_t channels, int64_t hours) const;

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

 private:
  int64_t dim_;
  ParamSet params_;
  Linear proj_;
};

// Channel/hour id helpers for the common full-grid case.
std::vector<int64_t> full_grid_channel_ids(int64_t batch);
std::vector<int64_t> full_grid_hour_ids(int64_t batch);

}  // namespace vitalattn
