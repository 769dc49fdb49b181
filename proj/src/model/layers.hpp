#pragma once

#include <string>
#include <utility>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace vitalattn {

// Ordered, named registry of trainable tensors. Construction order is fixed by
// the model constructors, so checkpoints and optimizers see a stable layout.
class ParamSet {
 public:
  Tensor make_glorot(const std::string& name, Shape shape, int64_t fan_in, int64_t fan_out,
                     Rng& rng);
  Tensor make_uniform(const std::string& name, Shape shape, Rng& rng, double lo, double hi);
  Tensor make_zeros(const std::string& name, Shape shape);
  Tensor make_ones(const std::string& name, Shape shape);

  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<Tensor> tensors() const;
  // Tensors whose name starts with `prefix`.
  std::vector<Tensor> tensors_with_prefix(const std::string& prefix) const;

  // Copies values from `src` entries into same-named params (shape-checked).
  void load_values(const std::vector<std::pair<std::string, Tensor>>& src);

 private:
  Tensor add(const std::string& name, Tensor t);
  std::vector<std::pair<std::string, Tensor>> entries_;
};

class Linear {
 public:
  Linear() = default;
  Linear(int64_t in, int64_t out, const std::string& prefix, ParamSet& params, Rng& rng);
  // x [..., in] -> [..., out]
  Tensor forward(const Tensor& x) const;

 private:
  int64_t in_ = 0, out_ = 0;
  Tensor w_, b_;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(int64_t dim, const std::string& prefix, ParamSet& params);
  Tensor forward(const Tensor& x) const { return layer_norm(x, gamma_, beta_); }

 private:
  Tensor gamma_, beta_;
};

struct ScaledDotOut {
  Tensor output;   // [q, e]
  Tensor weights;  // [q, k], rows sum to 1
};

// softmax(Q K^T / sqrt(d)) V with d taken from the actual key dimension.
ScaledDotOut scaled_dot_attention(const Tensor& queries, const Tensor& keys, const Tensor& values);

struct AttentionOut {
  Tensor output;   // [G, T, d]
  Tensor weights;  // [G, H, T, T]
};

// Self-attention applied independently within each of G groups.
class MultiHeadSelfAttention {
 public:
  MultiHeadSelfAttention() = default;
  MultiHeadSelfAttention(int64_t dim, int64_t heads, const std::string& prefix, ParamSet& params,
                         Rng& rng);
  AttentionOut forward(const Tensor& x) const;  // x [G, T, d]

  int64_t heads() const { return heads_; }

 private:
  int64_t dim_ = 0, heads_ = 0, head_dim_ = 0;
  Tensor wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_;
};

class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(int64_t dim, int64_t hidden, const std::string& prefix, ParamSet& params, Rng& rng);
  Tensor forward(const Tensor& x) const;

 private:
  Linear up_, down_;
};

}  // namespace vitalattn
