#include "model/layers.hpp"

#include <cmath>

#include "common/errors.hpp"

namespace vitalattn {

Tensor ParamSet::add(const std::string& name, Tensor t) {
  for (const auto& [existing, _] : entries_)
    if (existing == name) throw ContractError("duplicate parameter name: " + name);
  entries_.emplace_back(name, t);
  return t;
}

Tensor ParamSet::make_glorot(const std::string& name, Shape shape, int64_t fan_in, int64_t fan_out,
                             Rng& rng) {
  return add(name, Tensor::glorot(std::move(shape), rng, fan_in, fan_out));
}

Tensor ParamSet::make_uniform(const std::string& name, Shape shape, Rng& rng, double lo,
                              double hi) {
  return add(name, Tensor::uniform(std::move(shape), rng, lo, hi, true));
}

Tensor ParamSet::make_zeros(const std::string& name, Shape shape) {
  return add(name, Tensor::zeros(std::move(shape), true));
}

Tensor ParamSet::make_ones(const std::string& name, Shape shape) {
  return add(name, Tensor::full(std::move(shape), 1.0, true));
}

std::vector<Tensor> ParamSet::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& [_, t] : entries_) out.push_back(t);
  return out;
}

std::vector<Tensor> ParamSet::tensors_with_prefix(const std::string& prefix) const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : entries_)
    if (name.rfind(prefix, 0) == 0) out.push_back(t);
  return out;
}

void ParamSet::load_values(const std::vector<std::pair<std::string, Tensor>>& src) {
  for (auto& [name, t] : entries_) {
    bool found = false;
    for (const auto& [src_name, src_t] : src) {
      if (src_name != name) continue;
      if (src_t.shape() != t.shape())
        throw DataError("checkpoint parameter " + name + " has shape " +
                        shape_str(src_t.shape()) + ", expected " + shape_str(t.shape()));
      t.values_mut().assign(src_t.values().begin(), src_t.values().end());
      found = true;
      break;
    }
    if (!found) throw DataError("checkpoint is missing parameter " + name);
  }
}

Linear::Linear(int64_t in, int64_t out, const std::string& prefix, ParamSet& params, Rng& rng)
    : in_(in), out_(out) {
  w_ = params.make_glorot(prefix + ".w", {in, out}, in, out, rng);
  b_ = params.make_zeros(prefix + ".b", {out});
}

Tensor Linear::forward(const Tensor& x) const {
  if (x.shape().back() != in_)
    throw ShapeError("linear layer expects trailing dim " + std::to_string(in_) + ", got " +
                     shape_str(x.shape()));
  const int64_t rows = x.size() / in_;
  Tensor flat = x.rank() == 2 ? x : reshape(x, {rows, in_});
  Tensor y = add(matmul(flat, w_), b_);
  if (x.rank() == 2) return y;
  Shape out_shape = x.shape();
  out_shape.back() = out_;
  return reshape(y, std::move(out_shape));
}

LayerNorm::LayerNorm(int64_t dim, const std::string& prefix, ParamSet& params) {
  gamma_ = params.make_ones(prefix + ".gamma", {dim});
  beta_ = params.make_zeros(prefix + ".beta", {dim});
}

ScaledDotOut scaled_dot_attention(const Tensor& queries, const Tensor& keys,
                                  const Tensor& values) {
  if (queries.rank() != 2 || keys.rank() != 2 || values.rank() != 2)
    throw ShapeError("scaled_dot_attention expects rank-2 inputs");
  if (queries.shape()[1] != keys.shape()[1])
    throw ShapeError("query/key dimension mismatch: " + shape_str(queries.shape()) + " vs " +
                     shape_str(keys.shape()));
  if (keys.shape()[0] != values.shape()[0])
    throw ShapeError("key/value count mismatch: " + shape_str(keys.shape()) + " vs " +
                     shape_str(values.shape()));
  const double d = static_cast<double>(queries.shape()[1]);
  Tensor logits = mul_scalar(matmul(queries, transpose2(keys)), 1.0 / std::sqrt(d));
  Tensor weights = softmax(logits, 1);
  return {matmul(weights, values), weights};
}

MultiHeadSelfAttention::MultiHeadSelfAttention(int64_t dim, int64_t heads,
                                               const std::string& prefix, ParamSet& params,
                                               Rng& rng)
    : dim_(dim), heads_(heads), head_dim_(dim / heads) {
  if (dim % heads != 0)
    throw ContractError("attention dim " + std::to_string(dim) + " not divisible by " +
                        std::to_string(heads) + " heads");
  wq_ = params.make_glorot(prefix + ".wq", {dim, dim}, dim, dim, rng);
  bq_ = params.make_zeros(prefix + ".bq", {dim});
  wk_ = params.make_glorot(prefix + ".wk", {dim, dim}, dim, dim, rng);
  bk_ = params.make_zeros(prefix + ".bk", {dim});
  wv_ = params.make_glorot(prefix + ".wv", {dim, dim}, dim, dim, rng);
  bv_ = params.make_zeros(prefix + ".bv", {dim});
  wo_ = params.make_glorot(prefix + ".wo", {dim, dim}, dim, dim, rng);
  bo_ = params.make_zeros(prefix + ".bo", {dim});
}

AttentionOut MultiHeadSelfAttention::forward(const Tensor& x) const {
  if (x.rank() != 3 || x.shape()[2] != dim_)
    throw ShapeError("attention expects [G,T," + std::to_string(dim_) + "], got " +
                     shape_str(x.shape()));
  const int64_t g = x.shape()[0], t = x.shape()[1];

  Tensor flat = reshape(x, {g * t, dim_});
  const auto to_heads = [&](const Tensor& w, const Tensor& b) {
    Tensor proj = add(matmul(flat, w), b);
    return reshape(permute(reshape(proj, {g, t, heads_, head_dim_}), {0, 2, 1, 3}),
                   {g * heads_, t, head_dim_});
  };
  Tensor q = to_heads(wq_, bq_);
  Tensor k = to_heads(wk_, bk_);
  Tensor v = to_heads(wv_, bv_);

  Tensor logits = mul_scalar(bmm_nt(q, k), 1.0 / std::sqrt(static_cast<double>(head_dim_)));
  Tensor weights = softmax(logits, 2);  // [G*H, T, T]
  Tensor ctx = bmm(weights, v);
  ctx = reshape(permute(reshape(ctx, {g, heads_, t, head_dim_}), {0, 2, 1, 3}), {g * t, dim_});
  Tensor out = reshape(add(matmul(ctx, wo_), bo_), {g, t, dim_});
  return {out, reshape(weights, {g, heads_, t, t})};
}

FeedForward::FeedForward(int64_t dim, int64_t hidden, const std::string& prefix, ParamSet& params,
                         Rng& rng)
    : up_(dim, hidden, prefix + ".up", params, rng), down_(hidden, dim, prefix + ".down", params, rng) {}

Tensor FeedForward::forward(const Tensor& x) const {
  return down_.forward(leaky_relu(up_.forward(x)));
}

}  // namespace vitalattn
