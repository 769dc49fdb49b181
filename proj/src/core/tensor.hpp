#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "core/rng.hpp"

namespace vitalattn {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);
int64_t shape_count(const Shape& s);

// Probability floor/ceiling used by bce_loss so log never sees 0 or 1.
inline constexpr double kBceEps = 1e-7;
// Repo-wide LeakyReLU slope.
inline constexpr double kLeakyAlpha = 0.01;

namespace detail {
struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // sized like values once backward reaches this node
  bool requires_grad = false;
  int64_t entry_index = -1;  // producing tape entry; -1 for leaves
};
}  // namespace detail

// Dense n-dimensional tensor of doubles with value semantics over a shared
// node. Ops record local gradient rules on the thread's Tape when any input
// has grad enabled; Tape::backward replays them in reverse.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad = false);
  // Glorot-uniform init for a weight of the given fan pair.
  static Tensor glorot(Shape shape, Rng& rng, int64_t fan_in, int64_t fan_out);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t rank() const { return static_cast<int64_t>(node_->shape.size()); }
  int64_t size() const { return static_cast<int64_t>(node_->values.size()); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<const double> values() const { return node_->values; }
  std::vector<double>& values_mut() { return node_->values; }
  // Toggling grad off removes the tensor's ops from the tape (frozen params).
  void set_requires_grad(bool enabled) { node_->requires_grad = enabled; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::vector<double>& grad_mut() { return node_->grad; }
  void clear_grad() { node_->grad.clear(); }

  // Value of a scalar tensor.
  double item() const;
  double value_at(int64_t flat_index) const { return node_->values[flat_index]; }

  // Same values, detached from the graph (no grad, no history).
  Tensor detach() const;

  std::shared_ptr<detail::TensorNode> node() const { return node_; }
  static Tensor wrap(std::shared_ptr<detail::TensorNode> node);

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

// Records one entry per differentiable op, in creation order (which is a
// topological order by construction). backward() replays entries from the loss
// back to index 0, visiting each one exactly once.
class Tape {
 public:
  struct Entry {
    std::shared_ptr<detail::TensorNode> output;
    std::vector<std::shared_ptr<detail::TensorNode>> inputs;
    std::function<void(Entry&)> backprop;
  };

  static Tape& active();  // thread-local

  bool recording() const { return recording_; }
  size_t size() const { return entries_.size(); }
  void clear();
  void record(Entry entry);

  // Seeds d(loss)/d(loss) = 1 and accumulates grads into every grad-enabled
  // ancestor. Accumulation is additive across fan-out and across repeated
  // backward calls.
  void backward(const Tensor& loss);

 private:
  friend class NoGradGuard;
  std::vector<Entry> entries_;
  bool recording_ = true;
};

// Disables tape recording in scope; used for inference and metric scoring.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

void backward(const Tensor& loss);

// ---- ops ----------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);              // [m,k]x[k,n]
Tensor bmm(const Tensor& a, const Tensor& b);                 // [B,m,k]x[B,k,n]
Tensor bmm_nt(const Tensor& a, const Tensor& b);              // [B,m,k]x[B,n,k]^T

Tensor reshape(const Tensor& a, Shape shape);
Tensor permute(const Tensor& a, const std::vector<int64_t>& axes);
Tensor transpose2(const Tensor& a);
Tensor gather_rows(const Tensor& a, std::vector<int64_t> row_indices);
Tensor slice_cols(const Tensor& a, int64_t start, int64_t len);
Tensor concat(const std::vector<Tensor>& parts, int64_t axis);

Tensor add(const Tensor& a, const Tensor& b);  // numpy-style broadcasting
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);

Tensor leaky_relu(const Tensor& a, double alpha = kLeakyAlpha);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor softmax(const Tensor& a, int64_t axis);
Tensor layer_norm(const Tensor& a, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// Mean of (pred-target)^2 over positions where mask==1; throws ContractError
// when the mask selects nothing.
Tensor mse_loss(const Tensor& pred, const Tensor& target, const Tensor& mask);
// Mean binary cross-entropy with probabilities clamped to [kBceEps, 1-kBceEps].
Tensor bce_loss(const Tensor& prob, const Tensor& label);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double s, const Tensor& a) { return mul_scalar(a, s); }

}  // namespace vitalattn
