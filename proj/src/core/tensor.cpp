#include "core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "common/errors.hpp"
#include "core/kernels.hpp"

namespace vitalattn {

using detail::TensorNode;

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

int64_t shape_count(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

namespace {

std::shared_ptr<TensorNode> make_node(Shape shape, std::vector<double> values) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  return node;
}

void ensure_grad(TensorNode& node) {
  if (node.grad.empty()) node.grad.assign(node.values.size(), 0.0);
}

std::vector<int64_t> strides_for(const Shape& shape) {
  std::vector<int64_t> strides(shape.size());
  int64_t acc = 1;
  for (int64_t i = static_cast<int64_t>(shape.size()) - 1; i >= 0; --i) {
    strides[i] = acc;
    acc *= shape[i];
  }
  return strides;
}

void validate_shape(const Shape& shape) {
  for (int64_t d : shape)
    if (d <= 0) throw ShapeError("dimension sizes must be positive, got " + shape_str(shape));
}

// Registers the op on the active tape when grads can flow. `backprop` must
// accumulate (never overwrite) into input grads.
void record_op(Tensor& out, const std::vector<Tensor>& inputs,
               std::function<void(Tape::Entry&)> backprop) {
  Tape& tape = Tape::active();
  bool any_rg = false;
  for (const auto& t : inputs) any_rg = any_rg || t.requires_grad();
  if (!any_rg || !tape.recording()) return;
  out.node()->requires_grad = true;
  Tape::Entry entry;
  entry.output = out.node();
  entry.inputs.reserve(inputs.size());
  for (const auto& t : inputs) entry.inputs.push_back(t.node());
  entry.backprop = std::move(backprop);
  tape.record(std::move(entry));
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (size_t i = 0; i < rank; ++i) {
    const int64_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const int64_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1)
      throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    out[i] = std::max(da, db);
  }
  return out;
}

// Strides of `in` viewed through the broadcast shape `out` (0 where stretched).
std::vector<int64_t> broadcast_strides(const Shape& in, const Shape& out) {
  const auto in_strides = strides_for(in);
  std::vector<int64_t> strides(out.size(), 0);
  const size_t offset = out.size() - in.size();
  for (size_t i = 0; i < in.size(); ++i)
    strides[offset + i] = in[i] == 1 ? 0 : in_strides[i];
  return strides;
}

// Walks every position of `shape`, calling fn(offset_a, offset_b) with offsets
// advanced by the given (possibly zero) stride vectors.
template <typename Fn>
void for_each_broadcast(const Shape& shape, const std::vector<int64_t>& sa,
                        const std::vector<int64_t>& sb, Fn&& fn) {
  const int64_t total = shape_count(shape);
  const size_t rank = shape.size();
  std::vector<int64_t> idx(rank, 0);
  int64_t oa = 0, ob = 0;
  for (int64_t i = 0; i < total; ++i) {
    fn(oa, ob);
    for (int64_t d = static_cast<int64_t>(rank) - 1; d >= 0; --d) {
      oa += sa[d];
      ob += sb[d];
      if (++idx[d] < shape[d]) break;
      oa -= sa[d] * shape[d];
      ob -= sb[d] * shape[d];
      idx[d] = 0;
    }
  }
}

enum class BinKind { Add, Sub, Mul };

Tensor broadcast_binary(BinKind kind, const Tensor& a, const Tensor& b) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape());
  const int64_t total = shape_count(out_shape);
  std::vector<double> out_values(total);

  if (a.shape() == b.shape()) {
    const kernels::Binary op = kind == BinKind::Add   ? kernels::Binary::Add
                               : kind == BinKind::Sub ? kernels::Binary::Sub
                                                      : kernels::Binary::Mul;
    kernels::zip(op, a.values().data(), b.values().data(), out_values.data(), total);
  } else {
    const auto sa = broadcast_strides(a.shape(), out_shape);
    const auto sb = broadcast_strides(b.shape(), out_shape);
    const double* pa = a.values().data();
    const double* pb = b.values().data();
    double* po = out_values.data();
    int64_t w = 0;
    switch (kind) {
      case BinKind::Add:
        for_each_broadcast(out_shape, sa, sb, [&](int64_t oa, int64_t ob) { po[w++] = pa[oa] + pb[ob]; });
        break;
      case BinKind::Sub:
        for_each_broadcast(out_shape, sa, sb, [&](int64_t oa, int64_t ob) { po[w++] = pa[oa] - pb[ob]; });
        break;
      case BinKind::Mul:
        for_each_broadcast(out_shape, sa, sb, [&](int64_t oa, int64_t ob) { po[w++] = pa[oa] * pb[ob]; });
        break;
    }
  }

  Tensor out = Tensor::wrap(make_node(out_shape, std::move(out_values)));
  record_op(out, {a, b}, [kind, out_shape](Tape::Entry& e) {
    TensorNode& na = *e.inputs[0];
    TensorNode& nb = *e.inputs[1];
    const std::vector<double>& gout = e.output->grad;
    const auto sa = broadcast_strides(na.shape, out_shape);
    const auto sb = broadcast_strides(nb.shape, out_shape);
    if (na.requires_grad) {
      ensure_grad(na);
      double* ga = na.grad.data();
      int64_t w = 0;
      if (kind == BinKind::Mul) {
        const double* pb = nb.values.data();
        for_each_broadcast(out_shape, sa, sb,
                           [&](int64_t oa, int64_t ob) { ga[oa] += gout[w++] * pb[ob]; });
      } else {
        for_each_broadcast(out_shape, sa, sb, [&](int64_t oa, int64_t) { ga[oa] += gout[w++]; });
      }
    }
    if (nb.requires_grad) {
      ensure_grad(nb);
      double* gb = nb.grad.data();
      int64_t w = 0;
      if (kind == BinKind::Mul) {
        const double* pa = na.values.data();
        for_each_broadcast(out_shape, sa, sb,
                           [&](int64_t oa, int64_t ob) { gb[ob] += gout[w++] * pa[oa]; });
      } else if (kind == BinKind::Sub) {
        for_each_broadcast(out_shape, sa, sb, [&](int64_t, int64_t ob) { gb[ob] -= gout[w++]; });
      } else {
        for_each_broadcast(out_shape, sa, sb, [&](int64_t, int64_t ob) { gb[ob] += gout[w++]; });
      }
    }
  });
  return out;
}

}  // namespace

// ---- Tensor -----------------------------------------------------------------

Tensor Tensor::wrap(std::shared_ptr<TensorNode> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  validate_shape(shape);
  const int64_t n = shape_count(shape);
  auto node = make_node(std::move(shape), std::vector<double>(n, 0.0));
  node->requires_grad = requires_grad;
  return wrap(std::move(node));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  validate_shape(shape);
  const int64_t n = shape_count(shape);
  auto node = make_node(std::move(shape), std::vector<double>(n, value));
  node->requires_grad = requires_grad;
  return wrap(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return full({1}, value, requires_grad);
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
  validate_shape(shape);
  if (shape_count(shape) != static_cast<int64_t>(values.size()))
    throw ShapeError("value count " + std::to_string(values.size()) + " does not fill shape " +
                     shape_str(shape));
  auto node = make_node(std::move(shape), std::move(values));
  node->requires_grad = requires_grad;
  return wrap(std::move(node));
}

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad) {
  validate_shape(shape);
  const int64_t n = shape_count(shape);
  std::vector<double> values(n);
  for (auto& v : values) v = rng.uniform(lo, hi);
  auto node = make_node(std::move(shape), std::move(values));
  node->requires_grad = requires_grad;
  return wrap(std::move(node));
}

Tensor Tensor::glorot(Shape shape, Rng& rng, int64_t fan_in, int64_t fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform(std::move(shape), rng, -limit, limit, true);
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() requires a scalar, got " + shape_str(shape()));
  return node_->values[0];
}

Tensor Tensor::detach() const {
  auto node = make_node(node_->shape, node_->values);
  return wrap(std::move(node));
}

// ---- Tape ---------------------------------------------------------------

Tape& Tape::active() {
  thread_local Tape tape;
  return tape;
}

void Tape::clear() { entries_.clear(); }

void Tape::record(Entry entry) {
  entry.output->entry_index = static_cast<int64_t>(entries_.size());
  entries_.push_back(std::move(entry));
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw ContractError("backward requires a scalar loss, got " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  if (!loss.requires_grad())
    throw ContractError("backward requires a grad-enabled loss");
  auto loss_node = loss.node();
  ensure_grad(*loss_node);
  loss_node->grad[0] += 1.0;
  const int64_t start = loss_node->entry_index;
  if (start < 0) return;  // bare leaf: d(loss)/d(loss) only
  if (start >= static_cast<int64_t>(entries_.size()) || entries_[start].output != loss_node)
    throw ContractError("loss does not belong to the active tape (was it cleared?)");
  for (int64_t i = start; i >= 0; --i) {
    Entry& entry = entries_[i];
    if (entry.output->grad.empty()) continue;  // not on a path to the loss
    entry.backprop(entry);
  }
}

void backward(const Tensor& loss) { Tape::active().backward(loss); }

NoGradGuard::NoGradGuard() {
  Tape& tape = Tape::active();
  previous_ = tape.recording();
  tape.recording_ = false;
}

NoGradGuard::~NoGradGuard() { Tape::active().recording_ = previous_; }

// ---- ops ------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0])
    throw ShapeError("matmul expects [m,k]x[k,n], got " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  const int64_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out_values(m * n);
  kernels::matmul(a.values().data(), b.values().data(), out_values.data(), m, k, n);
  Tensor out = Tensor::wrap(make_node({m, n}, std::move(out_values)));
  record_op(out, {a, b}, [m, k, n](Tape::Entry& e) {
    TensorNode& na = *e.inputs[0];
    TensorNode& nb = *e.inputs[1];
    const double* gout = e.output->grad.data();
    if (na.requires_grad) {
      ensure_grad(na);
      std::vector<double> scratch(m * k);
      kernels::matmul_nt(gout, nb.values.data(), scratch.data(), m, n, k);
      kernels::axpy(scratch.data(), 1.0, na.grad.data(), m * k);
    }
    if (nb.requires_grad) {
      ensure_grad(nb);
      std::vector<double> scratch(k * n);
      kernels::matmul_tn(na.values.data(), gout, scratch.data(), k, m, n);
      kernels::axpy(scratch.data(), 1.0, nb.grad.data(), k * n);
    }
  });
  return out;
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.shape()[0] != b.shape()[0] ||
      a.shape()[2] != b.shape()[1])
    throw ShapeError("bmm expects [B,m,k]x[B,k,n], got " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  const int64_t B = a.shape()[0], m = a.shape()[1], k = a.shape()[2], n = b.shape()[2];
  std::vector<double> out_values(B * m * n);
  kernels::bmm(a.values().data(), b.values().data(), out_values.data(), B, m, k, n);
  Tensor out = Tensor::wrap(make_node({B, m, n}, std::move(out_values)));
  record_op(out, {a, b}, [B, m, k, n](Tape::Entry& e) {
    TensorNode& na = *e.inputs[0];
    TensorNode& nb = *e.inputs[1];
    const double* gout = e.output->grad.data();
    if (na.requires_grad) {
      ensure_grad(na);
      std::vector<double> scratch(B * m * k);
      kernels::bmm_nt(gout, nb.values.data(), scratch.data(), B, m, n, k);
      kernels::axpy(scratch.data(), 1.0, na.grad.data(), B * m * k);
    }
    if (nb.requires_grad) {
      ensure_grad(nb);
      std::vector<double> scratch(B * k * n);
      kernels::bmm_tn(na.values.data(), gout, scratch.data(), B, k, m, n);
      kernels::axpy(scratch.data(), 1.0, nb.grad.data(), B * k * n);
    }
  });
  return out;
}

Tensor bmm_nt(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.shape()[0] != b.shape()[0] ||
      a.shape()[2] != b.shape()[2])
    throw ShapeError("bmm_nt expects [B,m,k]x[B,n,k], got " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  const int64_t B = a.shape()[0], m = a.shape()[1], k = a.shape()[2], n = b.shape()[1];
  std::vector<double> out_values(B * m * n);
  kernels::bmm_nt(a.values().data(), b.values().data(), out_values.data(), B, m, k, n);
  Tensor out = Tensor::wrap(make_node({B, m, n}, std::move(out_values)));
  record_op(out, {a, b}, [B, m, k, n](Tape::Entry& e) {
    TensorNode& na = *e.inputs[0];
    TensorNode& nb = *e.inputs[1];
    const double* gout = e.output->grad.data();
    if (na.requires_grad) {
      // dA = dC * B
      ensure_grad(na);
      std::vector<double> scratch(B * m * k);
      kernels::bmm(gout, nb.values.data(), scratch.data(), B, m, n, k);
      kernels::axpy(scratch.data(), 1.0, na.grad.data(), B * m * k);
    }
    if (nb.requires_grad) {
      // dB = dC^T * A
      ensure_grad(nb);
      std::vector<double> scratch(B * n * k);
      kernels::bmm_tn(gout, na.values.data(), scratch.data(), B, n, m, k);
      kernels::axpy(scratch.data(), 1.0, nb.grad.data(), B * n * k);
    }
  });
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
  validate_shape(shape);
  if (shape_count(shape) != a.size())
    throw ShapeError("reshape from " + shape_str(a.shape()) + " to " + shape_str(shape) +
                     " changes element count");
  std::vector<double> values(a.values().begin(), a.values().end());
  Tensor out = Tensor::wrap(make_node(std::move(shape), std::move(values)));
  record_op(out, {a}, [](Tape::Entry& e) {
    TensorNode& na = *e.inputs[0];
    if (!na.requires_grad) return;
    ensure_grad(na);
    kernels::axpy(e.output->grad.data(), 1.0, na.grad.data(),
                  static_cast<int64_t>(na.grad.size()));
  });
  return out;
}

namespace {

// offset contribution of each input dim in the permuted output layout
std::vector<int64_t> permute_contrib(const Shape& in_shape, const std::vector<int64_t>& axes) {
  Shape out_shape(axes.size());
  for (size_t j = 0; j < axes.size(); ++j) out_shape[j] = in_shape[axes[j]];
  const auto out_strides = strides_for(out_shape);
  std::vector<int64_t> contrib(in_shape.size());
  for (size_t j = 0; j < axes.size(); ++j) contrib[axes[j]] = out_strides[j];
  return contrib;
}

template <typename Fn>
void for_each_permuted(const Shape& in_shape, const std::vector<int64_t>& contrib, Fn&& fn) {
  const int64_t total = shape_count(in_shape);
  const size_t rank = in_shape.size();
  std::vector<int64_t> idx(rank, 0);
  int64_t out_off = 0;
  for (int64_t i = 0; i < total; ++i) {
    fn(i, out_off);
    for (int64_t d = static_cast<int64_t>(rank) - 1; d >= 0; --d) {
      out_off += contrib[d];
      if (++idx[d] < in_shape[d]) break;
      out_off -= contrib[d] * in_shape[d];
      idx[d] = 0;
    }
  }
}

}  // namespace

Tensor permute(const Tensor& a, const std::vector<int64_t>& axes) {
  const size_t rank = a.shape().size();
  if (axes.size() != rank) throw ShapeError("permute axes rank mismatch");
  std::vector<bool> seen(rank, false);
  for (int64_t ax : axes) {
    if (ax < 0 || ax >= static_cast<int64_t>(rank) || seen[ax])
      throw ShapeError("permute axes must be a permutation of 0.." + std::to_string(rank - 1));
    seen[ax] = true;
  }
  Shape out_shape(rank);
  for (size_t j = 0; j < rank; ++j) out_shape[j] = a.shape()[axes[j]];
  const auto contrib = permute_contrib(a.shape(), axes);
  std::vector<double> values(a.size());
  const double* src = a.values().data();
  for_each_permuted(a.shape(), contrib, [&](int64_t i, int64_t o) { values[o] = src[i]; });
  Tensor out = Tensor::wrap(make_node(std::move(out_shape), std::move(values)));
  const Shape in_shape = a.shape();
  record_op(out, {a}, [in_shape, contrib](Tape::Entry& e) {
    TensorNode& na = *e.inputs[0];
    if (!na.requires_grad) return;
    ensure_grad(na);
    double* gin = na.grad.data();
    const double* gout = e.output->grad.data();
    for_each_permuted(in_shape, contrib, [&](int64_t i, int64_t o) { gin[i] += gout[o]; });
  });
  return out;
}

Tensor transpose2(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose2 expects rank 2, got " + shape_str(a.shape()));
  return permute(a, {1, 0});
}

Tensor gather_rows(const Tensor& a, std::vector<int64_t> row_indices) {
  if (a.rank() != 2) throw ShapeError("gather_rows expects rank 2, got " + shape_str(a.shape()));
  const int64_t rows = a.shape()[0], cols = a.shape()[1];
  for (int64_t r : row_indices)
    if (r < 0 || r >= rows)
      throw ShapeError("gather_rows index " + std::to_string(r) + " out of range [0," +
                       std::to_string(rows) + ")");
  const int64_t out_rows = static_cast<int64_t>(row_indices.size());
  std::vector<double> values(out_rows * cols);
  const double* src = a.values().data();
  for (int64_t r = 0; r < out_rows; ++r)
    std::copy_n(src + row_indices[r] * cols, cols, values.data() + r * cols);
  Tensor out = Tensor::wrap(make_node({out_rows, cols}, std::move(values)));
  record_op(out, {a}, [idx = std::move(row_indices), cols](Tape::Entry& e) {
    TensorNode& na = *e.inputs[0];
    if (!na.requires_grad) return;
    ensure_grad(na);
    const double* gout = e.output->grad.data();
    // serial so duplicate indices accumulate in a fixed order
    for (size_t r = 0; r < idx.size(); ++r)
      for (int64_t c = 0; c < cols; ++c) na.grad[idx[r] * cols + c] += gout[r * cols + c];
  });
  return out;
}

Tensor slice_cols(const Tensor& a, int64_t start, int64_t len) {
  if (a.rank() != 2) throw ShapeError("slice_cols expects rank 2, got " + shape_str(a.shape()));
  const int64_t rows = a.shape()[0], cols = a.shape()[1];
  if (start < 0 || len <= 0 || start + len > cols)
    throw ShapeError("slice_cols range [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") exceeds " + shape_str(a.shape()));
  std::vector<double> values(rows * len);
  const double* src = a.values().data();
  for (int64_t r = 0; r < rows; ++r)
    std::copy_n(src + r * cols + start, len, values.data() + r * len);
  Tensor out = Tensor::wrap(make_node({rows, len}, std::move(values)));
  record_op(out, {a}, [start, len, rows, cols](Tape::Entry& e) {
    TensorNode& na = *e.inputs[0];
    if (!na.requires_grad) return;
    ensure_grad(na);
    const double* gout = e.output->grad.data();
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < len; ++c) na.grad[r * cols + start + c] += gout[r * len + c];
  });
  return out;
}

Tensor concat(const std::vector<Tensor>& parts, int64_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const Shape& first = parts[0].shape();
  const int64_t rank = static_cast<int64_t>(first.size());
  if (axis < 0 || axis >= rank) throw ShapeError("concat axis out of range");
  int64_t axis_total = 0;
  for (const auto& p : parts) {
    if (p.rank() != rank) throw ShapeError("concat rank mismatch");
    for (int64_t d = 0; d < rank; ++d)
      if (d != axis && p.shape()[d] != first[d])
        throw ShapeError("concat shape mismatch: " + shape_str(p.shape()) + " vs " +
                         shape_str(first));
    axis_total += p.shape()[axis];
  }
  Shape out_shape = first;
  out_shape[axis] = axis_total;

  int64_t outer = 1, inner = 1;
  for (int64_t d = 0; d < axis; ++d) outer *= first[d];
  for (int64_t d = axis + 1; d < rank; ++d) inner *= first[d];

  std::vector<double> values(shape_count(out_shape));
  int64_t axis_offset = 0;
  for (const auto& p : parts) {
    const int64_t pa = p.shape()[axis];
    const double* src = p.values().data();
    for (int64_t o = 0; o < outer; ++o)
      std::copy_n(src + o * pa * inner, pa * inner,
                  values.data() + (o * axis_total + axis_offset) * inner);
    axis_offset += pa;
  }
  Tensor out = Tensor::wrap(make_node(std::move(out_shape), std::move(values)));

  std::vector<int64_t> part_sizes;
  part_sizes.reserve(parts.size());
  for (const auto& p : parts) part_sizes.push_back(p.shape()[axis]);
  record_op(out, parts, [outer, inner, axis_total, part_sizes](Tape::Entry& e) {
    const double* gout = e.output->grad.data();
    int64_t axis_offset = 0;
    for (size_t pi = 0; pi < e.inputs.size(); ++pi) {
      TensorNode& np = *e.inputs[pi];
      const int64_t pa = part_sizes[pi];
      if (np.requires_grad) {
        ensure_grad(np);
        for (int64_t o = 0; o < outer; ++o) {
          const double* g = gout + (o * axis_total + axis_offset) * inner;
          double* dst = np.grad.data() + o * pa * inner;
          for (int64_t i = 0; i < pa * inner; ++i) dst[i] += g[i];
        }
      }
      axis_offset += pa;
    }
  });
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return broadcast_binary(BinKind::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return broadcast_binary(BinKind::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return broadcast_binary(BinKind::Mul, a, b); }

Tensor add_scalar(const Tensor& a, double s) {
  std::vector<double> values(a.values().begin(), a.values().end());
  for (auto& v : values) v += s;
  Tensor out = Tensor::wrap(make_node(a.shape(), std::move(values)));
  record_op(out, {a}, [](Tape::Entry& e) {
    TensorNode& na = *e.inputs[0];
    if (!na.requires_grad) return;
    ensure_grad(na);
    kernels::axpy(e.output->grad.data(), 1.0, na.grad.data(),
                  static_cast<int64_t>(na.grad.size()));
  });
  return out;
}

Tensor mul_scalar(const Tensor& a, double s) {
  std::vector<double> values(a.values().begin(), a.values().end());
  for (auto& v : values) v *= s;
  Tensor out = Tensor::wrap(make_node(a.shape(), std::move(values)));
  record_op(out, {a}, [s](Tape::Entry& e) {
    TensorNode& na = *e.inputs[0];
    if (!na.requires_grad) return;
    ensure_grad(na);
    kernels::axpy(e.output->grad.data(), s, na.grad.data(), static_cast<int64_t>(na.grad.size()));
  });
  return out;
}

Tensor leaky_relu(const Tensor& a, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ContractError("leaky_relu slope must lie in (0,1), got " + std::to_string(alpha));
  std::vector<double> values(a.size());
  kernels::map(kernels::Unary::LeakyRelu, a.values().data(), values.data(), a.size(), alpha);
  Tensor out = Tensor::wrap(make_node(a.shape(), std::move(values)));
  record_op(out, {a}, [alpha](Tape::Entry& e) {
    TensorNode& na = *e.inputs[0];
    if (!na.requires_grad) return;
    ensure_grad(na);
    const int64_t n = static_cast<int64_t>(na.values.size());
    std::vector<double> slope(n);
    kernels::map(kernels::Unary::LeakyReluGrad, na.values.data(), slope.data(), n, alpha);
    kernels::fma_acc(slope.data(), e.output->grad.data(), na.grad.data(), n);
  });
  return out;
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> values(a.size());
  kernels::map(kernels::Unary::Sigmoid, a.values().data(), values.data(), a.size(), 0.0);
  Tensor out = Tensor::wrap(make_node(a.shape(), std::move(values)));
  record_op(out, {a}, [](Tape::Entry& e) {
    TensorNode& na = *e.inputs[0];
    if (!na.requires_grad) return;
    ensure_grad(na);
    const int64_t n = static_cast<int64_t>(na.values.size());
    const std::vector<double>& y = e.output->values;
    const std::vector<double>& gout = e.output->grad;
    for (int64_t i = 0; i < n; ++i) na.grad[i] += gout[i] * y[i] * (1.0 - y[i]);
  });
  return out;
}

Tensor tanh(const Tensor& a) {
  std::vector<double> values(a.size());
  kernels::map(kernels::Unary::Tanh, a.values().data(), values.data(), a.size(), 0.0);
  Tensor out = Tensor::wrap(make_node(a.shape(), std::move(values)));
  record_op(out, {a}, [](Tape::Entry& e) {
    TensorNode& na = *e.inputs[0];
    if (!na.requires_grad) return;
    ensure_grad(na);
    const int64_t n = static_cast<int64_t>(na.values.size());
    const std::vector<double>& y = e.output->values;
    const std::vector<double>& gout = e.output->grad;
    for (int64_t i = 0; i < n; ++i) na.grad[i] += gout[i] * (1.0 - y[i] * y[i]);
  });
  return out;
}

Tensor softmax(const Tensor& a, int64_t axis) {
  if (axis < 0 || axis >= a.rank())
    throw ShapeError("softmax axis " + std::to_string(axis) + " invalid for " +
                     shape_str(a.shape()));
  const Shape& shape = a.shape();
  int64_t outer = 1, inner = 1;
  const int64_t len = shape[axis];
  for (int64_t d = 0; d < axis; ++d) outer *= shape[d];
  for (int64_t d = axis + 1; d < static_cast<int64_t>(shape.size()); ++d) inner *= shape[d];

  std::vector<double> values(a.size());
  const double* src = a.values().data();
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t i = 0; i < inner; ++i) {
      const int64_t base = o * len * inner + i;
      double max_v = src[base];
      for (int64_t l = 1; l < len; ++l) max_v = std::max(max_v, src[base + l * inner]);
      double denom = 0.0;
      for (int64_t l = 0; l < len; ++l) {
        const double ev = std::exp(src[base + l * inner] - max_v);
        values[base + l * inner] = ev;
        denom += ev;
      }
      for (int64_t l = 0; l < len; ++l) values[base + l * inner] /= denom;
    }
  }
  Tensor out = Tensor::wrap(make_node(shape, std::move(values)));
  record_op(out, {a}, [outer, len, inner](Tape::Entry& e) {
    TensorNode& na = *e.inputs[0];
    if (!na.requires_grad) return;
    ensure_grad(na);
    const std::vector<double>& y = e.output->values;
    const std::vector<double>& gout = e.output->grad;
    for (int64_t o = 0; o < outer; ++o) {
      for (int64_t i = 0; i < inner; ++i) {
        const int64_t base = o * len * inner + i;
        double dot = 0.0;
        for (int64_t l = 0; l < len; ++l) dot += gout[base + l * inner] * y[base + l * inner];
        for (int64_t l = 0; l < len; ++l) {
          const int64_t p = base + l * inner;
          na.grad[p] += y[p] * (gout[p] - dot);
        }
      }
    }
  });
  return out;
}

Tensor layer_norm(const Tensor& a, const Tensor& gamma, const Tensor& beta, double eps) {
  const int64_t d = a.shape().back();
  if (gamma.rank() != 1 || beta.rank() != 1 || gamma.shape()[0] != d || beta.shape()[0] != d)
    throw ShapeError("layer_norm scale/shift must be rank-1 of size " + std::to_string(d));
  const int64_t rows = a.size() / d;
  auto xhat = std::make_shared<std::vector<double>>(a.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  std::vector<double> values(a.size());
  const double* src = a.values().data();
  const double* g = gamma.values().data();
  const double* b = beta.values().data();
  for (int64_t r = 0; r < rows; ++r) {
    const double* x = src + r * d;
    double mu = 0.0;
    for (int64_t j = 0; j < d; ++j) mu += x[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (int64_t j = 0; j < d; ++j) var += (x[j] - mu) * (x[j] - mu);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = inv;
    for (int64_t j = 0; j < d; ++j) {
      const double xh = (x[j] - mu) * inv;
      (*xhat)[r * d + j] = xh;
      values[r * d + j] = xh * g[j] + b[j];
    }
  }
  Tensor out = Tensor::wrap(make_node(a.shape(), std::move(values)));
  record_op(out, {a, gamma, beta}, [rows, d, xhat, inv_std](Tape::Entry& e) {
    TensorNode& nx = *e.inputs[0];
    TensorNode& ng = *e.inputs[1];
    TensorNode& nb = *e.inputs[2];
    const std::vector<double>& gout = e.output->grad;
    if (ng.requires_grad) {
      ensure_grad(ng);
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < d; ++j) ng.grad[j] += gout[r * d + j] * (*xhat)[r * d + j];
    }
    if (nb.requires_grad) {
      ensure_grad(nb);
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < d; ++j) nb.grad[j] += gout[r * d + j];
    }
    if (nx.requires_grad) {
      ensure_grad(nx);
      const std::vector<double>& gamma_v = ng.values;
      for (int64_t r = 0; r < rows; ++r) {
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        for (int64_t j = 0; j < d; ++j) {
          const double dxh = gout[r * d + j] * gamma_v[j];
          mean_dxhat += dxh;
          mean_dxhat_xhat += dxh * (*xhat)[r * d + j];
        }
        mean_dxhat /= static_cast<double>(d);
        mean_dxhat_xhat /= static_cast<double>(d);
        const double inv = (*inv_std)[r];
        for (int64_t j = 0; j < d; ++j) {
          const double dxh = gout[r * d + j] * gamma_v[j];
          nx.grad[r * d + j] +=
              inv * (dxh - mean_dxhat - (*xhat)[r * d + j] * mean_dxhat_xhat);
        }
      }
    }
  });
  return out;
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  Tensor out = Tensor::wrap(make_node({1}, {acc}));
  record_op(out, {a}, [](Tape::Entry& e) {
    TensorNode& na = *e.inputs[0];
    if (!na.requires_grad) return;
    ensure_grad(na);
    const double g = e.output->grad[0];
    for (auto& v : na.grad) v += g;
  });
  return out;
}

Tensor mean(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  const double n = static_cast<double>(a.size());
  Tensor out = Tensor::wrap(make_node({1}, {acc / n}));
  record_op(out, {a}, [n](Tape::Entry& e) {
    TensorNode& na = *e.inputs[0];
    if (!na.requires_grad) return;
    ensure_grad(na);
    const double g = e.output->grad[0] / n;
    for (auto& v : na.grad) v += g;
  });
  return out;
}

Tensor mse_loss(const Tensor& pred, const Tensor& target, const Tensor& mask) {
  if (pred.shape() != target.shape() || pred.shape() != mask.shape())
    throw ShapeError("mse_loss requires equal shapes, got " + shape_str(pred.shape()) + ", " +
                     shape_str(target.shape()) + ", " + shape_str(mask.shape()));
  double count = 0.0;
  for (double m : mask.values()) count += m;
  if (count <= 0.0) throw ContractError("mse_loss mask selects no positions");
  double acc = 0.0;
  const auto p = pred.values();
  const auto t = target.values();
  const auto m = mask.values();
  for (int64_t i = 0; i < pred.size(); ++i) {
    const double diff = p[i] - t[i];
    acc += m[i] * diff * diff;
  }
  Tensor out = Tensor::wrap(make_node({1}, {acc / count}));
  record_op(out, {pred, target, mask}, [count](Tape::Entry& e) {
    TensorNode& np = *e.inputs[0];
    TensorNode& nt = *e.inputs[1];
    TensorNode& nm = *e.inputs[2];
    const double g = e.output->grad[0];
    const int64_t n = static_cast<int64_t>(np.values.size());
    if (np.requires_grad) {
      ensure_grad(np);
      for (int64_t i = 0; i < n; ++i)
        np.grad[i] += g * 2.0 * nm.values[i] * (np.values[i] - nt.values[i]) / count;
    }
    if (nt.requires_grad) {
      ensure_grad(nt);
      for (int64_t i = 0; i < n; ++i)
        nt.grad[i] -= g * 2.0 * nm.values[i] * (np.values[i] - nt.values[i]) / count;
    }
  });
  return out;
}

Tensor bce_loss(const Tensor& prob, const Tensor& label) {
  if (prob.shape() != label.shape())
    throw ShapeError("bce_loss requires equal shapes, got " + shape_str(prob.shape()) + " vs " +
                     shape_str(label.shape()));
  const int64_t n = prob.size();
  double acc = 0.0;
  const auto p = prob.values();
  const auto y = label.values();
  for (int64_t i = 0; i < n; ++i) {
    const double pc = std::clamp(p[i], kBceEps, 1.0 - kBceEps);
    acc -= y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc);
  }
  Tensor out = Tensor::wrap(make_node({1}, {acc / static_cast<double>(n)}));
  record_op(out, {prob, label}, [n](Tape::Entry& e) {
    TensorNode& np = *e.inputs[0];
    TensorNode& ny = *e.inputs[1];
    if (!np.requires_grad) return;
    ensure_grad(np);
    const double g = e.output->grad[0] / static_cast<double>(n);
    for (int64_t i = 0; i < n; ++i) {
      const double p = np.values[i];
      if (p < kBceEps || p > 1.0 - kBceEps) continue;  // clamp zone is flat
      np.grad[i] += g * (-ny.values[i] / p + (1.0 - ny.values[i]) / (1.0 - p));
    }
  });
  return out;
}

}  // namespace vitalattn
