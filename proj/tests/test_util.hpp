#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace vitalattn::testutil {

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Central finite differences against the recorded gradients. loss_fn must
// rebuild the graph from the current parameter values on every call. When
// max_coords > 0 a random coordinate subset is probed per parameter.
inline double max_grad_rel_err(const std::function<Tensor()>& loss_fn,
                               std::vector<Tensor> params, Rng& rng, double h = 1e-5,
                               int max_coords = -1) {
  Tape::active().clear();
  Tensor loss = loss_fn();
  backward(loss);
  std::vector<std::vector<double>> grads;
  for (auto& p : params) {
    grads.emplace_back(p.grad().begin(), p.grad().end());
    p.clear_grad();
  }
  Tape::active().clear();

  double worst = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& values = params[pi].values_mut();
    std::vector<int64_t> coords;
    if (max_coords <= 0 || static_cast<int64_t>(values.size()) <= max_coords) {
      coords.resize(values.size());
      for (size_t j = 0; j < values.size(); ++j) coords[j] = static_cast<int64_t>(j);
    } else {
      for (int c = 0; c < max_coords; ++c)
        coords.push_back(static_cast<int64_t>(rng.below(values.size())));
    }
    for (int64_t j : coords) {
      const double saved = values[j];
      NoGradGuard guard;
      values[j] = saved + h;
      const double plus = loss_fn().item();
      values[j] = saved - h;
      const double minus = loss_fn().item();
      values[j] = saved;
      const double fd = (plus - minus) / (2.0 * h);
      worst = std::max(worst, rel_err(grads[pi][j], fd));
    }
  }
  return worst;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = true) {
  return Tensor::uniform(std::move(shape), rng, lo, hi, requires_grad);
}

}  // namespace vitalattn::testutil
