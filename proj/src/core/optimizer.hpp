#pragma once

#include <vector>

#include "core/tensor.hpp"

namespace vitalattn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adaptive-moment optimizer with bias correction. step() consumes the grads
// populated by backward(), clears them, and bumps the step counter by one.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig config = {});

  void step();
  void zero_grad();
  int64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return config_; }

 private:
  struct Moments {
    std::vector<double> first;
    std::vector<double> second;
  };
  std::vector<Tensor> params_;
  std::vector<Moments> moments_;
  AdamConfig config_;
  int64_t step_count_ = 0;
};

}  // namespace vitalattn
