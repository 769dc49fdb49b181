#include "core/optimizer.hpp"

#include <cmath>

#include "common/errors.hpp"

namespace vitalattn {

Adam::Adam(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  moments_.resize(params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    moments_[i].first.assign(params_[i].size(), 0.0);
    moments_[i].second.assign(params_[i].size(), 0.0);
  }
}

void Adam::step() {
  for (const auto& p : params_)
    if (!p.has_grad())
      throw ContractError("optimizer step with missing gradients; run backward first");
  ++step_count_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& values = params_[i].values_mut();
    const auto grad = params_[i].grad();
    auto& m = moments_[i].first;
    auto& v = moments_[i].second;
    for (size_t j = 0; j < values.size(); ++j) {
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * grad[j];
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * grad[j] * grad[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      values[j] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
  zero_grad();
}

void Adam::zero_grad() {
  for (auto& p : params_) p.clear_grad();
}

}  // namespace vitalattn
