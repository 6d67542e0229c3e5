#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "meshgrow/errors.hpp"
#include "meshgrow/tensor.hpp"

namespace meshgrow {

// Paper setting: alpha = 2e-4, beta1 = 0.5. beta2/eps are the usual defaults.
template <typename T>
struct AdamConfig {
  T alpha = T(2e-4);
  T beta1 = T(0.5);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

// Bias-corrected Adam over a fixed parameter list. step() consumes the
// gradients and zeroes them afterwards.
template <typename T>
class Adam {
 public:
  Adam(std::vector<ad::Tensor<T>> params, AdamConfig<T> config = {})
      : params_(std::move(params)), config_(config) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
      m_.emplace_back(p.values().size(), T(0));
      v_.emplace_back(p.values().size(), T(0));
    }
  }

  void step() {
    for (const auto& p : params_) {
      if (!p.has_grad()) {
        throw ContractError("adam: parameter has no gradient");
      }
    }
    ++step_count_;
    const T bc1 = T(1) - std::pow(config_.beta1, static_cast<T>(step_count_));
    const T bc2 = T(1) - std::pow(config_.beta2, static_cast<T>(step_count_));
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& values = params_[i].values();
      auto& grad = params_[i].grad();
      auto& m = m_[i];
      auto& v = v_[i];
      for (size_t j = 0; j < values.size(); ++j) {
        const T g = grad[j];
        m[j] = config_.beta1 * m[j] + (T(1) - config_.beta1) * g;
        v[j] = config_.beta2 * v[j] + (T(1) - config_.beta2) * g * g;
        const T m_hat = m[j] / bc1;
        const T v_hat = v[j] / bc2;
        values[j] -= config_.alpha * m_hat / (std::sqrt(v_hat) + config_.eps);
      }
      params_[i].zero_grad();
    }
  }

  int64_t step_count() const { return step_count_; }
  const AdamConfig<T>& config() const { return config_; }

  // Serialization hooks for checkpoints.
  size_t size() const { return params_.size(); }
  std::vector<T>& first_moment(size_t i) { return m_[i]; }
  std::vector<T>& second_moment(size_t i) { return v_[i]; }
  void set_step_count(int64_t t) { step_count_ = t; }

 private:
  std::vector<ad::Tensor<T>> params_;
  AdamConfig<T> config_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  int64_t step_count_ = 0;
};

}  // namespace meshgrow
