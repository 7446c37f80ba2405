#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dpa/events.hpp"
#include "dpa/tensor.hpp"

namespace dpa::optim {

struct SgdConfig {
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 0.0;
};

// Heavy-ball SGD: v <- mu v + g + wd p; p <- p - lr v.
class Sgd {
 public:
  explicit Sgd(SgdConfig config = {}) : config_(config) {}

  // Returns false (and leaves params and state untouched) if any gradient is
  // non-finite or shapes disagree with earlier steps.
  bool step(std::span<ad::Tensor* const> params, std::span<const ad::Tensor> grads, double lr,
            EventLog* log = nullptr);
  bool step(std::span<ad::Tensor* const> params, std::span<const ad::Tensor> grads,
            EventLog* log = nullptr) {
    return step(params, grads, config_.lr, log);
  }

  const SgdConfig& config() const { return config_; }
  const std::vector<ad::Tensor>& velocity() const { return velocity_; }

 private:
  SgdConfig config_;
  std::vector<ad::Tensor> velocity_;
};

struct AdamConfig {
  double lr = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t size, AdamConfig config = {})
      : config_(config), m_(size, 0.0), v_(size, 0.0) {}

  bool step(std::span<double> params, std::span<const double> grads, EventLog* log = nullptr);

  const AdamConfig& config() const { return config_; }
  std::size_t steps() const { return t_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

}  // namespace dpa::optim
