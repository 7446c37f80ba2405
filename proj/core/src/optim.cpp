#include "dpa/optim.hpp"

#include <cmath>

namespace dpa::optim {

bool Sgd::step(std::span<ad::Tensor* const> params, std::span<const ad::Tensor> grads, double lr,
               EventLog* log) {
  if (params.size() != grads.size()) {
    throw ad::ShapeError("sgd: " + std::to_string(params.size()) + " params but " +
                         std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i].shape()) {
      throw ad::ShapeError("sgd", params[i]->shape(), grads[i].shape());
    }
    if (!grads[i].all_finite()) {
      record(log, EventKind::kNonFiniteGradient, "sgd");
      return false;
    }
  }
  if (velocity_.empty()) {
    for (const auto* p : params) velocity_.emplace_back(p->rows(), p->cols());
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Tensor& p = *params[i];
    ad::Tensor& v = velocity_[i];
    const ad::Tensor& g = grads[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      v[k] = config_.momentum * v[k] + g[k] + config_.weight_decay * p[k];
      p[k] -= lr * v[k];
    }
  }
  return true;
}

bool Adam::step(std::span<double> params, std::span<const double> grads, EventLog* log) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ad::ShapeError("adam: state holds " + std::to_string(m_.size()) + " entries, got " +
                         std::to_string(params.size()) + " params and " +
                         std::to_string(grads.size()) + " gradients");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) {
      record(log, EventKind::kNonFiniteGradient, "adam");
      return false;
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i] * grads[i];
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    params[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
  }
  return true;
}

}  // namespace dpa::optim
