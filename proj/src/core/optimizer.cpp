#include "core/optimizer.hpp"

#include <cmath>

#include "core/error.hpp"

namespace hypcbc::opt {

void AdamW::register_param(const std::string& name, ad::Tensor* param) {
  params_.push_back(param);
  entries_.push_back(
      {name, ad::Tensor::zeros(param->shape), ad::Tensor::zeros(param->shape)});
}

void AdamW::step(
    const std::vector<std::pair<std::string, const ad::Tensor*>>& grads,
    double lr) {
  if (grads.size() != params_.size())
    throw_usage("adamw: gradient count does not match registered parameters");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t p = 0; p < params_.size(); ++p) {
    const auto& [name, grad] = grads[p];
    if (name != entries_[p].name)
      throw_usage("adamw: gradient '" + name + "' arrived out of order");
    ad::Tensor& theta = *params_[p];
    if (!grad->same_shape(theta))
      throw_usage("adamw: gradient shape mismatch for '" + name + "'");
    if (!grad->all_finite())
      throw_numeric("adamw: non-finite gradient for parameter '" + name + "'");
    ad::Tensor& m = entries_[p].m;
    ad::Tensor& v = entries_[p].v;
    for (size_t i = 0; i < theta.values.size(); ++i) {
      const double g = grad->values[i];
      m.values[i] = cfg_.beta1 * m.values[i] + (1.0 - cfg_.beta1) * g;
      v.values[i] = cfg_.beta2 * v.values[i] + (1.0 - cfg_.beta2) * g * g;
      const double m_hat = m.values[i] / bc1;
      const double v_hat = v.values[i] / bc2;
      theta.values[i] = theta.values[i] -
                        lr * m_hat / (std::sqrt(v_hat) + cfg_.eps) -
                        lr * cfg_.weight_decay * theta.values[i];
    }
  }
}

void AdamW::restore_moments(const std::vector<MomentEntry>& moments,
                            int64_t step) {
  if (moments.size() != entries_.size())
    throw_usage("adamw: moment count mismatch on restore");
  entries_ = moments;
  t_ = step;
}

double cosine_lr(const Schedule& schedule, int64_t step) {
  if (schedule.total_steps < 1) throw_config("schedule needs total_steps >= 1");
  if (schedule.min_lr < 0.0 || schedule.min_lr > schedule.base_lr)
    throw_config("schedule needs 0 <= min_lr <= base_lr");
  if (step < 0 || step > schedule.total_steps)
    throw_usage("cosine_lr: step out of [0, total_steps]");
  const double frac =
      static_cast<double>(step) / static_cast<double>(schedule.total_steps);
  return schedule.min_lr + 0.5 * (schedule.base_lr - schedule.min_lr) *
                               (1.0 + std::cos(3.141592653589793238462643 * frac));
}

EarlyStopper::EarlyStopper(int patience, StopMode mode)
    : patience_(patience), mode_(mode) {
  if (patience < 1) throw_config("early stopping patience must be >= 1");
}

StopSignal EarlyStopper::update(double metric, int epoch) {
  if (!std::isfinite(metric))
    throw_numeric("early stopper received non-finite metric");
  const bool improved =
      !has_best_ || (mode_ == StopMode::Maximize ? metric > best_metric_
                                                 : metric < best_metric_);
  if (improved) {
    has_best_ = true;
    best_metric_ = metric;
    best_epoch_ = epoch;
    since_ = 0;
    return StopSignal::Continue;
  }
  ++since_;
  return since_ >= patience_ ? StopSignal::Stop : StopSignal::Continue;
}

}  // namespace hypcbc::opt
