#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace hypcbc::opt {

// Decoupled-weight-decay Adam. Weight decay multiplies parameters directly
// (theta *= 1 - lr*wd); it never enters the moment estimates.
struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  // Registration order fixes the update order (determinism).
  void register_param(const std::string& name, ad::Tensor* param);

  // One bias-corrected update over all registered parameters.
  void step(const std::vector<std::pair<std::string, const ad::Tensor*>>& grads,
            double lr);

  int64_t step_count() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }

  struct MomentEntry {
    std::string name;
    ad::Tensor m;
    ad::Tensor v;
  };
  const std::vector<MomentEntry>& moments() const { return entries_; }
  void restore_moments(const std::vector<MomentEntry>& moments, int64_t step);

 private:
  AdamWConfig cfg_;
  int64_t t_ = 0;
  std::vector<ad::Tensor*> params_;
  std::vector<MomentEntry> entries_;
};

// lr(step) = min_lr + (base_lr - min_lr)/2 * (1 + cos(pi * step/total_steps)).
struct Schedule {
  double base_lr = 1e-4;
  double min_lr = 0.0;
  int64_t total_steps = 1;
};

double cosine_lr(const Schedule& schedule, int64_t step);

enum class StopMode { Maximize, Minimize };
enum class StopSignal { Continue, Stop };

// Patience-based early stopping; strict improvement resets the counter and
// records the best epoch.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience = 10, StopMode mode = StopMode::Maximize);

  StopSignal update(double metric, int epoch);

  double best_metric() const { return best_metric_; }
  int best_epoch() const { return best_epoch_; }
  int epochs_since_improvement() const { return since_; }

 private:
  int patience_;
  StopMode mode_;
  bool has_best_ = false;
  double best_metric_ = 0.0;
  int best_epoch_ = -1;
  int since_ = 0;
};

}  // namespace hypcbc::opt
