#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "egopose/nn.hpp"
#include "egopose/tensor.hpp"

namespace egopose {

/// lr(t) = lr_end + 0.5 (lr_start - lr_end)(1 + cos(pi t / t_max)), t in
/// [0, total_steps-1]; endpoints are exact.
double cosine_lr(int64_t step, int64_t total_steps, double lr_start, double lr_end);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  /// Updates every trainable param that accumulated a gradient this step.
  /// Frozen or gradient-free params are untouched (no state allocated).
  void step(const std::vector<nn::NamedParam>& params, double lr);

  static void zero_grad(const std::vector<nn::NamedParam>& params);

  /// Scales all trainable grads so the global L2 norm is at most max_norm.
  /// Returns the pre-clip norm.
  static double clip_global_norm(const std::vector<nn::NamedParam>& params, double max_norm);

  int64_t step_count() const { return step_count_; }

  /// Moments exported as "adam.m.<name>" / "adam.v.<name>" plus "adam.step".
  void export_state(std::map<std::string, Tensor>& out) const;
  void import_state(const std::map<std::string, Tensor>& in);

 private:
  struct Slot {
    Tensor m, v;
  };
  AdamConfig cfg_;
  std::map<std::string, Slot> slots_;
  int64_t step_count_ = 0;
};

}  // namespace egopose
