#include "egopose/optimizer.hpp"

#include <cmath>

#include "egopose/check.hpp"
#include "egopose/kernels.hpp"

namespace egopose {

double cosine_lr(int64_t step, int64_t total_steps, double lr_start, double lr_end) {
  EGOPOSE_CHECK(total_steps >= 1 && step >= 0 && step < total_steps, "cosine_lr: bad step");
  if (total_steps == 1) return lr_start;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps - 1);
  return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + std::cos(M_PI * t));
}

void Adam::step(const std::vector<nn::NamedParam>& params, double lr) {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
  const float b1 = static_cast<float>(cfg_.beta1);
  const float b2 = static_cast<float>(cfg_.beta2);

  for (const auto& np : params) {
    nn::Param& p = *np.param;
    if (!p.trainable || !p.var.has_grad()) continue;
    Tensor& value = p.var.val();
    const Tensor& grad = p.var.grad();
    Slot& slot = slots_[np.name];
    if (!slot.m.defined() || slot.m.numel() != value.numel()) {
      slot.m = Tensor(value.shape());
      slot.v = Tensor(value.shape());
    }
    float* pm = slot.m.data();
    float* pv = slot.v.data();
    float* pw = value.data();
    const float* pg = grad.data();
    for (int64_t i = 0; i < value.numel(); ++i) {
      pm[i] = b1 * pm[i] + (1.0f - b1) * pg[i];
      pv[i] = b2 * pv[i] + (1.0f - b2) * pg[i] * pg[i];
      const double mhat = pm[i] / bc1;
      const double vhat = pv[i] / bc2;
      pw[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + cfg_.eps));
    }
  }
}

void Adam::zero_grad(const std::vector<nn::NamedParam>& params) {
  for (const auto& np : params) np.param->var.zero_grad();
}

double Adam::clip_global_norm(const std::vector<nn::NamedParam>& params, double max_norm) {
  double sumsq = 0.0;
  for (const auto& np : params) {
    if (!np.param->trainable || !np.param->var.has_grad()) continue;
    const Tensor& g = np.param->var.grad();
    sumsq += kernels::reduce_sumsq(g.numel(), g.data());
  }
  const double norm = std::sqrt(sumsq);
  if (max_norm > 0.0 && norm > max_norm) {
    const float factor = static_cast<float>(max_norm / norm);
    for (const auto& np : params) {
      if (!np.param->trainable || !np.param->var.has_grad()) continue;
      Tensor& g = np.param->var.grad();
      kernels::scale(g.numel(), factor, g.data());
    }
  }
  return norm;
}

void Adam::export_state(std::map<std::string, Tensor>& out) const {
  for (const auto& [name, slot] : slots_) {
    out["adam.m." + name] = slot.m;
    out["adam.v." + name] = slot.v;
  }
  out["adam.step"] = Tensor::scalar(static_cast<float>(step_count_));
}

void Adam::import_state(const std::map<std::string, Tensor>& in) {
  slots_.clear();
  step_count_ = 0;
  auto it = in.find("adam.step");
  if (it != in.end()) step_count_ = static_cast<int64_t>(it->second.data()[0]);
  for (const auto& [name, tensor] : in) {
    if (name.rfind("adam.m.", 0) == 0) {
      slots_[name.substr(7)].m = tensor;
    } else if (name.rfind("adam.v.", 0) == 0) {
      slots_[name.substr(7)].v = tensor;
    }
  }
}

}  // namespace egopose
