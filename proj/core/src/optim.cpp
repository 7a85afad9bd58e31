#include "duet/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace duet {

AdamW::AdamW(std::vector<Parameter> params, AdamWConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  slots_.resize(params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    size_t n = static_cast<size_t>(params_[i].tensor.numel());
    slots_[i].m.assign(n, 0.0);
    slots_[i].v.assign(n, 0.0);
  }
}

void AdamW::step(double lr) {
  if (lr < 0.0) throw std::invalid_argument("adamw: negative learning rate");
  ++step_count_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    Tensor t = params_[pi].tensor;
    if (!t.has_grad())
      throw std::runtime_error("adamw: parameter '" + params_[pi].name +
                               "' has no gradient; run backward first");
    const std::vector<double>& g = t.grad();
    std::vector<double>& w = t.mutable_data();
    Slot& s = slots_[pi];
    for (size_t i = 0; i < w.size(); ++i) {
      s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * g[i];
      s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      double m_hat = s.m[i] / bc1;
      double v_hat = s.v[i] / bc2;
      w[i] -= lr * (m_hat / (std::sqrt(v_hat) + cfg_.eps) + cfg_.weight_decay * w[i]);
    }
  }
}

double schedule_lr(int64_t step, int64_t total_steps, double peak_lr, double warmup_ratio) {
  if (total_steps <= 0) throw std::invalid_argument("schedule_lr: total_steps must be positive");
  if (warmup_ratio <= 0.0 || warmup_ratio >= 1.0)
    throw std::invalid_argument("schedule_lr: warmup_ratio must be in (0, 1)");
  if (step < 0 || step > total_steps)
    throw std::invalid_argument("schedule_lr: step " + std::to_string(step) +
                                " outside [0, " + std::to_string(total_steps) + "]");
  double warm = warmup_ratio * static_cast<double>(total_steps);
  double s = static_cast<double>(step);
  if (s <= warm) return peak_lr * s / warm;
  return peak_lr * (static_cast<double>(total_steps) - s) /
         (static_cast<double>(total_steps) - warm);
}

}  // namespace duet
