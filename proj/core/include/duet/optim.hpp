#pragma once

#include <cstdint>
#include <vector>

#include "duet/params.hpp"
#include "duet/tensor.hpp"

namespace duet {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Decoupled-weight-decay Adam with bias correction. One instance per
// parameter group; moment slots follow the order of the bound parameters.
class AdamW {
 public:
  AdamW(std::vector<Parameter> params, AdamWConfig cfg = {});

  // applies one update with the given learning rate; every bound parameter
  // must carry a populated gradient
  void step(double lr);

  int64_t step_count() const { return step_count_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  struct Slot {
    std::vector<double> m, v;
  };
  std::vector<Parameter> params_;
  std::vector<Slot> slots_;
  AdamWConfig cfg_;
  int64_t step_count_ = 0;
};

// Linear warmup from 0 to peak_lr over warmup_ratio * total_steps, then
// linear decay to 0 at total_steps. step may equal total_steps.
double schedule_lr(int64_t step, int64_t total_steps, double peak_lr, double warmup_ratio);

}  // namespace duet
