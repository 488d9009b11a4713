#pragma once

namespace vitnerf::training {

struct ScheduleConfig {
  long long warmup_steps = 100;
  long long decay_step = 4000;
  double decay_factor = 0.1;
};

/// Linear warmup from 0 to `base_lr` over warmup_steps, constant until
/// decay_step, then base_lr * decay_factor.
double lr_at_step(long long step, double base_lr, const ScheduleConfig& cfg);

}  // namespace vitnerf::training
