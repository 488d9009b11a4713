#include "vitnerf/training/schedule.hpp"

#include <string>

#include "vitnerf/core/errors.hpp"

namespace vitnerf::training {

double lr_at_step(long long step, double base_lr, const ScheduleConfig& cfg) {
  if (step < 0) throw ArgumentError("lr_at_step: negative step " + std::to_string(step));
  if (step <= cfg.warmup_steps) {
    if (cfg.warmup_steps == 0) return base_lr;
    return base_lr * (static_cast<double>(step) / static_cast<double>(cfg.warmup_steps));
  }
  if (step <= cfg.decay_step) return base_lr;
  return base_lr * cfg.decay_factor;
}

}  // namespace vitnerf::training
