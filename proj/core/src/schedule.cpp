#include "behaviorkit/schedule.hpp"

#include <cmath>

namespace bk {

double lr_at(const ScheduleState& s) {
  s.validate();
  if (s.warmup_steps > 0 && s.step < s.warmup_steps)
    return s.base_lr * static_cast<double>(s.step) / static_cast<double>(s.warmup_steps);
  const double span = static_cast<double>(s.total_steps - s.warmup_steps);
  const double progress = static_cast<double>(s.step - s.warmup_steps) / span;
  return s.base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

double wd_at(const ScheduleState& s) {
  s.validate();
  const double progress = static_cast<double>(s.step) / static_cast<double>(s.total_steps);
  return s.initial_wd + (s.final_wd - s.initial_wd) * progress;
}

double momentum_at(const ScheduleState& s) {
  s.validate();
  if (s.momentum_final < 0.0) return s.momentum;
  const double progress = static_cast<double>(s.step) / static_cast<double>(s.total_steps);
  return s.momentum + (s.momentum_final - s.momentum) * progress;
}

}  // namespace bk
