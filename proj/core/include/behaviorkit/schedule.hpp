#pragma once

#include <cstdint>
#include <stdexcept>

namespace bk {

// Step-indexed training schedule: linear LR warmup then cosine decay to
// zero, weight decay rising linearly between its endpoints, EMA momentum
// constant or linearly ramped.
struct ScheduleState {
  int64_t step = 0;
  int64_t total_steps = 0;
  int64_t warmup_steps = 0;
  double base_lr = 6e-6;
  double initial_wd = 0.01;
  double final_wd = 0.1;
  double momentum = 0.998;
  double momentum_final = -1.0;  // < 0 means constant momentum

  void validate() const {
    if (total_steps < 1) throw std::invalid_argument("ScheduleState: total_steps must be >= 1");
    if (warmup_steps < 0 || warmup_steps >= total_steps)
      throw std::invalid_argument("ScheduleState: warmup_steps must be in [0, total_steps)");
    if (step < 0 || step > total_steps)
      throw std::invalid_argument("ScheduleState: step out of range");
  }
};

double lr_at(const ScheduleState& s);
double wd_at(const ScheduleState& s);
double momentum_at(const ScheduleState& s);

}  // namespace bk
