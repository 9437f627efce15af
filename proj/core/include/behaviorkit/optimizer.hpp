#pragma once

#include <map>
#include <string>
#include <vector>

#include "behaviorkit/nn.hpp"

namespace bk {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Decoupled weight decay skips vector-shaped parameters (biases, norms,
  // query/mask tokens).
  bool wd_skip_1d = true;
};

// Decoupled-weight-decay adaptive-moments optimizer. Moment slots are keyed
// by parameter name and created on first use, so the state serializes
// cleanly into checkpoints.
class AdamW {
 public:
  struct Slot {
    nn::Mat m;
    nn::Mat v;
  };

  explicit AdamW(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(std::vector<std::pair<std::string, nn::Mat*>>& params,
            const std::vector<std::pair<std::string, const nn::Mat*>>& grads, double lr,
            double wd);

  int64_t step_count() const { return t_; }
  const std::map<std::string, Slot>& slots() const { return slots_; }
  const AdamConfig& config() const { return cfg_; }

  // Checkpoint restore.
  void restore(int64_t step_count, std::map<std::string, Slot> slots) {
    t_ = step_count;
    slots_ = std::move(slots);
  }

 private:
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::map<std::string, Slot> slots_;
};

}  // namespace bk
