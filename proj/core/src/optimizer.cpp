#include "behaviorkit/optimizer.hpp"

#include <cmath>

namespace bk {

void AdamW::step(std::vector<std::pair<std::string, nn::Mat*>>& params,
                 const std::vector<std::pair<std::string, const nn::Mat*>>& grads, double lr,
                 double wd) {
  if (params.size() != grads.size())
    throw std::invalid_argument("AdamW::step: parameter/gradient count mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].first != grads[i].first)
      throw std::invalid_argument("AdamW::step: name mismatch at " + params[i].first);
    nn::Mat& p = *params[i].second;
    const nn::Mat& g = *grads[i].second;
    Slot& slot = slots_[params[i].first];
    if (slot.m.size() == 0) {
      slot.m = nn::Mat::Zero(p.rows(), p.cols());
      slot.v = nn::Mat::Zero(p.rows(), p.cols());
    }
    slot.m = cfg_.beta1 * slot.m + (1.0 - cfg_.beta1) * g;
    slot.v = (cfg_.beta2 * slot.v.array() + (1.0 - cfg_.beta2) * g.array().square()).matrix();
    const auto mhat = slot.m.array() / bc1;
    const auto vhat = slot.v.array() / bc2;
    p.array() -= lr * mhat / (vhat.sqrt() + cfg_.eps);
    const bool is_vector = p.cols() == 1 || p.rows() == 1;
    if (wd != 0.0 && !(cfg_.wd_skip_1d && is_vector)) p.array() -= lr * wd * p.array();
  }
}

}  // namespace bk
