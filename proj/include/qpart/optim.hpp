#pragma once

#include <cmath>
#include <map>
#include <vector>

#include "qpart/tensor.hpp"

namespace qpart::diff {

// Classic momentum SGD: buf = m*buf + (grad + wd*value); value -= lr*buf.
// Learning rate is resolved per Param group; lr == 0 leaves the Param
// untouched (including its momentum buffer).
template <typename S>
void sgd_step(const std::vector<ParamT<S>*>& params, const std::map<Group, double>& lr,
              double momentum, double weight_decay) {
  for (ParamT<S>* p : params) {
    auto it = lr.find(p->group);
    if (it == lr.end())
      throw std::invalid_argument(std::string("sgd_step: no learning rate for group ") +
                                  group_name(p->group));
    const double step = it->second;
    if (step == 0.0) continue;
    auto& value = *p->value;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g =
          static_cast<double>(p->grad[i]) + weight_decay * static_cast<double>(value[i]);
      const double buf = momentum * static_cast<double>(p->momentum[i]) + g;
      p->momentum[i] = static_cast<S>(buf);
      value[i] = static_cast<S>(static_cast<double>(value[i]) - step * buf);
    }
  }
}

template <typename S>
void zero_grads(const std::vector<ParamT<S>*>& params) {
  for (ParamT<S>* p : params) p->zero_grad();
}

// Linear warmup to base_lr over warmup_epochs (starting at base_lr/warmup),
// then cosine decay to zero over the remaining epochs.
inline double lr_schedule(int epoch, int total_epochs, int warmup_epochs, double base_lr) {
  if (warmup_epochs >= total_epochs)
    throw std::invalid_argument("lr_schedule: warmup_epochs must be < total_epochs");
  if (epoch < 0 || epoch >= total_epochs)
    throw std::invalid_argument("lr_schedule: epoch out of range");
  if (epoch < warmup_epochs)
    return base_lr * static_cast<double>(epoch + 1) / static_cast<double>(warmup_epochs);
  const double t = static_cast<double>(epoch - warmup_epochs) /
                   static_cast<double>(total_epochs - warmup_epochs);
  return base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * t));
}

}  // namespace qpart::diff
