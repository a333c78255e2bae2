#pragma once

#include <unordered_map>
#include <vector>

#include "detnas/tensor.hpp"

namespace detnas {

enum class LrScheduleKind {
    kLinearDecay,  // reaches exactly 0 at the final step
    kStepDecay,    // divided by 10 at each milestone
};

struct SgdConfig {
    double base_lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 0.0;
    LrScheduleKind schedule = LrScheduleKind::kLinearDecay;
    int total_steps = 1;
    std::vector<int> milestones;  // step-decay only
    double decay_factor = 0.1;

    double learning_rate(int step) const;
    void validate() const;
};

// v <- momentum * v + grad + weight_decay * param; param <- param - lr * v
void sgd_step(Tensor& param, const Tensor& grad, Tensor& velocity, const SgdConfig& config,
              int step_index);

// Velocity buffers keyed by parameter storage identity; lazily zero-initialized.
class SgdState {
  public:
    Tensor& velocity_for(const Tensor& param);

  private:
    std::unordered_map<const float*, Tensor> velocities_;
};

}  // namespace detnas
