#include "detnas/sgd.hpp"

#include <algorithm>

#include "detnas/errors.hpp"

namespace detnas {

double SgdConfig::learning_rate(int step) const {
    if (step < 0) throw ConfigError("sgd: negative step index");
    switch (schedule) {
        case LrScheduleKind::kLinearDecay: {
            if (total_steps <= 1) return base_lr;
            const int last = total_steps - 1;
            const int s = std::min(step, last);
            return base_lr * (1.0 - static_cast<double>(s) / last);
        }
        case LrScheduleKind::kStepDecay: {
            double lr = base_lr;
            for (int m : milestones)
                if (step >= m) lr *= decay_factor;
            return lr;
        }
    }
    throw ConfigError("sgd: unknown schedule");
}

void SgdConfig::validate() const {
    if (base_lr < 0) throw ConfigError("sgd: base_lr must be non-negative");
    if (momentum < 0 || momentum >= 1) throw ConfigError("sgd: momentum must be in [0,1)");
    if (weight_decay < 0) throw ConfigError("sgd: weight_decay must be non-negative");
    if (total_steps <= 0) throw ConfigError("sgd: total_steps must be positive");
}

void sgd_step(Tensor& param, const Tensor& grad, Tensor& velocity, const SgdConfig& config,
              int step_index) {
    if (!param.same_shape(grad) || !param.same_shape(velocity))
        throw ShapeError("sgd_step: param " + param.shape_str() + ", grad " + grad.shape_str() +
                         ", velocity " + velocity.shape_str() + " must agree");
    const float lr = static_cast<float>(config.learning_rate(step_index));
    const float m = static_cast<float>(config.momentum);
    const float wd = static_cast<float>(config.weight_decay);
    for (size_t i = 0; i < param.numel(); ++i) {
        velocity[i] = m * velocity[i] + grad[i] + wd * param[i];
        param[i] -= lr * velocity[i];
    }
}

Tensor& SgdState::velocity_for(const Tensor& param) {
    auto it = velocities_.find(param.data());
    if (it == velocities_.end()) it = velocities_.emplace(param.data(), Tensor(param.dims())).first;
    return it->second;
}

}  // namespace detnas
