#pragma once

#include <cmath>
#include <stdexcept>

namespace starpix::optim {

// Step decay: lr(epoch) = base_lr * gamma^floor(epoch / step_size).
struct LrSchedule {
    double gamma = 0.1;
    int step_size = 7;
};

inline double scheduled_lr(double base_lr, const LrSchedule& schedule, int epoch) {
    if (schedule.step_size < 1)
        throw std::invalid_argument("LrSchedule: step_size must be >= 1");
    if (epoch < 0) throw std::invalid_argument("LrSchedule: negative epoch");
    return base_lr * std::pow(schedule.gamma, static_cast<double>(epoch / schedule.step_size));
}

}  // namespace starpix::optim
