#include "flexpipe/kernel.hpp"

#include <cmath>

#include "flexpipe/errors.hpp"

namespace flexpipe {

Kernel::Kernel(std::string kernel_type) : type_(std::move(kernel_type)), id_(type_) {
    ports_.set_stage_label(id_);
}

void Kernel::set_instance_id(std::string id) {
    id_ = std::move(id);
    ports_.set_stage_label(id_);
}

void Kernel::set_frequency(double hz) {
    if (!(hz > 0.0)) throw ConfigError("frequency target must be > 0");
    target_hz_ = hz;
}

void Kernel::request_stop() {
    {
        std::lock_guard lk(stop_mutex_);
        stop_.store(true, std::memory_order_relaxed);
    }
    stop_cv_.notify_all();
    ports_.close_inputs(); // wake a blocked get_input
}

bool Kernel::sleep_for(std::chrono::milliseconds d) {
    return sleep_until(std::chrono::steady_clock::now() + d);
}

bool Kernel::sleep_until(std::chrono::steady_clock::time_point tp) {
    std::unique_lock lk(stop_mutex_);
    stop_cv_.wait_until(lk, tp, [this] { return stop_.load(std::memory_order_relaxed); });
    return !stop_.load(std::memory_order_relaxed);
}

void Kernel::regulate_frequency() {
    if (!target_hz_) return;
    const auto period =
        std::chrono::nanoseconds(static_cast<std::int64_t>(std::llround(1e9 / *target_hz_)));
    const auto next = step_start_ + period;
    if (std::chrono::steady_clock::now() < next) sleep_until(next);
}

RunResult run_kernel(Kernel& kernel) {
    RunResult result;
    try {
        kernel.on_start();
    } catch (const std::exception& e) {
        result.failed = true;
        result.cause = std::string("on_start: ") + e.what();
    }
    while (!result.failed && !kernel.stop_requested()) {
        kernel.mark_step_start();
        StepStatus status;
        try {
            status = kernel.step();
        } catch (const std::exception& e) {
            result.failed = true;
            result.cause = e.what();
            kernel.log(LogLevel::error, std::string("step failed: ") + e.what());
            break;
        }
        ++result.steps;
        if (status == StepStatus::stop) break;
        kernel.regulate_frequency();
    }
    try {
        kernel.on_stop();
    } catch (...) {
    }
    kernel.ports().close_outputs(); // end-of-stream to downstream kernels
    return result;
}

} // namespace flexpipe
