#pragma once

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <optional>
#include <string>

#include "flexpipe/log.hpp"
#include "flexpipe/port_manager.hpp"

namespace flexpipe {

enum class StepStatus { proceed, stop };

// A pipeline component: an execution function plus declared communication
// ports. Subclasses register ports in their constructor and implement step();
// each instance runs on its own thread, concurrently with all others.
class Kernel {
public:
    explicit Kernel(std::string kernel_type);
    virtual ~Kernel() = default;

    // Processes data from the input ports and sends results to the output
    // ports. Returning stop ends the run loop.
    virtual StepStatus step() = 0;
    virtual void on_start() {}
    virtual void on_stop() {}

    const std::string& type() const { return type_; }
    const std::string& id() const { return id_; }
    void set_instance_id(std::string id);

    PortManager& ports() { return ports_; }
    const PortManager& ports() const { return ports_; }

    // Stable execution frequency; the run loop spaces consecutive step starts
    // at least one period apart.
    void set_frequency(double hz);
    void clear_frequency() { target_hz_.reset(); }
    std::optional<double> frequency() const { return target_hz_; }

    void request_stop();
    bool stop_requested() const { return stop_.load(std::memory_order_relaxed); }

    // Interruptible sleep; returns false when a stop was requested.
    bool sleep_for(std::chrono::milliseconds d);
    bool sleep_until(std::chrono::steady_clock::time_point tp);

    void log(LogLevel level, const std::string& msg) { log_line(level, id_, msg); }

    // Called by the run loop around step().
    void mark_step_start() { step_start_ = std::chrono::steady_clock::now(); }
    void regulate_frequency();

private:
    std::string type_;
    std::string id_;
    PortManager ports_;
    std::optional<double> target_hz_;
    std::chrono::steady_clock::time_point step_start_{};

    std::atomic<bool> stop_{false};
    std::mutex stop_mutex_;
    std::condition_variable stop_cv_;
};

struct RunResult {
    bool failed = false;
    std::string cause;
    std::uint64_t steps = 0;
};

// The kernel execution loop: repeatedly invokes step() until it returns stop,
// a stop is requested, or the step fails. Output ports are closed on exit so
// end-of-stream propagates downstream.
RunResult run_kernel(Kernel& kernel);

} // namespace flexpipe
