#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <thread>

#include "flexpipe/message.hpp"

namespace flexpipe::transport {

// Test-only shim: deterministic per-seed loss and delay applied to outgoing
// frames of an endpoint. Configure before traffic starts.
struct NetworkConditions {
    double loss_rate = 0.0;
    std::chrono::milliseconds delay{0};
    std::chrono::milliseconds jitter{0};
    std::uint64_t seed = 0;

    bool any() const { return loss_rate > 0.0 || delay.count() > 0 || jitter.count() > 0; }
    void validate() const; // throws ConfigError when rates are out of range
};

// Hands frame buffers to a send function at their due time, preserving
// submission order (due times are clamped monotone).
class FrameScheduler {
public:
    explicit FrameScheduler(std::function<void(Bytes&&)> send);
    ~FrameScheduler();

    void submit(Bytes frame, std::chrono::steady_clock::time_point due);
    // Flushes pending frames (honouring due times), then stops the worker.
    void drain_and_stop();

private:
    void run();

    std::function<void(Bytes&&)> send_;
    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<std::pair<std::chrono::steady_clock::time_point, Bytes>> queue_;
    bool closing_ = false;
    bool stopped_ = false;
    std::chrono::steady_clock::time_point last_due_{};
    std::thread worker_;
};

} // namespace flexpipe::transport
