#include "flexpipe/transport/netem.hpp"

#include "flexpipe/errors.hpp"

namespace flexpipe::transport {

void NetworkConditions::validate() const {
    if (loss_rate < 0.0 || loss_rate > 1.0)
        throw ConfigError("loss_rate must be within [0, 1]");
    if (delay.count() < 0 || jitter.count() < 0)
        throw ConfigError("delay and jitter must be non-negative");
}

FrameScheduler::FrameScheduler(std::function<void(Bytes&&)> send)
    : send_(std::move(send)), worker_([this] { run(); }) {}

FrameScheduler::~FrameScheduler() {
    drain_and_stop();
    if (worker_.joinable()) worker_.join();
}

void FrameScheduler::submit(Bytes frame, std::chrono::steady_clock::time_point due) {
    {
        std::lock_guard lk(mutex_);
        if (closing_) return;
        if (due < last_due_) due = last_due_; // keep submission order
        last_due_ = due;
        queue_.emplace_back(due, std::move(frame));
    }
    cv_.notify_one();
}

void FrameScheduler::drain_and_stop() {
    {
        std::lock_guard lk(mutex_);
        if (closing_) return;
        closing_ = true;
    }
    cv_.notify_all();
}

void FrameScheduler::run() {
    std::unique_lock lk(mutex_);
    for (;;) {
        if (queue_.empty()) {
            if (closing_) break;
            cv_.wait(lk, [this] { return closing_ || !queue_.empty(); });
            continue;
        }
        auto due = queue_.front().first;
        if (std::chrono::steady_clock::now() < due) {
            cv_.wait_until(lk, due);
            continue;
        }
        Bytes frame = std::move(queue_.front().second);
        queue_.pop_front();
        lk.unlock();
        send_(std::move(frame));
        lk.lock();
    }
    stopped_ = true;
}

} // namespace flexpipe::transport
