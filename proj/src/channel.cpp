#include "flexpipe/channel.hpp"

#include "flexpipe/errors.hpp"

namespace flexpipe {

LocalChannel::LocalChannel(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("channel capacity must be >= 1");
}

WaitStatus LocalChannel::push_wait(Message m, std::optional<std::chrono::milliseconds> timeout) {
    std::unique_lock lk(mutex_);
    auto ready = [&] { return closed_ || queue_.size() < capacity_; };
    if (timeout) {
        if (!not_full_.wait_for(lk, *timeout, ready)) return WaitStatus::timed_out;
    } else {
        not_full_.wait(lk, ready);
    }
    if (closed_) {
        ++dropped_;
        return WaitStatus::closed;
    }
    queue_.push_back(std::move(m));
    ++pushed_;
    if (queue_.size() > high_water_) high_water_ = queue_.size();
    lk.unlock();
    not_empty_.notify_one();
    return WaitStatus::ok;
}

bool LocalChannel::try_push(Message m) {
    {
        std::lock_guard lk(mutex_);
        if (closed_ || queue_.size() >= capacity_) {
            ++dropped_;
            return false;
        }
        queue_.push_back(std::move(m));
        ++pushed_;
        if (queue_.size() > high_water_) high_water_ = queue_.size();
    }
    not_empty_.notify_one();
    return true;
}

WaitStatus LocalChannel::pop_wait(Message& out, std::optional<std::chrono::milliseconds> timeout) {
    std::unique_lock lk(mutex_);
    auto ready = [&] { return closed_ || !queue_.empty(); };
    if (timeout) {
        if (!not_empty_.wait_for(lk, *timeout, ready)) return WaitStatus::timed_out;
    } else {
        not_empty_.wait(lk, ready);
    }
    if (queue_.empty()) return WaitStatus::closed; // closed and drained
    out = std::move(queue_.front());
    queue_.pop_front();
    ++popped_;
    lk.unlock();
    not_full_.notify_one();
    return WaitStatus::ok;
}

PopStatus LocalChannel::try_pop(Message& out) {
    std::unique_lock lk(mutex_);
    if (queue_.empty()) return closed_ ? PopStatus::closed : PopStatus::empty;
    out = std::move(queue_.front());
    queue_.pop_front();
    ++popped_;
    lk.unlock();
    not_full_.notify_one();
    return PopStatus::ok;
}

void LocalChannel::close() {
    {
        std::lock_guard lk(mutex_);
        closed_ = true;
    }
    not_full_.notify_all();
    not_empty_.notify_all();
}

bool LocalChannel::closed() const {
    std::lock_guard lk(mutex_);
    return closed_;
}

std::size_t LocalChannel::size() const {
    std::lock_guard lk(mutex_);
    return queue_.size();
}

std::uint64_t LocalChannel::pushed() const {
    std::lock_guard lk(mutex_);
    return pushed_;
}

std::uint64_t LocalChannel::popped() const {
    std::lock_guard lk(mutex_);
    return popped_;
}

std::uint64_t LocalChannel::dropped() const {
    std::lock_guard lk(mutex_);
    return dropped_;
}

std::uint64_t LocalChannel::high_water() const {
    std::lock_guard lk(mutex_);
    return high_water_;
}

} // namespace flexpipe
