#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>

#include "flexpipe/message.hpp"

namespace flexpipe {

enum class PopStatus { ok, empty, closed };
enum class WaitStatus { ok, closed, timed_out };

// Bounded channel between one producer and one consumer port. Blocking
// operations park on a condition variable; close() may be called from either
// side or from a control thread and wakes all waiters. A closed channel still
// drains: pops return queued messages before reporting end-of-stream.
class LocalChannel {
public:
    explicit LocalChannel(std::size_t capacity);

    // Waits while the queue is full. Returns closed if the channel was closed
    // before space appeared, timed_out only when a timeout was given.
    WaitStatus push_wait(Message m,
                         std::optional<std::chrono::milliseconds> timeout = std::nullopt);

    // Never waits. A full or closed queue drops the new message.
    bool try_push(Message m);

    // Waits until a message is available. Returns closed once the channel is
    // closed and drained.
    WaitStatus pop_wait(Message& out,
                        std::optional<std::chrono::milliseconds> timeout = std::nullopt);

    PopStatus try_pop(Message& out);

    void close();
    bool closed() const;

    std::size_t size() const;
    std::size_t capacity() const { return capacity_; }

    // Counters for introspection and tests.
    std::uint64_t pushed() const;
    std::uint64_t popped() const;
    std::uint64_t dropped() const;
    std::uint64_t high_water() const;

private:
    const std::size_t capacity_;
    mutable std::mutex mutex_;
    std::condition_variable not_full_;
    std::condition_variable not_empty_;
    std::deque<Message> queue_;
    bool closed_ = false;
    std::uint64_t pushed_ = 0;
    std::uint64_t popped_ = 0;
    std::uint64_t dropped_ = 0;
    std::uint64_t high_water_ = 0;
};

} // namespace flexpipe
