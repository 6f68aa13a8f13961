#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <thread>

#include "flexpipe/channel.hpp"
#include "flexpipe/errors.hpp"

using namespace flexpipe;
using namespace std::chrono_literals;

namespace {
Message msg(std::uint64_t seq) {
    Message m;
    m.seq = seq;
    m.ts_origin = now_ns();
    return m;
}

double ms_between(std::chrono::steady_clock::time_point a,
                  std::chrono::steady_clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
}
} // namespace

TEST_CASE("capacity must be positive") {
    CHECK_THROWS_AS(LocalChannel(0), ConfigError);
}

TEST_CASE("fifo order and counters") {
    LocalChannel ch(4);
    for (int i = 0; i < 3; ++i) CHECK(ch.try_push(msg(i)));
    Message out;
    for (int i = 0; i < 3; ++i) {
        REQUIRE(ch.try_pop(out) == PopStatus::ok);
        CHECK(out.seq == static_cast<std::uint64_t>(i));
    }
    CHECK(ch.try_pop(out) == PopStatus::empty);
    CHECK(ch.pushed() == 3);
    CHECK(ch.popped() == 3);
}

TEST_CASE("non-blocking push drops the new message when full") {
    LocalChannel ch(1);
    CHECK(ch.try_push(msg(1)));
    CHECK_FALSE(ch.try_push(msg(2)));
    CHECK(ch.dropped() == 1);
    Message out;
    REQUIRE(ch.try_pop(out) == PopStatus::ok);
    CHECK(out.seq == 1); // the older entry was retained
}

TEST_CASE("non-blocking pop returns immediately on empty") {
    LocalChannel ch(1);
    Message out;
    const auto t0 = std::chrono::steady_clock::now();
    CHECK(ch.try_pop(out) == PopStatus::empty);
    CHECK(ms_between(t0, std::chrono::steady_clock::now()) < 1.0);
}

TEST_CASE("blocking pop resumes when a delayed producer pushes") {
    LocalChannel ch(1);
    std::thread producer([&] {
        std::this_thread::sleep_for(50ms);
        ch.push_wait(msg(42));
    });
    Message out;
    const auto t0 = std::chrono::steady_clock::now();
    REQUIRE(ch.pop_wait(out) == WaitStatus::ok);
    const double waited = ms_between(t0, std::chrono::steady_clock::now());
    CHECK(out.seq == 42);
    CHECK(waited >= 45.0);
    CHECK(waited <= 150.0);
    producer.join();
}

TEST_CASE("blocking push suspends until the consumer pops") {
    LocalChannel ch(1);
    REQUIRE(ch.try_push(msg(1)));
    std::thread consumer([&] {
        std::this_thread::sleep_for(50ms);
        Message out;
        ch.pop_wait(out);
    });
    const auto t0 = std::chrono::steady_clock::now();
    REQUIRE(ch.push_wait(msg(2)) == WaitStatus::ok);
    const double waited = ms_between(t0, std::chrono::steady_clock::now());
    CHECK(waited >= 45.0);
    CHECK(waited <= 150.0);
    consumer.join();
}

TEST_CASE("close wakes waiters and drains") {
    LocalChannel ch(2);
    REQUIRE(ch.try_push(msg(1)));
    std::thread closer([&] {
        std::this_thread::sleep_for(20ms);
        ch.close();
    });
    Message out;
    CHECK(ch.pop_wait(out) == WaitStatus::ok); // drains queued message
    CHECK(ch.pop_wait(out) == WaitStatus::closed);
    CHECK(ch.try_pop(out) == PopStatus::closed);
    CHECK(ch.push_wait(msg(2)) == WaitStatus::closed);
    closer.join();
}

TEST_CASE("pop timeout reports timed_out") {
    LocalChannel ch(1);
    Message out;
    CHECK(ch.pop_wait(out, 30ms) == WaitStatus::timed_out);
}

TEST_CASE("bounded under concurrent load: occupancy never exceeds capacity") {
    constexpr std::size_t kCap = 5;
    LocalChannel ch(kCap);
    std::thread producer([&] {
        for (int i = 0; i < 2000; ++i)
            if (i % 3 == 0)
                ch.push_wait(msg(i));
            else
                ch.try_push(msg(i));
        ch.close();
    });
    std::thread consumer([&] {
        Message out;
        while (ch.pop_wait(out) == WaitStatus::ok) {
        }
    });
    producer.join();
    consumer.join();
    CHECK(ch.high_water() <= kCap);
    CHECK(ch.popped() == ch.pushed());
}
