#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "flexpipe/message.hpp"

using namespace flexpipe;

TEST_CASE("clock is monotonic and wall-anchored") {
    const auto a = now_ns();
    const auto b = now_ns();
    CHECK(b >= a);
    // Within a day of the system wall clock.
    const auto wall = std::chrono::duration_cast<std::chrono::nanoseconds>(
                          std::chrono::system_clock::now().time_since_epoch())
                          .count();
    CHECK(std::abs(wall - b) < 86'400'000'000'000ll);
}

TEST_CASE("payload sharing aliases the same buffer") {
    Message a;
    a.set_payload(Bytes{1, 2, 3, 4});
    Message b;
    b.share_payload(a);
    CHECK(b.payload_data() == a.payload_data());
    CHECK(b.payload_size() == 4);

    Message c = a; // copies share too
    CHECK(c.payload_data() == a.payload_data());
}

TEST_CASE("hop appends record ordering") {
    Message m;
    m.ts_origin = now_ns();
    m.append_hop("a");
    m.append_hop("b");
    REQUIRE(m.hops.size() == 2);
    CHECK(m.hops[0].stage == "a");
    CHECK(m.ts_origin <= m.hops[0].ts_ns);
    CHECK(m.hops[0].ts_ns <= m.hops[1].ts_ns);
}

TEST_CASE("inherit_timing carries origin and hops") {
    Message src;
    src.ts_origin = 123;
    src.append_hop("camera", 456);
    Message derived;
    derived.ts_origin = now_ns();
    derived.inherit_timing(src);
    CHECK(derived.ts_origin == 123);
    REQUIRE(derived.hops.size() == 1);
    CHECK(derived.hops[0].stage == "camera");
}

TEST_CASE("equality covers payload bytes") {
    Message a;
    a.type_tag = "t";
    a.seq = 7;
    a.ts_origin = 9;
    a.set_payload(Bytes{1, 2, 3});
    Message b = a;
    CHECK(a == b);
    b.set_payload(Bytes{1, 2, 4});
    CHECK_FALSE(a == b);
}
