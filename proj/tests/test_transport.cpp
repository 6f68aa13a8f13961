#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <thread>

#include "flexpipe/transport/datagram.hpp"
#include "flexpipe/transport/reliable.hpp"
#include "flexpipe/transport/wire.hpp"

using namespace flexpipe;
using namespace flexpipe::transport;
using namespace std::chrono_literals;

namespace {

Message sample_message() {
    Message m;
    m.type_tag = "frame";
    m.seq = 0x0102030405060708ull;
    m.ts_origin = 0x1122334455667788ll;
    m.append_hop("camera", 0x1122334455667789ll);
    m.set_payload(Bytes{0xde, 0xad, 0xbe, 0xef});
    return m;
}

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

} // namespace

TEST_CASE("wire layout is bit-exact") {
    Message m;
    m.type_tag = "ab";
    m.seq = 0x0102030405060708ull;
    m.ts_origin = 0x0a0b0c0d0e0f1011ll;
    m.set_payload(Bytes{0x55, 0x66});
    const Bytes bytes = serialize(m);

    const Bytes expected = {
        'F', 'X', 'P', '1',                             // magic
        0x08, 0x07, 0x06, 0x05, 0x04, 0x03, 0x02, 0x01, // msg_seq LE
        0x00, 0x00,                                     // frag_index
        0x01, 0x00,                                     // frag_count
        0x02, 0x00,                                     // type_tag_len
        'a',  'b',                                      // type_tag
        0x11, 0x10, 0x0f, 0x0e, 0x0d, 0x0c, 0x0b, 0x0a, // ts_origin LE
        0x00, 0x00,                                     // hop_count
        0x55, 0x66,                                     // payload
    };
    CHECK(bytes == expected);
}

TEST_CASE("serialize/deserialize is an identity, hops included") {
    Message m = sample_message();
    m.append_hop("encode", 0x1122334455667790ll);
    m.append_hop("transport", 0x1122334455667791ll);
    Message back = deserialize(serialize(m));
    CHECK(back == m);

    SUBCASE("empty payload round-trips") {
        Message e;
        e.type_tag = "empty";
        e.seq = 1;
        e.ts_origin = 2;
        CHECK(deserialize(serialize(e)) == e);
        CHECK(deserialize(serialize(e)).payload_size() == 0);
    }
}

TEST_CASE("flipped magic byte is a decode error; truncation reports offset") {
    Bytes bytes = serialize(sample_message());
    Bytes bad = bytes;
    bad[0] ^= 0xff;
    CHECK_THROWS_AS(deserialize(bad), DecodeError);

    Bytes truncated(bytes.begin(), bytes.begin() + 10);
    try {
        deserialize(truncated);
        FAIL("expected DecodeError");
    } catch (const DecodeError& e) {
        CHECK(e.offset() <= 10);
    }
}

TEST_CASE("fuzzed inputs never crash the decoder") {
    std::mt19937_64 rng(7);
    const Bytes valid = serialize(sample_message());
    int decoded = 0;
    for (int i = 0; i < 5000; ++i) {
        Bytes buf = valid;
        const int mutations = 1 + static_cast<int>(rng() % 8);
        for (int j = 0; j < mutations; ++j) {
            const auto pos = rng() % buf.size();
            buf[pos] = static_cast<std::uint8_t>(rng());
        }
        if (rng() % 4 == 0) buf.resize(rng() % (buf.size() + 1));
        try {
            Message m = deserialize(buf);
            ++decoded; // mutation kept it valid; fine
        } catch (const DecodeError&) {
        } catch (const ConfigError&) {
        }
    }
    CHECK(decoded >= 0);
}

TEST_CASE("fragment count oracle") {
    // ceil(len / mtu), computed independently here and frozen.
    auto oracle = [](std::size_t len, std::size_t mtu) {
        return len == 0 ? std::size_t(1) : (len + mtu - 1) / mtu;
    };
    CHECK(fragment_count(6 * 1024 * 1024, 1200) == oracle(6 * 1024 * 1024, 1200));
    CHECK(fragment_count(6 * 1024 * 1024, 1200) == 5243);
    CHECK(fragment_count(500, 1200) == 1);
    CHECK(fragment_count(0, 1200) == 1);
    CHECK(fragment_count(1200, 1200) == 1);
    CHECK(fragment_count(1201, 1200) == 2);
}

TEST_CASE("fragmentation and reassembly round-trip") {
    Message m = sample_message();
    m.set_payload(Bytes(5000, 0x42));
    const std::size_t mtu = 1200;
    const std::size_t n = fragment_count(m.payload_size(), mtu);
    CHECK(n == 5);

    Reassembler r(4);
    std::optional<Message> out;
    for (std::size_t i = 0; i < n; ++i) {
        WireFrame f = decode_frame(encode_fragment(m, i, mtu));
        CHECK(f.frag_index == i);
        CHECK(f.frag_count == n);
        out = r.feed(std::move(f));
        if (i + 1 < n) CHECK_FALSE(out.has_value());
    }
    REQUIRE(out.has_value());
    CHECK(*out == m);
}

TEST_CASE("a lost fragment suppresses that message; later messages still deliver") {
    Reassembler r(4);
    Message m1 = sample_message();
    m1.seq = 1;
    m1.set_payload(Bytes(3000, 1));
    Message m2 = sample_message();
    m2.seq = 2;
    m2.set_payload(Bytes(3000, 2));

    // Drop fragment 1 of m1.
    CHECK_FALSE(r.feed(decode_frame(encode_fragment(m1, 0, 1200))).has_value());
    CHECK_FALSE(r.feed(decode_frame(encode_fragment(m1, 2, 1200))).has_value());
    std::optional<Message> out;
    for (std::size_t i = 0; i < 3; ++i) out = r.feed(decode_frame(encode_fragment(m2, i, 1200)));
    REQUIRE(out.has_value());
    CHECK(out->seq == 2);
    CHECK(out->payload()[0] == 2);
}

TEST_CASE("stale partial assemblies are evicted beyond the window") {
    Reassembler r(2);
    for (std::uint64_t seq = 1; seq <= 6; ++seq) {
        Message m = sample_message();
        m.seq = seq;
        m.set_payload(Bytes(3000, static_cast<std::uint8_t>(seq)));
        (void)r.feed(decode_frame(encode_fragment(m, 0, 1200))); // always incomplete
    }
    CHECK(r.evicted() > 0);
    CHECK(r.partial_count() <= 2);
}

TEST_CASE("reliable transport: 1000 messages arrive complete, in order, exactly once") {
    ReliableListener listener(0);
    std::thread sender([&] {
        auto conn = ReliableConn::connect("127.0.0.1", listener.port());
        for (int i = 0; i < 1000; ++i) {
            Message m;
            m.type_tag = "t";
            m.seq = static_cast<std::uint64_t>(i);
            m.ts_origin = now_ns();
            m.set_payload(Bytes(64, static_cast<std::uint8_t>(i & 0xff)));
            conn.send(m);
        }
        conn.send_eos();
        conn.close();
    });
    auto server = listener.accept(5000ms);
    REQUIRE(server.has_value());
    Message m;
    std::uint64_t expected = 0;
    for (;;) {
        auto st = server->recv(m, 5000ms);
        if (st == RecvStatus::end_of_stream) break;
        REQUIRE(st == RecvStatus::message);
        CHECK(m.seq == expected);
        ++expected;
    }
    CHECK(expected == 1000);
    sender.join();
}

TEST_CASE("reliable transport: peer close mid-stream yields end-of-stream after last message") {
    ReliableListener listener(0);
    std::thread sender([&] {
        auto conn = ReliableConn::connect("127.0.0.1", listener.port());
        Message m = sample_message();
        conn.send(m);
        conn.close(); // FIN without an explicit EOS frame
    });
    auto server = listener.accept(5000ms);
    REQUIRE(server.has_value());
    Message m;
    CHECK(server->recv(m, 5000ms) == RecvStatus::message);
    CHECK(server->recv(m, 5000ms) == RecvStatus::end_of_stream);
    sender.join();
}

TEST_CASE("reliable transport: connect to a closed port fails") {
    CHECK_THROWS_AS(ReliableConn::connect("127.0.0.1", 1), TransportError);
}

TEST_CASE("reliable transport: 6 MiB payload round-trips byte-identical") {
    ReliableListener listener(0);
    Message m = sample_message();
    Bytes big(6ull << 20);
    std::mt19937_64 rng(99);
    for (auto& b : big) b = static_cast<std::uint8_t>(rng());
    m.set_payload(std::move(big));

    std::thread sender([&] {
        auto conn = ReliableConn::connect("127.0.0.1", listener.port());
        conn.send(m);
        conn.send_eos();
        conn.close();
    });
    auto server = listener.accept(5000ms);
    REQUIRE(server.has_value());
    Message got;
    REQUIRE(server->recv(got, 10000ms) == RecvStatus::message);
    CHECK(got == m); // same payload bytes, seq, ts_origin, hops
    sender.join();
}

TEST_CASE("reliable transport: oversized payload rejected before send") {
    ReliableListener listener(0);
    std::thread accepter([&] { auto c = listener.accept(5000ms); std::this_thread::sleep_for(50ms); });
    auto conn = ReliableConn::connect("127.0.0.1", listener.port());
    Message m;
    m.set_payload(Bytes((64ull << 20) + 1, 0));
    CHECK_THROWS_AS(conn.send(m), ConfigError);
    accepter.join();
}

TEST_CASE("reliable transport: non-blocking recv on idle session returns within 1 ms") {
    ReliableListener listener(0);
    std::thread connector([&] {
        auto c = ReliableConn::connect("127.0.0.1", listener.port());
        std::this_thread::sleep_for(100ms);
        c.close();
    });
    auto server = listener.accept(5000ms);
    REQUIRE(server.has_value());
    Message m;
    const auto t0 = std::chrono::steady_clock::now();
    CHECK(server->try_recv(m) == RecvStatus::empty);
    CHECK(ms_since(t0) < 1.0);
    connector.join();
}

TEST_CASE("datagram endpoint: defaults and config validation") {
    DatagramEndpoint e(0);
    CHECK(e.config().mtu_payload == 1200);
    CHECK(e.config().reassembly_window == 4);
    CHECK(e.port() != 0);

    DatagramConfig bad;
    bad.mtu_payload = 100; // below the 512 floor
    CHECK_THROWS_AS(DatagramEndpoint(0, "", 0, bad), ConfigError);

    DatagramConfig bad2;
    bad2.reassembly_window = 0;
    CHECK_THROWS_AS(DatagramEndpoint(0, "", 0, bad2), ConfigError);
}

TEST_CASE("datagram endpoint: two endpoints on one port is a bind error") {
    DatagramEndpoint a(0);
    CHECK_THROWS_AS(DatagramEndpoint(a.port()), TransportError);
}

TEST_CASE("datagram transport: single-fragment and multi-fragment delivery") {
    DatagramEndpoint rx(0);
    DatagramEndpoint tx(0, "127.0.0.1", rx.port());

    Message small = sample_message();
    small.set_payload(Bytes(500, 0x11));
    tx.send(small);
    Message got;
    REQUIRE(rx.recv(got, 2000ms) == RecvStatus::message);
    CHECK(got == small);
    CHECK(tx.stats().frames_sent == 1); // 500 bytes, one fragment

    Message big = sample_message();
    big.seq = 9;
    Bytes payload(300 * 1024);
    std::mt19937_64 rng(5);
    for (auto& b : payload) b = static_cast<std::uint8_t>(rng());
    big.set_payload(std::move(payload));
    tx.send(big);
    REQUIRE(rx.recv(got, 5000ms) == RecvStatus::message);
    CHECK(got == big);
    CHECK(tx.stats().frames_sent == 1 + fragment_count(300 * 1024, 1200));
}

TEST_CASE("datagram transport: send during receiver absence succeeds (fire and forget)") {
    DatagramEndpoint tx(0, "127.0.0.1", 1); // nobody listens on port 1
    Message m = sample_message();
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 5; ++i) CHECK_NOTHROW(tx.send(m));
    CHECK(ms_since(t0) < 100.0);
}

TEST_CASE("loss injection: rate 1.0 delivers nothing; determinism per seed") {
    DatagramEndpoint rx(0);
    DatagramEndpoint tx(0, "127.0.0.1", rx.port());
    NetworkConditions cond;
    cond.loss_rate = 1.0;
    cond.seed = 42;
    tx.set_network_conditions(cond);
    Message m = sample_message();
    for (int i = 0; i < 20; ++i) tx.send(m);
    Message got;
    CHECK(rx.try_recv(got) == RecvStatus::empty);
    CHECK(tx.stats().frames_dropped_injected == 20);

    // Same seed, same pattern.
    auto run_pattern = [](std::uint64_t seed) {
        DatagramEndpoint sink(0);
        DatagramEndpoint src(0, "127.0.0.1", sink.port());
        NetworkConditions c;
        c.loss_rate = 0.5;
        c.seed = seed;
        src.set_network_conditions(c);
        std::vector<std::uint64_t> delivered;
        for (int i = 0; i < 60; ++i) {
            Message msg;
            msg.type_tag = "d";
            msg.seq = static_cast<std::uint64_t>(i);
            msg.ts_origin = now_ns();
            msg.set_payload(Bytes(16, 1));
            src.send(msg);
        }
        Message got2;
        while (sink.recv(got2, 200ms) == RecvStatus::message) delivered.push_back(got2.seq);
        return delivered;
    };
    const auto a = run_pattern(7);
    const auto b = run_pattern(7);
    CHECK(a == b);
    CHECK(a.size() > 10);
    CHECK(a.size() < 50);
}

TEST_CASE("loss injection: rates outside [0,1] rejected") {
    DatagramEndpoint tx(0, "127.0.0.1", 9);
    NetworkConditions c;
    c.loss_rate = 1.5;
    CHECK_THROWS_AS(tx.set_network_conditions(c), ConfigError);
}

TEST_CASE("delay injection: 50 ms delay measured on loopback") {
    DatagramEndpoint rx(0);
    DatagramEndpoint tx(0, "127.0.0.1", rx.port());
    NetworkConditions cond;
    cond.delay = 50ms;
    cond.seed = 1;
    tx.set_network_conditions(cond);

    std::vector<double> deltas;
    for (int i = 0; i < 10; ++i) {
        Message m = sample_message();
        m.seq = static_cast<std::uint64_t>(i);
        const auto t0 = std::chrono::steady_clock::now();
        tx.send(m);
        CHECK(ms_since(t0) < 10.0); // the sender itself never waits
        Message got;
        REQUIRE(rx.recv(got, 2000ms) == RecvStatus::message);
        deltas.push_back(ms_since(t0));
    }
    std::sort(deltas.begin(), deltas.end());
    const double median = deltas[deltas.size() / 2];
    CHECK(median >= 45.0);
    CHECK(median <= 65.0);
}

TEST_CASE("seeded 10% loss over 100 single-fragment messages: about 90 delivered, all intact") {
    DatagramEndpoint rx(0);
    DatagramEndpoint tx(0, "127.0.0.1", rx.port());
    NetworkConditions cond;
    cond.loss_rate = 0.10;
    cond.seed = 1234;
    tx.set_network_conditions(cond);

    std::map<std::uint64_t, Bytes> sent;
    for (int i = 0; i < 100; ++i) {
        Message m;
        m.type_tag = "x";
        m.seq = static_cast<std::uint64_t>(i);
        m.ts_origin = now_ns();
        Bytes payload(200);
        for (auto& b : payload) b = static_cast<std::uint8_t>(i);
        m.set_payload(payload);
        sent[m.seq] = payload;
        tx.send(m);
    }
    std::size_t delivered = 0;
    Message got;
    while (rx.recv(got, 300ms) == RecvStatus::message) {
        auto it = sent.find(got.seq);
        REQUIRE(it != sent.end());
        const auto p = got.payload();
        CHECK(Bytes(p.begin(), p.end()) == it->second);
        ++delivered;
    }
    // Binomial n=100 p=0.9: sigma = 3; accept +-3 sigma around 90.
    CHECK(delivered >= 81);
    CHECK(delivered <= 99);
}

TEST_CASE("datagram end-of-stream control frame") {
    DatagramEndpoint rx(0);
    DatagramEndpoint tx(0, "127.0.0.1", rx.port());
    tx.send(sample_message());
    tx.send_eos();
    Message got;
    CHECK(rx.recv(got, 2000ms) == RecvStatus::message);
    CHECK(rx.recv(got, 2000ms) == RecvStatus::end_of_stream);
}
