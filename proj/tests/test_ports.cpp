#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <thread>

#include "flexpipe/kernel.hpp"
#include "flexpipe/kernels/builtin.hpp"

using namespace flexpipe;
using namespace std::chrono_literals;

namespace {
double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}
} // namespace

TEST_CASE("register input ports with semantics; duplicates rejected") {
    PortManager pm;
    pm.register_in_port("in1", PortSemantics::blocking);
    pm.register_in_port("in2", PortSemantics::non_blocking);
    CHECK(pm.input("in1").semantics() == PortSemantics::blocking);
    CHECK(pm.input("in2").semantics() == PortSemantics::non_blocking);
    CHECK(pm.input("in1").state().index() == 0); // unactivated
    CHECK_THROWS_WITH_AS(pm.register_in_port("in1", PortSemantics::blocking),
                         doctest::Contains("in1"), ConfigError);
}

TEST_CASE("register output ports preserves order; duplicates rejected") {
    PortManager pm;
    pm.register_out_port("out");
    pm.register_out_port("out2");
    REQUIRE(pm.outputs().size() == 2);
    CHECK(pm.outputs()[0]->tag() == "out");
    CHECK(pm.outputs()[1]->tag() == "out2");
    CHECK_THROWS_AS(pm.register_out_port("out"), ConfigError);
    // No semantics before activation: assigned by the user at deployment.
    CHECK_THROWS_AS(pm.output("out").semantics(), ConfigError);
}

TEST_CASE("activate local output creates a queue of the stated capacity") {
    PortManager pm;
    pm.register_out_port("out");
    pm.activate_port("out", LocalConn{1}, PortSemantics::blocking);
    REQUIRE(pm.output("out").local_channel());
    CHECK(pm.output("out").local_channel()->capacity() == 1);
    CHECK(pm.output("out").semantics() == PortSemantics::blocking);
}

TEST_CASE("activate datagram input binds the stated port") {
    PortManager pm;
    pm.register_in_port("in2", PortSemantics::non_blocking);
    pm.activate_port("in2", RemoteDatagramConn{"", 14802});
    CHECK(pm.input("in2").listen_port() == 14802);
}

TEST_CASE("activation errors") {
    PortManager pm;
    pm.register_in_port("in1", PortSemantics::blocking);
    pm.register_out_port("out");
    CHECK_THROWS_WITH_AS(pm.activate_port("nope", LocalConn{1}), doctest::Contains("nope"),
                         ConfigError);
    // Input semantics were fixed at registration.
    CHECK_THROWS_AS(pm.activate_port("in1", LocalConn{1}, PortSemantics::blocking), ConfigError);
    // Output needs semantics.
    CHECK_THROWS_AS(pm.activate_port("out", LocalConn{1}), ConfigError);
    pm.activate_port("out", LocalConn{1}, PortSemantics::blocking);
    CHECK_THROWS_AS(pm.activate_port("out", LocalConn{1}, PortSemantics::blocking), ConfigError);
}

TEST_CASE("placeholders stamp monotonically increasing seq and ts_origin") {
    PortManager pm;
    pm.register_out_port("out");
    pm.activate_port("out", LocalConn{4}, PortSemantics::blocking);
    auto a = pm.get_output_placeholder("out");
    auto b = pm.get_output_placeholder("out");
    CHECK(b.seq == a.seq + 1);
    CHECK(a.ts_origin > 0);

    const auto ts = a.ts_origin;
    pm.send_output("out", std::move(a));
    Message got;
    REQUIRE(pm.output("out").local_channel()->try_pop(got) == PopStatus::ok);
    CHECK(got.ts_origin == ts); // pre-stamped origin survives send

    // Sending a message obtained from a different port re-stamps seq.
    pm.register_out_port("other");
    pm.activate_port("other", LocalConn{4}, PortSemantics::blocking);
    auto c = pm.get_output_placeholder("other");
    c.seq = 9999;
    pm.send_output("out", std::move(c));
    REQUIRE(pm.output("out").local_channel()->try_pop(got) == PopStatus::ok);
    CHECK(got.seq == b.seq + 1);
}

TEST_CASE("placeholder on input port is a usage error") {
    PortManager pm;
    pm.register_in_port("in1", PortSemantics::blocking);
    CHECK_THROWS_AS(pm.get_output_placeholder("in1"), ConfigError);
    CHECK_THROWS_AS(pm.send_output("in1", Message{}), ConfigError);
}

TEST_CASE("send appends a hop labeled with the stage") {
    PortManager pm;
    pm.set_stage_label("camera");
    pm.register_out_port("out");
    pm.activate_port("out", LocalConn{2}, PortSemantics::blocking);
    auto m = pm.get_output_placeholder("out");
    pm.send_output("out", std::move(m));
    Message got;
    REQUIRE(pm.output("out").local_channel()->try_pop(got) == PopStatus::ok);
    REQUIRE(got.hops.size() == 1);
    CHECK(got.hops[0].stage == "camera");
    CHECK(got.hops[0].ts_ns >= got.ts_origin);
}

TEST_CASE("get_input semantics: blocking waits, non-blocking returns absent") {
    PortManager pm;
    pm.register_in_port("hard", PortSemantics::blocking);
    pm.register_in_port("soft", PortSemantics::non_blocking);
    pm.activate_port("hard", LocalConn{4});
    pm.activate_port("soft", LocalConn{4});

    // Non-blocking with empty queue: absent within 1 ms.
    auto t0 = std::chrono::steady_clock::now();
    auto r = pm.get_input("soft");
    CHECK_FALSE(r);
    CHECK_FALSE(r.end_of_stream);
    CHECK(ms_since(t0) < 1.0);

    // Blocking with one queued message: returns it without suspension.
    Message m;
    m.seq = 5;
    m.ts_origin = now_ns();
    pm.input("hard").local_channel()->try_push(std::move(m));
    t0 = std::chrono::steady_clock::now();
    auto got = pm.get_input("hard");
    REQUIRE(got);
    CHECK(got.message->seq == 5);
    CHECK(ms_since(t0) < 5.0);

    // Blocking with a 50 ms delayed producer: caller resumes with the message.
    auto ch = pm.input("hard").local_channel();
    std::thread producer([ch] {
        std::this_thread::sleep_for(50ms);
        Message d;
        d.seq = 6;
        d.ts_origin = now_ns();
        ch->push_wait(std::move(d));
    });
    t0 = std::chrono::steady_clock::now();
    got = pm.get_input("hard");
    const double waited = ms_since(t0);
    REQUIRE(got);
    CHECK(got.message->seq == 6);
    CHECK(waited >= 45.0);
    CHECK(waited <= 150.0);
    producer.join();
}

TEST_CASE("end-of-stream is distinct from absent") {
    PortManager pm;
    pm.register_in_port("hard", PortSemantics::blocking);
    pm.activate_port("hard", LocalConn{4});
    pm.input("hard").local_channel()->close();
    auto r = pm.get_input("hard");
    CHECK_FALSE(r);
    CHECK(r.end_of_stream);
}

TEST_CASE("unactivated input is a usage error; unconnected optional input reads absent") {
    PortManager pm;
    pm.register_in_port("hard", PortSemantics::blocking);
    pm.register_in_port("soft", PortSemantics::non_blocking);
    CHECK_THROWS_AS(pm.get_input("hard"), ConfigError);
    CHECK_THROWS_AS(pm.get_input("missing"), ConfigError);

    CHECK_THROWS_AS(pm.mark_input_unconnected("hard"), ConfigError); // hard deps must connect
    pm.mark_input_unconnected("soft");
    auto r = pm.get_input("soft");
    CHECK_FALSE(r);
    CHECK_FALSE(r.end_of_stream);
}

TEST_CASE("branching: fan-out delivers to registered port and every branch") {
    PortManager pm;
    pm.register_out_port("out");
    pm.activate_port("out", LocalConn{8}, PortSemantics::blocking);
    pm.branch_output("out", "b1", LocalConn{8}, PortSemantics::blocking);
    pm.branch_output("out", "b2", LocalConn{8}, PortSemantics::blocking);
    CHECK(pm.output("out").branches().size() == 2);
    CHECK_THROWS_AS(pm.branch_output("out", "b1", LocalConn{8}, PortSemantics::blocking),
                    ConfigError);

    auto m = pm.get_output_placeholder("out");
    m.set_payload(Bytes{9, 9, 9});
    const auto* buf = m.payload_data();
    pm.send_output("out", std::move(m));

    Message a, b, c;
    REQUIRE(pm.output("out").local_channel()->try_pop(a) == PopStatus::ok);
    REQUIRE(pm.output("out").find_branch("b1")->local_channel()->try_pop(b) == PopStatus::ok);
    REQUIRE(pm.output("out").find_branch("b2")->local_channel()->try_pop(c) == PopStatus::ok);
    // Identical payload bytes, and in fact the identical buffer: fan-out
    // shares, never copies.
    CHECK(a.payload_data() == buf);
    CHECK(b.payload_data() == buf);
    CHECK(c.payload_data() == buf);
    CHECK(a.seq == b.seq);
    CHECK(b.seq == c.seq);
}

TEST_CASE("branch from input port is an error") {
    PortManager pm;
    pm.register_in_port("in1", PortSemantics::blocking);
    CHECK_THROWS_AS(pm.branch_output("in1", "b", LocalConn{1}, PortSemantics::blocking),
                    ConfigError);
}

TEST_CASE("eight remote branches fan out from one registered port, zero auxiliary kernels") {
    PortManager pm;
    pm.register_out_port("out");
    pm.activate_port("out", LocalConn{16}, PortSemantics::blocking);

    std::vector<std::unique_ptr<transport::DatagramEndpoint>> receivers;
    for (int i = 0; i < 8; ++i) {
        receivers.push_back(std::make_unique<transport::DatagramEndpoint>(0));
        pm.branch_output("out", "r" + std::to_string(i),
                         RemoteDatagramConn{"127.0.0.1", receivers.back()->port()},
                         PortSemantics::non_blocking);
    }
    auto m = pm.get_output_placeholder("out");
    m.type_tag = "x";
    m.set_payload(Bytes(100, 7));
    pm.send_output("out", std::move(m));

    int delivered = 0;
    for (auto& r : receivers) {
        Message got;
        if (r->recv(got, 2000ms) == transport::RecvStatus::message) {
            CHECK(got.payload_size() == 100);
            ++delivered;
        }
    }
    CHECK(delivered == 8); // one send, eight remote endpoints
}

TEST_CASE("blocking local send applies backpressure; non-blocking drops the new message") {
    PortManager pm;
    pm.register_out_port("b_out");
    pm.register_out_port("nb_out");
    pm.activate_port("b_out", LocalConn{1}, PortSemantics::blocking);
    pm.activate_port("nb_out", LocalConn{1}, PortSemantics::non_blocking);

    // Fill both capacity-1 queues.
    pm.send_output("b_out", pm.get_output_placeholder("b_out"));
    pm.send_output("nb_out", pm.get_output_placeholder("nb_out"));

    // Non-blocking: returns immediately, the older message is retained.
    auto t0 = std::chrono::steady_clock::now();
    auto nb = pm.get_output_placeholder("nb_out");
    const auto dropped_seq = nb.seq;
    pm.send_output("nb_out", std::move(nb));
    CHECK(ms_since(t0) < 1.0);
    Message got;
    REQUIRE(pm.output("nb_out").local_channel()->try_pop(got) == PopStatus::ok);
    CHECK(got.seq + 1 == dropped_seq);
    CHECK(pm.output("nb_out").stats().dropped == 1);

    // Blocking: suspends until the consumer pops.
    auto ch = pm.output("b_out").local_channel();
    std::thread consumer([ch] {
        std::this_thread::sleep_for(50ms);
        Message m;
        ch->pop_wait(m);
    });
    t0 = std::chrono::steady_clock::now();
    pm.send_output("b_out", pm.get_output_placeholder("b_out"));
    const double waited = ms_since(t0);
    CHECK(waited >= 45.0);
    CHECK(waited <= 150.0);
    consumer.join();
}

TEST_CASE("zero-copy local delivery: 8 MiB transfer keeps buffer identity") {
    PortManager tx, rx;
    tx.register_out_port("out");
    rx.register_in_port("in", PortSemantics::blocking);
    auto ch = std::make_shared<LocalChannel>(2);
    tx.attach_local_output("out", ch, PortSemantics::blocking);
    rx.attach_local_input("in", ch);

    auto m = tx.get_output_placeholder("out");
    m.set_payload(Bytes(8ull << 20, 0xAB));
    const auto* buf = m.payload_data();
    tx.send_output("out", std::move(m));
    auto got = rx.get_input("in");
    REQUIRE(got);
    CHECK(got.message->payload_data() == buf);
    CHECK(got.message->payload_size() == 8ull << 20);
}

namespace {

class CountingSource : public Kernel {
public:
    explicit CountingSource(int limit) : Kernel("CountingSource"), limit_(limit) {
        ports().register_out_port("out");
        ports().activate_port("out", LocalConn{64}, PortSemantics::non_blocking);
    }
    StepStatus step() override {
        if (limit_ > 0 && emitted_ >= limit_) return StepStatus::stop;
        ports().send_output("out", ports().get_output_placeholder("out"));
        ++emitted_;
        return StepStatus::proceed;
    }
    int emitted_ = 0;
    int limit_;
};

} // namespace

TEST_CASE("run_kernel: step returning stop after 5 iterations emits exactly 5 messages") {
    CountingSource k(5);
    auto r = run_kernel(k);
    CHECK_FALSE(r.failed);
    CHECK(k.emitted_ == 5);
    CHECK(k.ports().output("out").local_channel()->pushed() == 5);
    // Outputs closed on exit: downstream sees end-of-stream, not absent.
    Message m;
    for (int i = 0; i < 5; ++i)
        CHECK(k.ports().output("out").local_channel()->try_pop(m) == PopStatus::ok);
    CHECK(k.ports().output("out").local_channel()->try_pop(m) == PopStatus::closed);
}

TEST_CASE("run_kernel: a step failure stops the kernel and closes outputs") {
    struct Failing : Kernel {
        Failing() : Kernel("Failing") {
            ports().register_out_port("out");
            ports().activate_port("out", LocalConn{4}, PortSemantics::blocking);
        }
        StepStatus step() override { throw std::runtime_error("boom"); }
    } k;
    auto r = run_kernel(k);
    CHECK(r.failed);
    CHECK(r.cause == "boom");
    Message m;
    CHECK(k.ports().output("out").local_channel()->try_pop(m) == PopStatus::closed);
}

TEST_CASE("source kernel at 30 Hz for 1 s runs about 30 steps") {
    CountingSource k(0);
    k.set_frequency(30.0);
    std::thread runner([&] { run_kernel(k); });
    std::this_thread::sleep_for(std::chrono::milliseconds(1000));
    k.request_stop();
    runner.join();
    CHECK(k.emitted_ >= 28);
    CHECK(k.emitted_ <= 32);
}

TEST_CASE("frequency regulation: 100 Hz with 1 ms work gives a 10 ms period") {
    struct Timed : Kernel {
        Timed() : Kernel("Timed") {}
        StepStatus step() override {
            starts.push_back(std::chrono::steady_clock::now());
            std::this_thread::sleep_for(1ms);
            return starts.size() >= 40 ? StepStatus::stop : StepStatus::proceed;
        }
        std::vector<std::chrono::steady_clock::time_point> starts;
    } k;
    k.set_frequency(100.0);
    run_kernel(k);
    REQUIRE(k.starts.size() >= 40);
    std::vector<double> periods;
    for (std::size_t i = 1; i < k.starts.size(); ++i)
        periods.push_back(
            std::chrono::duration<double, std::milli>(k.starts[i] - k.starts[i - 1]).count());
    std::sort(periods.begin(), periods.end());
    const double median = periods[periods.size() / 2];
    CHECK(median >= 8.0);
    CHECK(median <= 12.0);
}

TEST_CASE("frequency regulation: work longer than the period adds no delay") {
    struct Slow : Kernel {
        Slow() : Kernel("Slow") {}
        StepStatus step() override {
            starts.push_back(std::chrono::steady_clock::now());
            std::this_thread::sleep_for(60ms);
            return starts.size() >= 5 ? StepStatus::stop : StepStatus::proceed;
        }
        std::vector<std::chrono::steady_clock::time_point> starts;
    } k;
    k.set_frequency(50.0); // 20 ms period << 60 ms work
    run_kernel(k);
    for (std::size_t i = 1; i < k.starts.size(); ++i) {
        const double period =
            std::chrono::duration<double, std::milli>(k.starts[i] - k.starts[i - 1]).count();
        CHECK(period < 90.0);
    }
}

TEST_CASE("non-positive frequency target is a configuration error") {
    CountingSource k(1);
    CHECK_THROWS_AS(k.set_frequency(0.0), ConfigError);
    CHECK_THROWS_AS(k.set_frequency(-3.0), ConfigError);
}

TEST_CASE("soft-dependency liveness: blocking at f plus non-blocking at f/3 runs at f") {
    struct Consumer : Kernel {
        Consumer() : Kernel("Consumer") {
            ports().register_in_port("hard", PortSemantics::blocking);
            ports().register_in_port("soft", PortSemantics::non_blocking);
        }
        StepStatus step() override {
            auto h = ports().get_input("hard");
            if (!h) return StepStatus::stop;
            while (ports().get_input("soft")) {
            }
            ++consumed;
            return StepStatus::proceed;
        }
        int consumed = 0;
    } consumer;

    auto hard_ch = std::make_shared<LocalChannel>(4);
    auto soft_ch = std::make_shared<LocalChannel>(4);
    consumer.ports().attach_local_input("hard", hard_ch);
    consumer.ports().attach_local_input("soft", soft_ch);

    std::thread hard_producer([&] {
        for (int i = 0; i < 100; ++i) {
            Message m;
            m.ts_origin = now_ns();
            hard_ch->push_wait(std::move(m));
            std::this_thread::sleep_for(10ms);
        }
        hard_ch->close();
    });
    std::thread soft_producer([&] {
        for (int i = 0; i < 33; ++i) {
            Message m;
            m.ts_origin = now_ns();
            soft_ch->try_push(std::move(m));
            std::this_thread::sleep_for(30ms);
        }
        soft_ch->close();
    });

    const auto t0 = std::chrono::steady_clock::now();
    run_kernel(consumer);
    const double elapsed_s = ms_since(t0) / 1000.0;
    hard_producer.join();
    soft_producer.join();

    const double rate = consumer.consumed / elapsed_s;
    // Paced by the hard input (~100 Hz), not dragged to the soft input's rate.
    CHECK(consumer.consumed == 100);
    CHECK(rate > 70.0);
}
