#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace flexpipe {

using Bytes = std::vector<std::uint8_t>;

// Largest payload a message may carry through any channel.
constexpr std::size_t kMaxPayloadBytes = 64ull << 20;

// Nanoseconds since the Unix epoch, monotonic within a process. Wall time is
// sampled once at startup and advanced with the steady clock, so hop deltas
// are monotonic while values from processes on the same machine stay
// comparable.
std::int64_t now_ns();

struct Hop {
    std::string stage;
    std::int64_t ts_ns = 0;

    bool operator==(const Hop&) const = default;
};

// The unit of dataflow. The payload buffer is shared, never copied: local
// delivery and fan-out to branches alias the same bytes.
class Message {
public:
    Message() = default;

    std::string type_tag;
    std::uint64_t seq = 0;
    std::int64_t ts_origin = 0; // stamped at creation, ns
    std::vector<Hop> hops;      // (stage label, ts) appended per emission

    void set_payload(Bytes bytes) {
        payload_ = std::make_shared<const Bytes>(std::move(bytes));
    }
    void set_payload_buffer(std::shared_ptr<const Bytes> buf) { payload_ = std::move(buf); }
    // Zero-copy alias of another message's payload.
    void share_payload(const Message& other) { payload_ = other.payload_; }

    std::span<const std::uint8_t> payload() const {
        if (!payload_) return {};
        return {payload_->data(), payload_->size()};
    }
    std::size_t payload_size() const { return payload_ ? payload_->size() : 0; }
    // Buffer identity; equal pointers mean no bytes were copied.
    const std::uint8_t* payload_data() const { return payload_ ? payload_->data() : nullptr; }
    std::shared_ptr<const Bytes> payload_buffer() const { return payload_; }

    void append_hop(std::string stage) { hops.push_back({std::move(stage), now_ns()}); }
    void append_hop(std::string stage, std::int64_t ts) { hops.push_back({std::move(stage), ts}); }

    // Carries the upstream message's origin and hop chain into a derived
    // message, so end-to-end latency is attributed to the originating sensor
    // data rather than the immediate hop.
    void inherit_timing(const Message& src) {
        ts_origin = src.ts_origin;
        hops = src.hops;
    }

    bool operator==(const Message& other) const {
        if (type_tag != other.type_tag || seq != other.seq || ts_origin != other.ts_origin ||
            hops != other.hops)
            return false;
        auto a = payload();
        auto b = other.payload();
        return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
    }

private:
    std::shared_ptr<const Bytes> payload_;

    // Identity of the output port that issued this message via
    // get_output_placeholder; used to re-stamp seq when a message is sent on
    // a different port than it was obtained from.
    const void* issued_by_ = nullptr;
    friend class FlexPort;
    friend class PortManager;
};

} // namespace flexpipe
