#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flexpipe/errors.hpp"
#include "flexpipe/message.hpp"

namespace flexpipe::transport {

// Wire frame layout, version 1. All integers little-endian.
//
//   offset  size  field
//   0       4     magic "FXP1"
//   4       8     msg_seq (u64)
//   12      2     frag_index (u16)
//   14      2     frag_count (u16; 0 marks an end-of-stream control frame)
//   16      2     type_tag_len (u16)
//   18      n     type_tag bytes
//   18+n    8     ts_origin (u64, ns)
//   ...           hop block, fragment 0 only:
//                   hop_count (u16), then per hop:
//                   label_len (u16), label bytes, ts (u64, ns)
//   ...           payload fragment bytes
//
// A message's payload is split into max(1, ceil(len / mtu_payload)) fragments;
// fragment i carries payload[i*mtu .. min((i+1)*mtu, len)). All fragments of
// one message share msg_seq, type_tag and ts_origin. The hop block rides on
// fragment 0 only. Reliable streams carry the same frame as a single fragment
// (frag_count = 1) behind a u32 little-endian length prefix.

inline constexpr std::array<std::uint8_t, 4> kWireMagic{'F', 'X', 'P', '1'};
inline constexpr std::size_t kWireHeaderMin = 26; // through ts_origin with empty tag

// Length-prefix ceiling for reliable streams: a 64 MiB payload plus metadata.
inline constexpr std::size_t kMaxFrameBytes = kMaxPayloadBytes + (1u << 20);

struct WireFrame {
    std::uint64_t msg_seq = 0;
    std::uint16_t frag_index = 0;
    std::uint16_t frag_count = 1;
    std::string type_tag;
    std::uint64_t ts_origin = 0;
    std::vector<Hop> hops;   // fragment 0 only
    Bytes payload_fragment;

    bool is_end_of_stream() const { return frag_count == 0; }
};

std::size_t fragment_count(std::size_t payload_len, std::size_t mtu_payload);

// Encodes fragment `index` of the message, slicing its payload at mtu_payload.
Bytes encode_fragment(const Message& msg, std::size_t index, std::size_t mtu_payload);

Bytes encode_eos_frame();

// Decodes one frame from the buffer. Throws DecodeError on bad magic,
// truncation, or inconsistent lengths.
WireFrame decode_frame(std::span<const std::uint8_t> bytes);

// Single-fragment encoding of a whole message (no length prefix; reliable
// streams prepend a u32 length). deserialize(serialize(m)) == m on all
// fields, hops included.
Bytes serialize(const Message& msg);
Message deserialize(std::span<const std::uint8_t> bytes);

Message message_from_frame(WireFrame&& frame);

// Reassembles fragmented messages in completion order. Partial assemblies are
// bounded by `window`: when a fragment arrives for a message newer than the
// oldest partial by more than the window, or when the table is full, the
// oldest partial is evicted so stale messages cannot starve fresh ones.
class Reassembler {
public:
    explicit Reassembler(std::size_t window);

    // Feeds one decoded frame; returns a message when one just completed.
    std::optional<Message> feed(WireFrame&& frame);

    std::uint64_t evicted() const { return evicted_; }
    std::size_t partial_count() const { return partials_.size(); }

private:
    struct Partial {
        WireFrame first;             // fragment 0 metadata (tag, ts, hops)
        std::vector<Bytes> pieces;   // by fragment index
        std::vector<bool> have;
        std::size_t received = 0;
        bool have_meta = false;
    };

    void evict_oldest();

    std::size_t window_;
    std::uint64_t evicted_ = 0;
    // Ordered by arrival of first fragment; small (<= window) so linear scans
    // are fine.
    std::vector<std::pair<std::uint64_t, Partial>> partials_;
};

} // namespace flexpipe::transport
