#include "flexpipe/transport/wire.hpp"

#include <cstring>

#include "flexpipe/errors.hpp"

namespace flexpipe::transport {

namespace {

void put_u16(Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
}

void put_u64(Bytes& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint16_t u16(const char* field) {
        need(2, field);
        std::uint16_t v = static_cast<std::uint16_t>(bytes_[off_]) |
                          static_cast<std::uint16_t>(bytes_[off_ + 1]) << 8;
        off_ += 2;
        return v;
    }

    std::uint64_t u64(const char* field) {
        need(8, field);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[off_ + i]) << (8 * i);
        off_ += 8;
        return v;
    }

    std::string str(std::size_t n, const char* field) {
        need(n, field);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + off_), n);
        off_ += n;
        return s;
    }

    Bytes rest() {
        Bytes b(bytes_.begin() + static_cast<std::ptrdiff_t>(off_), bytes_.end());
        off_ = bytes_.size();
        return b;
    }

    std::size_t offset() const { return off_; }

    void need(std::size_t n, const char* field) {
        if (off_ + n > bytes_.size())
            throw DecodeError(std::string("truncated frame: ") + field, off_);
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t off_ = 0;
};

void encode_header(Bytes& out, const Message& msg, std::uint16_t frag_index,
                   std::uint16_t frag_count) {
    out.insert(out.end(), kWireMagic.begin(), kWireMagic.end());
    put_u64(out, msg.seq);
    put_u16(out, frag_index);
    put_u16(out, frag_count);
    if (msg.type_tag.size() > 0xffff) throw ConfigError("type_tag too long");
    put_u16(out, static_cast<std::uint16_t>(msg.type_tag.size()));
    out.insert(out.end(), msg.type_tag.begin(), msg.type_tag.end());
    put_u64(out, static_cast<std::uint64_t>(msg.ts_origin));
}

void encode_hops(Bytes& out, const std::vector<Hop>& hops) {
    if (hops.size() > 0xffff) throw ConfigError("too many hops");
    put_u16(out, static_cast<std::uint16_t>(hops.size()));
    for (const auto& h : hops) {
        if (h.stage.size() > 0xffff) throw ConfigError("hop label too long");
        put_u16(out, static_cast<std::uint16_t>(h.stage.size()));
        out.insert(out.end(), h.stage.begin(), h.stage.end());
        put_u64(out, static_cast<std::uint64_t>(h.ts_ns));
    }
}

} // namespace

std::size_t fragment_count(std::size_t payload_len, std::size_t mtu_payload) {
    if (payload_len == 0) return 1;
    return (payload_len + mtu_payload - 1) / mtu_payload;
}

Bytes encode_fragment(const Message& msg, std::size_t index, std::size_t mtu_payload) {
    const auto payload = msg.payload();
    if (payload.size() > kMaxPayloadBytes) throw ConfigError("payload exceeds 64 MiB cap");
    const std::size_t count = fragment_count(payload.size(), mtu_payload);
    if (count > 0xffff) throw ConfigError("payload needs too many fragments for this mtu");
    if (index >= count) throw ConfigError("fragment index out of range");

    const std::size_t begin = index * mtu_payload;
    const std::size_t end = std::min(begin + mtu_payload, payload.size());

    Bytes out;
    out.reserve(kWireHeaderMin + msg.type_tag.size() + (end - begin) + 64);
    encode_header(out, msg, static_cast<std::uint16_t>(index), static_cast<std::uint16_t>(count));
    if (index == 0) encode_hops(out, msg.hops);
    out.insert(out.end(), payload.begin() + static_cast<std::ptrdiff_t>(begin),
               payload.begin() + static_cast<std::ptrdiff_t>(end));
    return out;
}

Bytes encode_eos_frame() {
    Bytes out;
    out.insert(out.end(), kWireMagic.begin(), kWireMagic.end());
    put_u64(out, 0);
    put_u16(out, 0);
    put_u16(out, 0); // frag_count 0: end of stream
    put_u16(out, 0);
    put_u64(out, 0);
    return out;
}

WireFrame decode_frame(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    r.need(4, "magic");
    if (!std::equal(kWireMagic.begin(), kWireMagic.end(), bytes.begin()))
        throw DecodeError("bad magic", 0);
    (void)r.str(4, "magic");

    WireFrame f;
    f.msg_seq = r.u64("msg_seq");
    f.frag_index = r.u16("frag_index");
    f.frag_count = r.u16("frag_count");
    const std::uint16_t tag_len = r.u16("type_tag_len");
    f.type_tag = r.str(tag_len, "type_tag");
    f.ts_origin = r.u64("ts_origin");
    if (f.is_end_of_stream()) return f;
    if (f.frag_index >= f.frag_count)
        throw DecodeError("frag_index >= frag_count", r.offset());
    if (f.frag_index == 0) {
        const std::uint16_t hop_count = r.u16("hop_count");
        f.hops.reserve(hop_count);
        for (std::uint16_t i = 0; i < hop_count; ++i) {
            const std::uint16_t label_len = r.u16("hop_label_len");
            std::string label = r.str(label_len, "hop_label");
            const std::uint64_t ts = r.u64("hop_ts");
            f.hops.push_back({std::move(label), static_cast<std::int64_t>(ts)});
        }
    }
    f.payload_fragment = r.rest();
    return f;
}

Bytes serialize(const Message& msg) {
    if (msg.payload_size() > kMaxPayloadBytes) throw ConfigError("payload exceeds 64 MiB cap");
    Bytes out;
    out.reserve(kWireHeaderMin + msg.type_tag.size() + msg.payload_size() + 64);
    encode_header(out, msg, 0, 1);
    encode_hops(out, msg.hops);
    const auto payload = msg.payload();
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

Message message_from_frame(WireFrame&& frame) {
    Message m;
    m.type_tag = std::move(frame.type_tag);
    m.seq = frame.msg_seq;
    m.ts_origin = static_cast<std::int64_t>(frame.ts_origin);
    m.hops = std::move(frame.hops);
    m.set_payload(std::move(frame.payload_fragment));
    return m;
}

Message deserialize(std::span<const std::uint8_t> bytes) {
    WireFrame f = decode_frame(bytes);
    if (f.is_end_of_stream()) throw DecodeError("unexpected end-of-stream frame", 0);
    if (f.frag_count != 1) throw DecodeError("expected single-fragment frame", 12);
    return message_from_frame(std::move(f));
}

Reassembler::Reassembler(std::size_t window) : window_(window) {
    if (window == 0) throw ConfigError("reassembly window must be >= 1");
}

void Reassembler::evict_oldest() {
    if (partials_.empty()) return;
    partials_.erase(partials_.begin());
    ++evicted_;
}

std::optional<Message> Reassembler::feed(WireFrame&& frame) {
    if (frame.is_end_of_stream()) return std::nullopt;

    // Single-fragment fast path.
    if (frame.frag_count == 1) return message_from_frame(std::move(frame));

    // A fragment newer than every partial assembly by more than the window
    // evicts the oldest partial.
    if (!partials_.empty()) {
        std::uint64_t max_seq = 0;
        for (const auto& p : partials_) max_seq = std::max(max_seq, p.first);
        if (frame.msg_seq > max_seq + window_) evict_oldest();
    }

    auto it = std::find_if(partials_.begin(), partials_.end(),
                           [&](const auto& p) { return p.first == frame.msg_seq; });
    if (it == partials_.end()) {
        if (partials_.size() >= window_) evict_oldest();
        Partial p;
        p.pieces.resize(frame.frag_count);
        p.have.resize(frame.frag_count, false);
        partials_.emplace_back(frame.msg_seq, std::move(p));
        it = partials_.end() - 1;
    }

    Partial& p = it->second;
    if (frame.frag_count != p.have.size()) return std::nullopt; // inconsistent; ignore
    if (p.have[frame.frag_index]) return std::nullopt;          // duplicate
    p.have[frame.frag_index] = true;
    ++p.received;
    if (frame.frag_index == 0) {
        p.first.type_tag = frame.type_tag;
        p.first.ts_origin = frame.ts_origin;
        p.first.msg_seq = frame.msg_seq;
        p.first.hops = std::move(frame.hops);
        p.have_meta = true;
    }
    p.pieces[frame.frag_index] = std::move(frame.payload_fragment);

    if (p.received != p.have.size() || !p.have_meta) return std::nullopt;

    std::size_t total = 0;
    for (const auto& piece : p.pieces) total += piece.size();
    Bytes payload;
    payload.reserve(total);
    for (auto& piece : p.pieces) payload.insert(payload.end(), piece.begin(), piece.end());

    Message m;
    m.type_tag = std::move(p.first.type_tag);
    m.seq = p.first.msg_seq;
    m.ts_origin = static_cast<std::int64_t>(p.first.ts_origin);
    m.hops = std::move(p.first.hops);
    m.set_payload(std::move(payload));
    partials_.erase(it);
    return m;
}

} // namespace flexpipe::transport
