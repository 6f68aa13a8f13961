#include "flexpipe/transport/datagram.hpp"

#include <sys/socket.h>

#include <cerrno>
#include <cstring>

#include "flexpipe/errors.hpp"

namespace flexpipe::transport {

namespace {
constexpr int kSocketBufferBytes = 8 << 20;
constexpr std::size_t kMaxDatagram = 65536;
} // namespace

void DatagramConfig::validate() const {
    if (mtu_payload < 512 || mtu_payload > 65000)
        throw ConfigError("mtu_payload must be within [512, 65000]");
    if (reassembly_window < 1) throw ConfigError("reassembly_window must be >= 1");
}

DatagramEndpoint::DatagramEndpoint(std::uint16_t local_port, const std::string& peer_host,
                                   std::uint16_t peer_port, DatagramConfig cfg)
    : cfg_(cfg), reassembler_(cfg.reassembly_window ? cfg.reassembly_window : 1) {
    cfg_.validate();
    fd_ = udp_bind(local_port);
    set_buffer_sizes(fd_, kSocketBufferBytes);
    port_ = bound_port(fd_);
    if (!peer_host.empty() && peer_port != 0) {
        udp_set_peer(fd_, peer_host, peer_port);
        has_peer_ = true;
    }
}

DatagramEndpoint::~DatagramEndpoint() {
    stop();
    scheduler_.reset(); // flush delayed frames before the socket goes away
}

void DatagramEndpoint::set_network_conditions(const NetworkConditions& cond) {
    cond.validate();
    std::lock_guard lk(send_mutex_);
    conditions_ = cond;
    rng_.seed(cond.seed);
    if (cond.any() && !scheduler_) {
        scheduler_ = std::make_unique<FrameScheduler>([this](Bytes&& frame) {
            emit_frame(std::move(frame));
        });
    }
}

void DatagramEndpoint::emit_frame(Bytes frame) {
    ssize_t n = ::send(fd_.get(), frame.data(), frame.size(), MSG_NOSIGNAL);
    if (n < 0) {
        // Fire-and-forget: receiver absence (ICMP refusals) and transient
        // buffer pressure count as loss, not errors.
        if (errno == ECONNREFUSED || errno == ENOBUFS || errno == EAGAIN ||
            errno == EWOULDBLOCK || errno == EINTR || errno == EBADF) {
            std::lock_guard lk(stats_mutex_);
            ++stats_.frames_dropped_local;
            return;
        }
        throw TransportError(std::string("datagram send: ") + std::strerror(errno));
    }
}

void DatagramEndpoint::transmit(Bytes&& frame) {
    if (conditions_ && conditions_->any()) {
        // Two draws per frame keeps the pattern stable across parameter
        // choices: one for loss, one for jitter.
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        const double roll = u01(rng_);
        std::int64_t jitter_ms = 0;
        if (conditions_->jitter.count() > 0) {
            std::uniform_int_distribution<std::int64_t> j(-conditions_->jitter.count(),
                                                          conditions_->jitter.count());
            jitter_ms = j(rng_);
        } else {
            (void)u01(rng_);
        }
        if (roll < conditions_->loss_rate) {
            std::lock_guard lk(stats_mutex_);
            ++stats_.frames_dropped_injected;
            return;
        }
        auto delay = conditions_->delay + std::chrono::milliseconds(jitter_ms);
        if (delay.count() < 0) delay = std::chrono::milliseconds(0);
        if (delay.count() > 0) {
            scheduler_->submit(std::move(frame), std::chrono::steady_clock::now() + delay);
            {
                std::lock_guard lk(stats_mutex_);
                ++stats_.frames_sent;
            }
            return;
        }
    }
    emit_frame(std::move(frame));
    std::lock_guard lk(stats_mutex_);
    ++stats_.frames_sent;
}

void DatagramEndpoint::send(const Message& msg) {
    if (!has_peer_) throw ConfigError("datagram endpoint has no peer configured");
    if (msg.payload_size() > kMaxPayloadBytes)
        throw ConfigError("message payload exceeds 64 MiB cap");
    std::lock_guard lk(send_mutex_);
    const std::size_t count = fragment_count(msg.payload_size(), cfg_.mtu_payload);
    for (std::size_t i = 0; i < count; ++i) transmit(encode_fragment(msg, i, cfg_.mtu_payload));
    std::lock_guard slk(stats_mutex_);
    ++stats_.msgs_sent;
}

void DatagramEndpoint::send_eos() {
    if (!has_peer_) return;
    std::lock_guard lk(send_mutex_);
    transmit(encode_eos_frame());
}

RecvStatus DatagramEndpoint::recv_internal(Message& out,
                                           std::optional<std::chrono::milliseconds> timeout,
                                           const std::atomic<bool>* cancel, bool blocking) {
    const auto deadline = timeout ? std::optional(std::chrono::steady_clock::now() + *timeout)
                                  : std::nullopt;
    std::uint8_t buf[kMaxDatagram];
    for (;;) {
        if (eos_seen_) return RecvStatus::end_of_stream;
        if (stopped_.load(std::memory_order_relaxed)) return RecvStatus::empty;
        if (cancel && cancel->load(std::memory_order_relaxed)) return RecvStatus::empty;

        ssize_t n = ::recv(fd_.get(), buf, sizeof(buf), MSG_DONTWAIT);
        if (n < 0) {
            if (errno == EAGAIN || errno == EWOULDBLOCK) {
                if (!blocking) return RecvStatus::empty;
                if (deadline && std::chrono::steady_clock::now() >= *deadline)
                    return RecvStatus::empty;
                wait_readable(fd_, std::chrono::milliseconds(20));
                continue;
            }
            if (errno == EINTR || errno == ECONNREFUSED) continue;
            throw TransportError(std::string("datagram recv: ") + std::strerror(errno));
        }

        {
            std::lock_guard lk(stats_mutex_);
            ++stats_.frames_received;
        }
        WireFrame frame;
        try {
            frame = decode_frame({buf, static_cast<std::size_t>(n)});
        } catch (const DecodeError&) {
            std::lock_guard lk(stats_mutex_);
            ++stats_.frames_malformed;
            continue; // malformed frames are dropped silently, counted
        }
        if (frame.is_end_of_stream()) {
            eos_seen_ = true;
            return RecvStatus::end_of_stream;
        }
        auto before = reassembler_.evicted();
        auto msg = reassembler_.feed(std::move(frame));
        {
            std::lock_guard lk(stats_mutex_);
            stats_.partials_evicted += reassembler_.evicted() - before;
        }
        if (msg) {
            out = std::move(*msg);
            std::lock_guard lk(stats_mutex_);
            ++stats_.msgs_delivered;
            return RecvStatus::message;
        }
    }
}

RecvStatus DatagramEndpoint::recv(Message& out, std::optional<std::chrono::milliseconds> timeout,
                                  const std::atomic<bool>* cancel) {
    return recv_internal(out, timeout, cancel, true);
}

RecvStatus DatagramEndpoint::try_recv(Message& out) {
    return recv_internal(out, std::nullopt, nullptr, false);
}

DatagramStats DatagramEndpoint::stats() const {
    std::lock_guard lk(stats_mutex_);
    return stats_;
}

void DatagramEndpoint::stop() {
    stopped_.store(true, std::memory_order_relaxed);
    fd_.shutdown_both();
}

} // namespace flexpipe::transport
