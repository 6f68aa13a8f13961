#include "flexpipe/transport/reliable.hpp"

#include <sys/socket.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include "flexpipe/errors.hpp"

namespace flexpipe::transport {

namespace {
Bytes with_length_prefix(Bytes frame) {
    Bytes out;
    out.reserve(frame.size() + 4);
    const std::uint32_t len = static_cast<std::uint32_t>(frame.size());
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((len >> (8 * i)) & 0xff));
    out.insert(out.end(), frame.begin(), frame.end());
    return out;
}
} // namespace

ReliableConn::ReliableConn(Fd fd) : impl_(std::make_unique<Impl>()) {
    impl_->fd = std::move(fd);
}

ReliableConn::~ReliableConn() {
    if (impl_) close();
}

ReliableConn ReliableConn::connect(const std::string& host, std::uint16_t port) {
    return ReliableConn(tcp_connect(host, port));
}

std::optional<ReliableConn> ReliableConn::connect_retry(const std::string& host,
                                                        std::uint16_t port, int attempts,
                                                        std::chrono::milliseconds backoff,
                                                        const std::atomic<bool>* cancel) {
    std::string last_error;
    for (int i = 0; i < attempts; ++i) {
        if (cancel && cancel->load(std::memory_order_relaxed)) return std::nullopt;
        try {
            return connect(host, port);
        } catch (const TransportError& e) {
            last_error = e.what();
        }
        if (i + 1 < attempts) std::this_thread::sleep_for(backoff);
    }
    throw TransportError("connect to " + host + ":" + std::to_string(port) + " failed after " +
                         std::to_string(attempts) + " attempts: " + last_error);
}

void ReliableConn::send_bytes(Bytes frame) {
    std::lock_guard lk(impl_->send_mutex);
    if (!impl_->fd.valid()) throw TransportError("session closed");
    if (impl_->conditions && impl_->conditions->any()) {
        // Drop decisions are not allowed on a reliable stream; only delay.
        auto delay = impl_->conditions->delay;
        if (impl_->conditions->jitter.count() > 0) {
            std::uniform_int_distribution<std::int64_t> d(-impl_->conditions->jitter.count(),
                                                          impl_->conditions->jitter.count());
            delay += std::chrono::milliseconds(d(impl_->rng));
            if (delay.count() < 0) delay = std::chrono::milliseconds(0);
        }
        impl_->scheduler->submit(std::move(frame), std::chrono::steady_clock::now() + delay);
        return;
    }
    if (!write_all(impl_->fd, frame.data(), frame.size())) throw TransportError("send cancelled");
}

void ReliableConn::send(const Message& msg) {
    if (msg.payload_size() > kMaxPayloadBytes)
        throw ConfigError("message payload exceeds 64 MiB cap");
    send_bytes(with_length_prefix(serialize(msg)));
}

void ReliableConn::send_eos() { send_bytes(with_length_prefix(encode_eos_frame())); }

void ReliableConn::set_network_conditions(const NetworkConditions& cond) {
    cond.validate();
    if (cond.loss_rate > 0.0)
        throw ConfigError("loss injection is not supported on reliable streams");
    std::lock_guard lk(impl_->send_mutex);
    impl_->conditions = cond;
    impl_->rng.seed(cond.seed);
    if (cond.any() && !impl_->scheduler) {
        Impl* impl = impl_.get();
        impl_->scheduler = std::make_unique<FrameScheduler>([impl](Bytes&& frame) {
            if (impl->fd.valid()) write_all(impl->fd, frame.data(), frame.size());
        });
    }
}

bool ReliableConn::extract_frame(Message& out, RecvStatus& status) {
    auto& buf = impl_->rxbuf;
    if (buf.size() < 4) return false;
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
    if (len > kMaxFrameBytes) throw DecodeError("frame length over cap", 0);
    if (buf.size() < 4 + static_cast<std::size_t>(len)) return false;
    WireFrame frame = decode_frame({buf.data() + 4, len});
    buf.erase(buf.begin(), buf.begin() + 4 + static_cast<std::ptrdiff_t>(len));
    if (frame.is_end_of_stream()) {
        impl_->eos = true;
        status = RecvStatus::end_of_stream;
        return true;
    }
    if (frame.frag_count != 1) throw DecodeError("stream frame must be single-fragment", 12);
    out = message_from_frame(std::move(frame));
    status = RecvStatus::message;
    return true;
}

RecvStatus ReliableConn::recv_internal(Message& out, bool blocking,
                                       std::optional<std::chrono::milliseconds> timeout,
                                       const std::atomic<bool>* cancel) {
    const auto deadline = timeout ? std::optional(std::chrono::steady_clock::now() + *timeout)
                                  : std::nullopt;
    for (;;) {
        if (impl_->eos) return RecvStatus::end_of_stream;
        RecvStatus status = RecvStatus::empty;
        if (extract_frame(out, status)) return status;
        if (impl_->eof) return RecvStatus::end_of_stream; // partial bytes discarded
        if (!impl_->fd.valid()) return RecvStatus::end_of_stream;

        if (blocking) {
            if (cancel && cancel->load(std::memory_order_relaxed)) return RecvStatus::empty;
            if (deadline && std::chrono::steady_clock::now() >= *deadline)
                return RecvStatus::empty;
            if (!wait_readable(impl_->fd, std::chrono::milliseconds(50))) continue;
        } else {
            if (!wait_readable(impl_->fd, std::chrono::milliseconds(0))) return RecvStatus::empty;
        }

        std::uint8_t chunk[64 * 1024];
        ssize_t n = ::recv(impl_->fd.get(), chunk, sizeof(chunk), MSG_DONTWAIT);
        if (n > 0) {
            impl_->rxbuf.insert(impl_->rxbuf.end(), chunk, chunk + n);
        } else if (n == 0) {
            impl_->eof = true;
        } else if (errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR) {
            throw TransportError(std::string("recv: ") + std::strerror(errno));
        }
    }
}

RecvStatus ReliableConn::recv(Message& out, std::optional<std::chrono::milliseconds> timeout,
                              const std::atomic<bool>* cancel) {
    return recv_internal(out, true, timeout, cancel);
}

RecvStatus ReliableConn::try_recv(Message& out) {
    return recv_internal(out, false, std::nullopt, nullptr);
}

void ReliableConn::close() {
    if (!impl_) return;
    if (impl_->scheduler) impl_->scheduler.reset(); // flush pending delayed frames
    impl_->fd.shutdown_both();
    impl_->fd.reset();
}

ReliableListener::ReliableListener(std::uint16_t port) : fd_(tcp_listen(port)) {
    port_ = bound_port(fd_);
}

std::optional<ReliableConn> ReliableListener::accept(
    std::optional<std::chrono::milliseconds> timeout) {
    auto fd = tcp_accept(fd_, std::chrono::milliseconds(50), stopped_, timeout);
    if (!fd) return std::nullopt;
    return ReliableConn(std::move(*fd));
}

void ReliableListener::stop() {
    stopped_.store(true, std::memory_order_relaxed);
    fd_.shutdown_both();
}

} // namespace flexpipe::transport
