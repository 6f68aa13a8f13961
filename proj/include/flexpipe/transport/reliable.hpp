#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <random>

#include "flexpipe/message.hpp"
#include "flexpipe/transport/netem.hpp"
#include "flexpipe/transport/socket.hpp"
#include "flexpipe/transport/wire.hpp"

namespace flexpipe::transport {

enum class RecvStatus { message, empty, end_of_stream };

// Length-framed stream session over TCP. Messages are delivered complete, in
// order, exactly once. One thread may send and one may receive concurrently.
class ReliableConn {
public:
    explicit ReliableConn(Fd fd);
    ~ReliableConn();
    ReliableConn(ReliableConn&&) = default;
    ReliableConn& operator=(ReliableConn&&) = default;

    static ReliableConn connect(const std::string& host, std::uint16_t port);
    // Retries `attempts` times spaced by `backoff`; throws on exhaustion,
    // returns nullopt only when cancelled.
    static std::optional<ReliableConn> connect_retry(const std::string& host, std::uint16_t port,
                                                     int attempts,
                                                     std::chrono::milliseconds backoff,
                                                     const std::atomic<bool>* cancel = nullptr);

    // Rejects payloads over the 64 MiB cap before sending.
    void send(const Message& msg);
    void send_eos();

    RecvStatus recv(Message& out, std::optional<std::chrono::milliseconds> timeout = std::nullopt,
                    const std::atomic<bool>* cancel = nullptr);
    RecvStatus try_recv(Message& out);

    // Delay/jitter only; loss on a reliable stream is rejected.
    void set_network_conditions(const NetworkConditions& cond);

    void close();
    bool open() const { return impl_ && impl_->fd.valid(); }

private:
    struct Impl {
        Fd fd;
        // receive state
        Bytes rxbuf;
        bool eof = false;
        bool eos = false;
        // shim
        std::unique_ptr<FrameScheduler> scheduler;
        std::optional<NetworkConditions> conditions;
        std::mt19937_64 rng;
        std::mutex send_mutex;
    };

    void send_bytes(Bytes frame);
    RecvStatus recv_internal(Message& out, bool blocking,
                             std::optional<std::chrono::milliseconds> timeout,
                             const std::atomic<bool>* cancel);
    bool extract_frame(Message& out, RecvStatus& status);

    std::unique_ptr<Impl> impl_;
};

// Accepts reliable sessions on a port; port 0 binds an ephemeral port.
class ReliableListener {
public:
    explicit ReliableListener(std::uint16_t port);

    std::uint16_t port() const { return port_; }
    // nullopt on timeout or after stop().
    std::optional<ReliableConn> accept(std::optional<std::chrono::milliseconds> timeout = std::nullopt);
    void stop();

private:
    Fd fd_;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopped_{false};
};

} // namespace flexpipe::transport
