#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <random>

#include "flexpipe/message.hpp"
#include "flexpipe/transport/netem.hpp"
#include "flexpipe/transport/reliable.hpp" // RecvStatus
#include "flexpipe/transport/socket.hpp"
#include "flexpipe/transport/wire.hpp"

namespace flexpipe::transport {

struct DatagramConfig {
    std::size_t mtu_payload = 1200;     // payload bytes per fragment
    std::size_t reassembly_window = 4;  // in-flight partially assembled messages

    void validate() const; // mtu within [512, 65000], window >= 1
};

struct DatagramStats {
    std::uint64_t msgs_sent = 0;
    std::uint64_t frames_sent = 0;
    std::uint64_t frames_dropped_injected = 0;
    std::uint64_t frames_dropped_local = 0; // socket-buffer pressure
    std::uint64_t frames_received = 0;
    std::uint64_t frames_malformed = 0;
    std::uint64_t msgs_delivered = 0;
    std::uint64_t partials_evicted = 0;
};

// Connectionless endpoint favouring timeliness over reliability: payloads are
// fragmented at mtu_payload, never retransmitted, never acknowledged. Sends do
// not suspend the caller beyond the socket-buffer write. Messages reassemble
// in completion order; anything with a lost fragment is never delivered.
class DatagramEndpoint {
public:
    DatagramEndpoint(std::uint16_t local_port, const std::string& peer_host = "",
                     std::uint16_t peer_port = 0, DatagramConfig cfg = {});
    ~DatagramEndpoint();

    std::uint16_t port() const { return port_; }
    const DatagramConfig& config() const { return cfg_; }

    void send(const Message& msg);
    void send_eos();

    RecvStatus recv(Message& out, std::optional<std::chrono::milliseconds> timeout = std::nullopt,
                    const std::atomic<bool>* cancel = nullptr);
    RecvStatus try_recv(Message& out);

    void set_network_conditions(const NetworkConditions& cond);

    DatagramStats stats() const;

    // Wakes a blocked recv.
    void stop();

private:
    void transmit(Bytes&& frame);
    void emit_frame(Bytes frame);
    RecvStatus recv_internal(Message& out, std::optional<std::chrono::milliseconds> timeout,
                             const std::atomic<bool>* cancel, bool blocking);

    Fd fd_;
    std::uint16_t port_ = 0;
    bool has_peer_ = false;
    DatagramConfig cfg_;
    Reassembler reassembler_;
    std::atomic<bool> stopped_{false};
    bool eos_seen_ = false;

    std::optional<NetworkConditions> conditions_;
    std::mt19937_64 rng_;
    std::unique_ptr<FrameScheduler> scheduler_;
    std::mutex send_mutex_;

    mutable std::mutex stats_mutex_;
    DatagramStats stats_;
};

} // namespace flexpipe::transport
