#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "flexpipe/channel.hpp"
#include "flexpipe/errors.hpp"
#include "flexpipe/message.hpp"
#include "flexpipe/transport/datagram.hpp"
#include "flexpipe/transport/reliable.hpp"

namespace flexpipe {

enum class PortSemantics { blocking, non_blocking };
enum class PortDirection { input, output };

std::string to_string(PortSemantics s);
std::string to_string(PortDirection d);

// Connection state of a port: unactivated until the recipe assigns one of the
// three channel kinds.
struct Unactivated {
    bool operator==(const Unactivated&) const = default;
};
struct LocalConn {
    std::size_t queue_capacity = 1;
    bool operator==(const LocalConn&) const = default;
};
struct RemoteReliableConn {
    std::string host; // listen side leaves this empty
    std::uint16_t port = 0;
    bool operator==(const RemoteReliableConn&) const = default;
};
struct RemoteDatagramConn {
    std::string host;
    std::uint16_t port = 0;
    bool operator==(const RemoteDatagramConn&) const = default;
};
using ConnectionState =
    std::variant<Unactivated, LocalConn, RemoteReliableConn, RemoteDatagramConn>;

bool is_unactivated(const ConnectionState& s);
std::string to_string(const ConnectionState& s);

struct ActivateOptions {
    int connect_attempts = 20;
    std::chrono::milliseconds connect_backoff{250};
    std::size_t remote_input_queue = 1;  // hand-off capacity behind remote receivers
    std::size_t remote_output_queue = 8; // hand-off capacity in front of reliable senders
    transport::DatagramConfig datagram{};
};

struct PortStats {
    std::uint64_t sent = 0;      // emission attempts
    std::uint64_t delivered = 0; // accepted by the channel
    std::uint64_t dropped = 0;   // rejected: full queue under non-blocking send
    std::uint64_t received = 0;  // messages consumed
    double age_sum_ms = 0.0;     // consumed age, now - ts_origin
};

// Stage label stamped by remote receivers when a message arrives off the wire.
inline constexpr const char* kTransportStage = "transport";

// A port is a state machine over the underlying channel: a bounded local
// queue, a reliable stream endpoint, or a datagram endpoint, all behind one
// interface. Outputs carry a branch list; sending on the registered port also
// emits on every branch, each with its own semantics and connection state.
class FlexPort {
public:
    using ErrorCallback = std::function<void(const std::string& port, const std::string& cause)>;

    FlexPort(std::string tag, PortDirection direction,
             std::optional<PortSemantics> semantics = std::nullopt);
    ~FlexPort();
    FlexPort(const FlexPort&) = delete;
    FlexPort& operator=(const FlexPort&) = delete;

    const std::string& tag() const { return tag_; }
    PortDirection direction() const { return direction_; }
    PortSemantics semantics() const;
    const ConnectionState& state() const { return state_; }
    bool activated() const { return !is_unactivated(state_); }
    bool marked_unconnected() const { return unconnected_; }

    // Creates the underlying channel for the given state. Output ports take
    // their semantics here; input ports keep the semantics fixed at
    // registration. Local activation creates a self-owned queue; the deployer
    // uses attach_local to share one channel between two ports.
    void activate(const ConnectionState& state, std::optional<PortSemantics> semantics,
                  const ActivateOptions& opts = {});
    void attach_local(std::shared_ptr<LocalChannel> channel,
                      std::optional<PortSemantics> semantics);
    // Optional non-blocking inputs may stay unconnected; reads return absent.
    void mark_unconnected();

    FlexPort& add_branch(const std::string& name, const ConnectionState& state,
                         PortSemantics semantics, const ActivateOptions& opts = {});
    FlexPort& add_local_branch(const std::string& name, std::shared_ptr<LocalChannel> channel,
                               PortSemantics semantics);
    FlexPort* find_branch(const std::string& name);
    const std::vector<std::unique_ptr<FlexPort>>& branches() const { return branches_; }

    // Emits on this port and every branch, each according to its own
    // semantics and connection state.
    void emit(Message msg);

    struct InputResult {
        std::optional<Message> message;
        bool end_of_stream = false;
        explicit operator bool() const { return message.has_value(); }
    };

    InputResult poll();
    // Waits for a message; a timeout is a deadlock guard and throws.
    InputResult wait(std::optional<std::chrono::milliseconds> timeout = std::nullopt);

    void close();

    // --- introspection -----------------------------------------------------
    std::shared_ptr<LocalChannel> local_channel() const { return local_; }
    PortStats stats() const;
    std::optional<std::uint16_t> listen_port() const;
    bool ready() const;  // reliable connector established (true for other kinds)
    bool failed() const { return failed_.load(std::memory_order_relaxed); }
    std::optional<transport::DatagramStats> datagram_stats() const;
    void set_network_conditions(const transport::NetworkConditions& cond);
    void set_error_callback(ErrorCallback cb) { on_error_ = std::move(cb); }

    std::uint64_t issue_placeholder_seq() { return next_seq_++; }
    void stamp_for_emit(Message& msg);

private:
    void require_output(const char* op) const;
    void require_input(const char* op) const;
    void emit_one(Message msg);
    void start_reliable_output(const RemoteReliableConn& conn, const ActivateOptions& opts);
    void start_reliable_input(const RemoteReliableConn& conn, const ActivateOptions& opts);
    void start_datagram_output(const RemoteDatagramConn& conn, const ActivateOptions& opts);
    void start_datagram_input(const RemoteDatagramConn& conn, const ActivateOptions& opts);
    void record_consumed(const Message& msg);
    void report_error(const std::string& cause);

    std::string tag_;
    PortDirection direction_;
    std::optional<PortSemantics> semantics_;
    ConnectionState state_{Unactivated{}};
    bool unconnected_ = false;

    // Exactly one of these backs an activated port.
    std::shared_ptr<LocalChannel> local_;
    std::shared_ptr<LocalChannel> handoff_; // remote ports stage through here
    std::unique_ptr<transport::DatagramEndpoint> datagram_;
    std::unique_ptr<transport::ReliableListener> listener_;
    std::shared_ptr<transport::ReliableConn> conn_; // reliable output, set by worker
    std::thread worker_;
    std::atomic<bool> worker_stop_{false};
    std::atomic<bool> connected_{false};
    std::atomic<bool> failed_{false};
    bool closed_ = false;
    mutable std::mutex conn_mutex_;
    std::optional<transport::NetworkConditions> pending_conditions_;

    std::vector<std::unique_ptr<FlexPort>> branches_;
    ErrorCallback on_error_;

    std::uint64_t next_seq_ = 0;
    std::uint64_t emit_floor_ = 0;

    mutable std::mutex stats_mutex_;
    PortStats stats_;
};

using InputResult = FlexPort::InputResult;

} // namespace flexpipe
