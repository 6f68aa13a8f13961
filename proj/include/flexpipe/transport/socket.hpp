#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>

namespace flexpipe::transport {

// Owning file-descriptor handle.
class Fd {
public:
    Fd() = default;
    explicit Fd(int fd) : fd_(fd) {}
    ~Fd() { reset(); }
    Fd(Fd&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
    Fd& operator=(Fd&& other) noexcept;
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;

    int get() const { return fd_; }
    bool valid() const { return fd_ >= 0; }
    void reset();
    // Wakes peers blocked on this socket.
    void shutdown_both();

private:
    int fd_ = -1;
};

struct Endpoint {
    std::string host;
    std::uint16_t port = 0;
};

// All helpers throw TransportError with the OS cause on failure.

Fd tcp_listen(std::uint16_t port, int backlog = 8);
Fd tcp_connect(const std::string& host, std::uint16_t port);
// nullopt on timeout or when `cancel` is set.
std::optional<Fd> tcp_accept(const Fd& listener, std::chrono::milliseconds poll_interval,
                             const std::atomic<bool>& cancel,
                             std::optional<std::chrono::milliseconds> timeout = std::nullopt);

Fd udp_bind(std::uint16_t port);
Fd udp_socket();
void udp_set_peer(Fd& fd, const std::string& host, std::uint16_t port);

std::uint16_t bound_port(const Fd& fd);

// Grows kernel socket buffers (uses the *BUFFORCE options when privileged).
void set_buffer_sizes(const Fd& fd, int bytes);

// Blocking write of the whole buffer; returns false when cancelled.
bool write_all(const Fd& fd, const std::uint8_t* data, std::size_t len,
               const std::atomic<bool>* cancel = nullptr);

enum class IoStatus { ok, eof, timed_out, cancelled };

// Reads exactly len bytes, polling so `cancel` is honoured.
IoStatus read_exact(const Fd& fd, std::uint8_t* data, std::size_t len,
                    const std::atomic<bool>* cancel,
                    std::optional<std::chrono::milliseconds> timeout = std::nullopt);

// True when the descriptor is readable within the timeout.
bool wait_readable(const Fd& fd, std::chrono::milliseconds timeout);

} // namespace flexpipe::transport
