#include "flexpipe/transport/socket.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "flexpipe/errors.hpp"

namespace flexpipe::transport {

namespace {

[[noreturn]] void fail(const std::string& what) {
    throw TransportError(what + ": " + std::strerror(errno));
}

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (host.empty() || host == "*" || host == "0.0.0.0") {
        addr.sin_addr.s_addr = htonl(INADDR_ANY);
        return addr;
    }
    if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;
    addrinfo hints{};
    hints.ai_family = AF_INET;
    addrinfo* res = nullptr;
    if (getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr)
        throw TransportError("cannot resolve host: " + host);
    addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    freeaddrinfo(res);
    return addr;
}

} // namespace

Fd& Fd::operator=(Fd&& other) noexcept {
    if (this != &other) {
        reset();
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

void Fd::reset() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

void Fd::shutdown_both() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

Fd tcp_listen(std::uint16_t port, int backlog) {
    Fd fd(::socket(AF_INET, SOCK_STREAM, 0));
    if (!fd.valid()) fail("socket");
    int one = 1;
    ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr = resolve("", port);
    if (::bind(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
        fail("bind tcp :" + std::to_string(port));
    if (::listen(fd.get(), backlog) != 0) fail("listen");
    return fd;
}

Fd tcp_connect(const std::string& host, std::uint16_t port) {
    Fd fd(::socket(AF_INET, SOCK_STREAM, 0));
    if (!fd.valid()) fail("socket");
    sockaddr_in addr = resolve(host, port);
    if (::connect(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
        fail("connect " + host + ":" + std::to_string(port));
    int one = 1;
    ::setsockopt(fd.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return fd;
}

std::optional<Fd> tcp_accept(const Fd& listener, std::chrono::milliseconds poll_interval,
                             const std::atomic<bool>& cancel,
                             std::optional<std::chrono::milliseconds> timeout) {
    const auto deadline = timeout ? std::optional(std::chrono::steady_clock::now() + *timeout)
                                  : std::nullopt;
    while (!cancel.load(std::memory_order_relaxed)) {
        if (deadline && std::chrono::steady_clock::now() >= *deadline) return std::nullopt;
        pollfd pfd{listener.get(), POLLIN, 0};
        int rc = ::poll(&pfd, 1, static_cast<int>(poll_interval.count()));
        if (rc < 0) {
            if (errno == EINTR) continue;
            fail("poll accept");
        }
        if (rc == 0) continue;
        int client = ::accept(listener.get(), nullptr, nullptr);
        if (client < 0) {
            if (errno == EINTR || errno == EAGAIN) continue;
            fail("accept");
        }
        Fd out(client);
        int one = 1;
        ::setsockopt(out.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
        return out;
    }
    return std::nullopt;
}

Fd udp_bind(std::uint16_t port) {
    Fd fd(::socket(AF_INET, SOCK_DGRAM, 0));
    if (!fd.valid()) fail("socket");
    sockaddr_in addr = resolve("", port);
    if (::bind(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
        fail("bind udp :" + std::to_string(port));
    return fd;
}

Fd udp_socket() {
    Fd fd(::socket(AF_INET, SOCK_DGRAM, 0));
    if (!fd.valid()) fail("socket");
    return fd;
}

void udp_set_peer(Fd& fd, const std::string& host, std::uint16_t port) {
    sockaddr_in addr = resolve(host, port);
    if (::connect(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
        fail("udp peer " + host + ":" + std::to_string(port));
}

std::uint16_t bound_port(const Fd& fd) {
    sockaddr_in addr{};
    socklen_t len = sizeof(addr);
    if (::getsockname(fd.get(), reinterpret_cast<sockaddr*>(&addr), &len) != 0)
        fail("getsockname");
    return ntohs(addr.sin_port);
}

void set_buffer_sizes(const Fd& fd, int bytes) {
#ifdef SO_RCVBUFFORCE
    if (::setsockopt(fd.get(), SOL_SOCKET, SO_RCVBUFFORCE, &bytes, sizeof(bytes)) != 0)
#endif
        ::setsockopt(fd.get(), SOL_SOCKET, SO_RCVBUF, &bytes, sizeof(bytes));
#ifdef SO_SNDBUFFORCE
    if (::setsockopt(fd.get(), SOL_SOCKET, SO_SNDBUFFORCE, &bytes, sizeof(bytes)) != 0)
#endif
        ::setsockopt(fd.get(), SOL_SOCKET, SO_SNDBUF, &bytes, sizeof(bytes));
}

bool write_all(const Fd& fd, const std::uint8_t* data, std::size_t len,
               const std::atomic<bool>* cancel) {
    std::size_t off = 0;
    while (off < len) {
        if (cancel && cancel->load(std::memory_order_relaxed)) return false;
        ssize_t n = ::send(fd.get(), data + off, len - off, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            fail("send");
        }
        off += static_cast<std::size_t>(n);
    }
    return true;
}

IoStatus read_exact(const Fd& fd, std::uint8_t* data, std::size_t len,
                    const std::atomic<bool>* cancel,
                    std::optional<std::chrono::milliseconds> timeout) {
    const auto deadline = timeout ? std::optional(std::chrono::steady_clock::now() + *timeout)
                                  : std::nullopt;
    std::size_t off = 0;
    while (off < len) {
        if (cancel && cancel->load(std::memory_order_relaxed)) return IoStatus::cancelled;
        if (deadline && std::chrono::steady_clock::now() >= *deadline)
            return IoStatus::timed_out;
        pollfd pfd{fd.get(), POLLIN, 0};
        int rc = ::poll(&pfd, 1, 100);
        if (rc < 0) {
            if (errno == EINTR) continue;
            fail("poll read");
        }
        if (rc == 0) continue;
        ssize_t n = ::recv(fd.get(), data + off, len - off, 0);
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN) continue;
            fail("recv");
        }
        if (n == 0) return IoStatus::eof;
        off += static_cast<std::size_t>(n);
    }
    return IoStatus::ok;
}

bool wait_readable(const Fd& fd, std::chrono::milliseconds timeout) {
    pollfd pfd{fd.get(), POLLIN, 0};
    int rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    return rc > 0 && (pfd.revents & POLLIN);
}

} // namespace flexpipe::transport
