#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace flexpipe {

// Root of the library's error hierarchy.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Misuse of the API or invalid configuration: duplicate tags, unknown ports,
// bad parameter values, recipe violations. These are caller bugs or bad input,
// not environment failures.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

// Socket and OS-level failures: bind/connect errors, broken sessions.
class TransportError : public Error {
public:
    explicit TransportError(const std::string& what) : Error(what) {}
};

// Malformed wire bytes. Carries the byte offset where decoding failed.
class DecodeError : public Error {
public:
    DecodeError(const std::string& what, std::size_t offset)
        : Error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

} // namespace flexpipe
