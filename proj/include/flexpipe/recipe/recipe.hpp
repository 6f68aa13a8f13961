#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flexpipe/registry.hpp"

namespace flexpipe::recipe {

enum class Protocol { tcp, rtp };
enum class ConnType { local, remote };

std::string to_string(Protocol p);
std::string to_string(ConnType c);

// One input activation in a kernel entry. Remote inputs carry
// remote_info: [protocol, listen_port]; local inputs are wired through
// local_connections.
struct RecipeInput {
    std::string port_name;
    ConnType connection_type = ConnType::local;
    std::optional<Protocol> protocol;
    std::optional<std::uint16_t> listen_port;
    std::optional<std::size_t> queue_size; // hand-off capacity behind a remote receiver

    bool operator==(const RecipeInput&) const = default;
};

// One output activation. Remote outputs carry remote_info: [host, port,
// protocol]; local outputs may set send semantics (default blocking).
// branched_from attaches this port as a branch of an earlier output.
struct RecipeOutput {
    std::string port_name;
    ConnType connection_type = ConnType::local;
    std::optional<PortSemantics> semantics; // local outputs only
    std::optional<std::string> remote_host;
    std::optional<std::uint16_t> remote_port;
    std::optional<Protocol> protocol;
    std::optional<std::string> branched_from;

    bool operator==(const RecipeOutput&) const = default;
};

struct RecipeKernel {
    std::string kernel_type; // "kernel" key
    std::string id;
    std::optional<double> frequency;
    KernelParams params;
    std::vector<RecipeInput> input;
    std::vector<RecipeOutput> output;

    bool operator==(const RecipeKernel&) const = default;
};

struct LocalConnection {
    std::string send_kernel;
    std::string send_port_name; // registered output or branch name
    std::string recv_kernel;
    std::string recv_port_name;
    std::optional<std::size_t> queue_size; // default 8

    bool operator==(const LocalConnection&) const = default;
};

struct PipelineRecipe {
    std::vector<RecipeKernel> kernels;
    std::vector<LocalConnection> local_connections;
    std::map<std::string, std::string> placements; // instance id -> host label

    bool operator==(const PipelineRecipe&) const = default;
};

inline constexpr const char* kLocalHost = "local";
inline constexpr std::size_t kDefaultQueueSize = 8;
inline constexpr std::size_t kDefaultDatagramInputQueue = 1;
inline constexpr std::size_t kDefaultReliableInputQueue = 8;

// Parses a YAML recipe in strict mode: unknown keys are rejected with their
// line numbers, schema violations name the offending path.
PipelineRecipe parse_recipe(const std::string& text);

// Canonical emitter; parse_recipe(emit_recipe(r)) == r.
std::string emit_recipe(const PipelineRecipe& r);

// --- validated metadata -------------------------------------------------------

enum class ConnKind { unconnected, local, remote_reliable, remote_datagram };

struct PortPlan {
    std::string tag; // registered tag, or branch name for branches
    ConnKind kind = ConnKind::unconnected;
    PortSemantics semantics = PortSemantics::blocking;
    std::size_t queue_capacity = kDefaultQueueSize;
    std::string host;        // remote outputs
    std::uint16_t port = 0;  // listen port (inputs) or peer port (outputs)
    Protocol protocol = Protocol::tcp;
    std::optional<std::string> branched_from;
    int local_edge = -1; // index into PipelineMetadata::local_edges
};

struct KernelPlan {
    std::string kernel_type;
    std::string id;
    std::optional<double> frequency;
    KernelParams params;
    std::string host = kLocalHost;
    std::vector<PortPlan> inputs;
    std::vector<PortPlan> outputs; // registered outputs first, then branches
};

struct LocalEdge {
    std::string send_kernel;
    std::string send_port; // output tag or branch name
    std::string recv_kernel;
    std::string recv_port;
    std::size_t capacity = kDefaultQueueSize;
};

struct RemoteEdge {
    std::string send_kernel; // empty when the sender is external
    std::string send_port;
    std::string recv_kernel; // empty when the receiver is external
    std::string recv_port;
    Protocol protocol = Protocol::tcp;
    std::uint16_t port = 0;
};

struct PipelineMetadata {
    std::vector<KernelPlan> kernels;
    std::vector<LocalEdge> local_edges;
    std::vector<RemoteEdge> remote_edges;

    const KernelPlan* find(const std::string& id) const;
};

struct Violation {
    std::string path;    // e.g. kernels[0].output[1].remote_info
    std::string message;

    std::string str() const { return path + ": " + message; }
};

// Validation failure carrying the complete list of violations.
class RecipeInvalid : public ConfigError {
public:
    explicit RecipeInvalid(std::vector<Violation> violations);
    const std::vector<Violation>& violations() const { return violations_; }

private:
    std::vector<Violation> violations_;
};

// Cross-checks the recipe against each kernel type's registered descriptor:
// receive semantics come from the descriptor, connectivity and send semantics
// from the recipe. Throws RecipeInvalid with every violation found.
PipelineMetadata validate(const PipelineRecipe& r, const KernelRegistry& registry);

// Splits a validated recipe by placements into per-host parts. Every
// cross-host edge must already be remote; the union of parts reconstructs the
// original connectivity.
std::map<std::string, PipelineRecipe> split_recipe(const PipelineRecipe& r);

} // namespace flexpipe::recipe
